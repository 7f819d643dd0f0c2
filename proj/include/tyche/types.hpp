#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tyche {

// H x W grayscale image, intensities in [0,1].
struct GrayImage {
    int h = 0, w = 0;
    std::vector<double> v;

    GrayImage() = default;
    GrayImage(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0.0) {}

    double& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    size_t size() const { return v.size(); }

    void validate() const {
        for (double x : v) {
            if (!(x >= 0.0 && x <= 1.0)) throw std::runtime_error("GrayImage: value out of [0,1]");
        }
    }
};

// H x W binary mask.
struct LabelMask {
    int h = 0, w = 0;
    std::vector<uint8_t> v;

    LabelMask() = default;
    LabelMask(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0) {}

    uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    size_t size() const { return v.size(); }

    size_t count() const {
        size_t n = 0;
        for (uint8_t x : v) n += x;
        return n;
    }

    bool operator==(const LabelMask& o) const { return h == o.h && w == o.w && v == o.v; }
};

// Ordered annotations from R raters for one image.
struct RaterSet {
    std::vector<LabelMask> masks;

    size_t size() const { return masks.size(); }
    const LabelMask& operator[](size_t i) const { return masks[i]; }
    LabelMask& operator[](size_t i) { return masks[i]; }
};

struct ContextPair {
    GrayImage image;
    LabelMask mask;
};

// One training/evaluation unit: target image, its rater annotations, and the
// context set defining the task.
struct Episode {
    GrayImage target;
    RaterSet raters;
    std::vector<ContextPair> context;
    std::string task_id;
    uint64_t seed = 0;
};

// One dataset entry: an image plus all of its rater masks.
struct Example {
    std::string id;
    GrayImage image;
    RaterSet raters;
};

struct Dataset {
    std::string task_id;
    std::vector<Example> examples;

    size_t size() const { return examples.size(); }
};

// Index-based dataset split.
struct SplitIndices {
    std::vector<size_t> dev, val, test;
};

// K per-pixel probability maps for one target.
struct CandidateBatch {
    std::vector<GrayImage> maps;

    size_t size() const { return maps.size(); }
    const GrayImage& operator[](size_t i) const { return maps[i]; }
    GrayImage& operator[](size_t i) { return maps[i]; }
};

inline LabelMask binarize(const GrayImage& p, double threshold = 0.5) {
    LabelMask m(p.h, p.w);
    for (size_t i = 0; i < p.v.size(); ++i) m.v[i] = p.v[i] >= threshold ? 1 : 0;
    return m;
}

}  // namespace tyche
