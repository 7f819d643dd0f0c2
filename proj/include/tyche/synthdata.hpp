#pragma once

#include <utility>

#include "tyche/types.hpp"

namespace tyche {

// Parameters of the multi-rater blob generator. Each rater is a deformed
// disk; the image is a noisy weighted sum of the deformed disks.
struct BlobSpec {
    int h = 32, w = 32;
    int n_raters = 4;
    double radius_lo = 0.15, radius_hi = 0.30;  // fraction of image side
    double center_jitter = 0.10;                // fraction of image side
    double deform_scale = 2.0;                  // displacement std, pixels
    double deform_smoothness = 2.0;             // smoothing kernel std, pixels
    std::vector<double> rater_weights;          // empty = uniform
    double pixel_noise_std = 0.05;
    uint64_t seed = 0;
    int size_divisor = 4;                       // 2^(depth-1) of the downstream model

    void validate() const;
};

// Scales the 128-px default deformation parameters to the requested size.
BlobSpec default_blob_spec(int side, uint64_t seed);

std::pair<GrayImage, RaterSet> generate_blob_example(const BlobSpec& spec);

// Parameter record of one single-annotator shape task, exposed so tests can
// compare task identities.
struct ShapeTaskParams {
    int shape_class = 0;  // 0 disk, 1 square, 2 ring
    double fg = 1.0, bg = 0.0;
    double base_radius = 0.25;  // fraction of side
    double noise_std = 0.02;

    bool operator==(const ShapeTaskParams& o) const {
        return shape_class == o.shape_class && fg == o.fg && bg == o.bg &&
               base_radius == o.base_radius && noise_std == o.noise_std;
    }
};

// Family of images sharing one task definition, each with a single mask.
std::vector<std::pair<GrayImage, LabelMask>> generate_shape_task(
    uint64_t task_seed, int n_examples, int h, int w, ShapeTaskParams* params_out = nullptr);

// Uniformly samples a target (keeping its full rater set) and context_size
// distinct non-target examples. Multi-rater context examples contribute one
// uniformly drawn rater mask each.
Episode sample_episode(const Dataset& pool, int context_size, uint64_t rng_seed);

// As above but with target fixed and context drawn from a separate pool.
// context_pool entries equal to target_id are excluded.
Episode make_episode(const Dataset& target_pool, size_t target_index,
                     const Dataset& context_pool, int context_size, uint64_t rng_seed);

// Deterministic disjoint exhaustive partition. Throws if any split is empty.
SplitIndices split_dataset(size_t pool_size, double f_dev, double f_val, double f_test,
                           uint64_t seed);

Dataset make_blob_dataset(const BlobSpec& spec, int n_examples, uint64_t global_seed);

// On-disk dataset format: meta.json + per-example PNGs.
void save_dataset(const std::string& dir, const Dataset& ds, const SplitIndices& splits,
                  const std::string& spec_json);
Dataset load_dataset(const std::string& dir, SplitIndices* splits_out = nullptr);

// Shared warp helper: x warped by a smoothed Gaussian displacement field with
// std `scale` pixels and smoothing std `smoothness` pixels; bilinear sampling
// with clamped borders.
GrayImage random_smooth_warp(const GrayImage& x, double scale, double smoothness, uint64_t seed);

// Applies the same displacement field to an image (bilinear) and optionally a
// mask (nearest). Used by both the blob generator and elastic augmentation.
struct DisplacementField {
    int h = 0, w = 0;
    std::vector<double> dy, dx;
};
DisplacementField random_displacement_field(int h, int w, double scale, double smoothness,
                                            uint64_t seed);
GrayImage warp_bilinear(const GrayImage& x, const DisplacementField& f);
LabelMask warp_nearest(const LabelMask& m, const DisplacementField& f);

}  // namespace tyche
