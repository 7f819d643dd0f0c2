#include "tyche/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tyche/rng.hpp"
#include "tyche/synthdata.hpp"

namespace tyche {

namespace {

struct KindName {
    TransformKind kind;
    const char* name;
    bool intensity;
};

constexpr KindName kKinds[] = {
    {TransformKind::GaussianNoise, "gaussian_noise", true},
    {TransformKind::GaussianBlur, "gaussian_blur", true},
    {TransformKind::FlipIntensities, "flip_intensities", true},
    {TransformKind::Sharpness, "sharpness", true},
    {TransformKind::BrightnessContrast, "brightness_contrast", true},
    {TransformKind::RandomAffine, "random_affine", false},
    {TransformKind::Elastic, "elastic", false},
    {TransformKind::HorizontalFlip, "horizontal_flip", false},
    {TransformKind::VerticalFlip, "vertical_flip", false},
    {TransformKind::SobelEdgesLabel, "sobel_edges_label", false},
};

TransformSpec make(TransformKind kind, double p,
                   std::map<std::string, std::pair<double, double>> ranges = {}) {
    return TransformSpec{kind, p, std::move(ranges)};
}

GrayImage blur(const GrayImage& img, double sigma, int ksize) {
    const int radius = ksize / 2;
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& x : k) x /= sum;

    GrayImage tmp(img.h, img.w), out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d)
                acc += k[d + radius] * img.at(y, std::clamp(x + d, 0, img.w - 1));
            tmp.at(y, x) = acc;
        }
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d)
                acc += k[d + radius] * tmp.at(std::clamp(y + d, 0, img.h - 1), x);
            out.at(y, x) = acc;
        }
    return out;
}

void clamp01(GrayImage& img) {
    for (double& v : img.v) v = std::clamp(v, 0.0, 1.0);
}

double sample_bilinear(const GrayImage& x, double fy, double fx) {
    fy = std::clamp(fy, 0.0, static_cast<double>(x.h - 1));
    fx = std::clamp(fx, 0.0, static_cast<double>(x.w - 1));
    const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
    const int y1 = std::min(y0 + 1, x.h - 1), x1 = std::min(x0 + 1, x.w - 1);
    const double wy = fy - y0, wx = fx - x0;
    return (1 - wy) * ((1 - wx) * x.at(y0, x0) + wx * x.at(y0, x1)) +
           wy * ((1 - wx) * x.at(y1, x0) + wx * x.at(y1, x1));
}

// Inverse-mapped affine about the image center.
void affine_warp(GrayImage& img, LabelMask* mask, double degrees, double ty, double tx,
                 double scale) {
    const double th = degrees * 3.14159265358979323846 / 180.0;
    const double c = std::cos(th), s = std::sin(th);
    const double cy = (img.h - 1) / 2.0, cx = (img.w - 1) / 2.0;
    GrayImage out(img.h, img.w);
    LabelMask mout(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const double py = y - cy - ty, px = x - cx - tx;
            const double sy = (c * py + s * px) / scale + cy;
            const double sx = (-s * py + c * px) / scale + cx;
            out.at(y, x) = sample_bilinear(img, sy, sx);
            if (mask) {
                const int iy = std::clamp(static_cast<int>(std::lround(sy)), 0, img.h - 1);
                const int ix = std::clamp(static_cast<int>(std::lround(sx)), 0, img.w - 1);
                mout.at(y, x) = mask->at(iy, ix);
            }
        }
    img = std::move(out);
    if (mask) *mask = std::move(mout);
}

LabelMask sobel_edges(const LabelMask& m) {
    LabelMask out(m.h, m.w);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            auto at = [&](int yy, int xx) {
                return static_cast<double>(m.at(std::clamp(yy, 0, m.h - 1), std::clamp(xx, 0, m.w - 1)));
            };
            const double gx = at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1) -
                              at(y - 1, x - 1) - 2 * at(y, x - 1) - at(y + 1, x - 1);
            const double gy = at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1) -
                              at(y - 1, x - 1) - 2 * at(y - 1, x) - at(y - 1, x + 1);
            out.at(y, x) = std::sqrt(gx * gx + gy * gy) >= 1.0 ? 1 : 0;
        }
    return out;
}

}  // namespace

const char* transform_name(TransformKind k) {
    for (const auto& e : kKinds)
        if (e.kind == k) return e.name;
    throw std::logic_error("unknown transform kind");
}

TransformKind transform_from_name(const std::string& name) {
    for (const auto& e : kKinds)
        if (name == e.name) return e.kind;
    throw std::invalid_argument("unknown transform: " + name);
}

bool is_intensity_transform(TransformKind k) {
    for (const auto& e : kKinds)
        if (e.kind == k) return e.intensity;
    throw std::logic_error("unknown transform kind");
}

bool AugmentationSpec::intensity_only() const {
    for (const auto& t : transforms)
        if (!is_intensity_transform(t.kind)) return false;
    return true;
}

void AugmentationSpec::validate() const {
    for (const auto& t : transforms)
        if (t.p < 0.0 || t.p > 1.0)
            throw std::invalid_argument("AugmentationSpec: probability out of [0,1]");
    if ((family == "ictta" || family == "ictta_high") && !intensity_only())
        throw std::invalid_argument("AugmentationSpec: ictta families must be intensity-only");
}

AugmentationSpec augmentation_family(const std::string& tag) {
    AugmentationSpec spec;
    spec.family = tag;
    if (tag == "none") {
        return spec;
    }
    if (tag == "in_task") {
        spec.transforms = {
            make(TransformKind::RandomAffine, 0.25,
                 {{"degrees", {-25, 25}}, {"translate", {0, 0.1}}, {"scale", {0.9, 1.1}}}),
            make(TransformKind::BrightnessContrast, 0.5,
                 {{"brightness", {-0.1, 0.1}}, {"contrast", {0.5, 1.5}}}),
            make(TransformKind::Elastic, 0.8, {{"alpha", {1, 2.5}}, {"sigma", {7, 9}}}),
            make(TransformKind::Sharpness, 0.25, {{"sharpness", {5, 5}}}),
            make(TransformKind::FlipIntensities, 0.5),
            make(TransformKind::GaussianBlur, 0.25, {{"sigma", {0.1, 1.0}}, {"k", {5, 5}}}),
            make(TransformKind::GaussianNoise, 0.25, {{"mu", {0, 0.05}}, {"sigma", {0, 0.05}}}),
        };
        return spec;
    }
    if (tag == "task_level") {
        spec.transforms = {
            make(TransformKind::RandomAffine, 0.5,
                 {{"degrees", {0, 360}}, {"translate", {0, 0.2}}, {"scale", {0.8, 1.1}}}),
            make(TransformKind::BrightnessContrast, 0.5,
                 {{"brightness", {-0.1, 0.1}}, {"contrast", {0.8, 1.2}}}),
            make(TransformKind::GaussianBlur, 0.5, {{"sigma", {0.1, 1.1}}, {"k", {5, 5}}}),
            make(TransformKind::GaussianNoise, 0.5, {{"mu", {0, 0.05}}, {"sigma", {0, 0.05}}}),
            make(TransformKind::Elastic, 0.5, {{"alpha", {1, 2}}, {"sigma", {6, 8}}}),
            make(TransformKind::Sharpness, 0.5, {{"sharpness", {5, 5}}}),
            make(TransformKind::HorizontalFlip, 0.5),
            make(TransformKind::VerticalFlip, 0.5),
            make(TransformKind::SobelEdgesLabel, 0.5),
        };
        return spec;
    }
    if (tag == "ictta") {
        spec.transforms = {
            make(TransformKind::GaussianBlur, 0.25, {{"sigma", {0.1, 1.0}}, {"k", {5, 5}}}),
            make(TransformKind::GaussianNoise, 0.25, {{"mu", {0, 0.05}}, {"sigma", {0, 0.05}}}),
            make(TransformKind::FlipIntensities, 0.5),
            make(TransformKind::Sharpness, 0.25, {{"sharpness", {5, 5}}}),
            make(TransformKind::BrightnessContrast, 0.25,
                 {{"brightness", {-0.1, 0.1}}, {"contrast", {0.5, 1.5}}}),
        };
        return spec;
    }
    if (tag == "ictta_high") {
        spec.transforms = {
            make(TransformKind::GaussianBlur, 0.25, {{"sigma", {0.5, 1.0}}, {"k", {5, 5}}}),
            make(TransformKind::GaussianNoise, 0.5, {{"mu", {0.4, 0.5}}, {"sigma", {0.1, 0.2}}}),
            make(TransformKind::FlipIntensities, 0.5),
            make(TransformKind::Sharpness, 0.25, {{"sharpness", {5, 5}}}),
            make(TransformKind::BrightnessContrast, 0.25,
                 {{"brightness", {-0.1, 0.1}}, {"contrast", {0.5, 1.5}}}),
        };
        return spec;
    }
    if (tag == "light") {
        spec.transforms = {
            make(TransformKind::GaussianBlur, 0.5, {{"sigma", {0.1, 1.5}}, {"k", {7, 7}}}),
            make(TransformKind::GaussianNoise, 0.5, {{"mu", {0, 0.1}}, {"sigma", {0, 0.1}}}),
            make(TransformKind::Elastic, 0.25, {{"alpha", {1, 2}}, {"sigma", {6, 8}}}),
        };
        return spec;
    }
    if (tag == "heavy") {
        spec.transforms = {
            make(TransformKind::GaussianBlur, 0.5, {{"sigma", {0.1, 1.5}}, {"k", {7, 7}}}),
            make(TransformKind::GaussianNoise, 0.25, {{"mu", {0, 0.1}}, {"sigma", {0, 0.1}}}),
            make(TransformKind::Elastic, 0.25, {{"alpha", {1, 2}}, {"sigma", {6, 8}}}),
            make(TransformKind::RandomAffine, 0.5,
                 {{"degrees", {0, 360}}, {"translate", {0, 0.2}}, {"scale", {0.8, 1.1}}}),
            make(TransformKind::BrightnessContrast, 0.5,
                 {{"brightness", {-0.1, 0.1}}, {"contrast", {0.5, 1.5}}}),
            make(TransformKind::HorizontalFlip, 0.5),
            make(TransformKind::VerticalFlip, 0.5),
            make(TransformKind::Sharpness, 0.5, {{"sharpness", {5, 5}}}),
        };
        return spec;
    }
    throw std::invalid_argument("unknown augmentation family: " + tag);
}

SampledTransform sample_transform(const AugmentationSpec& spec, uint64_t seed) {
    spec.validate();
    SampledTransform out;
    out.family = spec.family;
    Rng rng(seed_key(seed, 0xA06ULL));
    for (size_t i = 0; i < spec.transforms.size(); ++i) {
        const TransformSpec& t = spec.transforms[i];
        const bool included = rng.bernoulli(t.p);
        SampledOp op;
        op.kind = t.kind;
        // Draw parameters regardless of inclusion so the stream layout is
        // stable; drop the op afterwards if excluded.
        for (const auto& [name, range] : t.ranges)
            op.params[name] = rng.uniform(range.first, range.second);
        op.field_seed = seed_key(seed, 0xF1E1D, i);
        if (included) out.ops.push_back(std::move(op));
    }
    return out;
}

std::pair<GrayImage, std::optional<LabelMask>> apply(const SampledTransform& t,
                                                     const GrayImage& image,
                                                     const std::optional<LabelMask>& mask) {
    GrayImage img = image;
    std::optional<LabelMask> m = mask;
    const bool ictta_family = t.family == "ictta" || t.family == "ictta_high";

    for (const SampledOp& op : t.ops) {
        if (!is_intensity_transform(op.kind)) {
            if (ictta_family)
                throw std::logic_error("ictta pipelines are intensity-only; cannot warp masks");
            if (!m.has_value())
                throw std::invalid_argument(std::string("geometric transform ") + transform_name(op.kind) +
                                            " requires a mask");
        }
        switch (op.kind) {
            case TransformKind::GaussianNoise: {
                Rng rng(seed_key(op.field_seed, 0x9A55));
                const double mu = op.params.at("mu"), sigma = op.params.at("sigma");
                for (double& v : img.v) v += rng.gaussian(mu, sigma);
                clamp01(img);
                break;
            }
            case TransformKind::GaussianBlur:
                img = blur(img, op.params.at("sigma"), static_cast<int>(op.params.at("k")));
                clamp01(img);
                break;
            case TransformKind::FlipIntensities:
                for (double& v : img.v) v = 1.0 - v;
                break;
            case TransformKind::Sharpness: {
                // Unsharp masking with amount = sharpness - 1.
                const double amount = op.params.at("sharpness") - 1.0;
                const GrayImage smooth = blur(img, 1.0, 3);
                for (size_t i = 0; i < img.size(); ++i)
                    img.v[i] = img.v[i] + amount * (img.v[i] - smooth.v[i]);
                clamp01(img);
                break;
            }
            case TransformKind::BrightnessContrast: {
                const double b = op.params.at("brightness"), c = op.params.at("contrast");
                for (double& v : img.v) v = std::clamp(c * v + b, 0.0, 1.0);
                break;
            }
            case TransformKind::RandomAffine: {
                Rng rng(seed_key(op.field_seed, 0xAFF1));
                const double t_max = op.params.at("translate");
                const double ty = rng.uniform(-t_max, t_max) * img.h;
                const double tx = rng.uniform(-t_max, t_max) * img.w;
                affine_warp(img, m ? &*m : nullptr, op.params.at("degrees"), ty, tx,
                            op.params.at("scale"));
                clamp01(img);
                break;
            }
            case TransformKind::Elastic: {
                const auto field = random_displacement_field(img.h, img.w, op.params.at("alpha"),
                                                             op.params.at("sigma"), op.field_seed);
                img = warp_bilinear(img, field);
                clamp01(img);
                if (m) *m = warp_nearest(*m, field);
                break;
            }
            case TransformKind::HorizontalFlip:
                for (int y = 0; y < img.h; ++y)
                    for (int x = 0; x < img.w / 2; ++x) {
                        std::swap(img.at(y, x), img.at(y, img.w - 1 - x));
                        if (m) std::swap(m->at(y, x), m->at(y, img.w - 1 - x));
                    }
                break;
            case TransformKind::VerticalFlip:
                for (int y = 0; y < img.h / 2; ++y)
                    for (int x = 0; x < img.w; ++x) {
                        std::swap(img.at(y, x), img.at(img.h - 1 - y, x));
                        if (m) std::swap(m->at(y, x), m->at(img.h - 1 - y, x));
                    }
                break;
            case TransformKind::SobelEdgesLabel:
                *m = sobel_edges(*m);
                break;
        }
    }
    return {std::move(img), std::move(m)};
}

GrayImage apply_image_only(const SampledTransform& t, const GrayImage& image) {
    for (const SampledOp& op : t.ops)
        if (!is_intensity_transform(op.kind))
            throw std::logic_error("apply_image_only: pipeline contains a geometric transform");
    return apply(t, image, std::nullopt).first;
}

Episode ictta_augment_episode(const Episode& episode, const AugmentationSpec& spec, uint64_t seed) {
    if (spec.family != "ictta" && spec.family != "ictta_high" && spec.family != "none")
        throw std::invalid_argument("ictta_augment_episode: family must be intensity-only (ictta/ictta_high/none)");
    spec.validate();
    const SampledTransform t = sample_transform(spec, seed);

    Episode out = episode;
    out.target = apply_image_only(t, episode.target);
    for (size_t j = 0; j < out.context.size(); ++j)
        out.context[j].image = apply_image_only(t, episode.context[j].image);
    return out;
}

}  // namespace tyche
