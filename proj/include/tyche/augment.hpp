#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tyche/types.hpp"

namespace tyche {

enum class TransformKind {
    GaussianNoise,
    GaussianBlur,
    FlipIntensities,
    Sharpness,
    BrightnessContrast,
    RandomAffine,
    Elastic,
    HorizontalFlip,
    VerticalFlip,
    SobelEdgesLabel,
};

const char* transform_name(TransformKind k);
TransformKind transform_from_name(const std::string& name);
bool is_intensity_transform(TransformKind k);

// One pipeline entry: transform, inclusion probability, parameter ranges.
struct TransformSpec {
    TransformKind kind;
    double p = 1.0;
    std::map<std::string, std::pair<double, double>> ranges;
};

struct AugmentationSpec {
    std::string family;  // in_task, task_level, ictta, ictta_high, none, light, heavy, custom
    std::vector<TransformSpec> transforms;

    bool intensity_only() const;
    void validate() const;
};

// Built-in families. Throws on unknown tags.
AugmentationSpec augmentation_family(const std::string& tag);

// Concrete realization of a pipeline: inclusion flags, drawn parameters, and
// fixed seeds for the stochastic fields, so replaying is exact.
struct SampledOp {
    TransformKind kind;
    std::map<std::string, double> params;
    uint64_t field_seed = 0;  // noise / displacement realization
};

struct SampledTransform {
    std::string family;
    std::vector<SampledOp> ops;  // included transforms only, pipeline order

    bool identity() const { return ops.empty(); }
};

SampledTransform sample_transform(const AugmentationSpec& spec, uint64_t seed);

// Applies the realized pipeline. Intensity transforms touch only the image;
// geometric transforms warp image (bilinear) and mask (nearest) identically.
// A geometric transform without a mask is a contract violation.
std::pair<GrayImage, std::optional<LabelMask>> apply(const SampledTransform& t,
                                                     const GrayImage& image,
                                                     const std::optional<LabelMask>& mask);

GrayImage apply_image_only(const SampledTransform& t, const GrayImage& image);

// Samples one intensity-only transform and applies it to the target and every
// context image; all labels pass through untouched.
Episode ictta_augment_episode(const Episode& episode, const AugmentationSpec& spec, uint64_t seed);

}  // namespace tyche
