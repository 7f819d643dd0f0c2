#pragma once

#include <functional>
#include <string>

#include "tyche/augment.hpp"
#include "tyche/types.hpp"

namespace tyche {

// Opaque deterministic in-context predictor: same inputs, same output.
using DeterministicPredictor =
    std::function<GrayImage(const GrayImage& target, const std::vector<ContextPair>& context)>;

struct ICTTAConfig {
    int k = 8;
    std::string family = "ictta";
    bool include_identity = true;
    uint64_t base_seed = 0;
    // Config variant: draw a fresh transform per image instead of one shared
    // transform per candidate.
    bool resample_per_image = false;

    void validate() const {
        if (k < 1) throw std::invalid_argument("ICTTAConfig: K must be >= 1");
    }
};

// Produces K stochastic candidates from a deterministic predictor by jointly
// augmenting target and context with intensity-only transforms. The K
// individual predictions are the output; no ensembling.
CandidateBatch predict_stochastic(const DeterministicPredictor& model, const Episode& episode,
                                  const ICTTAConfig& cfg);

}  // namespace tyche
