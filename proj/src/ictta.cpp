#include "tyche/ictta.hpp"

#include "tyche/rng.hpp"

namespace tyche {

CandidateBatch predict_stochastic(const DeterministicPredictor& model, const Episode& episode,
                                  const ICTTAConfig& cfg) {
    cfg.validate();
    const AugmentationSpec spec = augmentation_family(cfg.family);
    if (!spec.intensity_only())
        throw std::invalid_argument("predict_stochastic: family " + cfg.family + " is not intensity-only");

    CandidateBatch out;
    out.maps.reserve(cfg.k);
    for (int k = 0; k < cfg.k; ++k) {
        const bool identity = cfg.include_identity && k == 0;
        Episode aug = episode;
        if (!identity) {
            const uint64_t seed = seed_key(cfg.base_seed, 0x1C77A, k);
            if (cfg.resample_per_image) {
                aug.target = apply_image_only(sample_transform(spec, seed_key(seed, 0)), episode.target);
                for (size_t j = 0; j < aug.context.size(); ++j)
                    aug.context[j].image = apply_image_only(sample_transform(spec, seed_key(seed, j + 1)),
                                                            episode.context[j].image);
            } else {
                aug = ictta_augment_episode(episode, spec, seed);
            }
        }
        out.maps.push_back(model(aug.target, aug.context));
    }
    return out;
}

}  // namespace tyche
