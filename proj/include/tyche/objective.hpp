#pragma once

#include <vector>

#include "tyche/autodiff.hpp"
#include "tyche/types.hpp"

namespace tyche {

// Loss weighting for the Dice + cross-entropy combination.
struct LossWeights {
    double w_dice = 1.0;
    double w_ce = 1.0;

    void validate() const {
        if (w_dice < 0.0 || w_ce < 0.0 || (w_dice == 0.0 && w_ce == 0.0))
            throw std::invalid_argument("LossWeights: weights must be >= 0 and not both zero");
    }
};

// Scalar best-candidate loss with the per-candidate breakdown.
struct LossValue {
    ad::Node* total = nullptr;         // == components[argmin]
    std::vector<ad::Node*> components;
    size_t argmin = 0;

    double value() const { return total->scalar(); }
};

// Graph-building losses (differentiable). ---------------------------------

ad::Node* soft_dice_loss(ad::Graph& g, ad::Node* pred, const LabelMask& truth);

ad::Node* combined_dice_ce(ad::Graph& g, ad::Node* pred, const LabelMask& truth,
                           const LossWeights& w);

// min_k combined_dice_ce(candidate_k, truth); ties broken by lowest index;
// gradient flows only through the argmin candidate.
LossValue best_candidate_loss(ad::Graph& g, const std::vector<ad::Node*>& candidates,
                              const LabelMask& truth, const LossWeights& w);

// Differentiable empirical GED^2 with soft-Dice distance, diagonals included:
//   2/(KR) sum d(cand_k, rater_r) - 1/R^2 sum d(rater, rater') - 1/K^2 sum d(cand, cand').
ad::Node* ged2_loss(ad::Graph& g, const std::vector<ad::Node*>& candidates, const RaterSet& raters);

// Plain (non-graph) scalar versions for evaluation code and tests. ----------

double soft_dice_loss_value(const GrayImage& pred, const LabelMask& truth);
double combined_dice_ce_value(const GrayImage& pred, const LabelMask& truth, const LossWeights& w);

}  // namespace tyche
