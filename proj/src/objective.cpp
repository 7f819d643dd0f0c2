#include "tyche/objective.hpp"

#include <algorithm>
#include <cmath>

namespace tyche {

ad::Node* soft_dice_loss(ad::Graph& g, ad::Node* pred, const LabelMask& truth) {
    return g.soft_dice(pred, truth);
}

ad::Node* combined_dice_ce(ad::Graph& g, ad::Node* pred, const LabelMask& truth,
                           const LossWeights& w) {
    w.validate();
    if (w.w_ce == 0.0) return g.affine_sum({g.soft_dice(pred, truth)}, {w.w_dice}, 0.0);
    if (w.w_dice == 0.0) return g.affine_sum({g.bce_mean(pred, truth)}, {w.w_ce}, 0.0);
    return g.affine_sum({g.soft_dice(pred, truth), g.bce_mean(pred, truth)}, {w.w_dice, w.w_ce}, 0.0);
}

LossValue best_candidate_loss(ad::Graph& g, const std::vector<ad::Node*>& candidates,
                              const LabelMask& truth, const LossWeights& w) {
    if (candidates.empty()) throw std::invalid_argument("best_candidate_loss: K must be >= 1");
    LossValue lv;
    lv.components.reserve(candidates.size());
    for (ad::Node* c : candidates) lv.components.push_back(combined_dice_ce(g, c, truth, w));
    lv.argmin = 0;
    for (size_t k = 1; k < lv.components.size(); ++k)
        if (lv.components[k]->scalar() < lv.components[lv.argmin]->scalar()) lv.argmin = k;
    lv.total = g.select(lv.components, lv.argmin);
    return lv;
}

ad::Node* ged2_loss(ad::Graph& g, const std::vector<ad::Node*>& candidates, const RaterSet& raters) {
    const size_t k = candidates.size();
    const size_t r = raters.size();
    if (k < 2) throw std::invalid_argument("ged2_loss: K must be >= 2");
    if (r < 1) throw std::invalid_argument("ged2_loss: R must be >= 1");

    // Raters are constants; their pairwise term is a plain number.
    std::vector<ad::Node*> rater_nodes;
    rater_nodes.reserve(r);
    for (const LabelMask& m : raters.masks) {
        Tensor t(1, m.h, m.w);
        for (size_t i = 0; i < m.size(); ++i) t.v[i] = m.v[i];
        rater_nodes.push_back(g.constant(std::move(t)));
    }

    std::vector<ad::Node*> terms;
    std::vector<double> coef;
    const double c_cross = 2.0 / (static_cast<double>(k) * r);
    for (size_t i = 0; i < k; ++i)
        for (size_t j = 0; j < r; ++j) {
            terms.push_back(g.soft_dice_pair(candidates[i], rater_nodes[j]));
            coef.push_back(c_cross);
        }
    const double c_cand = -1.0 / (static_cast<double>(k) * k);
    for (size_t i = 0; i < k; ++i)
        for (size_t j = 0; j < k; ++j) {
            terms.push_back(g.soft_dice_pair(candidates[i], candidates[j]));
            coef.push_back(c_cand);
        }
    double rater_term = 0.0;
    for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < r; ++j) {
            double inter = 0.0, si = 0.0, sj = 0.0;
            const LabelMask& a = raters[i];
            const LabelMask& b = raters[j];
            for (size_t p = 0; p < a.size(); ++p) {
                inter += static_cast<double>(a.v[p]) * b.v[p];
                si += a.v[p];
                sj += b.v[p];
            }
            rater_term += 1.0 - (2.0 * inter + ad::kDiceEps) / (si + sj + ad::kDiceEps);
        }
    return g.affine_sum(terms, coef, -rater_term / (static_cast<double>(r) * r));
}

double soft_dice_loss_value(const GrayImage& pred, const LabelMask& truth) {
    if (pred.h != truth.h || pred.w != truth.w)
        throw std::invalid_argument("soft_dice_loss: shape mismatch");
    double inter = 0.0, sp = 0.0, sg = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        sp += pred.v[i];
        if (truth.v[i]) {
            inter += pred.v[i];
            sg += 1.0;
        }
    }
    return 1.0 - (2.0 * inter + ad::kDiceEps) / (sp + sg + ad::kDiceEps);
}

double combined_dice_ce_value(const GrayImage& pred, const LabelMask& truth, const LossWeights& w) {
    w.validate();
    double ce = 0.0;
    if (w.w_ce > 0.0) {
        for (size_t i = 0; i < pred.size(); ++i) {
            const double p = std::clamp(pred.v[i], ad::kCeClamp, 1.0 - ad::kCeClamp);
            ce += truth.v[i] ? -std::log(p) : -std::log(1.0 - p);
        }
        ce /= static_cast<double>(pred.size());
    }
    return w.w_dice * soft_dice_loss_value(pred, truth) + w.w_ce * ce;
}

}  // namespace tyche
