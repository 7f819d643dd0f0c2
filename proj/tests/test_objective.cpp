#include <doctest.h>

#include <cmath>

#include "tyche/objective.hpp"
#include "tyche/rng.hpp"

using namespace tyche;

namespace {

GrayImage image_from(std::vector<double> v, int h, int w) {
    GrayImage img(h, w);
    img.v = std::move(v);
    return img;
}

LabelMask mask_from(std::vector<uint8_t> v, int h, int w) {
    LabelMask m(h, w);
    m.v = std::move(v);
    return m;
}

ad::Node* prob_node(ad::Graph& g, const GrayImage& img) {
    Tensor t(1, img.h, img.w);
    t.v = img.v;
    return g.constant(t);
}

GrayImage random_probs(int h, int w, uint64_t seed) {
    GrayImage img(h, w);
    Rng r(seed);
    for (double& v : img.v) v = r.uniform(0.02, 0.98);
    return img;
}

}  // namespace

TEST_CASE("soft dice hand case: 2x2 pred (0.5,0.5,0,0) vs truth (1,0,0,0)") {
    GrayImage pred = image_from({0.5, 0.5, 0, 0}, 2, 2);
    LabelMask truth = mask_from({1, 0, 0, 0}, 2, 2);
    double expected = 1.0 - (2 * 0.5 + ad::kDiceEps) / (2.0 + ad::kDiceEps);
    CHECK(soft_dice_loss_value(pred, truth) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(soft_dice_loss_value(pred, truth) == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("soft dice: perfect match near 0, total miss near 1") {
    LabelMask truth = mask_from({1, 1, 0, 0}, 2, 2);
    GrayImage match = image_from({1, 1, 0, 0}, 2, 2);
    CHECK(soft_dice_loss_value(match, truth) == doctest::Approx(0.0).epsilon(1e-5));
    GrayImage zero = image_from({0, 0, 0, 0}, 2, 2);
    double n = 2.0;
    CHECK(soft_dice_loss_value(zero, truth) ==
          doctest::Approx(1.0 - ad::kDiceEps / (n + ad::kDiceEps)).epsilon(1e-12));
}

TEST_CASE("combined loss hand case: single pixel 0.5 vs 1 with unit weights") {
    GrayImage pred = image_from({0.5}, 1, 1);
    LabelMask truth = mask_from({1}, 1, 1);
    LossWeights w;
    double dice_term = 1.0 - (2 * 0.5 + ad::kDiceEps) / (1.5 + ad::kDiceEps);
    double ce_term = -std::log(0.5);
    double got = combined_dice_ce_value(pred, truth, w);
    CHECK(got == doctest::Approx(dice_term + ce_term).epsilon(1e-12));
    CHECK(got == doctest::Approx(1.0265).epsilon(1e-3));

    SUBCASE("w_ce = 0 reduces to soft dice") {
        LossWeights wd{1.0, 0.0};
        CHECK(combined_dice_ce_value(pred, truth, wd) ==
              doctest::Approx(soft_dice_loss_value(pred, truth)).epsilon(1e-12));
    }
    SUBCASE("binary perfect prediction has CE at the clamp floor") {
        GrayImage exact = image_from({1.0}, 1, 1);
        LossWeights wc{0.0, 1.0};
        CHECK(combined_dice_ce_value(exact, truth, wc) <= -std::log(1.0 - ad::kCeClamp) + 1e-12);
    }
    SUBCASE("invalid weights rejected") {
        CHECK_THROWS(LossWeights{0.0, 0.0}.validate());
        CHECK_THROWS(LossWeights{-1.0, 1.0}.validate());
    }
}

TEST_CASE("best_candidate_loss takes the min with correct argmin and tie-breaking") {
    LabelMask truth = mask_from({1, 1, 0, 0}, 2, 2);
    std::vector<GrayImage> cands = {
        image_from({0.2, 0.3, 0.1, 0.6}, 2, 2),
        image_from({0.9, 0.9, 0.1, 0.1}, 2, 2),  // clear winner
        image_from({0.5, 0.5, 0.5, 0.5}, 2, 2),
    };
    LossWeights w;
    ad::Graph g;
    std::vector<ad::Node*> nodes;
    for (const auto& c : cands) nodes.push_back(prob_node(g, c));
    LossValue lv = best_candidate_loss(g, nodes, truth, w);
    CHECK(lv.argmin == 1);
    REQUIRE(lv.components.size() == 3);
    for (size_t k = 0; k < 3; ++k)
        CHECK(lv.components[k]->scalar() ==
              doctest::Approx(combined_dice_ce_value(cands[k], truth, w)).epsilon(1e-12));
    CHECK(lv.value() == doctest::Approx(combined_dice_ce_value(cands[1], truth, w)).epsilon(1e-12));

    SUBCASE("K = 1 equals combined loss") {
        ad::Graph g1;
        LossValue single = best_candidate_loss(g1, {prob_node(g1, cands[0])}, truth, w);
        CHECK(single.argmin == 0);
        CHECK(single.value() ==
              doctest::Approx(combined_dice_ce_value(cands[0], truth, w)).epsilon(1e-12));
    }
    SUBCASE("exact duplicates tie-break to the lowest index") {
        ad::Graph g2;
        std::vector<ad::Node*> dup = {prob_node(g2, cands[1]), prob_node(g2, cands[1])};
        CHECK(best_candidate_loss(g2, dup, truth, w).argmin == 0);
    }
    SUBCASE("candidate permutation: same value, equivariant argmin") {
        ad::Graph g3;
        std::vector<ad::Node*> perm = {prob_node(g3, cands[2]), prob_node(g3, cands[0]),
                                       prob_node(g3, cands[1])};
        LossValue lp = best_candidate_loss(g3, perm, truth, w);
        CHECK(lp.argmin == 2);
        CHECK(lp.value() == doctest::Approx(lv.value()).epsilon(1e-12));
    }
}

TEST_CASE("best_candidate_loss routes gradient only to the argmin candidate") {
    LabelMask truth = mask_from({1, 0, 0, 1}, 2, 2);
    ad::Graph g;
    std::vector<ad::Node*> cands = {prob_node(g, random_probs(2, 2, 1)),
                                    prob_node(g, image_from({0.9, 0.1, 0.1, 0.9}, 2, 2)),
                                    prob_node(g, random_probs(2, 2, 2))};
    LossValue lv = best_candidate_loss(g, cands, truth, {});
    REQUIRE(lv.argmin == 1);
    g.backward(lv.total);
    for (size_t k = 0; k < cands.size(); ++k) {
        double norm = 0.0;
        for (double gr : cands[k]->grad.v) norm += std::abs(gr);
        if (k == lv.argmin) CHECK(norm > 0.0);
        else CHECK(norm == 0.0);
    }
}

TEST_CASE("ged2_loss hand cases") {
    // d(a,a) = 0 for binary masks up to the soft-dice epsilon
    LabelMask a = mask_from({1, 1, 0, 0}, 2, 2);
    LabelMask b = mask_from({0, 1, 1, 0}, 2, 2);
    RaterSet raters;
    raters.masks = {a, b};

    SUBCASE("candidates equal to raters give ~0") {
        ad::Graph g;
        std::vector<ad::Node*> cands = {prob_node(g, image_from({1, 1, 0, 0}, 2, 2)),
                                        prob_node(g, image_from({0, 1, 1, 0}, 2, 2))};
        CHECK(std::abs(ged2_loss(g, cands, raters)->scalar()) < 1e-6);
    }
    SUBCASE("analytic two-point case") {
        // Y = {A, B}, candidates = {A, B}: cross term = t, self terms t/2 each -> 0,
        // with t = d(A, B) under the soft-dice distance.
        ad::Graph g;
        ad::Node* na = prob_node(g, image_from({1, 1, 0, 0}, 2, 2));
        ad::Node* nb = prob_node(g, image_from({0, 1, 1, 0}, 2, 2));
        double t = g.soft_dice_pair(na, nb)->scalar();
        CHECK(t > 0.1);  // non-degenerate instance
        double v = ged2_loss(g, {na, nb}, raters)->scalar();
        CHECK(std::abs(v) < 1e-6);
    }
    SUBCASE("duplicating every candidate leaves the value unchanged") {
        ad::Graph g;
        std::vector<ad::Node*> cands = {prob_node(g, random_probs(2, 2, 3)),
                                        prob_node(g, random_probs(2, 2, 4))};
        std::vector<ad::Node*> dup = {cands[0], cands[1], cands[0], cands[1]};
        CHECK(ged2_loss(g, cands, raters)->scalar() ==
              doctest::Approx(ged2_loss(g, dup, raters)->scalar()).epsilon(1e-12));
    }
    SUBCASE("K < 2 is rejected") {
        ad::Graph g;
        std::vector<ad::Node*> one = {prob_node(g, random_probs(2, 2, 5))};
        CHECK_THROWS(ged2_loss(g, one, raters));
    }
    SUBCASE("gradients flow to every candidate") {
        ad::Graph g;
        std::vector<ad::Node*> cands = {prob_node(g, random_probs(2, 2, 6)),
                                        prob_node(g, random_probs(2, 2, 7))};
        g.backward(ged2_loss(g, cands, raters));
        for (ad::Node* c : cands) {
            double norm = 0.0;
            for (double gr : c->grad.v) norm += std::abs(gr);
            CHECK(norm > 0.0);
        }
    }
}

TEST_CASE("soft_dice_pair is symmetric on soft maps") {
    ad::Graph g;
    ad::Node* a = prob_node(g, random_probs(3, 3, 8));
    ad::Node* b = prob_node(g, random_probs(3, 3, 9));
    CHECK(g.soft_dice_pair(a, b)->scalar() ==
          doctest::Approx(g.soft_dice_pair(b, a)->scalar()).epsilon(1e-15));
    // self-distance vanishes only for binary maps (sum a^2 == sum a)
    ad::Node* bin = prob_node(g, image_from({1, 0, 1, 0, 1, 0, 0, 0, 1}, 3, 3));
    CHECK(g.soft_dice_pair(bin, bin)->scalar() < 1e-5);
}

TEST_CASE("loss values stay within their documented bounds") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        GrayImage p = random_probs(4, 4, 100 + seed);
        LabelMask t(4, 4);
        Rng r(200 + seed);
        for (auto& x : t.v) x = r.bernoulli(0.5);
        double d = soft_dice_loss_value(p, t);
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
        CHECK(std::isfinite(combined_dice_ce_value(p, t, {})));
    }
}
