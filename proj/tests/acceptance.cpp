// Acceptance gate: runs the full set of release criteria end to end and
// prints one PASS/FAIL line per criterion. Exit code 0 iff all pass.
//
// The desk-scale model (32x32 blobs, depth 3, 16 features, 30 epochs) is
// trained once and reused by every criterion that needs a trained network.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tyche/config.hpp"
#include "tyche/harness.hpp"
#include "tyche/ictta.hpp"
#include "tyche/model.hpp"
#include "tyche/objective.hpp"
#include "tyche/rng.hpp"
#include "tyche/stochmetrics.hpp"
#include "tyche/synthdata.hpp"

using namespace tyche;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Result {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.5g", v);
    return buf;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

LabelMask random_mask(int h, int w, Rng& r) {
    LabelMask m(h, w);
    for (auto& x : m.v) x = r.bernoulli(0.5);
    return m;
}

Episode random_episode(uint64_t seed, int size, int n_ctx) {
    Rng r(seed);
    Episode ep;
    ep.target = GrayImage(size, size);
    for (auto& v : ep.target.v) v = r.uniform();
    ep.raters.masks.push_back(random_mask(size, size, r));
    for (int j = 0; j < n_ctx; ++j) {
        ContextPair cp;
        cp.image = GrayImage(size, size);
        for (auto& v : cp.image.v) v = r.uniform();
        cp.mask = random_mask(size, size, r);
        ep.context.push_back(std::move(cp));
    }
    return ep;
}

using RecordKey = std::pair<std::string, int>;

std::map<RecordKey, double> records_by_key(const MetricReport& rep, const std::string& metric) {
    std::map<RecordKey, double> out;
    for (const auto& r : rep.records)
        if (r.metric == metric) out[{r.episode_id, r.context_draw}] = r.value;
    return out;
}

// ---------------------------------------------------------------------------
// 1. Set-equivariance: context permutation changes outputs by <= 1e-5
//    max-abs; candidate permutation permutes outputs exactly.
Result criterion_equivariance() {
    auto t0 = Clock::now();
    ModelConfig mc;
    mc.depth = 2;
    mc.features = 8;
    mc.input_h = mc.input_w = 16;
    mc.k_train = 4;
    TycheNet net(mc, 7);
    Rng r(11);
    double worst_ctx = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Episode ep = random_episode(1000 + trial, 16, 3);
        auto noise = sample_noise(4, 1, 16, 16, 2000 + trial);
        CandidateBatch base = net.predict(ep.target, ep.context, noise);

        std::vector<size_t> cperm = r.permutation(ep.context.size());
        std::vector<ContextPair> ctx_p;
        for (size_t j : cperm) ctx_p.push_back(ep.context[j]);
        CandidateBatch permuted_ctx = net.predict(ep.target, ctx_p, noise);
        for (size_t k = 0; k < base.maps.size(); ++k)
            for (size_t i = 0; i < base.maps[k].v.size(); ++i)
                worst_ctx = std::max(worst_ctx,
                                     std::abs(base.maps[k].v[i] - permuted_ctx.maps[k].v[i]));

        std::vector<size_t> kperm = r.permutation(noise.size());
        std::vector<Tensor> noise_p;
        for (size_t k : kperm) noise_p.push_back(noise[k]);
        CandidateBatch permuted_k = net.predict(ep.target, ep.context, noise_p);
        for (size_t k = 0; k < kperm.size(); ++k)
            if (permuted_k.maps[k].v != base.maps[kperm[k]].v)
                return {false, "candidate permutation did not permute outputs exactly"};
    }
    double dt = seconds_since(t0);
    bool ok = worst_ctx <= 1e-5 && dt < 60.0;
    return {ok, "max context-permutation deviation " + fmt(worst_ctx) + " (limit 1e-05), " +
                    fmt(dt) + "s (limit 60s)"};
}

// ---------------------------------------------------------------------------
// 3. Gradient routing through the best-candidate loss on a tiny network.
Result criterion_gradient_routing() {
    auto t0 = Clock::now();
    ModelConfig mc;
    mc.depth = 2;
    mc.features = 4;
    mc.input_h = mc.input_w = 8;
    mc.k_train = 4;
    TycheNet net(mc, 3);
    LossWeights w;

    for (uint64_t seed = 0; seed < 50; ++seed) {
        Episode ep = random_episode(500 + seed, 8, 2);
        auto noise = sample_noise(4, 1, 8, 8, 900 + seed);
        ForwardPass fp = net.forward(ep.target, ep.context, noise);
        LossValue loss = best_candidate_loss(*fp.graph, fp.probs, ep.raters.masks[0], w);

        double min1 = 1e18, min2 = 1e18;
        for (auto* c : loss.components) {
            double v = c->scalar();
            if (v < min1) { min2 = min1; min1 = v; }
            else if (v < min2) min2 = v;
        }
        if (min2 - min1 <= 1e-3) continue;  // criterion only applies at clear margins

        fp.graph->backward(loss.total);
        for (size_t k = 0; k < fp.probs.size(); ++k) {
            if (k == loss.argmin) continue;
            for (double gval : fp.logits[k]->grad.v)
                if (gval != 0.0)
                    return {false, "non-argmin candidate received gradient " + fmt(gval)};
        }

        // central finite differences of the winning candidate's combined loss
        // as a function of its logits
        const Tensor& logit = fp.logits[loss.argmin]->val;
        const Tensor& grad = fp.logits[loss.argmin]->grad;
        const double eps = 1e-5;
        double worst_rel = 0.0;
        GrayImage pred(8, 8);
        auto loss_at = [&](size_t i, double delta) {
            for (size_t j = 0; j < logit.v.size(); ++j) {
                double z = logit.v[j] + (j == i ? delta : 0.0);
                pred.v[j] = 1.0 / (1.0 + std::exp(-z));
            }
            return combined_dice_ce_value(pred, ep.raters.masks[0], w);
        };
        for (size_t i = 0; i < logit.v.size(); ++i) {
            double fd = (loss_at(i, eps) - loss_at(i, -eps)) / (2.0 * eps);
            double rel = std::abs(fd - grad.v[i]) / std::max({std::abs(fd), std::abs(grad.v[i]), 1e-8});
            worst_rel = std::max(worst_rel, rel);
        }
        double dt = seconds_since(t0);
        bool ok = worst_rel <= 1e-4 && dt < 120.0;
        return {ok, "argmin margin " + fmt(min2 - min1) + ", max relative gradient error " +
                        fmt(worst_rel) + " (limit 0.0001), " + fmt(dt) + "s (limit 120s)"};
    }
    return {false, "no episode with argmin margin > 1e-3 found"};
}

// ---------------------------------------------------------------------------
// 4. Metric oracle equivalence on 500 random small instances.
double dice_oracle(const LabelMask& a, const LabelMask& b) {
    double inter = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        inter += a.v[i] && b.v[i];
        na += a.v[i];
        nb += b.v[i];
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * inter / (na + nb);
}

Result criterion_metric_oracles() {
    Rng r(20260826);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        int K = 1 + static_cast<int>(r.uniform_int(3));
        int R = 1 + static_cast<int>(r.uniform_int(3));
        int h = 2 + static_cast<int>(r.uniform_int(5));
        int w = 2 + static_cast<int>(r.uniform_int(5));
        std::vector<LabelMask> cands, raters;
        for (int k = 0; k < K; ++k) cands.push_back(random_mask(h, w, r));
        for (int j = 0; j < R; ++j) raters.push_back(random_mask(h, w, r));
        CandidateBatch cb;
        for (const auto& m : cands) {
            GrayImage g(h, w);
            for (size_t i = 0; i < m.v.size(); ++i) g.v[i] = m.v[i] ? 1.0 : 0.0;
            cb.maps.push_back(std::move(g));
        }
        RaterSet rs;
        rs.masks = raters;

        auto d = [&](const LabelMask& a, const LabelMask& b) { return 1.0 - dice_oracle(a, b); };
        double cross = 0, cc = 0, rr = 0;
        for (const auto& c : cands)
            for (const auto& rm : raters) cross += d(c, rm);
        for (const auto& a : cands)
            for (const auto& b : cands) cc += d(a, b);
        for (const auto& a : raters)
            for (const auto& b : raters) rr += d(a, b);
        double ged_oracle = 2.0 / (K * R) * cross - cc / double(K) / K - rr / double(R) / R;
        worst = std::max(worst, std::abs(ged2(cb, rs) - ged_oracle));

        double best_oracle = 0.0;
        for (const auto& c : cands) {
            double mean = 0.0;
            for (const auto& rm : raters) mean += dice_oracle(c, rm);
            best_oracle = std::max(best_oracle, mean / R);
        }
        worst = std::max(worst, std::abs(best_candidate_dice(cb, rs) - best_oracle));

        size_t L = std::lcm(K, R);
        std::vector<size_t> perm(L);
        std::iota(perm.begin(), perm.end(), 0);
        double hung_oracle = -1.0;
        do {
            double total = 0.0;
            for (size_t i = 0; i < L; ++i) total += dice_oracle(cands[i % K], raters[perm[i] % R]);
            hung_oracle = std::max(hung_oracle, total / double(L));
        } while (std::next_permutation(perm.begin(), perm.end()));
        worst = std::max(worst, std::abs(hungarian_matching_dice(cb, rs) - hung_oracle));

        if (K >= 2) {
            double sum = 0.0;
            int n = 0;
            for (int i = 0; i < K; ++i)
                for (int j = i + 1; j < K; ++j) {
                    sum += 1.0 - dice_oracle(cands[i], cands[j]);
                    ++n;
                }
            worst = std::max(worst, std::abs(sample_diversity(cb) - sum / n));
        }

        if (ged2_masks(raters, raters) != 0.0) return {false, "ged2(Y, Y) != 0"};
    }
    return {worst <= 1e-10,
            "500 instances, max deviation from brute-force oracles " + fmt(worst) + " (limit 1e-10)"};
}

// ---------------------------------------------------------------------------
// 9. Reproducibility: byte-identical reports, lossless-enough dataset disk
//    round trip.
Result criterion_reproducibility(const std::string& work) {
    ExperimentConfig cfg = config_from_map({{"data.size", "8"},
                                            {"data.n_examples", "12"},
                                            {"data.n_raters", "2"},
                                            {"model.depth", "2"},
                                            {"model.features", "4"},
                                            {"train.epochs", "2"},
                                            {"train.context_size", "2"},
                                            {"train.k_train", "2"},
                                            {"eval.context_size", "2"},
                                            {"eval.k_infer", "2"},
                                            {"eval.n_context_draws", "2"}});
    Dataset ds = make_blob_dataset(cfg.data.blob_spec(), cfg.data.n_examples, cfg.data.seed);
    SplitIndices splits = split_dataset(ds.examples.size(), cfg.data.f_dev, cfg.data.f_val,
                                        cfg.data.f_test, cfg.data.seed);

    std::string csv[2];
    for (int run = 0; run < 2; ++run) {
        TycheNet net(cfg.model, 1);
        train_model(net, cfg.train, ds, splits);
        MetricReport rep = evaluate_split(ts_generator(net), cfg.eval, ds, splits);
        csv[run] = work + "/repro_" + std::to_string(run) + ".csv";
        write_metric_csv(csv[run], rep);
    }
    if (slurp(csv[0]) != slurp(csv[1]) || slurp(csv[0]).empty())
        return {false, "train+evaluate reruns produced different CSV bytes"};

    save_dataset(work + "/ds", ds, splits, "{\"kind\":\"acceptance\"}");
    SplitIndices splits2;
    Dataset back = load_dataset(work + "/ds", &splits2);
    if (back.examples.size() != ds.examples.size() || splits2.dev != splits.dev)
        return {false, "dataset round trip changed example count or splits"};
    double worst = 0.0;
    for (size_t i = 0; i < ds.examples.size(); ++i) {
        for (size_t p = 0; p < ds.examples[i].image.v.size(); ++p)
            worst = std::max(worst,
                             std::abs(ds.examples[i].image.v[p] - back.examples[i].image.v[p]));
        for (size_t rr = 0; rr < ds.examples[i].raters.masks.size(); ++rr)
            if (ds.examples[i].raters.masks[rr].v != back.examples[i].raters.masks[rr].v)
                return {false, "rater masks changed in disk round trip"};
    }
    bool ok = worst <= 1.0 / 255.0 + 1e-12;
    return {ok, "reports byte-identical; max image round-trip error " + fmt(worst) +
                    " (limit " + fmt(1.0 / 255.0) + ")"};
}

// ---------------------------------------------------------------------------
// 10. Parameter counting vs an independent closed-form hand count.
size_t hand_count(const ModelConfig& cfg) {
    const size_t C = cfg.features, k2 = static_cast<size_t>(cfg.kernel_size) * cfg.kernel_size;
    auto conv = [&](size_t cin, size_t cout) { return cout * cin * k2 + cout; };
    auto setblock = [&](size_t cu, size_t cv) {
        return conv(cu + cv, C) + conv(C, C)
               + conv(cu + C, C) + conv(C, C)
               + (cfg.eq7_from_input ? conv(cv, C) : conv(C, C));
    };
    size_t total = setblock(1 + cfg.noise_channels, 2);
    for (int l = 1; l < cfg.depth; ++l) total += setblock(C, C);
    for (int l = 0; l < cfg.depth - 1; ++l) total += setblock(2 * C, 2 * C);
    if (cfg.symmetric_decoder) total += setblock(C, C);
    total += C * 1 + 1;
    return total;
}

Result criterion_parameter_count() {
    ModelConfig tiny;
    tiny.depth = 2;
    tiny.features = 4;
    tiny.input_h = tiny.input_w = 8;
    if (count_parameters(tiny) != hand_count(tiny))
        return {false, "tiny config: count_parameters " + std::to_string(count_parameters(tiny)) +
                           " != hand count " + std::to_string(hand_count(tiny))};

    ModelConfig desk = config_from_map({}).model;
    ModelConfig full;  // reference scale: depth 4, 64 features, 128x128
    std::string info = "tiny exact (" + std::to_string(count_parameters(tiny)) + "); desk config " +
                       std::to_string(count_parameters(desk)) + "; reference-scale config " +
                       std::to_string(count_parameters(full)) +
                       " vs published ~1.7M (informational)";
    if (count_parameters(desk) != hand_count(desk) || count_parameters(full) != hand_count(full))
        return {false, info + "; analytic count mismatch at larger configs"};
    return {true, info};
}

}  // namespace

// ---------------------------------------------------------------------------

int main() {
    std::string work = (fs::temp_directory_path() / "tyche_acceptance").string();
    fs::remove_all(work);
    fs::create_directories(work);

    std::map<int, Result> results;
    std::map<int, std::string> titles = {
        {1, "set equivariance (context <= 1e-5, candidates exact)"},
        {2, "noise collapse + trained sample diversity > 0.05"},
        {3, "best-candidate gradient routing (exact zeros, FD match)"},
        {4, "metric oracle equivalence (500 brute-force instances)"},
        {5, "K sweep: prefix-nested non-decreasing, gap(K=8,K=1) above frozen threshold"},
        {6, "zero noise: diversity exactly 0; stochastic Dice >= deterministic"},
        {7, "test-time augmentation: identity floor + diversity on >= 90%"},
        {8, "GED^2 fine-tune does not increase test GED^2 (+0.01 slack)"},
        {9, "byte-identical reruns; dataset disk round trip <= 1/255"},
        {10, "parameter count matches analytic hand count"},
    };

    results[1] = criterion_equivariance();
    results[3] = criterion_gradient_routing();
    results[4] = criterion_metric_oracles();
    results[9] = criterion_reproducibility(work);
    results[10] = criterion_parameter_count();

    // Thresholds for desk-scale trends were frozen from the first full run of
    // the default configuration; see tests/fixtures/thresholds.json.
    double k_gap_min = 0.016, diversity_min = 0.05, loss_ratio_max = 0.5;
    {
        std::ifstream fx(std::string(TYCHE_FIXTURES_DIR) + "/thresholds.json");
        if (fx.good()) {
            nlohmann::json j = nlohmann::json::parse(fx);
            k_gap_min = j.at("k_gap_min").get<double>();
            diversity_min = j.at("sample_diversity_min").get<double>();
            loss_ratio_max = j.at("final_loss_ratio_max").get<double>();
        } else {
            std::printf("[acceptance] warning: fixtures not found, using built-in thresholds\n");
        }
    }

    // Desk-scale training, shared by criteria 2, 5, 6, 7, 8. Seeds match the
    // frozen reference run so the measured numbers reproduce exactly.
    ExperimentConfig cfg = config_from_map({});
    std::printf("[acceptance] generating default dataset (%d examples)...\n", cfg.data.n_examples);
    Dataset ds = make_blob_dataset(cfg.data.blob_spec(), cfg.data.n_examples, cfg.data.seed);
    SplitIndices splits = split_dataset(ds.examples.size(), cfg.data.f_dev, cfg.data.f_val,
                                        cfg.data.f_test, cfg.data.seed);
    TycheNet net(cfg.model, cfg.train.seed);
    std::printf("[acceptance] training desk-scale model (%d epochs, %zu parameters)...\n",
                cfg.train.epochs, net.parameter_count());
    auto t_train = Clock::now();
    TrainResult tr = train_model(net, cfg.train, ds, splits, work + "/desk_run");
    double loss_ratio = tr.epoch_loss.back() / tr.epoch_loss.front();
    std::printf("[acceptance] trained in %.0fs, loss %.4f -> %.4f (ratio %.3f, frozen limit %.2f)\n",
                seconds_since(t_train), tr.epoch_loss.front(), tr.epoch_loss.back(), loss_ratio,
                loss_ratio_max);

    // Criterion 2 + 5 + 6 (stochastic side): one prefix-nested K sweep.
    {
        EvalConfig ec = cfg.eval;
        ec.metrics = {"best_candidate_dice", "sample_diversity"};
        auto reports = evaluate_split_prefixes(ts_generator(net), ec, ds, splits, {1, 2, 4, 8});

        // 5: per-record monotone + mean gap
        bool monotone = true;
        std::map<RecordKey, double> prev;
        for (int k : {1, 2, 4, 8}) {
            for (const auto& [key, v] : records_by_key(reports.at(k), "best_candidate_dice")) {
                auto it = prev.find(key);
                if (it != prev.end() && v < it->second) monotone = false;
                prev[key] = v;
            }
        }
        double mean1 = reports.at(1).aggregates.at("best_candidate_dice").mean;
        double mean8 = reports.at(8).aggregates.at("best_candidate_dice").mean;
        double gap = mean8 - mean1;
        results[5] = {monotone && gap >= k_gap_min && loss_ratio <= loss_ratio_max,
                      std::string(monotone ? "per-episode monotone; " : "MONOTONICITY VIOLATED; ") +
                          "best-candidate Dice " + fmt(mean1) + " (K=1) -> " + fmt(mean8) +
                          " (K=8), gap " + fmt(gap) + " (frozen limit " + fmt(k_gap_min) + ")"};

        // 2: bitwise collapse on a real episode + trained diversity
        Episode ep = make_episode(ds, splits.test[0], subset(ds, splits.dev), cfg.eval.context_size, 99);
        bool collapse = true;
        for (const std::string& mode : {"zero", "constant"}) {
            CandidateBatch cb = ts_generator(net, mode)(ep, 8, 42);
            for (size_t k = 1; k < cb.maps.size(); ++k)
                if (cb.maps[k].v != cb.maps[0].v) collapse = false;
        }
        double div8 = reports.at(8).aggregates.at("sample_diversity").mean;
        results[2] = {collapse && div8 > diversity_min,
                      std::string(collapse ? "zero/constant noise collapse bitwise; "
                                           : "NOISE COLLAPSE FAILED; ") +
                          "trained mean sample diversity " + fmt(div8) + " (limit > " +
                          fmt(diversity_min) + ")"};

        // 6 stochastic side reuses the K=8 report below.
        EvalConfig ez = ec;
        ez.k_infer = 8;
        ez.noise_mode = "zero";
        MetricReport zero_rep = evaluate_split(ts_generator(net, "zero"), ez, ds, splits);
        bool all_zero = true;
        for (const auto& r : zero_rep.records)
            if (r.metric == "sample_diversity" && r.value != 0.0) all_zero = false;
        double det_dice = zero_rep.aggregates.at("best_candidate_dice").mean;
        results[6] = {all_zero && mean8 >= det_dice,
                      std::string(all_zero ? "zero-noise diversity 0 on 100% of episodes; "
                                           : "NONZERO DIVERSITY UNDER ZERO NOISE; ") +
                          "stochastic Dice " + fmt(mean8) + " vs deterministic " + fmt(det_dice)};
    }

    // Criterion 7: test-time augmentation of the deterministic predictor.
    {
        EvalConfig base_ec = cfg.eval;
        base_ec.n_context_draws = 2;
        base_ec.k_infer = 1;
        base_ec.noise_mode = "zero";
        base_ec.metrics = {"dice"};
        MetricReport base_rep = evaluate_split(ts_generator(net, "zero"), base_ec, ds, splits);

        EvalConfig tta_ec = cfg.eval;
        tta_ec.n_context_draws = 2;
        tta_ec.metrics = {"best_candidate_dice", "sample_diversity"};
        MetricReport tta_rep = evaluate_split(ictta_generator(net, cfg.ictta), tta_ec, ds, splits);

        auto base_by = records_by_key(base_rep, "dice");
        auto best_by = records_by_key(tta_rep, "best_candidate_dice");
        auto div_by = records_by_key(tta_rep, "sample_diversity");
        bool floor_ok = !base_by.empty() && base_by.size() == best_by.size();
        size_t diverse = 0;
        for (const auto& [key, base] : base_by) {
            auto it = best_by.find(key);
            if (it == best_by.end() || it->second < base - 1e-12) floor_ok = false;
            if (div_by.count(key) && div_by[key] > 0.0) ++diverse;
        }
        double frac = base_by.empty() ? 0.0 : double(diverse) / base_by.size();
        results[7] = {floor_ok && frac >= 0.9,
                      std::string(floor_ok ? "identity floor holds on every episode; "
                                           : "IDENTITY FLOOR VIOLATED; ") +
                          "diversity > 0 on " + fmt(100.0 * frac) + "% of episodes (limit 90%)"};
    }

    // Criterion 8: GED^2 fine-tuning direction.
    {
        EvalConfig ec = cfg.eval;
        ec.n_context_draws = 2;
        ec.metrics = {"ged2"};
        double before = evaluate_split(ts_generator(net), ec, ds, splits).aggregates.at("ged2").mean;

        net.save_checkpoint(work + "/pre_ged2.ckpt");
        TycheNet tuned = TycheNet::load_checkpoint(work + "/pre_ged2.ckpt");
        TrainConfig ft = cfg.train;
        ft.loss_kind = "ged2";
        ft.epochs = 10;
        std::printf("[acceptance] fine-tuning with the GED^2 objective (10 epochs)...\n");
        train_model(tuned, ft, ds, splits);
        double after = evaluate_split(ts_generator(tuned), ec, ds, splits).aggregates.at("ged2").mean;
        results[8] = {after <= before + 0.01, "mean test GED^2 " + fmt(before) + " -> " + fmt(after) +
                                                  " (limit before + 0.01)"};
    }

    bool all = true;
    for (int i = 1; i <= 10; ++i) {
        const Result& r = results[i];
        all = all && r.pass;
        std::printf("%s: criterion %2d — %s [%s]\n", r.pass ? "PASS" : "FAIL", i,
                    titles[i].c_str(), r.detail.c_str());
    }
    std::printf("%s\n", all ? "ACCEPTANCE: ALL CRITERIA PASSED" : "ACCEPTANCE: FAILURES PRESENT");
    return all ? 0 : 1;
}
