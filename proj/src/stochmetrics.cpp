#include "tyche/stochmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace tyche {

namespace {

std::vector<LabelMask> binarize_all(const CandidateBatch& candidates, double threshold) {
    std::vector<LabelMask> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates.maps) out.push_back(binarize(c, threshold));
    return out;
}

size_t lcm_size(size_t a, size_t b) { return a / std::gcd(a, b) * b; }

}  // namespace

double dice(const LabelMask& a, const LabelMask& b) {
    if (a.h != b.h || a.w != b.w) throw std::invalid_argument("dice: shape mismatch");
    size_t inter = 0, sa = 0, sb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        sa += a.v[i];
        sb += b.v[i];
        inter += static_cast<size_t>(a.v[i]) & b.v[i];
    }
    if (sa + sb == 0) return 1.0;  // both empty
    return 2.0 * static_cast<double>(inter) / static_cast<double>(sa + sb);
}

double best_candidate_dice(const CandidateBatch& candidates, const RaterSet& raters,
                           double threshold) {
    if (candidates.size() < 1) throw std::invalid_argument("best_candidate_dice: K must be >= 1");
    if (raters.size() < 1) throw std::invalid_argument("best_candidate_dice: R must be >= 1");
    double best = 0.0;
    for (const auto& cand : candidates.maps) {
        const LabelMask m = binarize(cand, threshold);
        double mean = 0.0;
        for (const auto& r : raters.masks) mean += dice(m, r);
        mean /= static_cast<double>(raters.size());
        best = std::max(best, mean);
    }
    return best;
}

double ged2_masks(const std::vector<LabelMask>& candidates, const std::vector<LabelMask>& raters,
                  bool include_diagonal) {
    const size_t k = candidates.size(), r = raters.size();
    if (k < 1 || r < 1) throw std::invalid_argument("ged2: need K >= 1 and R >= 1");
    double cross = 0.0;
    for (const auto& c : candidates)
        for (const auto& y : raters) cross += 1.0 - dice(c, y);
    auto self_term = [include_diagonal](const std::vector<LabelMask>& s) {
        double acc = 0.0;
        size_t n_pairs = 0;
        for (size_t i = 0; i < s.size(); ++i)
            for (size_t j = 0; j < s.size(); ++j) {
                if (!include_diagonal && i == j) continue;
                acc += 1.0 - dice(s[i], s[j]);
                ++n_pairs;
            }
        return n_pairs ? acc / static_cast<double>(n_pairs) : 0.0;
    };
    return 2.0 * cross / (static_cast<double>(k) * r) - self_term(raters) - self_term(candidates);
}

double ged2(const CandidateBatch& candidates, const RaterSet& raters, double threshold,
            bool include_diagonal) {
    return ged2_masks(binarize_all(candidates, threshold), raters.masks, include_diagonal);
}

double sample_diversity(const CandidateBatch& candidates, double threshold) {
    if (candidates.size() < 2) throw std::invalid_argument("sample_diversity: K must be >= 2");
    const auto masks = binarize_all(candidates, threshold);
    double acc = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < masks.size(); ++i)
        for (size_t j = i + 1; j < masks.size(); ++j) {
            acc += 1.0 - dice(masks[i], masks[j]);
            ++n;
        }
    return acc / static_cast<double>(n);
}

// Hungarian algorithm with potentials, O(n^3).
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    for (const auto& row : cost)
        if (static_cast<int>(row.size()) != n) throw std::invalid_argument("solve_assignment: non-square cost");

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

double hungarian_matching_dice_masks(const std::vector<LabelMask>& candidates,
                                     const std::vector<LabelMask>& raters) {
    const size_t k = candidates.size(), r = raters.size();
    if (k < 1 || r < 1) throw std::invalid_argument("hungarian_matching_dice: need K, R >= 1");
    const size_t l = lcm_size(k, r);

    // Duplicate both sets to the least common multiple, then match 1:1.
    std::vector<std::vector<double>> cost(l, std::vector<double>(l, 0.0));
    for (size_t i = 0; i < l; ++i)
        for (size_t j = 0; j < l; ++j) cost[i][j] = 1.0 - dice(candidates[i % k], raters[j % r]);

    const auto assignment = solve_assignment(cost);
    double acc = 0.0;
    for (size_t i = 0; i < l; ++i) acc += 1.0 - cost[i][assignment[i]];
    return acc / static_cast<double>(l);
}

double hungarian_matching_dice(const CandidateBatch& candidates, const RaterSet& raters,
                               double threshold) {
    return hungarian_matching_dice_masks(binarize_all(candidates, threshold), raters.masks);
}

MetricAggregate aggregate_values(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("aggregate: need n >= 1");
    MetricAggregate a;
    a.n = values.size();
    a.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(a.n);
    if (a.n > 1) {
        double ss = 0.0;
        for (double x : values) ss += (x - a.mean) * (x - a.mean);
        const double sd = std::sqrt(ss / static_cast<double>(a.n - 1));
        a.ci95_half_width = 1.96 * sd / std::sqrt(static_cast<double>(a.n));
    }
    return a;
}

MetricReport aggregate(const std::vector<MetricRecord>& records) {
    if (records.empty()) throw std::invalid_argument("aggregate: need n >= 1");
    MetricReport report;
    report.records = records;
    std::map<std::string, std::vector<double>> by_metric;
    for (const auto& r : records) by_metric[r.metric].push_back(r.value);
    for (const auto& [name, values] : by_metric) report.aggregates[name] = aggregate_values(values);
    return report;
}

}  // namespace tyche
