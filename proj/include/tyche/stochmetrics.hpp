#pragma once

#include <map>
#include <string>
#include <vector>

#include "tyche/types.hpp"

namespace tyche {

// 2|a n b| / (|a| + |b|); both empty -> 1 by convention.
double dice(const LabelMask& a, const LabelMask& b);

// max over candidates of the rater-averaged Dice, candidates binarized at
// threshold.
double best_candidate_dice(const CandidateBatch& candidates, const RaterSet& raters,
                           double threshold = 0.5);

// Hard-mask GED^2 estimator with d = 1 - dice, diagonal pairs included.
double ged2(const CandidateBatch& candidates, const RaterSet& raters, double threshold = 0.5,
            bool include_diagonal = true);
double ged2_masks(const std::vector<LabelMask>& candidates, const std::vector<LabelMask>& raters,
                  bool include_diagonal = true);

// Mean 1 - dice over unordered distinct candidate pairs. Requires K >= 2.
double sample_diversity(const CandidateBatch& candidates, double threshold = 0.5);

// Duplicates both sets to lcm(K, R), solves the assignment problem that
// minimizes total 1 - dice, returns the mean Dice of the optimal matching.
double hungarian_matching_dice(const CandidateBatch& candidates, const RaterSet& raters,
                               double threshold = 0.5);
double hungarian_matching_dice_masks(const std::vector<LabelMask>& candidates,
                                     const std::vector<LabelMask>& raters);

// Exact solver for the square assignment problem (minimizing cost). Returns
// the column assigned to each row.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

struct MetricRecord {
    std::string episode_id;
    int context_draw = 0;
    std::string metric;
    double value = 0.0;
};

struct MetricAggregate {
    double mean = 0.0;
    double ci95_half_width = 0.0;  // 1.96 * sd / sqrt(n); 0 when n == 1
    size_t n = 0;
};

struct MetricReport {
    std::vector<MetricRecord> records;
    std::map<std::string, MetricAggregate> aggregates;
};

// Normal-approximation mean / 95% CI per metric name.
MetricReport aggregate(const std::vector<MetricRecord>& records);
MetricAggregate aggregate_values(const std::vector<double>& values);

}  // namespace tyche
