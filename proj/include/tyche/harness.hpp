#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tyche/config.hpp"
#include "tyche/ictta.hpp"
#include "tyche/model.hpp"
#include "tyche/stochmetrics.hpp"
#include "tyche/synthdata.hpp"

namespace tyche {

Dataset subset(const Dataset& ds, const std::vector<size_t>& indices);

struct TrainResult {
    std::vector<double> epoch_loss;   // mean training loss per epoch
    std::vector<double> val_metric;   // val best-candidate Dice, when tracked
    int best_epoch = -1;              // epoch restored by early stopping, -1 if unused
    int64_t steps = 0;
};

// One pass over the dev split per epoch; batch-averaged gradients, Adam
// steps, per-epoch checkpoints and loss curve under run_dir (when nonempty).
// Non-finite loss aborts with a diagnostic.
TrainResult train_model(TycheNet& net, const TrainConfig& cfg, const Dataset& ds,
                        const SplitIndices& splits, const std::string& run_dir = "");

// Produces K candidate probability maps for an episode. The seed must be
// independent of K so candidate sets are prefix-nested across K sweeps.
using CandidateGenerator = std::function<CandidateBatch(const Episode&, int k, uint64_t seed)>;

// noise_mode: random (fresh per-candidate noise), zero, constant (candidate
// 0's noise replicated).
CandidateGenerator ts_generator(TycheNet& net, const std::string& noise_mode = "random");

// Zero-noise deterministic forward wrapped in intensity test-time
// augmentation of target + context.
CandidateGenerator ictta_generator(TycheNet& net, const ICTTASettings& settings);

// For each episode of the chosen split: n_context_draws context sets from the
// dev pool, K_infer candidates each, configured metrics per draw; aggregates
// are over per-episode draw means.
MetricReport evaluate_split(const CandidateGenerator& gen, const EvalConfig& cfg,
                            const Dataset& ds, const SplitIndices& splits);

// K-sweep evaluation with exactly prefix-nested candidate sets: one forward
// pass at max(ks) per (episode, draw), metrics computed on candidate prefixes.
std::map<int, MetricReport> evaluate_split_prefixes(const CandidateGenerator& gen,
                                                    const EvalConfig& cfg, const Dataset& ds,
                                                    const SplitIndices& splits,
                                                    const std::vector<int>& ks);

double metric_for_episode(const std::string& metric, const CandidateBatch& candidates,
                          const RaterSet& raters, double threshold);

void write_metric_csv(const std::string& path, const MetricReport& report);
void write_aggregate_json(const std::string& path, const MetricReport& report,
                          const std::string& label = "");

struct StudyPoint {
    double x = 0.0;      // grid value (K, context size, ...)
    std::string label;   // grid label (noise mode, family, ...)
    MetricReport report;
};

// kind: k_sweep | context_sweep | noise_ablation | ictta_family_ablation.
// Numeric kinds read `grid`; categorical kinds read `labels`. Writes per-point
// CSV/JSON plus a line plot with 95% CI bars under out_dir.
std::vector<StudyPoint> run_study(const std::string& kind, const std::vector<int>& grid,
                                  const std::vector<std::string>& labels, TycheNet& net,
                                  const ExperimentConfig& cfg, const Dataset& ds,
                                  const SplitIndices& splits, const std::string& out_dir);

// predict verb: K candidate masks + 16-bit probability PNGs + JSON sidecar.
void predict_to_dir(TycheNet& net, const Episode& episode, const std::string& mode, int k,
                    uint64_t seed, const ExperimentConfig& cfg, const std::string& out_dir);

// Loads target.png plus context/images + context/masks pairs.
Episode load_episode_files(const std::string& target_png, const std::string& context_dir);

}  // namespace tyche
