#pragma once

#include <map>
#include <string>
#include <vector>

#include "tyche/model.hpp"
#include "tyche/objective.hpp"
#include "tyche/synthdata.hpp"

namespace tyche {

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_episodes = 4;
    int context_size = 16;
    int k_train = 8;
    int epochs = 30;
    uint64_t seed = 0;
    std::string aug_family = "none";  // none | in_task | task_level | in_task,task_level
    std::string loss_kind = "best_candidate";  // best_candidate | ged2 | plain
    LossWeights weights;
    int early_stop_patience = 0;  // 0 disables early stopping

    void validate() const;
};

struct EvalConfig {
    int context_size = 16;
    int k_infer = 8;
    int n_context_draws = 5;
    double threshold = 0.5;
    uint64_t seed = 0;
    std::vector<std::string> metrics = {"dice", "best_candidate_dice", "ged2",
                                        "sample_diversity", "hungarian_dice"};
    std::string noise_mode = "random";  // random | zero | constant
    std::string split = "test";         // dev | val | test

    void validate() const;
};

struct DataConfig {
    std::string kind = "blobs";  // blobs | shapes
    int size = 32;
    int n_examples = 400;
    int n_raters = 4;
    double pixel_noise_std = 0.05;
    double f_dev = 0.6, f_val = 0.2, f_test = 0.2;
    uint64_t seed = 0;

    BlobSpec blob_spec() const;
};

struct ICTTASettings {
    std::string family = "ictta";
    bool include_identity = true;
    bool resample_per_image = false;
};

// Whole-experiment configuration, parsed from a flat key=value file.
struct ExperimentConfig {
    DataConfig data;
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;
    ICTTASettings ictta;

    void validate() const;

    // Stable content hash used to name run directories.
    std::string hash() const;
    std::string canonical() const;
};

// Parses `key = value` lines ('#' comments). Unknown keys are rejected.
// The TYCHEKIT_SEED environment variable, when set, overrides every seed.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv);

// All recognized keys with their documentation (used by `--help-keys`).
const std::map<std::string, std::string>& config_key_docs();

}  // namespace tyche
