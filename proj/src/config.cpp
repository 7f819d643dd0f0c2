#include "tyche/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tyche/augment.hpp"

namespace tyche {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("train.learning_rate must be > 0");
    if (batch_episodes < 1) throw std::invalid_argument("train.batch_episodes must be >= 1");
    if (context_size < 1) throw std::invalid_argument("train.context_size must be >= 1");
    if (k_train < 1) throw std::invalid_argument("train.k_train must be >= 1");
    if (epochs < 0) throw std::invalid_argument("train.epochs must be >= 0");
    if (early_stop_patience < 0) throw std::invalid_argument("train.early_stop_patience must be >= 0");
    if (loss_kind != "best_candidate" && loss_kind != "ged2" && loss_kind != "plain")
        throw std::invalid_argument("train.loss must be best_candidate, ged2 or plain");
    weights.validate();
}

void EvalConfig::validate() const {
    if (context_size < 1) throw std::invalid_argument("eval.context_size must be >= 1");
    if (k_infer < 1) throw std::invalid_argument("eval.k_infer must be >= 1");
    if (n_context_draws < 1) throw std::invalid_argument("eval.n_context_draws must be >= 1");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("eval.threshold must be in (0,1)");
    if (noise_mode != "random" && noise_mode != "zero" && noise_mode != "constant")
        throw std::invalid_argument("eval.noise_mode must be random, zero or constant");
    if (split != "dev" && split != "val" && split != "test")
        throw std::invalid_argument("eval.split must be dev, val or test");
    if (metrics.empty()) throw std::invalid_argument("eval.metrics must not be empty");
}

BlobSpec DataConfig::blob_spec() const {
    BlobSpec spec = default_blob_spec(size, seed);
    spec.n_raters = n_raters;
    spec.pixel_noise_std = pixel_noise_std;
    return spec;
}

void ExperimentConfig::validate() const {
    if (data.kind != "blobs" && data.kind != "shapes")
        throw std::invalid_argument("data.kind must be blobs or shapes");
    if (data.n_examples < 3) throw std::invalid_argument("data.n_examples must be >= 3");
    data.blob_spec().validate();
    model.validate();
    train.validate();
    eval.validate();
    if (ictta.family != "none") {
        AugmentationSpec f = augmentation_family(ictta.family);
        if (!f.intensity_only())
            throw std::invalid_argument("ictta.family must be intensity-only");
    }
}

namespace {

const std::map<std::string, std::string> kKeyDocs = {
    {"data.kind", "dataset generator: blobs | shapes (default blobs)"},
    {"data.size", "square image side in pixels (default 32)"},
    {"data.n_examples", "number of generated examples (default 400)"},
    {"data.n_raters", "raters per example (default 4)"},
    {"data.pixel_noise_std", "additive image noise std (default 0.05)"},
    {"data.f_dev", "dev split fraction (default 0.6)"},
    {"data.f_val", "val split fraction (default 0.2)"},
    {"data.f_test", "test split fraction (default 0.2)"},
    {"data.seed", "dataset seed (default 0)"},
    {"model.depth", "UNet depth in set-block levels (default 3)"},
    {"model.features", "feature channels per block (default 16)"},
    {"model.kernel_size", "conv kernel size (default 3)"},
    {"model.leaky_slope", "LeakyReLU negative slope (default 0.01)"},
    {"model.noise_channels", "noise channels per candidate (default 1)"},
    {"model.eq7_from_input", "context update reads raw inputs instead of interactions (default false)"},
    {"model.symmetric_decoder", "extra full-resolution decoder block (default false)"},
    {"train.learning_rate", "Adam learning rate (default 1e-4)"},
    {"train.batch_episodes", "episodes per optimizer step (default 4)"},
    {"train.context_size", "training context size (default 16)"},
    {"train.k_train", "candidates per episode during training (default 8)"},
    {"train.epochs", "training epochs (default 30)"},
    {"train.seed", "training seed (default 0)"},
    {"train.aug_family", "comma list of none|in_task|task_level|light|heavy (default none)"},
    {"train.loss", "best_candidate | ged2 | plain (default best_candidate)"},
    {"train.w_dice", "soft-Dice weight in the combined loss (default 1)"},
    {"train.w_ce", "cross-entropy weight in the combined loss (default 1)"},
    {"train.early_stop_patience", "epochs without val improvement before stop; 0 disables (default 0)"},
    {"eval.context_size", "evaluation context size (default 16)"},
    {"eval.k_infer", "candidates per prediction (default 8)"},
    {"eval.n_context_draws", "context sets per test episode (default 5)"},
    {"eval.threshold", "binarization threshold (default 0.5)"},
    {"eval.seed", "evaluation seed (default 0)"},
    {"eval.metrics", "comma list of dice,best_candidate_dice,ged2,sample_diversity,hungarian_dice"},
    {"eval.noise_mode", "random | zero | constant (default random)"},
    {"eval.split", "dev | val | test (default test)"},
    {"ictta.family", "intensity augmentation family for ICTTA (default ictta)"},
    {"ictta.include_identity", "keep the unaugmented prediction as candidate 0 (default true)"},
    {"ictta.resample_per_image", "fresh transform per image instead of shared (default false)"},
};

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config key " + key + ": expected a boolean, got '" + v + "'");
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": expected an integer, got '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": expected an unsigned integer, got '" +
                                    v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": expected a number, got '" + v + "'");
    }
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

const std::map<std::string, std::string>& config_key_docs() { return kKeyDocs; }

ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv) {
    ExperimentConfig c;
    // Desk-scale defaults; the paper-scale model defaults are overridden here.
    c.model.depth = 3;
    c.model.features = 16;
    c.model.input_h = c.model.input_w = c.data.size;

    for (const auto& [key, v] : kv) {
        if (!kKeyDocs.count(key))
            throw std::invalid_argument("unknown config key '" + key +
                                        "' (see --help-keys for the full list)");
        if (key == "data.kind") c.data.kind = v;
        else if (key == "data.size") c.data.size = parse_int(key, v);
        else if (key == "data.n_examples") c.data.n_examples = parse_int(key, v);
        else if (key == "data.n_raters") c.data.n_raters = parse_int(key, v);
        else if (key == "data.pixel_noise_std") c.data.pixel_noise_std = parse_double(key, v);
        else if (key == "data.f_dev") c.data.f_dev = parse_double(key, v);
        else if (key == "data.f_val") c.data.f_val = parse_double(key, v);
        else if (key == "data.f_test") c.data.f_test = parse_double(key, v);
        else if (key == "data.seed") c.data.seed = parse_u64(key, v);
        else if (key == "model.depth") c.model.depth = parse_int(key, v);
        else if (key == "model.features") c.model.features = parse_int(key, v);
        else if (key == "model.kernel_size") c.model.kernel_size = parse_int(key, v);
        else if (key == "model.leaky_slope") c.model.leaky_slope = parse_double(key, v);
        else if (key == "model.noise_channels") c.model.noise_channels = parse_int(key, v);
        else if (key == "model.eq7_from_input") c.model.eq7_from_input = parse_bool(key, v);
        else if (key == "model.symmetric_decoder") c.model.symmetric_decoder = parse_bool(key, v);
        else if (key == "train.learning_rate") c.train.learning_rate = parse_double(key, v);
        else if (key == "train.batch_episodes") c.train.batch_episodes = parse_int(key, v);
        else if (key == "train.context_size") c.train.context_size = parse_int(key, v);
        else if (key == "train.k_train") c.train.k_train = parse_int(key, v);
        else if (key == "train.epochs") c.train.epochs = parse_int(key, v);
        else if (key == "train.seed") c.train.seed = parse_u64(key, v);
        else if (key == "train.aug_family") c.train.aug_family = v;
        else if (key == "train.loss") c.train.loss_kind = v;
        else if (key == "train.w_dice") c.train.weights.w_dice = parse_double(key, v);
        else if (key == "train.w_ce") c.train.weights.w_ce = parse_double(key, v);
        else if (key == "train.early_stop_patience") c.train.early_stop_patience = parse_int(key, v);
        else if (key == "eval.context_size") c.eval.context_size = parse_int(key, v);
        else if (key == "eval.k_infer") c.eval.k_infer = parse_int(key, v);
        else if (key == "eval.n_context_draws") c.eval.n_context_draws = parse_int(key, v);
        else if (key == "eval.threshold") c.eval.threshold = parse_double(key, v);
        else if (key == "eval.seed") c.eval.seed = parse_u64(key, v);
        else if (key == "eval.metrics") c.eval.metrics = split_list(v);
        else if (key == "eval.noise_mode") c.eval.noise_mode = v;
        else if (key == "eval.split") c.eval.split = v;
        else if (key == "ictta.family") c.ictta.family = v;
        else if (key == "ictta.include_identity") c.ictta.include_identity = parse_bool(key, v);
        else if (key == "ictta.resample_per_image") c.ictta.resample_per_image = parse_bool(key, v);
    }
    c.model.input_h = c.model.input_w = c.data.size;
    c.model.k_train = c.train.k_train;

    if (const char* env = std::getenv("TYCHEKIT_SEED")) {
        uint64_t s = parse_u64("TYCHEKIT_SEED", env);
        c.data.seed = s;
        c.train.seed = s;
        c.eval.seed = s;
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 'key = value', got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
        if (kv.count(key))
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv[key] = val;
    }
    return config_from_map(kv);
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "data.kind=" << data.kind << "\ndata.size=" << data.size
       << "\ndata.n_examples=" << data.n_examples << "\ndata.n_raters=" << data.n_raters
       << "\ndata.pixel_noise_std=" << data.pixel_noise_std << "\ndata.f_dev=" << data.f_dev
       << "\ndata.f_val=" << data.f_val << "\ndata.f_test=" << data.f_test
       << "\ndata.seed=" << data.seed << "\nmodel.depth=" << model.depth
       << "\nmodel.features=" << model.features << "\nmodel.kernel_size=" << model.kernel_size
       << "\nmodel.leaky_slope=" << model.leaky_slope
       << "\nmodel.noise_channels=" << model.noise_channels
       << "\nmodel.eq7_from_input=" << model.eq7_from_input
       << "\nmodel.symmetric_decoder=" << model.symmetric_decoder
       << "\ntrain.learning_rate=" << train.learning_rate
       << "\ntrain.batch_episodes=" << train.batch_episodes
       << "\ntrain.context_size=" << train.context_size << "\ntrain.k_train=" << train.k_train
       << "\ntrain.epochs=" << train.epochs << "\ntrain.seed=" << train.seed
       << "\ntrain.aug_family=" << train.aug_family << "\ntrain.loss=" << train.loss_kind
       << "\ntrain.w_dice=" << train.weights.w_dice << "\ntrain.w_ce=" << train.weights.w_ce
       << "\ntrain.early_stop_patience=" << train.early_stop_patience
       << "\neval.context_size=" << eval.context_size << "\neval.k_infer=" << eval.k_infer
       << "\neval.n_context_draws=" << eval.n_context_draws
       << "\neval.threshold=" << eval.threshold << "\neval.seed=" << eval.seed
       << "\neval.noise_mode=" << eval.noise_mode << "\neval.split=" << eval.split
       << "\nictta.family=" << ictta.family
       << "\nictta.include_identity=" << ictta.include_identity
       << "\nictta.resample_per_image=" << ictta.resample_per_image << "\neval.metrics=";
    for (size_t i = 0; i < eval.metrics.size(); ++i)
        os << (i ? "," : "") << eval.metrics[i];
    os << "\n";
    return os.str();
}

std::string ExperimentConfig::hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char ch : canonical()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace tyche
