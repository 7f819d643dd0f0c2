#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tyche/config.hpp"
#include "tyche/harness.hpp"
#include "tyche/model.hpp"
#include "tyche/png_io.hpp"
#include "tyche/synthdata.hpp"

namespace fs = std::filesystem;
using namespace tyche;

namespace {

struct LoadedData {
    Dataset ds;
    SplitIndices splits;
};

LoadedData load_data(const std::string& dir) {
    LoadedData d;
    d.ds = load_dataset(dir, &d.splits);
    return d;
}

std::string config_spec_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["config_hash"] = cfg.hash();
    std::istringstream is(cfg.canonical());
    std::string line;
    while (std::getline(is, line)) {
        size_t eq = line.find('=');
        if (eq != std::string::npos) j["config"][line.substr(0, eq)] = line.substr(eq + 1);
    }
    return j.dump();
}

Dataset build_dataset(const ExperimentConfig& cfg) {
    if (cfg.data.kind == "blobs")
        return make_blob_dataset(cfg.data.blob_spec(), cfg.data.n_examples, cfg.data.seed);
    // shapes: one shape task flattened to single-rater examples
    ShapeTaskParams params;
    auto pairs = generate_shape_task(cfg.data.seed, cfg.data.n_examples, cfg.data.size,
                                     cfg.data.size, &params);
    Dataset ds;
    ds.task_id = "shapes_" + std::to_string(params.shape_class);
    for (size_t i = 0; i < pairs.size(); ++i) {
        Example ex;
        char id[16];
        std::snprintf(id, sizeof(id), "ex%05zu", i);
        ex.id = id;
        ex.image = pairs[i].first;
        ex.raters.masks.push_back(pairs[i].second);
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

int cmd_generate_data(const ExperimentConfig& cfg, const std::string& out) {
    Dataset ds = build_dataset(cfg);
    SplitIndices splits =
        split_dataset(ds.size(), cfg.data.f_dev, cfg.data.f_val, cfg.data.f_test, cfg.data.seed);
    save_dataset(out, ds, splits, config_spec_json(cfg));
    std::cout << "wrote " << ds.size() << " examples (" << splits.dev.size() << " dev, "
              << splits.val.size() << " val, " << splits.test.size() << " test) to " << out << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& data_dir, std::string out) {
    if (out.empty()) out = "runs/" + cfg.hash();
    LoadedData d = load_data(data_dir);
    TycheNet net(cfg.model, cfg.train.seed);
    std::cout << "run dir: " << out << "\nparameters: " << net.parameter_count() << "\n";
    TrainResult res = train_model(net, cfg.train, d.ds, d.splits, out);
    if (!res.epoch_loss.empty())
        std::cout << "train loss " << res.epoch_loss.front() << " -> " << res.epoch_loss.back()
                  << " over " << res.epoch_loss.size() << " epochs (" << res.steps << " steps)\n";
    if (res.best_epoch > 0) std::cout << "early stopping restored epoch " << res.best_epoch << "\n";
    std::ofstream cfg_out(out + "/config.txt");
    cfg_out << cfg.canonical();
    std::cout << "checkpoint: " << out << "/model.ckpt\n";
    return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& data_dir,
                 const std::string& checkpoint, const std::string& mode, std::string out) {
    if (out.empty()) out = "runs/" + cfg.hash() + "/eval";
    LoadedData d = load_data(data_dir);
    TycheNet net = TycheNet::load_checkpoint(checkpoint);
    CandidateGenerator gen = mode == "ictta" ? ictta_generator(net, cfg.ictta)
                                             : ts_generator(net, cfg.eval.noise_mode);
    MetricReport rep = evaluate_split(gen, cfg.eval, d.ds, d.splits);
    fs::create_directories(out);
    write_metric_csv(out + "/metrics.csv", rep);
    write_aggregate_json(out + "/aggregates.json", rep, cfg.eval.split);
    for (const auto& [m, agg] : rep.aggregates)
        std::cout << m << ": " << agg.mean << " +/- " << agg.ci95_half_width << " (n=" << agg.n
                  << ")\n";
    std::cout << "report: " << out << "/metrics.csv\n";
    return 0;
}

int cmd_predict(const ExperimentConfig& cfg, const std::string& checkpoint,
                const std::string& target, const std::string& context_dir,
                const std::string& mode, int k, uint64_t seed, const std::string& out) {
    TycheNet net = TycheNet::load_checkpoint(checkpoint);
    Episode ep = load_episode_files(target, context_dir);
    predict_to_dir(net, ep, mode, k, seed, cfg, out);
    std::cout << "wrote " << k << " candidates to " << out << "\n";
    return 0;
}

int cmd_study(const ExperimentConfig& cfg, const std::string& data_dir,
              const std::string& checkpoint, const std::string& kind,
              const std::vector<int>& grid, const std::vector<std::string>& labels,
              std::string out) {
    if (out.empty()) out = "runs/" + cfg.hash() + "/study";
    LoadedData d = load_data(data_dir);
    TycheNet net = TycheNet::load_checkpoint(checkpoint);
    auto points = run_study(kind, grid, labels, net, cfg, d.ds, d.splits, out);
    for (const auto& p : points) {
        std::cout << kind << " " << p.label << ":";
        for (const auto& [m, agg] : p.report.aggregates) std::cout << " " << m << "=" << agg.mean;
        std::cout << "\n";
    }
    std::cout << "study outputs: " << out << "\n";
    return 0;
}

int cmd_report(const std::string& run_dir) {
    bool found = false;
    for (const auto& e : fs::recursive_directory_iterator(run_dir)) {
        if (e.path().extension() != ".json") continue;
        std::ifstream f(e.path());
        std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        std::cout << "== " << e.path().string() << " ==\n" << content << "\n";
        found = true;
    }
    std::string curve = run_dir + "/loss_curve.csv";
    if (fs::exists(curve)) {
        std::ifstream f(curve);
        std::cout << "== " << curve << " ==\n" << f.rdbuf() << "\n";
        found = true;
    }
    if (!found) throw std::runtime_error("no reports found under " + run_dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tychekit: stochastic in-context segmentation toolkit"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, checkpoint, target, context_dir;
    std::string mode = "ts", kind = "k_sweep", grid_str = "1,2,4,8", labels_str;
    int k = 8;
    uint64_t seed = 0;

    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--help-keys") {
            for (const auto& [key, doc] : tyche::config_key_docs())
                std::printf("%-24s %s\n", key.c_str(), doc.c_str());
            return 0;
        }
    }
    app.add_flag("--help-keys", "list all config keys and exit");

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file")->required();
    };

    auto* gen = app.add_subcommand("generate-data", "generate a synthetic dataset");
    add_config(gen);
    gen->add_option("--out", out_dir, "output dataset directory")->required();

    auto* tr = app.add_subcommand("train", "train a model");
    add_config(tr);
    tr->add_option("--data", data_dir, "dataset directory")->required();
    tr->add_option("--out", out_dir, "run directory (default runs/<config hash>)");

    auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint");
    add_config(ev);
    ev->add_option("--data", data_dir, "dataset directory")->required();
    ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    ev->add_option("--mode", mode, "ts | ictta (default ts)");
    ev->add_option("--out", out_dir, "report directory");

    auto* pr = app.add_subcommand("predict", "predict candidates for one episode");
    add_config(pr);
    pr->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    pr->add_option("--target", target, "target image PNG")->required();
    pr->add_option("--context", context_dir, "context directory with images/ and masks/")
        ->required();
    pr->add_option("--mode", mode, "ts | zero | ictta (default ts)");
    pr->add_option("--k", k, "number of candidates (default 8)");
    pr->add_option("--seed", seed, "prediction seed (default 0)");
    pr->add_option("--out", out_dir, "output directory")->required();

    auto* st = app.add_subcommand("study", "run an analysis sweep");
    add_config(st);
    st->add_option("--data", data_dir, "dataset directory")->required();
    st->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    st->add_option("--kind", kind, "k_sweep | context_sweep | noise_ablation | ictta_family_ablation");
    st->add_option("--grid", grid_str, "comma list of grid values (default 1,2,4,8)");
    st->add_option("--labels", labels_str, "comma list of labels for categorical studies");
    st->add_option("--out", out_dir, "study output directory");

    auto* rp = app.add_subcommand("report", "print the reports of a run directory");
    rp->add_option("--run", out_dir, "run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (rp->parsed()) return cmd_report(out_dir);
        ExperimentConfig cfg = load_config(config_path);
        if (gen->parsed()) return cmd_generate_data(cfg, out_dir);
        if (tr->parsed()) return cmd_train(cfg, data_dir, out_dir);
        if (ev->parsed()) return cmd_evaluate(cfg, data_dir, checkpoint, mode, out_dir);
        if (pr->parsed())
            return cmd_predict(cfg, checkpoint, target, context_dir, mode, k, seed, out_dir);
        if (st->parsed()) {
            std::vector<int> grid;
            std::vector<std::string> labels;
            {
                std::stringstream ss(grid_str);
                std::string item;
                while (std::getline(ss, item, ','))
                    if (!item.empty()) grid.push_back(std::stoi(item));
            }
            if (!labels_str.empty()) {
                std::stringstream ss(labels_str);
                std::string item;
                while (std::getline(ss, item, ','))
                    if (!item.empty()) labels.push_back(item);
            }
            return cmd_study(cfg, data_dir, checkpoint, kind, grid, labels, out_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
