#include "tyche/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <json.hpp>

#include "tyche/augment.hpp"
#include "tyche/objective.hpp"
#include "tyche/png_io.hpp"
#include "tyche/plot.hpp"
#include "tyche/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace tyche {

namespace {

std::string fmt_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_comma(const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start <= s.size()) {
        size_t end = s.find(',', start);
        if (end == std::string::npos) end = s.size();
        std::string item = s.substr(start, end - start);
        if (!item.empty()) out.push_back(item);
        start = end + 1;
    }
    return out;
}

// Applies one realized transform to every item of the episode, including all
// rater masks of the target.
void apply_to_episode(Episode& ep, const SampledTransform& t) {
    GrayImage new_target;
    if (ep.raters.size() == 0) {
        new_target = apply_image_only(t, ep.target);
    } else {
        for (size_t r = 0; r < ep.raters.size(); ++r) {
            auto [img, m] = apply(t, ep.target, ep.raters[r]);
            ep.raters[r] = *m;
            new_target = std::move(img);
        }
    }
    ep.target = std::move(new_target);
    for (auto& c : ep.context) {
        auto [img, m] = apply(t, c.image, c.mask);
        c.image = std::move(img);
        c.mask = *m;
    }
}

Episode augment_training_episode(const Episode& ep, const std::vector<AugmentationSpec>& per_item,
                                 const std::vector<AugmentationSpec>& per_episode, uint64_t seed) {
    Episode out = ep;
    int stream = 0;
    for (const auto& spec : per_episode)
        apply_to_episode(out, sample_transform(spec, seed_key(seed, 0xA9E5, stream++)));
    for (const auto& spec : per_item) {
        SampledTransform t0 = sample_transform(spec, seed_key(seed, 0xA175, stream, 0));
        if (out.raters.size() == 0) {
            out.target = apply_image_only(t0, out.target);
        } else {
            GrayImage img;
            for (size_t r = 0; r < out.raters.size(); ++r) {
                auto [i2, m2] = apply(t0, out.target, out.raters[r]);
                out.raters[r] = *m2;
                img = std::move(i2);
            }
            out.target = std::move(img);
        }
        for (size_t j = 0; j < out.context.size(); ++j) {
            SampledTransform tj = sample_transform(spec, seed_key(seed, 0xA175, stream, j + 1));
            auto [img, m] = apply(tj, out.context[j].image, out.context[j].mask);
            out.context[j].image = std::move(img);
            out.context[j].mask = *m;
        }
        ++stream;
    }
    return out;
}

void write_loss_curve(const std::string& path, const TrainResult& res) {
    std::ofstream f(path);
    f << "epoch,train_loss" << (res.val_metric.empty() ? "" : ",val_best_candidate_dice") << "\n";
    for (size_t e = 0; e < res.epoch_loss.size(); ++e) {
        f << e + 1 << "," << fmt_value(res.epoch_loss[e]);
        if (e < res.val_metric.size()) f << "," << fmt_value(res.val_metric[e]);
        f << "\n";
    }
}

}  // namespace

Dataset subset(const Dataset& ds, const std::vector<size_t>& indices) {
    Dataset out;
    out.task_id = ds.task_id;
    out.examples.reserve(indices.size());
    for (size_t i : indices) {
        if (i >= ds.size()) throw std::out_of_range("subset: index out of range");
        out.examples.push_back(ds.examples[i]);
    }
    return out;
}

TrainResult train_model(TycheNet& net, const TrainConfig& cfg, const Dataset& ds,
                        const SplitIndices& splits, const std::string& run_dir) {
    cfg.validate();
    Dataset dev = subset(ds, splits.dev);
    if (static_cast<int>(dev.size()) < cfg.context_size + 1)
        throw std::invalid_argument("train: dev split must have at least context_size+1 examples");

    std::vector<AugmentationSpec> per_item, per_episode;
    for (const std::string& tag : split_comma(cfg.aug_family)) {
        if (tag == "none") continue;
        AugmentationSpec spec = augmentation_family(tag);
        (tag == "task_level" ? per_episode : per_item).push_back(std::move(spec));
    }

    AdamOptimizer opt(net.parameters(), cfg.learning_rate);
    TrainResult res;
    if (!run_dir.empty()) fs::create_directories(run_dir);

    std::vector<Tensor> best_params;
    double best_val = -1.0;
    int epochs_since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng perm_rng(seed_key(cfg.seed, 0xE90C, epoch));
        std::vector<size_t> order = perm_rng.permutation(dev.size());
        double loss_sum = 0.0;
        int in_batch = 0;
        opt.zero_grad();

        for (size_t i = 0; i < order.size(); ++i) {
            uint64_t es = seed_key(cfg.seed, 0x7124, epoch, i);
            Episode ep = make_episode(dev, order[i], dev, cfg.context_size, es);
            if (!per_item.empty() || !per_episode.empty())
                ep = augment_training_episode(ep, per_item, per_episode, seed_key(es, 10));

            Rng rater_rng(seed_key(es, 11));
            const LabelMask& truth = ep.raters[rater_rng.uniform_int(ep.raters.size())];
            std::vector<Tensor> noise =
                sample_noise(cfg.k_train, net.config().noise_channels, ep.target.h, ep.target.w,
                             seed_key(es, 12));

            ForwardPass fp = net.forward(ep.target, ep.context, noise);
            ad::Graph& g = *fp.graph;
            ad::Node* loss = nullptr;
            if (cfg.loss_kind == "best_candidate") {
                loss = best_candidate_loss(g, fp.probs, truth, cfg.weights).total;
            } else if (cfg.loss_kind == "ged2") {
                loss = ged2_loss(g, fp.probs, ep.raters);
            } else {
                std::vector<ad::Node*> parts;
                for (ad::Node* p : fp.probs) parts.push_back(combined_dice_ce(g, p, truth, cfg.weights));
                loss = g.affine_sum(parts, std::vector<double>(parts.size(), 1.0 / parts.size()), 0.0);
            }

            double lv = loss->scalar();
            if (!std::isfinite(lv))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch + 1) + ", episode " +
                                         std::to_string(i) + " (diverged; lower the learning rate)");
            loss_sum += lv;

            g.backward(g.affine_sum({loss}, {1.0 / cfg.batch_episodes}, 0.0));
            if (++in_batch == cfg.batch_episodes || i + 1 == order.size()) {
                opt.step();
                opt.zero_grad();
                in_batch = 0;
            }
        }
        res.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));

        if (!run_dir.empty()) {
            char name[48];
            std::snprintf(name, sizeof(name), "/ckpt_epoch_%03d.bin", epoch + 1);
            net.save_checkpoint(run_dir + name, opt.steps(), epoch + 1);
            write_loss_curve(run_dir + "/loss_curve.csv", res);
        }

        if (cfg.early_stop_patience > 0) {
            EvalConfig vc;
            vc.context_size = cfg.context_size;
            vc.k_infer = cfg.k_train;
            vc.n_context_draws = 1;
            vc.seed = seed_key(cfg.seed, 0x7A17);
            vc.split = "val";
            vc.metrics = {"best_candidate_dice"};
            MetricReport rep = evaluate_split(ts_generator(net), vc, ds, splits);
            double v = rep.aggregates.at("best_candidate_dice").mean;
            res.val_metric.push_back(v);
            if (v > best_val) {
                best_val = v;
                res.best_epoch = epoch + 1;
                best_params.clear();
                for (ad::Param* p : net.parameters()) best_params.push_back(p->value);
                epochs_since_best = 0;
            } else if (++epochs_since_best >= cfg.early_stop_patience) {
                break;
            }
        }
    }

    if (!best_params.empty()) {
        auto params = net.parameters();
        for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
    }
    res.steps = opt.steps();
    if (!run_dir.empty()) {
        net.save_checkpoint(run_dir + "/model.ckpt", opt.steps(),
                            static_cast<int64_t>(res.epoch_loss.size()));
        write_loss_curve(run_dir + "/loss_curve.csv", res);
    }
    return res;
}

CandidateGenerator ts_generator(TycheNet& net, const std::string& noise_mode) {
    if (noise_mode != "random" && noise_mode != "zero" && noise_mode != "constant")
        throw std::invalid_argument("ts_generator: unknown noise mode '" + noise_mode + "'");
    return [&net, noise_mode](const Episode& ep, int k, uint64_t seed) {
        const int ch = net.config().noise_channels;
        std::vector<Tensor> noise;
        if (noise_mode == "zero") {
            noise.assign(k, Tensor(ch, ep.target.h, ep.target.w));
        } else {
            noise = sample_noise(k, ch, ep.target.h, ep.target.w, seed);
            if (noise_mode == "constant")
                for (int i = 1; i < k; ++i) noise[i] = noise[0];
        }
        return net.predict(ep.target, ep.context, noise);
    };
}

CandidateGenerator ictta_generator(TycheNet& net, const ICTTASettings& settings) {
    DeterministicPredictor base = [&net](const GrayImage& target,
                                         const std::vector<ContextPair>& context) {
        std::vector<Tensor> zero(1, Tensor(net.config().noise_channels, target.h, target.w));
        return net.predict(target, context, zero).maps[0];
    };
    return [base, settings](const Episode& ep, int k, uint64_t seed) {
        ICTTAConfig c;
        c.k = k;
        c.family = settings.family;
        c.include_identity = settings.include_identity;
        c.resample_per_image = settings.resample_per_image;
        c.base_seed = seed;
        return predict_stochastic(base, ep, c);
    };
}

double metric_for_episode(const std::string& metric, const CandidateBatch& candidates,
                          const RaterSet& raters, double threshold) {
    if (metric == "dice") {
        if (raters.size() == 0) return std::nan("");
        double sum = 0.0;
        for (const GrayImage& c : candidates.maps) {
            LabelMask cm = binarize(c, threshold);
            double rsum = 0.0;
            for (const LabelMask& r : raters.masks) rsum += dice(cm, r);
            sum += rsum / static_cast<double>(raters.size());
        }
        return sum / static_cast<double>(candidates.size());
    }
    if (metric == "best_candidate_dice") {
        if (raters.size() == 0) return std::nan("");
        return best_candidate_dice(candidates, raters, threshold);
    }
    if (metric == "ged2") {
        if (raters.size() == 0) return std::nan("");
        return ged2(candidates, raters, threshold);
    }
    if (metric == "sample_diversity") {
        if (candidates.size() < 2) return std::nan("");
        return sample_diversity(candidates, threshold);
    }
    if (metric == "hungarian_dice") {
        if (raters.size() == 0) return std::nan("");
        return hungarian_matching_dice(candidates, raters, threshold);
    }
    throw std::invalid_argument("unknown metric '" + metric + "'");
}

MetricReport evaluate_split(const CandidateGenerator& gen, const EvalConfig& cfg,
                            const Dataset& ds, const SplitIndices& splits) {
    cfg.validate();
    const std::vector<size_t>& idx =
        cfg.split == "dev" ? splits.dev : cfg.split == "val" ? splits.val : splits.test;
    if (idx.empty()) throw std::invalid_argument("evaluate: split '" + cfg.split + "' is empty");
    Dataset pool = subset(ds, idx);
    Dataset ctx_pool = subset(ds, splits.dev);
    if (static_cast<int>(ctx_pool.size()) < cfg.context_size + (cfg.split == "dev" ? 1 : 0))
        throw std::invalid_argument("evaluate: dev split too small for the requested context size");

    MetricReport report;
    std::map<std::string, std::vector<double>> episode_means;
    std::set<std::string> warned;

    for (size_t e = 0; e < pool.size(); ++e) {
        std::map<std::string, std::vector<double>> draw_values;
        for (int d = 0; d < cfg.n_context_draws; ++d) {
            Episode ep = make_episode(pool, e, ctx_pool, cfg.context_size,
                                      seed_key(cfg.seed, 0xE415, e, d));
            CandidateBatch cb = gen(ep, cfg.k_infer, seed_key(cfg.seed, 0xCA4D, e, d));
            for (const std::string& m : cfg.metrics) {
                double v = metric_for_episode(m, cb, ep.raters, cfg.threshold);
                if (std::isnan(v)) {
                    if (warned.insert(m).second)
                        std::cerr << "warning: metric '" << m
                                  << "' skipped (insufficient raters or candidates)\n";
                    continue;
                }
                report.records.push_back({pool.examples[e].id, d, m, v});
                draw_values[m].push_back(v);
            }
        }
        for (const auto& [m, vals] : draw_values) {
            double mean = 0.0;
            for (double v : vals) mean += v;
            episode_means[m].push_back(mean / static_cast<double>(vals.size()));
        }
    }
    for (const auto& [m, vals] : episode_means) report.aggregates[m] = aggregate_values(vals);
    return report;
}

std::map<int, MetricReport> evaluate_split_prefixes(const CandidateGenerator& gen,
                                                    const EvalConfig& cfg, const Dataset& ds,
                                                    const SplitIndices& splits,
                                                    const std::vector<int>& ks) {
    EvalConfig base = cfg;
    base.k_infer = *std::max_element(ks.begin(), ks.end());
    base.validate();
    for (int k : ks)
        if (k < 1 || k > base.k_infer) throw std::invalid_argument("evaluate: bad K grid value");
    const std::vector<size_t>& idx =
        base.split == "dev" ? splits.dev : base.split == "val" ? splits.val : splits.test;
    if (idx.empty()) throw std::invalid_argument("evaluate: split '" + base.split + "' is empty");
    Dataset pool = subset(ds, idx);
    Dataset ctx_pool = subset(ds, splits.dev);

    std::map<int, MetricReport> reports;
    std::map<int, std::map<std::string, std::vector<double>>> episode_means;
    for (size_t e = 0; e < pool.size(); ++e) {
        std::map<int, std::map<std::string, std::vector<double>>> draw_values;
        for (int d = 0; d < base.n_context_draws; ++d) {
            Episode ep = make_episode(pool, e, ctx_pool, base.context_size,
                                      seed_key(base.seed, 0xE415, e, d));
            CandidateBatch full = gen(ep, base.k_infer, seed_key(base.seed, 0xCA4D, e, d));
            for (int k : ks) {
                CandidateBatch prefix;
                prefix.maps.assign(full.maps.begin(), full.maps.begin() + k);
                for (const std::string& m : base.metrics) {
                    if (m == "sample_diversity" && k < 2) continue;
                    double v = metric_for_episode(m, prefix, ep.raters, base.threshold);
                    if (std::isnan(v)) continue;
                    reports[k].records.push_back({pool.examples[e].id, d, m, v});
                    draw_values[k][m].push_back(v);
                }
            }
        }
        for (const auto& [k, per_metric] : draw_values)
            for (const auto& [m, vals] : per_metric) {
                double mean = 0.0;
                for (double v : vals) mean += v;
                episode_means[k][m].push_back(mean / static_cast<double>(vals.size()));
            }
    }
    for (const auto& [k, per_metric] : episode_means)
        for (const auto& [m, vals] : per_metric) reports[k].aggregates[m] = aggregate_values(vals);
    return reports;
}

void write_metric_csv(const std::string& path, const MetricReport& report) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "# tyche-metrics schema v1\n";
    f << "episode_id,context_draw,metric,value\n";
    for (const MetricRecord& r : report.records)
        f << r.episode_id << "," << r.context_draw << "," << r.metric << "," << fmt_value(r.value)
          << "\n";
}

void write_aggregate_json(const std::string& path, const MetricReport& report,
                          const std::string& label) {
    json j;
    if (!label.empty()) j["label"] = label;
    json metrics = json::object();
    for (const auto& [m, agg] : report.aggregates) {
        metrics[m] = {{"mean", agg.mean}, {"ci95_half_width", agg.ci95_half_width}, {"n", agg.n}};
    }
    j["metrics"] = metrics;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump(2) << "\n";
}

std::vector<StudyPoint> run_study(const std::string& kind, const std::vector<int>& grid,
                                  const std::vector<std::string>& labels, TycheNet& net,
                                  const ExperimentConfig& cfg, const Dataset& ds,
                                  const SplitIndices& splits, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<StudyPoint> points;

    auto eval_point = [&](const EvalConfig& ec, const CandidateGenerator& gen, double x,
                          const std::string& label) {
        StudyPoint p;
        p.x = x;
        p.label = label;
        p.report = evaluate_split(gen, ec, ds, splits);
        write_metric_csv(out_dir + "/" + kind + "_" + label + ".csv", p.report);
        write_aggregate_json(out_dir + "/" + kind + "_" + label + ".json", p.report, label);
        points.push_back(std::move(p));
    };

    if (kind == "k_sweep") {
        if (grid.empty()) throw std::invalid_argument("study: k_sweep needs a grid of K values");
        EvalConfig ec = cfg.eval;
        ec.k_infer = *std::max_element(grid.begin(), grid.end());
        auto reports =
            evaluate_split_prefixes(ts_generator(net, cfg.eval.noise_mode), ec, ds, splits, grid);
        for (int kv : grid) {
            StudyPoint p;
            p.x = kv;
            p.label = "k" + std::to_string(kv);
            p.report = std::move(reports.at(kv));
            write_metric_csv(out_dir + "/" + kind + "_" + p.label + ".csv", p.report);
            write_aggregate_json(out_dir + "/" + kind + "_" + p.label + ".json", p.report, p.label);
            points.push_back(std::move(p));
        }
    } else if (kind == "context_sweep") {
        if (grid.empty()) throw std::invalid_argument("study: context_sweep needs a grid");
        for (int s : grid) {
            EvalConfig ec = cfg.eval;
            ec.context_size = s;
            eval_point(ec, ts_generator(net, cfg.eval.noise_mode), s, "s" + std::to_string(s));
        }
    } else if (kind == "noise_ablation") {
        std::vector<std::string> modes = labels.empty()
                                             ? std::vector<std::string>{"zero", "constant", "random"}
                                             : labels;
        for (size_t i = 0; i < modes.size(); ++i)
            eval_point(cfg.eval, ts_generator(net, modes[i]), static_cast<double>(i), modes[i]);
    } else if (kind == "ictta_family_ablation") {
        std::vector<std::string> fams =
            labels.empty() ? std::vector<std::string>{"none", "ictta", "ictta_high"} : labels;
        for (size_t i = 0; i < fams.size(); ++i) {
            ICTTASettings st = cfg.ictta;
            st.family = fams[i];
            eval_point(cfg.eval, ictta_generator(net, st), static_cast<double>(i), fams[i]);
        }
    } else {
        throw std::invalid_argument("study: unknown kind '" + kind + "'");
    }

    // One plot per metric across the grid.
    for (const std::string& m : cfg.eval.metrics) {
        PlotSeries s;
        s.name = m;
        for (const StudyPoint& p : points) {
            auto it = p.report.aggregates.find(m);
            if (it == p.report.aggregates.end()) continue;
            s.x.push_back(p.x);
            s.y.push_back(it->second.mean);
            s.ci.push_back(it->second.ci95_half_width);
        }
        if (s.x.size() < 1) continue;
        render_line_plot(out_dir + "/" + kind + "_" + m + ".png", {s}, kind + " " + m);
    }

    json summary = json::array();
    for (const StudyPoint& p : points) {
        json jp = {{"x", p.x}, {"label", p.label}};
        for (const auto& [m, agg] : p.report.aggregates)
            jp["metrics"][m] = {{"mean", agg.mean}, {"ci95_half_width", agg.ci95_half_width},
                                {"n", agg.n}};
        summary.push_back(jp);
    }
    std::ofstream f(out_dir + "/" + kind + "_summary.json");
    f << summary.dump(2) << "\n";
    return points;
}

Episode load_episode_files(const std::string& target_png, const std::string& context_dir) {
    if (!fs::exists(target_png)) throw std::runtime_error("missing target image: " + target_png);
    Episode ep;
    ep.target = read_gray_png(target_png);
    std::string images = context_dir + "/images", masks = context_dir + "/masks";
    if (!fs::is_directory(context_dir))
        throw std::runtime_error("missing context directory: " + context_dir);
    if (!fs::is_directory(images) || !fs::is_directory(masks))
        throw std::runtime_error("context directory must contain images/ and masks/: " +
                                 context_dir);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(images))
        if (e.path().extension() == ".png") names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw std::runtime_error("no context images found in " + images);
    for (const std::string& n : names) {
        std::string mask_path = masks + "/" + n;
        if (!fs::exists(mask_path)) throw std::runtime_error("missing context mask: " + mask_path);
        ContextPair c;
        c.image = read_gray_png(images + "/" + n);
        c.mask = read_mask_png(mask_path);
        if (c.image.h != ep.target.h || c.image.w != ep.target.w || c.mask.h != ep.target.h ||
            c.mask.w != ep.target.w)
            throw std::runtime_error("context item " + n + " does not match the target size " +
                                     std::to_string(ep.target.h) + "x" +
                                     std::to_string(ep.target.w));
        ep.context.push_back(std::move(c));
    }
    return ep;
}

void predict_to_dir(TycheNet& net, const Episode& episode, const std::string& mode, int k,
                    uint64_t seed, const ExperimentConfig& cfg, const std::string& out_dir) {
    if (k < 1) throw std::invalid_argument("predict: K must be >= 1");
    CandidateGenerator gen;
    if (mode == "ts" || mode == "random") gen = ts_generator(net, "random");
    else if (mode == "zero") gen = ts_generator(net, "zero");
    else if (mode == "ictta") gen = ictta_generator(net, cfg.ictta);
    else throw std::invalid_argument("predict: mode must be ts, zero or ictta");

    fs::create_directories(out_dir);
    CandidateBatch cb = gen(episode, k, seed);

    json sidecar;
    sidecar["config_hash"] = cfg.hash();
    sidecar["mode"] = mode;
    sidecar["k"] = k;
    sidecar["seed"] = seed;
    sidecar["threshold"] = cfg.eval.threshold;
    json cands = json::array();
    for (int i = 0; i < k; ++i) {
        char mask_name[32], prob_name[32];
        std::snprintf(mask_name, sizeof(mask_name), "candidate_%02d_mask.png", i);
        std::snprintf(prob_name, sizeof(prob_name), "candidate_%02d_prob.png", i);
        LabelMask m = binarize(cb[i], cfg.eval.threshold);
        write_mask_png(out_dir + "/" + mask_name, m);
        write_prob_png(out_dir + "/" + prob_name, cb[i]);
        double max_prob = 0.0;
        for (double v : cb[i].v) max_prob = std::max(max_prob, v);
        cands.push_back({{"mask", mask_name},
                         {"prob", prob_name},
                         {"max_prob", max_prob},
                         {"foreground_pixels", m.count()}});
    }
    sidecar["candidates"] = cands;
    std::ofstream f(out_dir + "/prediction.json");
    f << sidecar.dump(2) << "\n";
}

}  // namespace tyche
