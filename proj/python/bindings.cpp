#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tyche/config.hpp"
#include "tyche/harness.hpp"
#include "tyche/ictta.hpp"
#include "tyche/model.hpp"
#include "tyche/stochmetrics.hpp"
#include "tyche/synthdata.hpp"

namespace py = pybind11;
using namespace tyche;

namespace {

GrayImage image_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    GrayImage img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), img.v.begin());
    return img;
}

py::array_t<double> image_to_array(const GrayImage& img) {
    py::array_t<double> a({img.h, img.w});
    std::copy(img.v.begin(), img.v.end(), a.mutable_data());
    return a;
}

LabelMask mask_from_array(const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    LabelMask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    for (py::ssize_t i = 0; i < a.size(); ++i) m.v[i] = a.data()[i] ? 1 : 0;
    return m;
}

py::array_t<uint8_t> mask_to_array(const LabelMask& m) {
    py::array_t<uint8_t> a({m.h, m.w});
    std::copy(m.v.begin(), m.v.end(), a.mutable_data());
    return a;
}

std::vector<LabelMask> masks_from_list(const py::list& masks) {
    std::vector<LabelMask> out;
    for (const auto& item : masks) out.push_back(mask_from_array(py::cast<py::array>(item)));
    return out;
}

Episode episode_from_py(const py::array& target, const py::list& context_images,
                        const py::list& context_masks, const py::list& rater_masks) {
    if (py::len(context_images) != py::len(context_masks))
        throw std::invalid_argument("context images and masks must pair up");
    Episode ep;
    ep.target = image_from_array(target);
    for (size_t j = 0; j < py::len(context_images); ++j) {
        ContextPair cp;
        cp.image = image_from_array(py::cast<py::array>(context_images[j]));
        cp.mask = mask_from_array(py::cast<py::array>(context_masks[j]));
        ep.context.push_back(std::move(cp));
    }
    ep.raters.masks = masks_from_list(rater_masks);
    return ep;
}

ExperimentConfig config_from_dict(const py::dict& d) {
    std::map<std::string, std::string> kv;
    for (const auto& item : d)
        kv[py::cast<std::string>(item.first)] = py::cast<std::string>(py::str(item.second));
    return config_from_map(kv);
}

}  // namespace

PYBIND11_MODULE(_tychekit, m) {
    m.doc() = "Stochastic in-context segmentation: C++ core bindings";

    py::class_<ExperimentConfig>(m, "Config")
        .def(py::init([](const py::dict& d) { return config_from_dict(d); }), py::arg("keys") = py::dict())
        .def_static("load", &load_config, py::arg("path"))
        .def("hash", &ExperimentConfig::hash)
        .def("canonical", &ExperimentConfig::canonical)
        .def("validate", &ExperimentConfig::validate);

    py::class_<Dataset>(m, "Dataset")
        .def("__len__", [](const Dataset& ds) { return ds.examples.size(); })
        .def("image", [](const Dataset& ds, size_t i) { return image_to_array(ds.examples.at(i).image); })
        .def("rater_masks", [](const Dataset& ds, size_t i) {
            py::list out;
            for (const auto& mk : ds.examples.at(i).raters.masks) out.append(mask_to_array(mk));
            return out;
        });

    py::class_<SplitIndices>(m, "Splits")
        .def_readonly("dev", &SplitIndices::dev)
        .def_readonly("val", &SplitIndices::val)
        .def_readonly("test", &SplitIndices::test);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("epoch_loss", &TrainResult::epoch_loss)
        .def_readonly("val_metric", &TrainResult::val_metric)
        .def_readonly("best_epoch", &TrainResult::best_epoch)
        .def_readonly("steps", &TrainResult::steps);

    py::class_<TycheNet>(m, "Model")
        .def(py::init([](const ExperimentConfig& cfg, uint64_t seed) {
                 return TycheNet(cfg.model, seed);
             }),
             py::arg("config"), py::arg("init_seed") = 0)
        .def_static(
            "load",
            [](const std::string& path) { return TycheNet::load_checkpoint(path); },
            py::arg("path"))
        .def("save", [](const TycheNet& net, const std::string& path) { net.save_checkpoint(path); },
             py::arg("path"))
        .def("n_parameters", [](TycheNet& net) {
            size_t n = 0;
            for (auto* p : net.parameters()) n += p->value.v.size();
            return n;
        })
        .def(
            "predict",
            [](TycheNet& net, const py::array& target, const py::list& ctx_images,
               const py::list& ctx_masks, int k, uint64_t seed, const std::string& noise_mode) {
                Episode ep = episode_from_py(target, ctx_images, ctx_masks, py::list());
                CandidateBatch cb = ts_generator(net, noise_mode)(ep, k, seed);
                py::list out;
                for (const auto& mp : cb.maps) out.append(image_to_array(mp));
                return out;
            },
            py::arg("target"), py::arg("context_images"), py::arg("context_masks"),
            py::arg("k") = 8, py::arg("seed") = 0, py::arg("noise_mode") = "random",
            "K candidate probability maps for one episode.")
        .def(
            "predict_ictta",
            [](TycheNet& net, const py::array& target, const py::list& ctx_images,
               const py::list& ctx_masks, int k, uint64_t seed, const ExperimentConfig& cfg) {
                Episode ep = episode_from_py(target, ctx_images, ctx_masks, py::list());
                CandidateBatch cb = ictta_generator(net, cfg.ictta)(ep, k, seed);
                py::list out;
                for (const auto& mp : cb.maps) out.append(image_to_array(mp));
                return out;
            },
            py::arg("target"), py::arg("context_images"), py::arg("context_masks"),
            py::arg("k") = 8, py::arg("seed") = 0, py::arg("config") = ExperimentConfig{});

    m.def(
        "generate_dataset",
        [](const ExperimentConfig& cfg) {
            Dataset ds = make_blob_dataset(cfg.data.blob_spec(), cfg.data.n_examples, cfg.data.seed);
            SplitIndices splits = split_dataset(ds.examples.size(), cfg.data.f_dev, cfg.data.f_val,
                                                cfg.data.f_test, cfg.data.seed);
            return py::make_tuple(ds, splits);
        },
        py::arg("config"));
    m.def(
        "load_dataset",
        [](const std::string& dir) {
            SplitIndices splits;
            Dataset ds = load_dataset(dir, &splits);
            return py::make_tuple(ds, splits);
        },
        py::arg("dir"));
    m.def(
        "save_dataset",
        [](const std::string& dir, const Dataset& ds, const SplitIndices& splits,
           const ExperimentConfig& cfg) {
            save_dataset(dir, ds, splits,
                         std::string("{\"config_hash\":\"") + cfg.hash() + "\"}");
        },
        py::arg("dir"), py::arg("dataset"), py::arg("splits"), py::arg("config"));

    m.def(
        "train",
        [](TycheNet& net, const ExperimentConfig& cfg, const Dataset& ds, const SplitIndices& splits,
           const std::string& run_dir) { return train_model(net, cfg.train, ds, splits, run_dir); },
        py::arg("model"), py::arg("config"), py::arg("dataset"), py::arg("splits"),
        py::arg("run_dir") = "");
    m.def(
        "evaluate",
        [](TycheNet& net, const ExperimentConfig& cfg, const Dataset& ds, const SplitIndices& splits,
           const std::string& mode) {
            CandidateGenerator gen = mode == "ictta" ? ictta_generator(net, cfg.ictta)
                                                     : ts_generator(net, cfg.eval.noise_mode);
            MetricReport rep = evaluate_split(gen, cfg.eval, ds, splits);
            py::dict out;
            for (const auto& [name, agg] : rep.aggregates) {
                py::dict entry;
                entry["mean"] = agg.mean;
                entry["ci95_half_width"] = agg.ci95_half_width;
                entry["n"] = agg.n;
                out[py::str(name)] = entry;
            }
            return out;
        },
        py::arg("model"), py::arg("config"), py::arg("dataset"), py::arg("splits"),
        py::arg("mode") = "ts");

    m.def("dice", [](const py::array& a, const py::array& b) {
        return dice(mask_from_array(a), mask_from_array(b));
    });
    m.def("ged2", [](const py::list& candidates, const py::list& raters) {
        return ged2_masks(masks_from_list(candidates), masks_from_list(raters));
    });
    m.def("hungarian_dice", [](const py::list& candidates, const py::list& raters) {
        return hungarian_matching_dice_masks(masks_from_list(candidates), masks_from_list(raters));
    });
    m.def("sample_diversity", [](const py::list& prob_maps, double threshold) {
        CandidateBatch cb;
        for (const auto& item : prob_maps) cb.maps.push_back(image_from_array(py::cast<py::array>(item)));
        return sample_diversity(cb, threshold);
    }, py::arg("prob_maps"), py::arg("threshold") = 0.5);
    m.def("best_candidate_dice", [](const py::list& prob_maps, const py::list& raters, double threshold) {
        CandidateBatch cb;
        for (const auto& item : prob_maps) cb.maps.push_back(image_from_array(py::cast<py::array>(item)));
        RaterSet rs;
        rs.masks = masks_from_list(raters);
        return best_candidate_dice(cb, rs, threshold);
    }, py::arg("prob_maps"), py::arg("raters"), py::arg("threshold") = 0.5);
}
