#include "tyche/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "tyche/png_io.hpp"
#include "tyche/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tyche {

namespace {

bool power_of_two(int x) { return x > 0 && (x & (x - 1)) == 0; }

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& x : k) x /= sum;
    return k;
}

// Separable convolution with clamped borders.
void smooth_inplace(std::vector<double>& field, int h, int w, const std::vector<double>& k) {
    const int radius = static_cast<int>(k.size()) / 2;
    std::vector<double> tmp(field.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                int xx = std::clamp(x + d, 0, w - 1);
                acc += k[d + radius] * field[static_cast<size_t>(y) * w + xx];
            }
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    for (int x = 0; x < w; ++x)
        for (int y = 0; y < h; ++y) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                int yy = std::clamp(y + d, 0, h - 1);
                acc += k[d + radius] * tmp[static_cast<size_t>(yy) * w + x];
            }
            field[static_cast<size_t>(y) * w + x] = acc;
        }
}

GrayImage filled_disk(int h, int w, double cy, double cx, double radius) {
    GrayImage img(h, w);
    const double r2 = radius * radius;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double dy = y - cy, dx = x - cx;
            img.at(y, x) = (dy * dy + dx * dx <= r2) ? 1.0 : 0.0;
        }
    return img;
}

double sample_bilinear(const GrayImage& x, double fy, double fx) {
    fy = std::clamp(fy, 0.0, static_cast<double>(x.h - 1));
    fx = std::clamp(fx, 0.0, static_cast<double>(x.w - 1));
    const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
    const int y1 = std::min(y0 + 1, x.h - 1), x1 = std::min(x0 + 1, x.w - 1);
    const double wy = fy - y0, wx = fx - x0;
    return (1 - wy) * ((1 - wx) * x.at(y0, x0) + wx * x.at(y0, x1)) +
           wy * ((1 - wx) * x.at(y1, x0) + wx * x.at(y1, x1));
}

}  // namespace

void BlobSpec::validate() const {
    if (n_raters < 1) throw std::invalid_argument("BlobSpec: n_raters must be >= 1");
    if (h < 8 || w < 8 || !power_of_two(h) || !power_of_two(w))
        throw std::invalid_argument("BlobSpec: H, W must be powers of two and >= 8");
    if (size_divisor > 0 && (h % size_divisor != 0 || w % size_divisor != 0))
        throw std::invalid_argument("BlobSpec: image size not divisible by model downsampling factor");
    if (!(radius_lo > 0.0) || radius_hi < radius_lo)
        throw std::invalid_argument("BlobSpec: degenerate radius range");
    if (radius_lo * std::min(h, w) < 1.0)
        throw std::invalid_argument("BlobSpec: radius range produces empty disks");
    if (deform_scale < 0.0) throw std::invalid_argument("BlobSpec: deform_scale must be >= 0");
    if (!(deform_smoothness > 0.0)) throw std::invalid_argument("BlobSpec: deform_smoothness must be > 0");
    if (pixel_noise_std < 0.0) throw std::invalid_argument("BlobSpec: pixel_noise_std must be >= 0");
    if (!rater_weights.empty()) {
        if (static_cast<int>(rater_weights.size()) != n_raters)
            throw std::invalid_argument("BlobSpec: rater_weights size mismatch");
        double sum = 0.0;
        for (double wi : rater_weights) {
            if (wi < 0.0) throw std::invalid_argument("BlobSpec: negative rater weight");
            sum += wi;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("BlobSpec: rater weights must sum to 1");
    }
}

BlobSpec default_blob_spec(int side, uint64_t seed) {
    BlobSpec spec;
    spec.h = spec.w = side;
    // 8 px deformation scale and smoothness at the 128-px reference size.
    spec.deform_scale = 8.0 * side / 128.0;
    spec.deform_smoothness = 8.0 * side / 128.0;
    spec.seed = seed;
    return spec;
}

DisplacementField random_displacement_field(int h, int w, double scale, double smoothness,
                                            uint64_t seed) {
    DisplacementField f;
    f.h = h;
    f.w = w;
    f.dy.assign(static_cast<size_t>(h) * w, 0.0);
    f.dx.assign(static_cast<size_t>(h) * w, 0.0);
    if (scale <= 0.0) return f;

    Rng rng(seed_key(seed, 0xD15FULL));
    for (auto& d : f.dy) d = rng.gaussian(0.0, scale);
    for (auto& d : f.dx) d = rng.gaussian(0.0, scale);

    const auto k = gaussian_kernel(smoothness);
    smooth_inplace(f.dy, h, w, k);
    smooth_inplace(f.dx, h, w, k);

    // Unit-sum smoothing shrinks the field std by the kernel's L2 norm;
    // rescale so the smoothed field keeps std = scale.
    double l2 = 0.0;
    for (double kv : k) l2 += kv * kv;
    const double gain = 1.0 / l2;  // separable: (1/||k||_2)^2
    for (auto& d : f.dy) d *= gain;
    for (auto& d : f.dx) d *= gain;
    return f;
}

GrayImage warp_bilinear(const GrayImage& x, const DisplacementField& f) {
    GrayImage out(x.h, x.w);
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx) {
            const size_t i = static_cast<size_t>(y) * x.w + xx;
            out.at(y, xx) = sample_bilinear(x, y + f.dy[i], xx + f.dx[i]);
        }
    return out;
}

LabelMask warp_nearest(const LabelMask& m, const DisplacementField& f) {
    LabelMask out(m.h, m.w);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            const size_t i = static_cast<size_t>(y) * m.w + x;
            const int sy = std::clamp(static_cast<int>(std::lround(y + f.dy[i])), 0, m.h - 1);
            const int sx = std::clamp(static_cast<int>(std::lround(x + f.dx[i])), 0, m.w - 1);
            out.at(y, x) = m.at(sy, sx);
        }
    return out;
}

GrayImage random_smooth_warp(const GrayImage& x, double scale, double smoothness, uint64_t seed) {
    return warp_bilinear(x, random_displacement_field(x.h, x.w, scale, smoothness, seed));
}

std::pair<GrayImage, RaterSet> generate_blob_example(const BlobSpec& spec) {
    spec.validate();
    const int h = spec.h, w = spec.w;
    const double side = std::min(h, w);

    std::vector<double> weights = spec.rater_weights;
    if (weights.empty()) weights.assign(spec.n_raters, 1.0 / spec.n_raters);

    Rng rng(seed_key(spec.seed, 0xB10BULL));
    // All raters share one base disk; diversity comes from per-rater warps.
    const double radius = rng.uniform(spec.radius_lo, spec.radius_hi) * side;
    const double cy = h / 2.0 + rng.uniform(-spec.center_jitter, spec.center_jitter) * side;
    const double cx = w / 2.0 + rng.uniform(-spec.center_jitter, spec.center_jitter) * side;
    const GrayImage disk = filled_disk(h, w, cy, cx, radius);

    GrayImage image(h, w);
    RaterSet raters;
    for (int i = 0; i < spec.n_raters; ++i) {
        const GrayImage warped = random_smooth_warp(disk, spec.deform_scale, spec.deform_smoothness,
                                                    seed_key(spec.seed, 0x7A9E, i));
        LabelMask mask(h, w);
        for (size_t p = 0; p < warped.size(); ++p) {
            mask.v[p] = warped.v[p] >= 0.5 ? 1 : 0;
            image.v[p] += weights[i] * warped.v[p];
        }
        raters.masks.push_back(std::move(mask));
    }
    if (spec.pixel_noise_std > 0.0) {
        Rng noise(seed_key(spec.seed, 0x0153));
        for (double& p : image.v) p += noise.gaussian(0.0, spec.pixel_noise_std);
    }
    for (double& p : image.v) p = std::clamp(p, 0.0, 1.0);
    return {std::move(image), std::move(raters)};
}

std::vector<std::pair<GrayImage, LabelMask>> generate_shape_task(
    uint64_t task_seed, int n_examples, int h, int w, ShapeTaskParams* params_out) {
    if (n_examples < 2) throw std::invalid_argument("generate_shape_task: n_examples must be >= 2");
    if (h < 8 || w < 8) throw std::invalid_argument("generate_shape_task: size too small");

    Rng task_rng(seed_key(task_seed, 0x5A5AULL));
    ShapeTaskParams params;
    params.shape_class = static_cast<int>(task_rng.uniform_int(3));
    params.fg = task_rng.uniform(0.6, 1.0);
    params.bg = task_rng.uniform(0.0, 0.3);
    params.base_radius = task_rng.uniform(0.18, 0.3);
    params.noise_std = task_rng.uniform(0.0, 0.04);
    if (params_out) *params_out = params;

    const double side = std::min(h, w);
    std::vector<std::pair<GrayImage, LabelMask>> out;
    out.reserve(n_examples);
    for (int e = 0; e < n_examples; ++e) {
        Rng rng(seed_key(task_seed, 0xE7, e));
        const double radius = params.base_radius * side * rng.uniform(0.8, 1.2);
        const double cy = h / 2.0 + rng.uniform(-0.15, 0.15) * side;
        const double cx = w / 2.0 + rng.uniform(-0.15, 0.15) * side;
        LabelMask mask(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double dy = y - cy, dx = x - cx;
                bool inside = false;
                switch (params.shape_class) {
                    case 0: inside = dy * dy + dx * dx <= radius * radius; break;
                    case 1: inside = std::abs(dy) <= radius && std::abs(dx) <= radius; break;
                    default: {
                        const double r = std::sqrt(dy * dy + dx * dx);
                        inside = r <= radius && r >= 0.5 * radius;
                    }
                }
                mask.at(y, x) = inside ? 1 : 0;
            }
        GrayImage img(h, w);
        for (size_t p = 0; p < img.size(); ++p) {
            const double base = mask.v[p] ? params.fg : params.bg;
            img.v[p] = std::clamp(base + rng.gaussian(0.0, params.noise_std), 0.0, 1.0);
        }
        out.emplace_back(std::move(img), std::move(mask));
    }
    return out;
}

namespace {

std::vector<ContextPair> draw_context(const Dataset& pool, const std::vector<size_t>& candidates,
                                      int context_size, Rng& rng) {
    if (static_cast<int>(candidates.size()) < context_size)
        throw std::invalid_argument("context pool too small: need " + std::to_string(context_size) +
                                    ", have " + std::to_string(candidates.size()));
    std::vector<size_t> order = candidates;
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
    std::vector<ContextPair> ctx;
    ctx.reserve(context_size);
    for (int j = 0; j < context_size; ++j) {
        const Example& ex = pool.examples[order[j]];
        const size_t r = ex.raters.size() > 1 ? rng.uniform_int(ex.raters.size()) : 0;
        ctx.push_back({ex.image, ex.raters[r]});
    }
    return ctx;
}

}  // namespace

Episode sample_episode(const Dataset& pool, int context_size, uint64_t rng_seed) {
    if (context_size < 1) throw std::invalid_argument("sample_episode: context_size must be >= 1");
    if (pool.size() < static_cast<size_t>(context_size) + 1)
        throw std::invalid_argument("sample_episode: pool too small (" + std::to_string(pool.size()) +
                                    " examples for context size " + std::to_string(context_size) + ")");
    Rng rng(seed_key(rng_seed, 0xE915ULL));
    const size_t target = rng.uniform_int(pool.size());
    std::vector<size_t> others;
    others.reserve(pool.size() - 1);
    for (size_t i = 0; i < pool.size(); ++i)
        if (i != target) others.push_back(i);

    Episode ep;
    ep.target = pool.examples[target].image;
    ep.raters = pool.examples[target].raters;
    ep.context = draw_context(pool, others, context_size, rng);
    ep.task_id = pool.task_id;
    ep.seed = rng_seed;
    return ep;
}

Episode make_episode(const Dataset& target_pool, size_t target_index,
                     const Dataset& context_pool, int context_size, uint64_t rng_seed) {
    if (target_index >= target_pool.size()) throw std::invalid_argument("make_episode: bad target index");
    Rng rng(seed_key(rng_seed, 0xE916ULL));
    const Example& target = target_pool.examples[target_index];
    std::vector<size_t> candidates;
    for (size_t i = 0; i < context_pool.size(); ++i)
        if (context_pool.examples[i].id != target.id) candidates.push_back(i);

    Episode ep;
    ep.target = target.image;
    ep.raters = target.raters;
    ep.context = draw_context(context_pool, candidates, context_size, rng);
    ep.task_id = target_pool.task_id;
    ep.seed = rng_seed;
    return ep;
}

SplitIndices split_dataset(size_t pool_size, double f_dev, double f_val, double f_test,
                           uint64_t seed) {
    if (std::abs(f_dev + f_val + f_test - 1.0) > 1e-9)
        throw std::invalid_argument("split_dataset: fractions must sum to 1");
    Rng rng(seed_key(seed, 0x59171ULL));
    std::vector<size_t> order = rng.permutation(pool_size);

    size_t n_dev = static_cast<size_t>(std::floor(f_dev * pool_size));
    size_t n_val = static_cast<size_t>(std::floor(f_val * pool_size));
    size_t n_test = static_cast<size_t>(std::floor(f_test * pool_size));
    // Leftover from rounding goes to dev.
    n_dev += pool_size - n_dev - n_val - n_test;

    if (n_dev == 0 || n_val == 0 || n_test == 0)
        throw std::invalid_argument("split_dataset: empty split (sizes " + std::to_string(n_dev) + "/" +
                                    std::to_string(n_val) + "/" + std::to_string(n_test) + ")");

    SplitIndices s;
    s.dev.assign(order.begin(), order.begin() + n_dev);
    s.val.assign(order.begin() + n_dev, order.begin() + n_dev + n_val);
    s.test.assign(order.begin() + n_dev + n_val, order.end());
    std::sort(s.dev.begin(), s.dev.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

Dataset make_blob_dataset(const BlobSpec& spec, int n_examples, uint64_t global_seed) {
    spec.validate();
    Dataset ds;
    ds.task_id = "blobs";
    ds.examples.reserve(n_examples);
    for (int i = 0; i < n_examples; ++i) {
        BlobSpec ex_spec = spec;
        // Per-example stream keyed by (global seed, index): output is
        // independent of generation order.
        ex_spec.seed = seed_key(global_seed, 0xDA7A, i);
        auto [image, raters] = generate_blob_example(ex_spec);
        char id[32];
        std::snprintf(id, sizeof(id), "ex%05d", i);
        ds.examples.push_back({id, std::move(image), std::move(raters)});
    }
    return ds;
}

void save_dataset(const std::string& dir, const Dataset& ds, const SplitIndices& splits,
                  const std::string& spec_json) {
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "masks");

    json meta;
    meta["format_version"] = 1;
    meta["task_id"] = ds.task_id;
    meta["spec"] = spec_json.empty() ? json::object() : json::parse(spec_json);
    json ex_list = json::array();
    for (const auto& ex : ds.examples) {
        write_gray_png((fs::path(dir) / "images" / (ex.id + ".png")).string(), ex.image);
        for (size_t r = 0; r < ex.raters.size(); ++r)
            write_mask_png((fs::path(dir) / "masks" / (ex.id + "_r" + std::to_string(r) + ".png")).string(),
                           ex.raters[r]);
        ex_list.push_back({{"id", ex.id}, {"n_raters", ex.raters.size()}});
    }
    meta["examples"] = ex_list;
    meta["splits"] = {{"dev", splits.dev}, {"val", splits.val}, {"test", splits.test}};

    std::ofstream out(fs::path(dir) / "meta.json");
    out << meta.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir, SplitIndices* splits_out) {
    const fs::path meta_path = fs::path(dir) / "meta.json";
    if (!fs::exists(meta_path)) throw std::runtime_error("dataset meta.json not found: " + meta_path.string());
    std::ifstream in(meta_path);
    json meta = json::parse(in);

    Dataset ds;
    ds.task_id = meta.at("task_id").get<std::string>();
    for (const auto& e : meta.at("examples")) {
        Example ex;
        ex.id = e.at("id").get<std::string>();
        ex.image = read_gray_png((fs::path(dir) / "images" / (ex.id + ".png")).string());
        const size_t n_raters = e.at("n_raters").get<size_t>();
        for (size_t r = 0; r < n_raters; ++r)
            ex.raters.masks.push_back(
                read_mask_png((fs::path(dir) / "masks" / (ex.id + "_r" + std::to_string(r) + ".png")).string()));
        ds.examples.push_back(std::move(ex));
    }
    if (splits_out) {
        splits_out->dev = meta.at("splits").at("dev").get<std::vector<size_t>>();
        splits_out->val = meta.at("splits").at("val").get<std::vector<size_t>>();
        splits_out->test = meta.at("splits").at("test").get<std::vector<size_t>>();
    }
    return ds;
}

}  // namespace tyche
