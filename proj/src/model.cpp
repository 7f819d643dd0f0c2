#include "tyche/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "tyche/rng.hpp"

using nlohmann::json;

namespace tyche {

void ModelConfig::validate() const {
    if (depth < 1) throw std::invalid_argument("ModelConfig: depth must be >= 1");
    if (features < 1) throw std::invalid_argument("ModelConfig: features must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw std::invalid_argument("ModelConfig: kernel_size must be odd");
    if (k_train < 1) throw std::invalid_argument("ModelConfig: k_train must be >= 1");
    if (noise_channels < 1) throw std::invalid_argument("ModelConfig: noise_channels must be >= 1");
    const int f = downsample_factor();
    if (input_h % f != 0 || input_w % f != 0)
        throw std::invalid_argument("ModelConfig: input size " + std::to_string(input_h) + "x" +
                                    std::to_string(input_w) + " not divisible by " + std::to_string(f));
}

std::vector<Tensor> sample_noise(int k, int channels, int h, int w, uint64_t seed) {
    std::vector<Tensor> noise;
    noise.reserve(k);
    for (int i = 0; i < k; ++i) {
        Rng rng(seed_key(seed, 0x4015E, i));
        Tensor z(channels, h, w);
        for (double& v : z.v) v = rng.gaussian();
        noise.push_back(std::move(z));
    }
    return noise;
}

ConvAct::ConvAct(const std::string& name, int cin, int cout, int k, double slope, bool act)
    : weight(name + ".weight", Tensor(cout, cin, k * k)),
      bias(name + ".bias", Tensor(cout, 1, 1)),
      k_(k),
      slope_(slope),
      act_(act) {}

ad::Node* ConvAct::operator()(ad::Graph& g, ad::Node* x) {
    ad::Node* y = g.conv(x, weight, bias, k_);
    return act_ ? g.leaky_relu(y, slope_) : y;
}

void ConvAct::collect(std::vector<ad::Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

CrossBlock::CrossBlock(const std::string& name, int cu, int cv, int cout, int k, double slope)
    : conv_interact_(name + ".interact", cu + cv, cout, k, slope),
      conv_target_(name + ".target", cout, cout, k, slope) {}

std::pair<ad::Node*, std::vector<ad::Node*>> CrossBlock::forward(ad::Graph& g, ad::Node* u,
                                                                 const std::vector<ad::Node*>& v) {
    if (v.empty()) throw std::invalid_argument("CrossBlock: empty context set");
    std::vector<ad::Node*> interactions;
    interactions.reserve(v.size());
    for (ad::Node* vj : v) interactions.push_back(conv_interact_(g, g.concat({u, vj})));
    ad::Node* u_new = conv_target_(g, g.mean_set(interactions, /*canonical=*/false));
    return {u_new, interactions};
}

void CrossBlock::collect(std::vector<ad::Param*>& out) {
    conv_interact_.collect(out);
    conv_target_.collect(out);
}

SetBlock::SetBlock(const std::string& name, int cu, int cv, int cout, int k, double slope,
                   bool eq7_from_input)
    : cross_(name + ".cross", cu, cv, cout, k, slope),
      conv_merge_(name + ".merge", cu + cout, cout, k, slope),
      conv_update_u_(name + ".update_u", cout, cout, k, slope),
      conv_update_v_(name + ".update_v", eq7_from_input ? cv : cout, cout, k, slope),
      eq7_from_input_(eq7_from_input) {}

std::pair<std::vector<ad::Node*>, std::vector<ad::Node*>> SetBlock::forward(
    ad::Graph& g, const std::vector<ad::Node*>& u_set, const std::vector<ad::Node*>& v_set) {
    if (u_set.empty() || v_set.empty()) throw std::invalid_argument("SetBlock: empty input set");

    // Canonical accumulation keeps the mean bitwise invariant under candidate
    // permutation.
    ad::Node* u_mean = g.mean_set(u_set, /*canonical=*/true);
    auto [u_bar, v_interacted] = cross_.forward(g, u_mean, v_set);

    std::vector<ad::Node*> u_out;
    u_out.reserve(u_set.size());
    for (ad::Node* ui : u_set)
        u_out.push_back(conv_update_u_(g, conv_merge_(g, g.concat({ui, u_bar}))));

    const std::vector<ad::Node*>& v_src = eq7_from_input_ ? v_set : v_interacted;
    std::vector<ad::Node*> v_out;
    v_out.reserve(v_src.size());
    for (ad::Node* vi : v_src) v_out.push_back(conv_update_v_(g, vi));
    return {std::move(u_out), std::move(v_out)};
}

void SetBlock::collect(std::vector<ad::Param*>& out) {
    cross_.collect(out);
    conv_merge_.collect(out);
    conv_update_u_.collect(out);
    conv_update_v_.collect(out);
}

TycheNet::TycheNet(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    const int c = cfg_.features;
    const int k = cfg_.kernel_size;
    const double s = cfg_.leaky_slope;
    const int cu0 = 1 + cfg_.noise_channels;
    const int cv0 = 2;

    for (int l = 0; l < cfg_.depth; ++l) {
        const int cu = l == 0 ? cu0 : c;
        const int cv = l == 0 ? cv0 : c;
        encoder_.emplace_back("enc" + std::to_string(l), cu, cv, c, k, s, cfg_.eq7_from_input);
    }
    const int n_dec = cfg_.depth - 1 + (cfg_.symmetric_decoder ? 1 : 0);
    for (int l = 0; l < n_dec; ++l) {
        // Decoder levels consume upsampled features concatenated with skips,
        // except the optional extra full-resolution block.
        const bool extra = cfg_.symmetric_decoder && l == n_dec - 1;
        const int cin = extra ? c : 2 * c;
        decoder_.emplace_back("dec" + std::to_string(l), cin, cin, c, k, s, cfg_.eq7_from_input);
    }
    head_ = ConvAct("head", c, 1, 1, s, /*act=*/false);
    init_weights(init_seed);
}

void TycheNet::init_weights(uint64_t seed) {
    auto params = parameters();
    for (size_t i = 0; i < params.size(); ++i) {
        ad::Param* p = params[i];
        if (p->name.ends_with(".bias")) continue;  // biases stay zero
        const int fan_in = p->value.h * p->value.w;  // cin * k*k
        const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Rng rng(seed_key(seed, 0x1417, i));
        for (double& v : p->value.v) v = rng.uniform(-a, a);
    }
}

std::vector<ad::Param*> TycheNet::parameters() {
    std::vector<ad::Param*> out;
    for (auto& b : encoder_) b.collect(out);
    for (auto& b : decoder_) b.collect(out);
    head_.collect(out);
    return out;
}

size_t TycheNet::parameter_count() {
    size_t n = 0;
    for (ad::Param* p : parameters()) n += p->size();
    return n;
}

size_t count_parameters(const ModelConfig& cfg) { return TycheNet(cfg).parameter_count(); }

CandidateBatch ForwardPass::candidates() const {
    CandidateBatch out;
    out.maps.reserve(probs.size());
    for (ad::Node* p : probs) {
        GrayImage img(p->val.h, p->val.w);
        img.v = p->val.v;
        out.maps.push_back(std::move(img));
    }
    return out;
}

ForwardPass TycheNet::forward(const GrayImage& target, const std::vector<ContextPair>& context,
                              const std::vector<Tensor>& noise) {
    if (noise.empty()) throw std::invalid_argument("TycheNet: need at least one noise image (K >= 1)");
    if (context.empty()) throw std::invalid_argument("TycheNet: context must be nonempty");
    if (target.h != cfg_.input_h || target.w != cfg_.input_w)
        throw std::invalid_argument("TycheNet: target size " + std::to_string(target.h) + "x" +
                                    std::to_string(target.w) + " does not match config " +
                                    std::to_string(cfg_.input_h) + "x" + std::to_string(cfg_.input_w));
    for (const auto& z : noise)
        if (z.c != cfg_.noise_channels || z.h != target.h || z.w != target.w)
            throw std::invalid_argument("TycheNet: noise shape mismatch");
    for (const auto& cp : context)
        if (cp.image.h != target.h || cp.image.w != target.w || cp.mask.h != target.h ||
            cp.mask.w != target.w)
            throw std::invalid_argument("TycheNet: context size mismatch");

    ForwardPass fp;
    fp.graph = std::make_shared<ad::Graph>();
    ad::Graph& g = *fp.graph;

    std::vector<ad::Node*> u_set;
    for (const auto& z : noise) {
        Tensor u0(1 + cfg_.noise_channels, target.h, target.w);
        std::copy(target.v.begin(), target.v.end(), u0.v.begin());
        std::copy(z.v.begin(), z.v.end(), u0.v.begin() + target.size());
        u_set.push_back(g.constant(std::move(u0)));
    }
    std::vector<ad::Node*> v_set;
    for (const auto& cp : context) {
        Tensor v0(2, target.h, target.w);
        std::copy(cp.image.v.begin(), cp.image.v.end(), v0.v.begin());
        for (size_t i = 0; i < cp.mask.size(); ++i) v0.v[target.size() + i] = cp.mask.v[i];
        v_set.push_back(g.constant(std::move(v0)));
    }

    std::vector<std::vector<ad::Node*>> skip_u, skip_v;
    for (int l = 0; l < cfg_.depth; ++l) {
        std::tie(u_set, v_set) = encoder_[l].forward(g, u_set, v_set);
        if (l < cfg_.depth - 1) {
            skip_u.push_back(u_set);
            skip_v.push_back(v_set);
            for (auto& u : u_set) u = g.maxpool(u);
            for (auto& v : v_set) v = g.maxpool(v);
        }
    }
    for (int l = cfg_.depth - 2; l >= 0; --l) {
        for (auto& u : u_set) u = g.upsample(u);
        for (auto& v : v_set) v = g.upsample(v);
        for (size_t i = 0; i < u_set.size(); ++i) u_set[i] = g.concat({u_set[i], skip_u[l][i]});
        for (size_t i = 0; i < v_set.size(); ++i) v_set[i] = g.concat({v_set[i], skip_v[l][i]});
        std::tie(u_set, v_set) = decoder_[cfg_.depth - 2 - l].forward(g, u_set, v_set);
    }
    if (cfg_.symmetric_decoder) std::tie(u_set, v_set) = decoder_.back().forward(g, u_set, v_set);

    for (ad::Node* u : u_set) {
        ad::Node* logit = head_(g, u);
        fp.logits.push_back(logit);
        fp.probs.push_back(g.sigmoid(logit));
    }
    return fp;
}

CandidateBatch TycheNet::predict(const GrayImage& target, const std::vector<ContextPair>& context,
                                 const std::vector<Tensor>& noise) {
    return forward(target, context, noise).candidates();
}

namespace {
constexpr char kMagic[8] = {'T', 'Y', 'C', 'H', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

json config_to_json(const ModelConfig& c) {
    return json{{"depth", c.depth},
                {"features", c.features},
                {"kernel_size", c.kernel_size},
                {"leaky_slope", c.leaky_slope},
                {"k_train", c.k_train},
                {"input_h", c.input_h},
                {"input_w", c.input_w},
                {"noise_channels", c.noise_channels},
                {"eq7_from_input", c.eq7_from_input},
                {"symmetric_decoder", c.symmetric_decoder}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.depth = j.at("depth");
    c.features = j.at("features");
    c.kernel_size = j.at("kernel_size");
    c.leaky_slope = j.at("leaky_slope");
    c.k_train = j.at("k_train");
    c.input_h = j.at("input_h");
    c.input_w = j.at("input_w");
    c.noise_channels = j.at("noise_channels");
    c.eq7_from_input = j.at("eq7_from_input");
    c.symmetric_decoder = j.at("symmetric_decoder");
    return c;
}
}  // namespace

void TycheNet::save_checkpoint(const std::string& path, int64_t step, int64_t epoch) const {
    json header;
    header["config"] = config_to_json(cfg_);
    header["step"] = step;
    header["epoch"] = epoch;
    json manifest = json::array();
    auto params = const_cast<TycheNet*>(this)->parameters();
    for (ad::Param* p : params)
        manifest.push_back({{"name", p->name}, {"c", p->value.c}, {"h", p->value.h}, {"w", p->value.w}});
    header["params"] = manifest;
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    const uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    // Parameter payload: raw little-endian doubles in manifest order.
    for (ad::Param* p : params)
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

TycheNet TycheNet::load_checkpoint(const std::string& path, int64_t* step, int64_t* epoch) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kVersion)
        throw std::runtime_error("checkpoint version mismatch: file has " + std::to_string(version) +
                                 ", expected " + std::to_string(kVersion));
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    const json header = json::parse(hs);

    TycheNet net(config_from_json(header.at("config")));
    if (step) *step = header.at("step").get<int64_t>();
    if (epoch) *epoch = header.at("epoch").get<int64_t>();

    auto params = net.parameters();
    const json& manifest = header.at("params");
    if (manifest.size() != params.size())
        throw std::runtime_error("checkpoint parameter manifest mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        const json& m = manifest[i];
        if (m.at("name") != params[i]->name)
            throw std::runtime_error("checkpoint parameter order mismatch at " + params[i]->name);
        in.read(reinterpret_cast<char*>(params[i]->value.data()),
                static_cast<std::streamsize>(params[i]->value.size() * sizeof(double)));
    }
    if (!in) throw std::runtime_error("checkpoint truncated: " + path);
    return net;
}

void AdamOptimizer::zero_grad() {
    for (ad::Param* p : params_) p->zero_grad();
}

void AdamOptimizer::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (ad::Param* p : params_) {
        if (p->adam_m.size() != p->size()) {
            p->adam_m = Tensor::zeros_like(p->value);
            p->adam_v = Tensor::zeros_like(p->value);
        }
        for (size_t i = 0; i < p->size(); ++i) {
            const double g = p->grad.v[i];
            p->adam_m.v[i] = beta1_ * p->adam_m.v[i] + (1.0 - beta1_) * g;
            p->adam_v.v[i] = beta2_ * p->adam_v.v[i] + (1.0 - beta2_) * g * g;
            const double mhat = p->adam_m.v[i] / bc1;
            const double vhat = p->adam_v.v[i] / bc2;
            p->value.v[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace tyche
