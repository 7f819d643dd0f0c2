#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tyche/autodiff.hpp"
#include "tyche/types.hpp"

namespace tyche {

struct ModelConfig {
    int depth = 4;
    int features = 64;
    int kernel_size = 3;
    double leaky_slope = 0.01;
    int k_train = 8;
    int input_h = 128, input_w = 128;
    int noise_channels = 1;
    // Eq. 7 context update reads the CrossBlock-updated members by default;
    // the alternative reads the raw input members.
    bool eq7_from_input = false;
    // Adds a full-resolution SetBlock at the end of the decoder so encoder
    // and decoder have the same number of blocks.
    bool symmetric_decoder = false;

    void validate() const;
    int downsample_factor() const { return 1 << (depth - 1); }
};

// K noise images, one per candidate.
std::vector<Tensor> sample_noise(int k, int channels, int h, int w, uint64_t seed);

// Feature-set interaction layers. Weights live in the blocks; each forward
// call records onto the caller's Graph.
class ConvAct {
public:
    ConvAct() = default;
    ConvAct(const std::string& name, int cin, int cout, int k, double slope, bool act = true);
    ad::Node* operator()(ad::Graph& g, ad::Node* x);
    void collect(std::vector<ad::Param*>& out);

    ad::Param weight, bias;

private:
    int k_ = 3;
    double slope_ = 0.01;
    bool act_ = true;
};

// Interacts one feature map with a set of feature maps: shared conv over
// pairwise concatenations, then a conv of the set mean for the single path.
class CrossBlock {
public:
    CrossBlock() = default;
    CrossBlock(const std::string& name, int cu, int cv, int cout, int k, double slope);

    // Returns (u', V'). V' members are the interaction maps t_j.
    std::pair<ad::Node*, std::vector<ad::Node*>> forward(ad::Graph& g, ad::Node* u,
                                                         const std::vector<ad::Node*>& v);
    void collect(std::vector<ad::Param*>& out);

private:
    ConvAct conv_interact_, conv_target_;
};

// Set-to-set interaction of candidate features U and context features V.
class SetBlock {
public:
    SetBlock() = default;
    SetBlock(const std::string& name, int cu, int cv, int cout, int k, double slope,
             bool eq7_from_input);

    std::pair<std::vector<ad::Node*>, std::vector<ad::Node*>> forward(
        ad::Graph& g, const std::vector<ad::Node*>& u_set, const std::vector<ad::Node*>& v_set);
    void collect(std::vector<ad::Param*>& out);

private:
    CrossBlock cross_;
    ConvAct conv_merge_, conv_update_u_, conv_update_v_;
    bool eq7_from_input_ = false;
};

// Result of one forward pass; the graph keeps all intermediates alive so
// callers can backpropagate and inspect gradients.
struct ForwardPass {
    std::shared_ptr<ad::Graph> graph;
    std::vector<ad::Node*> logits;  // per candidate, 1xHxW
    std::vector<ad::Node*> probs;   // sigmoid(logits)

    CandidateBatch candidates() const;
};

class TycheNet {
public:
    explicit TycheNet(const ModelConfig& cfg, uint64_t init_seed = 0);

    const ModelConfig& config() const { return cfg_; }

    std::vector<ad::Param*> parameters();
    size_t parameter_count();

    // Candidate stream starts as K copies of the target, each concatenated
    // with its own noise image; context entries are image||mask pairs.
    ForwardPass forward(const GrayImage& target, const std::vector<ContextPair>& context,
                        const std::vector<Tensor>& noise);

    CandidateBatch predict(const GrayImage& target, const std::vector<ContextPair>& context,
                           const std::vector<Tensor>& noise);

    void save_checkpoint(const std::string& path, int64_t step = 0, int64_t epoch = 0) const;
    static TycheNet load_checkpoint(const std::string& path, int64_t* step = nullptr,
                                    int64_t* epoch = nullptr);

private:
    ModelConfig cfg_;
    std::vector<SetBlock> encoder_;
    std::vector<SetBlock> decoder_;
    ConvAct head_;

    void init_weights(uint64_t seed);
};

size_t count_parameters(const ModelConfig& cfg);

// Adam with fixed beta = (0.9, 0.999), no weight decay.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<ad::Param*> params, double lr)
        : params_(std::move(params)), lr_(lr) {}

    void zero_grad();
    void step();
    int64_t steps() const { return t_; }

private:
    std::vector<ad::Param*> params_;
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    int64_t t_ = 0;
};

}  // namespace tyche
