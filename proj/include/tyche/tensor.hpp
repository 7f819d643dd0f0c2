#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tyche {

// Dense C x H x W tensor of doubles, row-major (channel outermost).
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.0) {}

    size_t size() const { return v.size(); }
    int plane() const { return h * w; }

    double& at(int ci, int y, int x) { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }
    double at(int ci, int y, int x) const { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }

    static Tensor zeros_like(const Tensor& o) { return Tensor(o.c, o.h, o.w); }

    static Tensor scalar(double x) {
        Tensor t(1, 1, 1);
        t.v[0] = x;
        return t;
    }

    std::string shape_str() const {
        return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
    }
};

// Same-padding stride-1 2d convolution, odd square kernels.
// weight is laid out as [cout][cin][k*k], bias as [cout].
Tensor conv2d(const Tensor& x, const Tensor& weight, const std::vector<double>& bias, int k);

// Gradients of conv2d. grad_out has shape [cout,h,w].
void conv2d_backward(const Tensor& x, const Tensor& weight, int k, const Tensor& grad_out,
                     Tensor& grad_x, Tensor& grad_weight, std::vector<double>& grad_bias);

// 2x2 max pooling, records flat argmax indices for backward.
Tensor maxpool2(const Tensor& x, std::vector<int>& argmax);
void maxpool2_backward(const Tensor& grad_out, const std::vector<int>& argmax, Tensor& grad_x);

// Nearest-neighbour 2x upsampling.
Tensor upsample_nearest2(const Tensor& x);
void upsample_nearest2_backward(const Tensor& grad_out, Tensor& grad_x);

}  // namespace tyche
