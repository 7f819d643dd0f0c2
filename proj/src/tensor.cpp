#include "tyche/tensor.hpp"

#include <Eigen/Dense>

namespace tyche {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

// Unrolls x into a [cin*k*k, h*w] matrix for GEMM-based convolution.
RowMat im2col(const Tensor& x, int k) {
    const int pad = k / 2;
    RowMat col(static_cast<long>(x.c) * k * k, static_cast<long>(x.h) * x.w);
    col.setZero();
    long row = 0;
    for (int ci = 0; ci < x.c; ++ci) {
        for (int dy = -pad; dy <= pad; ++dy) {
            for (int dx = -pad; dx <= pad; ++dx, ++row) {
                double* dst = col.data() + row * col.cols();
                for (int y = 0; y < x.h; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= x.h) continue;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(x.w, x.w - dx);
                    const double* src = x.data() + (static_cast<size_t>(ci) * x.h + sy) * x.w;
                    for (int xx = x0; xx < x1; ++xx) dst[static_cast<size_t>(y) * x.w + xx] = src[xx + dx];
                }
            }
        }
    }
    return col;
}

void col2im_add(const RowMat& col, int c, int h, int w, int k, Tensor& out) {
    const int pad = k / 2;
    long row = 0;
    for (int ci = 0; ci < c; ++ci) {
        for (int dy = -pad; dy <= pad; ++dy) {
            for (int dx = -pad; dx <= pad; ++dx, ++row) {
                const double* src = col.data() + row * col.cols();
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) continue;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(w, w - dx);
                    double* dst = out.data() + (static_cast<size_t>(ci) * h + sy) * w;
                    for (int xx = x0; xx < x1; ++xx) dst[xx + dx] += src[static_cast<size_t>(y) * w + xx];
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const std::vector<double>& bias, int k) {
    if (k % 2 == 0 || k < 1) throw std::invalid_argument("conv2d: kernel size must be odd");
    const int cout = weight.c;
    const int cin = weight.h;
    if (cin != x.c || weight.w != k * k)
        throw std::invalid_argument("conv2d: weight shape " + weight.shape_str() + " does not match input " + x.shape_str());

    Tensor y(cout, x.h, x.w);
    if (k == 1) {
        ConstRowMap wm(weight.data(), cout, cin);
        ConstRowMap xm(x.data(), cin, static_cast<long>(x.h) * x.w);
        RowMap ym(y.data(), cout, static_cast<long>(x.h) * x.w);
        ym.noalias() = wm * xm;
    } else {
        const RowMat col = im2col(x, k);
        ConstRowMap wm(weight.data(), cout, static_cast<long>(cin) * k * k);
        RowMap ym(y.data(), cout, col.cols());
        ym.noalias() = wm * col;
    }
    for (int co = 0; co < cout; ++co) {
        double* p = y.data() + static_cast<size_t>(co) * y.plane();
        const double b = bias[co];
        for (int i = 0; i < y.plane(); ++i) p[i] += b;
    }
    return y;
}

void conv2d_backward(const Tensor& x, const Tensor& weight, int k, const Tensor& grad_out,
                     Tensor& grad_x, Tensor& grad_weight, std::vector<double>& grad_bias) {
    const int cout = weight.c;
    const int cin = weight.h;
    const long n = static_cast<long>(x.h) * x.w;

    ConstRowMap gy(grad_out.data(), cout, n);
    for (int co = 0; co < cout; ++co) grad_bias[co] += gy.row(co).sum();

    if (k == 1) {
        ConstRowMap wm(weight.data(), cout, cin);
        ConstRowMap xm(x.data(), cin, n);
        RowMap gw(grad_weight.data(), cout, cin);
        gw.noalias() += gy * xm.transpose();
        RowMap gx(grad_x.data(), cin, n);
        gx.noalias() += wm.transpose() * gy;
        return;
    }

    const RowMat col = im2col(x, k);
    ConstRowMap wm(weight.data(), cout, static_cast<long>(cin) * k * k);
    RowMap gw(grad_weight.data(), cout, static_cast<long>(cin) * k * k);
    gw.noalias() += gy * col.transpose();
    const RowMat gcol = wm.transpose() * gy;
    col2im_add(gcol, cin, x.h, x.w, k, grad_x);
}

Tensor maxpool2(const Tensor& x, std::vector<int>& argmax) {
    if (x.h % 2 != 0 || x.w % 2 != 0) throw std::invalid_argument("maxpool2: odd spatial size " + x.shape_str());
    Tensor y(x.c, x.h / 2, x.w / 2);
    argmax.assign(y.size(), 0);
    size_t oi = 0;
    for (int ci = 0; ci < x.c; ++ci) {
        for (int y0 = 0; y0 < x.h; y0 += 2) {
            for (int x0 = 0; x0 < x.w; x0 += 2, ++oi) {
                int best = (static_cast<int>(ci) * x.h + y0) * x.w + x0;
                double bv = x.v[best];
                const int cand[3] = {best + 1, best + x.w, best + x.w + 1};
                for (int idx : cand) {
                    if (x.v[idx] > bv) { bv = x.v[idx]; best = idx; }
                }
                y.v[oi] = bv;
                argmax[oi] = best;
            }
        }
    }
    return y;
}

void maxpool2_backward(const Tensor& grad_out, const std::vector<int>& argmax, Tensor& grad_x) {
    for (size_t i = 0; i < grad_out.size(); ++i) grad_x.v[argmax[i]] += grad_out.v[i];
}

Tensor upsample_nearest2(const Tensor& x) {
    Tensor y(x.c, x.h * 2, x.w * 2);
    for (int ci = 0; ci < x.c; ++ci)
        for (int yy = 0; yy < y.h; ++yy) {
            const double* src = x.data() + (static_cast<size_t>(ci) * x.h + yy / 2) * x.w;
            double* dst = y.data() + (static_cast<size_t>(ci) * y.h + yy) * y.w;
            for (int xx = 0; xx < y.w; ++xx) dst[xx] = src[xx / 2];
        }
    return y;
}

void upsample_nearest2_backward(const Tensor& grad_out, Tensor& grad_x) {
    const int h = grad_x.h, w = grad_x.w;
    for (int ci = 0; ci < grad_x.c; ++ci)
        for (int yy = 0; yy < grad_out.h; ++yy) {
            const double* src = grad_out.data() + (static_cast<size_t>(ci) * grad_out.h + yy) * grad_out.w;
            double* dst = grad_x.data() + (static_cast<size_t>(ci) * h + yy / 2) * w;
            for (int xx = 0; xx < grad_out.w; ++xx) dst[xx / 2] += src[xx];
        }
}

}  // namespace tyche
