#include <doctest.h>

#include <cmath>
#include <tuple>

#include "tyche/rng.hpp"
#include "tyche/tensor.hpp"

using namespace tyche;

namespace {

Tensor random_tensor(int c, int h, int w, uint64_t seed) {
    Tensor t(c, h, w);
    Rng r(seed);
    for (double& x : t.v) x = r.gaussian();
    return t;
}

// Direct same-padding convolution written independently of the library path.
Tensor conv_naive(const Tensor& x, const Tensor& weight, const std::vector<double>& bias, int k) {
    const int cout = weight.c, cin = x.c, pad = k / 2;
    Tensor out(cout, x.h, x.w);
    for (int co = 0; co < cout; ++co)
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx) {
                double acc = bias[co];
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            int sy = y + ky - pad, sx = xx + kx - pad;
                            if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
                            acc += x.at(ci, sy, sx) * weight.v[(static_cast<size_t>(co) * cin + ci) * k * k + ky * k + kx];
                        }
                out.at(co, y, xx) = acc;
            }
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

}  // namespace

TEST_CASE("conv2d matches a naive direct convolution") {
    using Shape = std::tuple<int, int, int, int, int>;
    for (auto [cin, cout, h, w, k] :
         {Shape{1, 1, 5, 5, 3}, Shape{3, 4, 8, 6, 3}, Shape{2, 5, 7, 7, 5}, Shape{4, 2, 6, 9, 1}}) {
        Tensor x = random_tensor(cin, h, w, 100 + cout);
        Tensor wt = random_tensor(cout, cin, k * k, 200 + cout);
        std::vector<double> bias(cout);
        Rng r(300 + cout);
        for (double& b : bias) b = r.gaussian();
        CHECK(max_abs_diff(conv2d(x, wt, bias, k), conv_naive(x, wt, bias, k)) < 1e-12);
    }
}

TEST_CASE("conv2d_backward matches finite differences") {
    const int cin = 2, cout = 3, h = 5, w = 4, k = 3;
    Tensor x = random_tensor(cin, h, w, 1);
    Tensor wt = random_tensor(cout, cin, k * k, 2);
    std::vector<double> bias(cout, 0.1);
    Tensor gy = random_tensor(cout, h, w, 3);

    Tensor gx(cin, h, w), gw = Tensor::zeros_like(wt);
    std::vector<double> gb(cout, 0.0);
    conv2d_backward(x, wt, k, gy, gx, gw, gb);

    // loss = <gy, conv(x)>; analytic gradients vs central differences
    auto loss = [&](const Tensor& xx, const Tensor& ww, const std::vector<double>& bb) {
        Tensor y = conv2d(xx, ww, bb, k);
        double s = 0.0;
        for (size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * gy.v[i];
        return s;
    };
    const double eps = 1e-6;
    for (size_t i = 0; i < x.v.size(); i += 7) {
        Tensor xp = x, xm = x;
        xp.v[i] += eps;
        xm.v[i] -= eps;
        double fd = (loss(xp, wt, bias) - loss(xm, wt, bias)) / (2 * eps);
        CHECK(gx.v[i] == doctest::Approx(fd).epsilon(1e-6));
    }
    for (size_t i = 0; i < wt.v.size(); i += 5) {
        Tensor wp = wt, wm = wt;
        wp.v[i] += eps;
        wm.v[i] -= eps;
        double fd = (loss(x, wp, bias) - loss(x, wm, bias)) / (2 * eps);
        CHECK(gw.v[i] == doctest::Approx(fd).epsilon(1e-6));
    }
    for (int co = 0; co < cout; ++co) {
        auto bp = bias, bm = bias;
        bp[co] += eps;
        bm[co] -= eps;
        double fd = (loss(x, wt, bp) - loss(x, wt, bm)) / (2 * eps);
        CHECK(gb[co] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("maxpool2 picks the window max and routes gradient to the argmax") {
    Tensor x(1, 4, 4);
    double vals[16] = {1, 2, 5, 6, 3, 4, 7, 8, -1, -2, 0, 0.5, -3, -4, 0.25, 0.1};
    for (int i = 0; i < 16; ++i) x.v[i] = vals[i];
    std::vector<int> argmax;
    Tensor y = maxpool2(x, argmax);
    CHECK(y.h == 2);
    CHECK(y.w == 2);
    CHECK(y.at(0, 0, 0) == 4.0);
    CHECK(y.at(0, 0, 1) == 8.0);
    CHECK(y.at(0, 1, 0) == -1.0);
    CHECK(y.at(0, 1, 1) == 0.5);

    Tensor gy(1, 2, 2);
    gy.v = {10, 20, 30, 40};
    Tensor gx(1, 4, 4);
    maxpool2_backward(gy, argmax, gx);
    double total = 0.0;
    for (double g : gx.v) total += g;
    CHECK(total == 100.0);
    CHECK(gx.at(0, 1, 1) == 10.0);
    CHECK(gx.at(0, 1, 3) == 20.0);
    CHECK(gx.at(0, 2, 0) == 30.0);
    CHECK(gx.at(0, 2, 3) == 40.0);
}

TEST_CASE("upsample_nearest2 replicates pixels and its backward sums them") {
    Tensor x = random_tensor(2, 3, 2, 42);
    Tensor y = upsample_nearest2(x);
    CHECK(y.h == 6);
    CHECK(y.w == 4);
    for (int c = 0; c < 2; ++c)
        for (int yy = 0; yy < 6; ++yy)
            for (int xx = 0; xx < 4; ++xx) CHECK(y.at(c, yy, xx) == x.at(c, yy / 2, xx / 2));

    Tensor gy(2, 6, 4);
    gy.fill(1.0);
    Tensor gx(2, 3, 2);
    upsample_nearest2_backward(gy, gx);
    for (double g : gx.v) CHECK(g == 4.0);
}

TEST_CASE("pool then upsample round trip keeps shape") {
    Tensor x = random_tensor(3, 8, 8, 5);
    std::vector<int> argmax;
    Tensor y = upsample_nearest2(maxpool2(x, argmax));
    CHECK(y.same_shape(x));
}
