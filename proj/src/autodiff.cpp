#include "tyche/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tyche::ad {

void Graph::backward(Node* root) {
    if (root->val.size() != 1) throw std::invalid_argument("backward: root must be a scalar");
    for (auto& n : nodes_) n->grad.fill(0.0);
    root->grad.v[0] = 1.0;
    bool reached_root = false;  // nodes created after root never feed into it
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (!reached_root && it->get() != root) continue;
        reached_root = true;
        if ((*it)->back) (*it)->back();
    }
}

Node* Graph::conv(Node* x, Param& w, Param& b, int k) {
    Node* out = make(conv2d(x->val, w.value, b.value.v, k));
    Node* xn = x;
    Param* wp = &w;
    Param* bp = &b;
    out->back = [out, xn, wp, bp, k]() {
        conv2d_backward(xn->val, wp->value, k, out->grad, xn->grad, wp->grad, bp->grad.v);
    };
    return out;
}

Node* Graph::leaky_relu(Node* x, double slope) {
    Tensor y = x->val;
    for (double& v : y.v) v = v >= 0.0 ? v : slope * v;
    Node* out = make(std::move(y));
    out->back = [out, x, slope]() {
        for (size_t i = 0; i < x->val.size(); ++i)
            x->grad.v[i] += out->grad.v[i] * (x->val.v[i] >= 0.0 ? 1.0 : slope);
    };
    return out;
}

Node* Graph::sigmoid(Node* x) {
    Tensor y = x->val;
    for (double& v : y.v) v = 1.0 / (1.0 + std::exp(-v));
    Node* out = make(std::move(y));
    out->back = [out, x]() {
        for (size_t i = 0; i < x->val.size(); ++i) {
            const double s = out->val.v[i];
            x->grad.v[i] += out->grad.v[i] * s * (1.0 - s);
        }
    };
    return out;
}

Node* Graph::concat(const std::vector<Node*>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat: empty input");
    int c = 0;
    for (Node* x : xs) {
        if (x->val.h != xs[0]->val.h || x->val.w != xs[0]->val.w)
            throw std::invalid_argument("concat: spatial mismatch");
        c += x->val.c;
    }
    Tensor y(c, xs[0]->val.h, xs[0]->val.w);
    size_t off = 0;
    for (Node* x : xs) {
        std::copy(x->val.v.begin(), x->val.v.end(), y.v.begin() + off);
        off += x->val.size();
    }
    Node* out = make(std::move(y));
    std::vector<Node*> parents = xs;
    out->back = [out, parents]() {
        size_t off = 0;
        for (Node* x : parents) {
            for (size_t i = 0; i < x->val.size(); ++i) x->grad.v[i] += out->grad.v[off + i];
            off += x->val.size();
        }
    };
    return out;
}

Node* Graph::maxpool(Node* x) {
    auto argmax = std::make_shared<std::vector<int>>();
    Node* out = make(maxpool2(x->val, *argmax));
    out->back = [out, x, argmax]() { maxpool2_backward(out->grad, *argmax, x->grad); };
    return out;
}

Node* Graph::upsample(Node* x) {
    Node* out = make(upsample_nearest2(x->val));
    out->back = [out, x]() { upsample_nearest2_backward(out->grad, x->grad); };
    return out;
}

Node* Graph::mean_set(const std::vector<Node*>& xs, bool canonical) {
    if (xs.empty()) throw std::invalid_argument("mean_set: empty set");
    const size_t n = xs[0]->val.size();
    for (Node* x : xs)
        if (x->val.size() != n) throw std::invalid_argument("mean_set: shape mismatch");

    const double inv = 1.0 / xs.size();
    Tensor y = Tensor::zeros_like(xs[0]->val);
    if (canonical && xs.size() > 1) {
        std::vector<double> buf(xs.size());
        for (size_t i = 0; i < n; ++i) {
            for (size_t m = 0; m < xs.size(); ++m) buf[m] = xs[m]->val.v[i];
            std::sort(buf.begin(), buf.end());
            double acc = 0.0;
            for (double b : buf) acc += b;
            y.v[i] = acc * inv;
        }
    } else {
        for (Node* x : xs)
            for (size_t i = 0; i < n; ++i) y.v[i] += x->val.v[i];
        for (double& v : y.v) v *= inv;
    }
    Node* out = make(std::move(y));
    std::vector<Node*> parents = xs;
    out->back = [out, parents, inv]() {
        for (Node* x : parents)
            for (size_t i = 0; i < x->val.size(); ++i) x->grad.v[i] += inv * out->grad.v[i];
    };
    return out;
}

Node* Graph::affine_sum(const std::vector<Node*>& xs, const std::vector<double>& coef, double bias) {
    if (xs.size() != coef.size()) throw std::invalid_argument("affine_sum: size mismatch");
    double acc = bias;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (xs[i]->val.size() != 1) throw std::invalid_argument("affine_sum: non-scalar input");
        acc += coef[i] * xs[i]->scalar();
    }
    Node* out = make(Tensor::scalar(acc));
    std::vector<Node*> parents = xs;
    std::vector<double> c = coef;
    out->back = [out, parents, c]() {
        for (size_t i = 0; i < parents.size(); ++i) parents[i]->grad.v[0] += c[i] * out->grad.v[0];
    };
    return out;
}

Node* Graph::select(const std::vector<Node*>& xs, size_t idx) {
    if (idx >= xs.size()) throw std::invalid_argument("select: index out of range");
    Node* out = make(xs[idx]->val);
    Node* chosen = xs[idx];
    out->back = [out, chosen]() {
        for (size_t i = 0; i < chosen->grad.size(); ++i) chosen->grad.v[i] += out->grad.v[i];
    };
    return out;
}

Node* Graph::soft_dice(Node* pred, const LabelMask& truth) {
    if (pred->val.c != 1 || pred->val.h != truth.h || pred->val.w != truth.w)
        throw std::invalid_argument("soft_dice: shape mismatch (" + pred->val.shape_str() + ")");
    double inter = 0.0, sp = 0.0, sg = 0.0;
    for (size_t i = 0; i < pred->val.size(); ++i) {
        sp += pred->val.v[i];
        if (truth.v[i]) {
            inter += pred->val.v[i];
            sg += 1.0;
        }
    }
    const double num = 2.0 * inter + kDiceEps;
    const double den = sp + sg + kDiceEps;
    Node* out = make(Tensor::scalar(1.0 - num / den));
    const LabelMask* g = &truth;  // caller keeps truth alive for the graph's lifetime
    out->back = [out, pred, g, num, den]() {
        const double go = out->grad.v[0];
        const double d2 = den * den;
        for (size_t i = 0; i < pred->val.size(); ++i) {
            const double dnum = g->v[i] ? 2.0 : 0.0;
            pred->grad.v[i] += go * (-(dnum * den - num) / d2);
        }
    };
    return out;
}

Node* Graph::soft_dice_pair(Node* a, Node* b) {
    if (!a->val.same_shape(b->val)) throw std::invalid_argument("soft_dice_pair: shape mismatch");
    double inter = 0.0, sa = 0.0, sb = 0.0;
    for (size_t i = 0; i < a->val.size(); ++i) {
        inter += a->val.v[i] * b->val.v[i];
        sa += a->val.v[i];
        sb += b->val.v[i];
    }
    const double num = 2.0 * inter + kDiceEps;
    const double den = sa + sb + kDiceEps;
    Node* out = make(Tensor::scalar(1.0 - num / den));
    out->back = [out, a, b, num, den]() {
        const double go = out->grad.v[0];
        const double d2 = den * den;
        for (size_t i = 0; i < a->val.size(); ++i) {
            a->grad.v[i] += go * (-(2.0 * b->val.v[i] * den - num) / d2);
            b->grad.v[i] += go * (-(2.0 * a->val.v[i] * den - num) / d2);
        }
    };
    return out;
}

Node* Graph::bce_mean(Node* pred, const LabelMask& truth) {
    if (pred->val.c != 1 || pred->val.h != truth.h || pred->val.w != truth.w)
        throw std::invalid_argument("bce_mean: shape mismatch");
    const double n = static_cast<double>(pred->val.size());
    double acc = 0.0;
    for (size_t i = 0; i < pred->val.size(); ++i) {
        const double p = std::clamp(pred->val.v[i], kCeClamp, 1.0 - kCeClamp);
        acc += truth.v[i] ? -std::log(p) : -std::log(1.0 - p);
    }
    Node* out = make(Tensor::scalar(acc / n));
    const LabelMask* g = &truth;
    out->back = [out, pred, g, n]() {
        const double go = out->grad.v[0] / n;
        for (size_t i = 0; i < pred->val.size(); ++i) {
            const double raw = pred->val.v[i];
            if (raw < kCeClamp || raw > 1.0 - kCeClamp) continue;  // clamped: zero slope
            pred->grad.v[i] += go * (g->v[i] ? -1.0 / raw : 1.0 / (1.0 - raw));
        }
    };
    return out;
}

}  // namespace tyche::ad
