#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "seganet/errors.hpp"
#include "seganet/rng.hpp"

// Dense row-major tensors with reverse-mode automatic differentiation.
// Exactly the primitives the segmentation network needs: conv2d,
// conv_transpose2d, instance_norm, prelu, sigmoid, channel concat,
// elementwise add, plus reflection pad/crop for arbitrary input sizes and
// small reductions for losses. All loops run in a fixed order on a single
// thread, so identical inputs give bit-identical outputs run to run.

namespace seganet {

namespace detail {

template <typename T>
struct Node {
    std::vector<int> dims;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
    bool backward_done = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node<T>>> inputs;
    std::function<void()> backward_fn;

    std::size_t size() const { return values.size(); }

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), T(0));
    }
};

inline std::size_t checked_numel(const std::vector<int>& dims) {
    std::size_t n = 1;
    for (int d : dims) {
        if (d <= 0) throw std::invalid_argument("tensor dims must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

}  // namespace detail

template <typename T>
class Tensor {
    static_assert(std::is_floating_point_v<T>);

public:
    Tensor() : node_(std::make_shared<detail::Node<T>>()) {}

    Tensor(std::vector<int> dims, std::vector<T> values, bool requires_grad = false)
        : node_(std::make_shared<detail::Node<T>>()) {
        if (detail::checked_numel(dims) != values.size())
            throw std::invalid_argument("tensor data length does not match dims");
        node_->dims = std::move(dims);
        node_->values = std::move(values);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(std::vector<int> dims, bool requires_grad = false) {
        std::size_t n = detail::checked_numel(dims);
        return Tensor(std::move(dims), std::vector<T>(n, T(0)), requires_grad);
    }

    static Tensor full(std::vector<int> dims, T value, bool requires_grad = false) {
        std::size_t n = detail::checked_numel(dims);
        return Tensor(std::move(dims), std::vector<T>(n, value), requires_grad);
    }

    static Tensor scalar(T value) { return Tensor({1}, {value}); }

    static Tensor randn(std::vector<int> dims, Rng& rng, T sigma = T(1),
                        bool requires_grad = false) {
        std::size_t n = detail::checked_numel(dims);
        std::vector<T> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<T>(rng.normal()) * sigma;
        return Tensor(std::move(dims), std::move(v), requires_grad);
    }

    const std::vector<int>& dims() const { return node_->dims; }
    int dim(int i) const { return node_->dims.at(static_cast<std::size_t>(i)); }
    int ndim() const { return static_cast<int>(node_->dims.size()); }
    std::size_t size() const { return node_->size(); }

    const std::vector<T>& values() const { return node_->values; }
    T item() const {
        if (size() != 1) throw std::logic_error("item() requires a scalar tensor");
        return node_->values[0];
    }

    bool requires_grad() const { return node_->requires_grad; }

    const std::vector<T>& grad() const {
        if (node_->grad.size() != node_->values.size())
            throw std::logic_error("gradient not available; run backward first");
        return node_->grad;
    }

    bool all_finite() const {
        for (T v : node_->values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // Leaf-only mutation, used by the optimizer to write updated parameters.
    std::vector<T>& leaf_values() {
        if (node_->backward_fn)
            throw std::logic_error("cannot mutate a tensor produced by an op");
        return node_->values;
    }

    // Reverse-mode sweep from a scalar root. Visits the recorded ops in exact
    // reverse topological order. A second call on the same root is an error;
    // rebuild the forward graph instead.
    void backward() {
        if (size() != 1) throw std::logic_error("backward() requires a scalar root");
        if (node_->backward_done)
            throw std::logic_error("backward() already ran on this graph; rerun the forward pass");

        std::vector<detail::Node<T>*> order = topo_order();
        node_->ensure_grad();
        node_->grad[0] = T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            detail::Node<T>* n = *it;
            if (!n->backward_fn) continue;
            for (auto& in : n->inputs)
                if (in->requires_grad) in->ensure_grad();
            n->backward_fn();
        }
        node_->backward_done = true;
    }

    std::shared_ptr<detail::Node<T>> node() const { return node_; }

    explicit Tensor(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}

private:
    std::vector<detail::Node<T>*> topo_order() const {
        std::vector<detail::Node<T>*> order;
        std::unordered_set<detail::Node<T>*> seen;
        // Iterative post-order DFS; graphs can be deep (two ops per layer).
        std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
        stack.emplace_back(node_.get(), 0);
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& [n, next] = stack.back();
            if (next < n->inputs.size()) {
                detail::Node<T>* child = n->inputs[next++].get();
                if (seen.insert(child).second) stack.emplace_back(child, 0);
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
        return order;
    }

    std::shared_ptr<detail::Node<T>> node_;
};

namespace detail {

template <typename T>
std::shared_ptr<Node<T>> make_op_node(const char* op, std::vector<int> dims,
                                      std::vector<T> values,
                                      std::vector<std::shared_ptr<Node<T>>> inputs) {
    auto n = std::make_shared<Node<T>>();
    n->op = op;
    n->dims = std::move(dims);
    n->values = std::move(values);
    n->inputs = std::move(inputs);
    for (auto& in : n->inputs)
        if (in->requires_grad) n->requires_grad = true;
    return n;
}

inline void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: cross-correlation, zero padding. input [B,Cin,H,W],
// kernel [Cout,Cin,kH,kW], bias [Cout]. stride 1 or 2.
// H' = floor((H + 2*padding - kH)/stride) + 1.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 int stride, int padding) {
    detail::require(input.ndim() == 4, "conv2d: input must be [B,C,H,W]");
    detail::require(kernel.ndim() == 4, "conv2d: kernel must be [Cout,Cin,kH,kW]");
    detail::require(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2");
    detail::require(padding >= 0, "conv2d: padding must be non-negative");
    const int B = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    detail::require(kernel.dim(1) == Cin, "conv2d: channel mismatch between input and kernel");
    detail::require(bias.ndim() == 1 && bias.dim(0) == Cout,
                    "conv2d: bias must have one value per output channel");
    const int Ho = (H + 2 * padding - kh) / stride + 1;
    const int Wo = (W + 2 * padding - kw) / stride + 1;
    detail::require(H + 2 * padding >= kh && W + 2 * padding >= kw && Ho > 0 && Wo > 0,
                    "conv2d: kernel larger than padded input");

    std::vector<T> out(static_cast<std::size_t>(B) * Cout * Ho * Wo);
    const T* in = input.values().data();
    const T* k = kernel.values().data();
    const T* bs = bias.values().data();

    for (int b = 0; b < B; ++b) {
        for (int oc = 0; oc < Cout; ++oc) {
            T* op = out.data() + (static_cast<std::size_t>(b) * Cout + oc) * Ho * Wo;
            std::fill(op, op + static_cast<std::size_t>(Ho) * Wo, bs[oc]);
            for (int ic = 0; ic < Cin; ++ic) {
                const T* ip = in + (static_cast<std::size_t>(b) * Cin + ic) * H * W;
                const T* kp = k + ((static_cast<std::size_t>(oc) * Cin + ic) * kh) * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    for (int kx = 0; kx < kw; ++kx) {
                        const T wv = kp[ky * kw + kx];
                        if (wv == T(0)) continue;
                        for (int oy = 0; oy < Ho; ++oy) {
                            const int iy = oy * stride + ky - padding;
                            if (iy < 0 || iy >= H) continue;
                            const T* irow = ip + static_cast<std::size_t>(iy) * W;
                            T* orow = op + static_cast<std::size_t>(oy) * Wo;
                            // valid ox range so ix = ox*stride + kx - padding stays in frame
                            int ox0 = 0;
                            while (ox0 * stride + kx - padding < 0) ++ox0;
                            int ox1 = Wo;
                            while (ox1 > ox0 && (ox1 - 1) * stride + kx - padding >= W) --ox1;
                            const int base = kx - padding;
                            if (stride == 1) {
                                for (int ox = ox0; ox < ox1; ++ox)
                                    orow[ox] += wv * irow[ox + base];
                            } else {
                                for (int ox = ox0; ox < ox1; ++ox)
                                    orow[ox] += wv * irow[ox * 2 + base];
                            }
                        }
                    }
                }
            }
        }
    }

    auto node = detail::make_op_node<T>("conv2d", {B, Cout, Ho, Wo}, std::move(out),
                                        {input.node(), kernel.node(), bias.node()});
    if (node->requires_grad) {
        auto in_n = input.node();
        auto k_n = kernel.node();
        auto b_n = bias.node();
        detail::Node<T>* self = node.get();
        node->backward_fn = [=]() {
            const T* g = self->grad.data();
            const T* iv = in_n->values.data();
            const T* kv = k_n->values.data();
            for (int b = 0; b < B; ++b) {
                for (int oc = 0; oc < Cout; ++oc) {
                    const T* gp = g + (static_cast<std::size_t>(b) * Cout + oc) * Ho * Wo;
                    if (b_n->requires_grad) {
                        T s = T(0);
                        for (std::size_t i = 0; i < static_cast<std::size_t>(Ho) * Wo; ++i)
                            s += gp[i];
                        b_n->grad[oc] += s;
                    }
                    for (int ic = 0; ic < Cin; ++ic) {
                        const T* ip = iv + (static_cast<std::size_t>(b) * Cin + ic) * H * W;
                        const T* kp = kv + ((static_cast<std::size_t>(oc) * Cin + ic) * kh) * kw;
                        T* gip = in_n->requires_grad
                                     ? in_n->grad.data() + (static_cast<std::size_t>(b) * Cin + ic) * H * W
                                     : nullptr;
                        T* gkp = k_n->requires_grad
                                     ? k_n->grad.data() + ((static_cast<std::size_t>(oc) * Cin + ic) * kh) * kw
                                     : nullptr;
                        for (int ky = 0; ky < kh; ++ky) {
                            for (int kx = 0; kx < kw; ++kx) {
                                const T wv = kp[ky * kw + kx];
                                T wgrad = T(0);
                                for (int oy = 0; oy < Ho; ++oy) {
                                    const int iy = oy * stride + ky - padding;
                                    if (iy < 0 || iy >= H) continue;
                                    const T* grow = gp + static_cast<std::size_t>(oy) * Wo;
                                    const T* irow = ip + static_cast<std::size_t>(iy) * W;
                                    T* girow = gip ? gip + static_cast<std::size_t>(iy) * W : nullptr;
                                    for (int ox = 0; ox < Wo; ++ox) {
                                        const int ix = ox * stride + kx - padding;
                                        if (ix < 0 || ix >= W) continue;
                                        const T gv = grow[ox];
                                        wgrad += gv * irow[ix];
                                        if (girow) girow[ix] += gv * wv;
                                    }
                                }
                                if (gkp) gkp[ky * kw + kx] += wgrad;
                            }
                        }
                    }
                }
            }
        };
    }
    return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// conv_transpose2d: adjoint of conv2d. input [B,Cin,H,W],
// kernel [Cin,Cout,kH,kW], bias [Cout]. For stride 2 the output padding is
// chosen so spatial dims double exactly; this requires kH - 2*padding to be
// 1 or 2. For stride 1, H'' = H + kH - 1 - 2*padding.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& kernel,
                           const Tensor<T>& bias, int stride, int padding) {
    detail::require(input.ndim() == 4, "conv_transpose2d: input must be [B,C,H,W]");
    detail::require(kernel.ndim() == 4, "conv_transpose2d: kernel must be [Cin,Cout,kH,kW]");
    detail::require(stride == 1 || stride == 2, "conv_transpose2d: stride must be 1 or 2");
    detail::require(padding >= 0, "conv_transpose2d: padding must be non-negative");
    const int B = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Cout = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    detail::require(kernel.dim(0) == Cin,
                    "conv_transpose2d: channel mismatch between input and kernel");
    detail::require(bias.ndim() == 1 && bias.dim(0) == Cout,
                    "conv_transpose2d: bias must have one value per output channel");

    int Ho, Wo;
    if (stride == 2) {
        const int op_h = 2 + 2 * padding - kh;
        const int op_w = 2 + 2 * padding - kw;
        detail::require(op_h >= 0 && op_h < 2 && op_w >= 0 && op_w < 2,
                        "conv_transpose2d: kernel/padding combination cannot double dims");
        Ho = 2 * H;
        Wo = 2 * W;
    } else {
        Ho = H + kh - 1 - 2 * padding;
        Wo = W + kw - 1 - 2 * padding;
        detail::require(Ho > 0 && Wo > 0, "conv_transpose2d: output dims must be positive");
    }

    std::vector<T> out(static_cast<std::size_t>(B) * Cout * Ho * Wo);
    const T* in = input.values().data();
    const T* k = kernel.values().data();
    const T* bs = bias.values().data();

    for (int b = 0; b < B; ++b)
        for (int oc = 0; oc < Cout; ++oc) {
            T* op = out.data() + (static_cast<std::size_t>(b) * Cout + oc) * Ho * Wo;
            std::fill(op, op + static_cast<std::size_t>(Ho) * Wo, bs[oc]);
        }

    for (int b = 0; b < B; ++b) {
        for (int ic = 0; ic < Cin; ++ic) {
            const T* ip = in + (static_cast<std::size_t>(b) * Cin + ic) * H * W;
            for (int oc = 0; oc < Cout; ++oc) {
                const T* kp = k + ((static_cast<std::size_t>(ic) * Cout + oc) * kh) * kw;
                T* op = out.data() + (static_cast<std::size_t>(b) * Cout + oc) * Ho * Wo;
                for (int iy = 0; iy < H; ++iy) {
                    for (int ix = 0; ix < W; ++ix) {
                        const T v = ip[iy * W + ix];
                        if (v == T(0)) continue;
                        for (int ky = 0; ky < kh; ++ky) {
                            const int oy = iy * stride + ky - padding;
                            if (oy < 0 || oy >= Ho) continue;
                            T* orow = op + static_cast<std::size_t>(oy) * Wo;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ox = ix * stride + kx - padding;
                                if (ox < 0 || ox >= Wo) continue;
                                orow[ox] += v * kp[ky * kw + kx];
                            }
                        }
                    }
                }
            }
        }
    }

    auto node = detail::make_op_node<T>("conv_transpose2d", {B, Cout, Ho, Wo}, std::move(out),
                                        {input.node(), kernel.node(), bias.node()});
    if (node->requires_grad) {
        auto in_n = input.node();
        auto k_n = kernel.node();
        auto b_n = bias.node();
        detail::Node<T>* self = node.get();
        node->backward_fn = [=]() {
            const T* g = self->grad.data();
            const T* iv = in_n->values.data();
            const T* kv = k_n->values.data();
            if (b_n->requires_grad) {
                for (int b = 0; b < B; ++b)
                    for (int oc = 0; oc < Cout; ++oc) {
                        const T* gp = g + (static_cast<std::size_t>(b) * Cout + oc) * Ho * Wo;
                        T s = T(0);
                        for (std::size_t i = 0; i < static_cast<std::size_t>(Ho) * Wo; ++i)
                            s += gp[i];
                        b_n->grad[oc] += s;
                    }
            }
            for (int b = 0; b < B; ++b) {
                for (int ic = 0; ic < Cin; ++ic) {
                    const T* ip = iv + (static_cast<std::size_t>(b) * Cin + ic) * H * W;
                    T* gip = in_n->requires_grad
                                 ? in_n->grad.data() + (static_cast<std::size_t>(b) * Cin + ic) * H * W
                                 : nullptr;
                    for (int oc = 0; oc < Cout; ++oc) {
                        const T* kp = kv + ((static_cast<std::size_t>(ic) * Cout + oc) * kh) * kw;
                        T* gkp = k_n->requires_grad
                                     ? k_n->grad.data() + ((static_cast<std::size_t>(ic) * Cout + oc) * kh) * kw
                                     : nullptr;
                        const T* gp = g + (static_cast<std::size_t>(b) * Cout + oc) * Ho * Wo;
                        for (int iy = 0; iy < H; ++iy) {
                            for (int ix = 0; ix < W; ++ix) {
                                const T v = ip[iy * W + ix];
                                T acc = T(0);
                                for (int ky = 0; ky < kh; ++ky) {
                                    const int oy = iy * stride + ky - padding;
                                    if (oy < 0 || oy >= Ho) continue;
                                    const T* grow = gp + static_cast<std::size_t>(oy) * Wo;
                                    for (int kx = 0; kx < kw; ++kx) {
                                        const int ox = ix * stride + kx - padding;
                                        if (ox < 0 || ox >= Wo) continue;
                                        const T gv = grow[ox];
                                        acc += gv * kp[ky * kw + kx];
                                        if (gkp) gkp[ky * kw + kx] += gv * v;
                                    }
                                }
                                if (gip) gip[iy * W + ix] += acc;
                            }
                        }
                    }
                }
            }
        };
    }
    return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// instance_norm: per (sample, channel) standardization over the spatial
// positions, population variance, learnable affine.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                        T epsilon) {
    detail::require(input.ndim() == 4, "instance_norm: input must be [B,C,H,W]");
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    detail::require(gamma.ndim() == 1 && gamma.dim(0) == C, "instance_norm: gamma must be [C]");
    detail::require(beta.ndim() == 1 && beta.dim(0) == C, "instance_norm: beta must be [C]");
    detail::require(static_cast<std::size_t>(H) * W >= 2,
                    "instance_norm: needs at least 2 spatial positions");
    detail::require(epsilon > T(0), "instance_norm: epsilon must be positive");

    const std::size_t N = static_cast<std::size_t>(H) * W;
    std::vector<T> out(input.size());
    std::vector<T> inv_std(static_cast<std::size_t>(B) * C);
    std::vector<T> mean(static_cast<std::size_t>(B) * C);
    const T* in = input.values().data();
    const T* gm = gamma.values().data();
    const T* bt = beta.values().data();

    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            const std::size_t off = (static_cast<std::size_t>(b) * C + c) * N;
            T mu = T(0);
            for (std::size_t i = 0; i < N; ++i) mu += in[off + i];
            mu /= static_cast<T>(N);
            T var = T(0);
            for (std::size_t i = 0; i < N; ++i) {
                const T d = in[off + i] - mu;
                var += d * d;
            }
            var /= static_cast<T>(N);
            const T is = T(1) / std::sqrt(var + epsilon);
            mean[static_cast<std::size_t>(b) * C + c] = mu;
            inv_std[static_cast<std::size_t>(b) * C + c] = is;
            for (std::size_t i = 0; i < N; ++i)
                out[off + i] = gm[c] * (in[off + i] - mu) * is + bt[c];
        }
    }

    auto node = detail::make_op_node<T>("instance_norm", input.dims(), std::move(out),
                                        {input.node(), gamma.node(), beta.node()});
    if (node->requires_grad) {
        auto in_n = input.node();
        auto g_n = gamma.node();
        auto b_n = beta.node();
        detail::Node<T>* self = node.get();
        node->backward_fn = [=, mean = std::move(mean), inv_std = std::move(inv_std)]() {
            const T* g = self->grad.data();
            const T* iv = in_n->values.data();
            const T* gm = g_n->values.data();
            for (int b = 0; b < B; ++b) {
                for (int c = 0; c < C; ++c) {
                    const std::size_t off = (static_cast<std::size_t>(b) * C + c) * N;
                    const T mu = mean[static_cast<std::size_t>(b) * C + c];
                    const T is = inv_std[static_cast<std::size_t>(b) * C + c];
                    T sum_g = T(0), sum_gx = T(0);
                    for (std::size_t i = 0; i < N; ++i) {
                        const T xh = (iv[off + i] - mu) * is;
                        sum_g += g[off + i];
                        sum_gx += g[off + i] * xh;
                    }
                    if (b_n->requires_grad) b_n->grad[c] += sum_g;
                    if (g_n->requires_grad) g_n->grad[c] += sum_gx;
                    if (in_n->requires_grad) {
                        const T gn = sum_g / static_cast<T>(N);
                        const T gxn = sum_gx / static_cast<T>(N);
                        const T scale = gm[c] * is;
                        for (std::size_t i = 0; i < N; ++i) {
                            const T xh = (iv[off + i] - mu) * is;
                            in_n->grad[off + i] += scale * (g[off + i] - gn - xh * gxn);
                        }
                    }
                }
            }
        };
    }
    return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// prelu: out = x for x >= 0, slope[c]*x otherwise. One learnable slope per
// channel. The kink at 0 takes the positive branch.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> prelu(const Tensor<T>& input, const Tensor<T>& slope) {
    detail::require(input.ndim() == 4, "prelu: input must be [B,C,H,W]");
    const int B = input.dim(0), C = input.dim(1);
    const std::size_t N = static_cast<std::size_t>(input.dim(2)) * input.dim(3);
    detail::require(slope.ndim() == 1 && slope.dim(0) == C, "prelu: one slope per channel");

    std::vector<T> out(input.size());
    const T* in = input.values().data();
    const T* sl = slope.values().data();
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const std::size_t off = (static_cast<std::size_t>(b) * C + c) * N;
            const T a = sl[c];
            for (std::size_t i = 0; i < N; ++i) {
                const T x = in[off + i];
                out[off + i] = x >= T(0) ? x : a * x;
            }
        }

    auto node = detail::make_op_node<T>("prelu", input.dims(), std::move(out),
                                        {input.node(), slope.node()});
    if (node->requires_grad) {
        auto in_n = input.node();
        auto s_n = slope.node();
        detail::Node<T>* self = node.get();
        node->backward_fn = [=]() {
            const T* g = self->grad.data();
            const T* iv = in_n->values.data();
            const T* sl = s_n->values.data();
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    const std::size_t off = (static_cast<std::size_t>(b) * C + c) * N;
                    const T a = sl[c];
                    T sgrad = T(0);
                    for (std::size_t i = 0; i < N; ++i) {
                        const T x = iv[off + i];
                        if (x >= T(0)) {
                            if (in_n->requires_grad) in_n->grad[off + i] += g[off + i];
                        } else {
                            if (in_n->requires_grad) in_n->grad[off + i] += g[off + i] * a;
                            sgrad += g[off + i] * x;
                        }
                    }
                    if (s_n->requires_grad) s_n->grad[c] += sgrad;
                }
        };
    }
    return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// sigmoid, clamped to the open interval (0,1) so downstream logs and
// threshold rules never meet an exact 0 or 1.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input) {
    const T lo = std::numeric_limits<T>::min();
    const T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
    std::vector<T> out(input.size());
    const T* in = input.values().data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T x = in[i];
        T y;
        if (x >= T(0)) {
            y = T(1) / (T(1) + std::exp(-x));
        } else {
            const T e = std::exp(x);
            y = e / (T(1) + e);
        }
        out[i] = std::min(hi, std::max(lo, y));
    }

    auto node = detail::make_op_node<T>("sigmoid", input.dims(), std::move(out), {input.node()});
    if (node->requires_grad) {
        auto in_n = input.node();
        detail::Node<T>* self = node.get();
        node->backward_fn = [=]() {
            const T* g = self->grad.data();
            const T* y = self->values.data();
            for (std::size_t i = 0; i < self->values.size(); ++i)
                in_n->grad[i] += g[i] * y[i] * (T(1) - y[i]);
        };
    }
    return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// concat_channels: [B,C1,H,W] + [B,C2,H,W] -> [B,C1+C2,H,W].
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require(a.ndim() == 4 && b.ndim() == 4, "concat_channels: inputs must be [B,C,H,W]");
    detail::require(a.dim(0) == b.dim(0), "concat_channels: batch mismatch");
    detail::require(a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
                    "concat_channels: spatial mismatch");
    const int B = a.dim(0), C1 = a.dim(1), C2 = b.dim(1);
    const std::size_t N = static_cast<std::size_t>(a.dim(2)) * a.dim(3);

    std::vector<T> out(static_cast<std::size_t>(B) * (C1 + C2) * N);
    const T* av = a.values().data();
    const T* bv = b.values().data();
    for (int s = 0; s < B; ++s) {
        std::copy(av + static_cast<std::size_t>(s) * C1 * N,
                  av + static_cast<std::size_t>(s + 1) * C1 * N,
                  out.data() + static_cast<std::size_t>(s) * (C1 + C2) * N);
        std::copy(bv + static_cast<std::size_t>(s) * C2 * N,
                  bv + static_cast<std::size_t>(s + 1) * C2 * N,
                  out.data() + static_cast<std::size_t>(s) * (C1 + C2) * N + static_cast<std::size_t>(C1) * N);
    }

    auto node = detail::make_op_node<T>("concat_channels", {B, C1 + C2, a.dim(2), a.dim(3)},
                                        std::move(out), {a.node(), b.node()});
    if (node->requires_grad) {
        auto a_n = a.node();
        auto b_n = b.node();
        detail::Node<T>* self = node.get();
        node->backward_fn = [=]() {
            const T* g = self->grad.data();
            for (int s = 0; s < B; ++s) {
                const std::size_t base = static_cast<std::size_t>(s) * (C1 + C2) * N;
                if (a_n->requires_grad)
                    for (std::size_t i = 0; i < static_cast<std::size_t>(C1) * N; ++i)
                        a_n->grad[static_cast<std::size_t>(s) * C1 * N + i] += g[base + i];
                if (b_n->requires_grad)
                    for (std::size_t i = 0; i < static_cast<std::size_t>(C2) * N; ++i)
                        b_n->grad[static_cast<std::size_t>(s) * C2 * N + i] +=
                            g[base + static_cast<std::size_t>(C1) * N + i];
            }
        };
    }
    return Tensor<T>(node);
}

// Complement of concat_channels: channels [c0, c0+count) of a [B,C,H,W] tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, int c0, int count) {
    detail::require(input.ndim() == 4, "slice_channels: input must be [B,C,H,W]");
    const int B = input.dim(0), C = input.dim(1);
    detail::require(c0 >= 0 && count > 0 && c0 + count <= C, "slice_channels: range out of bounds");
    const std::size_t N = static_cast<std::size_t>(input.dim(2)) * input.dim(3);

    std::vector<T> out(static_cast<std::size_t>(B) * count * N);
    const T* in = input.values().data();
    for (int s = 0; s < B; ++s)
        std::copy(in + (static_cast<std::size_t>(s) * C + c0) * N,
                  in + (static_cast<std::size_t>(s) * C + c0 + count) * N,
                  out.data() + static_cast<std::size_t>(s) * count * N);

    auto node = detail::make_op_node<T>("slice_channels", {B, count, input.dim(2), input.dim(3)},
                                        std::move(out), {input.node()});
    if (node->requires_grad) {
        auto in_n = input.node();
        detail::Node<T>* self = node.get();
        node->backward_fn = [=]() {
            const T* g = self->grad.data();
            for (int s = 0; s < B; ++s)
                for (std::size_t i = 0; i < static_cast<std::size_t>(count) * N; ++i)
                    in_n->grad[(static_cast<std::size_t>(s) * C + c0) * N + i] +=
                        g[static_cast<std::size_t>(s) * count * N + i];
        };
    }
    return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// add: elementwise sum (residual shortcut).
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require(a.dims() == b.dims(), "add: shape mismatch");
    std::vector<T> out(a.size());
    const T* av = a.values().data();
    const T* bv = b.values().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];

    auto node = detail::make_op_node<T>("add", a.dims(), std::move(out), {a.node(), b.node()});
    if (node->requires_grad) {
        auto a_n = a.node();
        auto b_n = b.node();
        detail::Node<T>* self = node.get();
        node->backward_fn = [=]() {
            const T* g = self->grad.data();
            if (a_n->requires_grad)
                for (std::size_t i = 0; i < self->values.size(); ++i) a_n->grad[i] += g[i];
            if (b_n->requires_grad)
                for (std::size_t i = 0; i < self->values.size(); ++i) b_n->grad[i] += g[i];
        };
    }
    return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// Reflection padding (symmetric, edge pixel not repeated) and its inverse
// crop, so the network accepts spatial dims that are not multiples of the
// downsampling factor. pad = {top, bottom, left, right}.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> pad_reflect2d(const Tensor<T>& input, int top, int bottom, int left, int right) {
    detail::require(input.ndim() == 4, "pad_reflect2d: input must be [B,C,H,W]");
    detail::require(top >= 0 && bottom >= 0 && left >= 0 && right >= 0,
                    "pad_reflect2d: negative padding");
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    detail::require(top < H && bottom < H && left < W && right < W,
                    "pad_reflect2d: padding must be smaller than the image");
    const int Ho = H + top + bottom, Wo = W + left + right;

    auto reflect = [](int i, int n) {
        if (i < 0) return -i;
        if (i >= n) return 2 * n - 2 - i;
        return i;
    };

    std::vector<T> out(static_cast<std::size_t>(B) * C * Ho * Wo);
    const T* in = input.values().data();
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const T* ip = in + (static_cast<std::size_t>(b) * C + c) * H * W;
            T* op = out.data() + (static_cast<std::size_t>(b) * C + c) * Ho * Wo;
            for (int y = 0; y < Ho; ++y) {
                const int sy = reflect(y - top, H);
                for (int x = 0; x < Wo; ++x)
                    op[static_cast<std::size_t>(y) * Wo + x] =
                        ip[static_cast<std::size_t>(sy) * W + reflect(x - left, W)];
            }
        }

    auto node = detail::make_op_node<T>("pad_reflect2d", {B, C, Ho, Wo}, std::move(out),
                                        {input.node()});
    if (node->requires_grad) {
        auto in_n = input.node();
        detail::Node<T>* self = node.get();
        node->backward_fn = [=]() {
            const T* g = self->grad.data();
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    T* gip = in_n->grad.data() + (static_cast<std::size_t>(b) * C + c) * H * W;
                    const T* gp = g + (static_cast<std::size_t>(b) * C + c) * Ho * Wo;
                    for (int y = 0; y < Ho; ++y) {
                        const int sy = reflect(y - top, H);
                        for (int x = 0; x < Wo; ++x)
                            gip[static_cast<std::size_t>(sy) * W + reflect(x - left, W)] +=
                                gp[static_cast<std::size_t>(y) * Wo + x];
                    }
                }
        };
    }
    return Tensor<T>(node);
}

template <typename T>
Tensor<T> crop2d(const Tensor<T>& input, int top, int left, int height, int width) {
    detail::require(input.ndim() == 4, "crop2d: input must be [B,C,H,W]");
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    detail::require(top >= 0 && left >= 0 && height > 0 && width > 0 && top + height <= H &&
                        left + width <= W,
                    "crop2d: window out of bounds");

    std::vector<T> out(static_cast<std::size_t>(B) * C * height * width);
    const T* in = input.values().data();
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const T* ip = in + (static_cast<std::size_t>(b) * C + c) * H * W;
            T* op = out.data() + (static_cast<std::size_t>(b) * C + c) * height * width;
            for (int y = 0; y < height; ++y)
                std::copy(ip + static_cast<std::size_t>(top + y) * W + left,
                          ip + static_cast<std::size_t>(top + y) * W + left + width,
                          op + static_cast<std::size_t>(y) * width);
        }

    auto node = detail::make_op_node<T>("crop2d", {B, C, height, width}, std::move(out),
                                        {input.node()});
    if (node->requires_grad) {
        auto in_n = input.node();
        detail::Node<T>* self = node.get();
        node->backward_fn = [=]() {
            const T* g = self->grad.data();
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    T* gip = in_n->grad.data() + (static_cast<std::size_t>(b) * C + c) * H * W;
                    const T* gp = g + (static_cast<std::size_t>(b) * C + c) * height * width;
                    for (int y = 0; y < height; ++y)
                        for (int x = 0; x < width; ++x)
                            gip[static_cast<std::size_t>(top + y) * W + left + x] +=
                                gp[static_cast<std::size_t>(y) * width + x];
                }
        };
    }
    return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// weighted_sum: scalar projection sum(w .* t). Reduction used by losses and
// by the gradient checker to turn any op output into a scalar objective.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& t, const std::vector<T>& weights) {
    detail::require(weights.size() == t.size(), "weighted_sum: weight count mismatch");
    T acc = T(0);
    const T* v = t.values().data();
    for (std::size_t i = 0; i < weights.size(); ++i) acc += v[i] * weights[i];

    auto node = detail::make_op_node<T>("weighted_sum", {1}, std::vector<T>{acc}, {t.node()});
    if (node->requires_grad) {
        auto t_n = t.node();
        detail::Node<T>* self = node.get();
        node->backward_fn = [=]() {
            const T g = self->grad[0];
            for (std::size_t i = 0; i < weights.size(); ++i) t_n->grad[i] += g * weights[i];
        };
    }
    return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// grad_check: compares the analytic gradient of a scalar-valued graph against
// central finite differences. Returns the max relative error
// |analytic - cd| / max(|analytic|, |cd|, 1e-12) over all elements of all
// inputs marked requires_grad. Keep inputs away from kinks (|x| > 10h for
// prelu) so the finite-difference oracle is valid.
// ---------------------------------------------------------------------------

template <typename T>
T grad_check(const std::function<Tensor<T>(const std::vector<Tensor<T>>&)>& f,
             const std::vector<Tensor<T>>& inputs, T h) {
    Tensor<T> y0 = f(inputs);
    if (y0.size() != 1) throw std::logic_error("grad_check: objective must be scalar");
    if (!y0.all_finite()) throw NumericError("grad_check: non-finite objective");
    y0.backward();

    std::vector<std::vector<T>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& in : inputs)
        analytic.push_back(in.requires_grad() ? in.grad() : std::vector<T>());

    auto eval = [&](const std::vector<Tensor<T>>& xs) {
        Tensor<T> y = f(xs);
        if (!y.all_finite()) throw NumericError("grad_check: non-finite objective");
        return y.item();
    };

    T max_rel = T(0);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!inputs[i].requires_grad()) continue;
        for (std::size_t j = 0; j < inputs[i].size(); ++j) {
            std::vector<Tensor<T>> xs;
            xs.reserve(inputs.size());
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                if (k == i) {
                    std::vector<T> v = inputs[k].values();
                    xs.emplace_back(inputs[k].dims(), std::move(v), false);
                } else {
                    xs.emplace_back(inputs[k].dims(), inputs[k].values(), false);
                }
            }
            std::vector<T>& v = xs[i].leaf_values();
            const T orig = v[j];
            v[j] = orig + h;
            const T yp = eval(xs);
            v[j] = orig - h;
            const T ym = eval(xs);
            const T cd = (yp - ym) / (T(2) * h);
            const T a = analytic[i][j];
            const T denom = std::max({std::abs(a), std::abs(cd), T(1e-12)});
            max_rel = std::max(max_rel, std::abs(a - cd) / denom);
        }
    }
    if (!std::isfinite(max_rel)) throw NumericError("grad_check: non-finite gradient error");
    return max_rel;
}

}  // namespace seganet
