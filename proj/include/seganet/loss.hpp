#pragma once

#include "seganet/tensor.hpp"

namespace seganet {

// Binary Dice loss, smoothed: per sample b,
//   loss_b = 1 - (2*sum(p*g) + smooth) / (sum(p) + sum(g) + smooth)
// averaged over the batch. Differentiable w.r.t. pred only; target must be
// strictly binary. Both tensors are [B,C,H,W] and flattened per sample.
template <typename T>
Tensor<T> dice_loss(const Tensor<T>& pred, const Tensor<T>& target, T smooth) {
    detail::require(pred.dims() == target.dims(), "dice_loss: shape mismatch");
    detail::require(pred.ndim() >= 1, "dice_loss: empty tensor");
    detail::require(smooth > T(0), "dice_loss: smooth must be positive");
    for (T v : target.values())
        if (v != T(0) && v != T(1))
            throw std::invalid_argument("dice_loss: target must be binary");

    const int B = pred.ndim() >= 2 ? pred.dim(0) : 1;
    const std::size_t N = pred.size() / static_cast<std::size_t>(B);
    const T* pv = pred.values().data();
    const T* gv = target.values().data();

    // per-sample sums are reused by the backward pass
    std::vector<T> inter(B), psum(B), gsum(B);
    T loss = T(0);
    for (int b = 0; b < B; ++b) {
        const std::size_t off = static_cast<std::size_t>(b) * N;
        T I = T(0), P = T(0), G = T(0);
        for (std::size_t i = 0; i < N; ++i) {
            I += pv[off + i] * gv[off + i];
            P += pv[off + i];
            G += gv[off + i];
        }
        inter[b] = I;
        psum[b] = P;
        gsum[b] = G;
        loss += T(1) - (T(2) * I + smooth) / (P + G + smooth);
    }
    loss /= static_cast<T>(B);

    auto node = detail::make_op_node<T>("dice_loss", {1}, std::vector<T>{loss},
                                        {pred.node(), target.node()});
    if (node->requires_grad) {
        auto p_n = pred.node();
        auto g_n = target.node();
        detail::Node<T>* self = node.get();
        node->backward_fn = [=, inter = std::move(inter), psum = std::move(psum),
                             gsum = std::move(gsum)]() {
            if (!p_n->requires_grad) return;
            const T g = self->grad[0] / static_cast<T>(B);
            const T* pv = p_n->values.data();
            const T* gv = g_n->values.data();
            for (int b = 0; b < B; ++b) {
                const std::size_t off = static_cast<std::size_t>(b) * N;
                const T D = psum[b] + gsum[b] + smooth;
                const T Nm = T(2) * inter[b] + smooth;
                for (std::size_t i = 0; i < N; ++i) {
                    // d/dp of -(2I+s)/D = -(2*g_i*D - (2I+s)) / D^2
                    (void)pv;
                    p_n->grad[off + i] += g * (Nm - T(2) * gv[off + i] * D) / (D * D);
                }
            }
        };
    }
    return Tensor<T>(node);
}

}  // namespace seganet
