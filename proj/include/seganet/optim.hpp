#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "seganet/errors.hpp"

namespace seganet {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const {
        if (learning_rate < 0) throw DataError("learning rate must be non-negative");
        if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1)
            throw DataError("adam betas must lie in (0,1)");
        if (epsilon <= 0) throw DataError("adam epsilon must be positive");
    }
};

// First/second moment accumulators; t counts completed steps.
template <typename T>
struct AdamState {
    std::vector<T> m;
    std::vector<T> v;
    std::uint64_t t = 0;

    explicit AdamState(std::size_t n) : m(n, T(0)), v(n, T(0)) {}
};

// One Adam update with bias correction. Aborts on non-finite gradients
// before touching params, so a diverged step never corrupts the model.
template <typename T>
void adam_step(std::vector<T>& params, const std::vector<T>& grads, AdamState<T>& state,
               const AdamConfig& config) {
    config.validate();
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size())
        throw DataError("adam_step: params, grads and state must have equal length");
    for (std::size_t i = 0; i < grads.size(); ++i)
        if (!std::isfinite(grads[i]))
            throw NumericError("adam_step: non-finite gradient at index " + std::to_string(i));

    state.t += 1;
    const T lr = static_cast<T>(config.learning_rate);
    const T b1 = static_cast<T>(config.beta1);
    const T b2 = static_cast<T>(config.beta2);
    const T eps = static_cast<T>(config.epsilon);
    const T bc1 = T(1) - static_cast<T>(std::pow(config.beta1, static_cast<double>(state.t)));
    const T bc2 = T(1) - static_cast<T>(std::pow(config.beta2, static_cast<double>(state.t)));

    for (std::size_t i = 0; i < params.size(); ++i) {
        const T g = grads[i];
        state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
        state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
        const T mhat = state.m[i] / bc1;
        const T vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace seganet
