#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lensproxy::nn {

struct AdamWSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-2;
    double base_lr = 5e-4;
    double final_lr = 1e-5;
};

/// Moments and step counter for decoupled-weight-decay Adam.
template <typename T>
struct OptimizerState {
    AdamWSettings settings;
    std::vector<T> m;
    std::vector<T> v;
    std::uint64_t step = 0;

    OptimizerState() = default;
    OptimizerState(std::size_t parameter_count, AdamWSettings s)
        : settings(s), m(parameter_count, T(0)), v(parameter_count, T(0)) {}
};

/// One AdamW update at learning rate `lr`:
///   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
///   p -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
/// Throws std::runtime_error naming the first non-finite gradient entry; in that
/// case neither the parameters nor the state are modified.
template <typename T>
void adamw_step(OptimizerState<T>& state, std::span<T> params, std::span<const T> grads, double lr);

/// Geometric decay from base_lr at epoch 0 to final_lr at total_epochs.
double lr_at(const AdamWSettings& settings, std::uint64_t epoch, std::uint64_t total_epochs);

}  // namespace lensproxy::nn
