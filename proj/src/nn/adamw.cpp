#include "lensproxy/nn/adamw.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lensproxy::nn {

template <typename T>
void adamw_step(OptimizerState<T>& state, std::span<T> params, std::span<const T> grads, double lr) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("optimizer, parameter and gradient sizes differ");
    for (std::size_t i = 0; i < grads.size(); ++i)
        if (!std::isfinite(grads[i]))
            throw std::runtime_error("non-finite gradient at parameter " + std::to_string(i) + " on step " +
                                     std::to_string(state.step + 1) + "; update aborted");

    const AdamWSettings& s = state.settings;
    ++state.step;
    const double correction1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step));
    const T b1 = static_cast<T>(s.beta1), b2 = static_cast<T>(s.beta2);
    const T one_b1 = static_cast<T>(1.0 - s.beta1), one_b2 = static_cast<T>(1.0 - s.beta2);
    const T inv_c1 = static_cast<T>(1.0 / correction1), inv_c2 = static_cast<T>(1.0 / correction2);
    const T eps = static_cast<T>(s.epsilon), decay = static_cast<T>(s.weight_decay), rate = static_cast<T>(lr);

    T* m = state.m.data();
    T* v = state.v.data();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const T g = grads[i];
        m[i] = b1 * m[i] + one_b1 * g;
        v[i] = b2 * v[i] + one_b2 * g * g;
        const T m_hat = m[i] * inv_c1;
        const T v_hat = v[i] * inv_c2;
        params[i] -= rate * (m_hat / (std::sqrt(v_hat) + eps) + decay * params[i]);
    }
}

double lr_at(const AdamWSettings& settings, std::uint64_t epoch, std::uint64_t total_epochs) {
    if (total_epochs == 0) throw std::invalid_argument("total_epochs must be >= 1");
    if (epoch > total_epochs) throw std::invalid_argument("epoch beyond the schedule");
    if (!(settings.base_lr > 0.0) || !(settings.final_lr > 0.0))
        throw std::invalid_argument("learning rates must be > 0");
    const double progress = static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return settings.base_lr * std::pow(settings.final_lr / settings.base_lr, progress);
}

template void adamw_step<float>(OptimizerState<float>&, std::span<float>, std::span<const float>, double);
template void adamw_step<double>(OptimizerState<double>&, std::span<double>, std::span<const double>, double);

}  // namespace lensproxy::nn
