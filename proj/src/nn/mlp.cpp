#include "lensproxy/nn/mlp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lensproxy/rng.hpp"

namespace lensproxy::nn {

void MlpConfig::validate() const {
    if (input_dim < 1 || output_dim < 1) throw std::invalid_argument("input and output dims must be >= 1");
    if (hidden_width < 1) throw std::invalid_argument("hidden_width must be >= 1");
    if (hidden_layers < 1) throw std::invalid_argument("hidden_layers must be >= 1");
    if (skip_period < 1) throw std::invalid_argument("skip_period must be >= 1");
}

std::vector<LayerShape> layer_shapes(const MlpConfig& config) {
    config.validate();
    std::vector<LayerShape> shapes;
    std::size_t offset = 0;
    auto add = [&](std::size_t in, std::size_t out) {
        LayerShape s{in, out, offset, offset + in * out};
        offset += in * out + out;
        shapes.push_back(s);
    };
    add(config.input_dim, config.hidden_width);
    for (std::uint32_t l = 0; l < config.hidden_layers; ++l) add(config.hidden_width, config.hidden_width);
    add(config.hidden_width, config.output_dim);
    return shapes;
}

std::size_t MlpConfig::parameter_count() const {
    const auto shapes = layer_shapes(*this);
    return shapes.back().bias_offset + shapes.back().out;
}

Normalization Normalization::fit(const Matrix<double>& samples) {
    if (samples.rows() == 0) throw std::invalid_argument("cannot fit normalization to an empty sample");
    Normalization norm;
    for (std::size_t c = 0; c < samples.cols(); ++c) {
        double lo = samples(0, c), hi = samples(0, c);
        for (std::size_t r = 1; r < samples.rows(); ++r) {
            lo = std::min(lo, samples(r, c));
            hi = std::max(hi, samples(r, c));
        }
        if (hi > lo) norm.features.push_back({0.5 * (hi + lo), 2.0 / (hi - lo)});
        else norm.features.push_back({lo, 1.0});
    }
    return norm;
}

template <typename T>
MlpParams<T> MlpParams<T>::zeros(const MlpConfig& config) {
    MlpParams p;
    p.config = config;
    p.layers = layer_shapes(config);
    p.values.assign(config.parameter_count(), T(0));
    p.input_norm = Normalization::identity(config.input_dim);
    p.output_norm = Normalization::identity(config.output_dim);
    return p;
}

template <typename T>
MlpParams<T> MlpParams<T>::kaiming(const MlpConfig& config) {
    MlpParams p = zeros(config);
    // Gain for a leaky slope of sqrt(5): bound = sqrt(6 / ((1 + 5) * fan_in)).
    constexpr double slope_sq = 5.0;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const double bound = std::sqrt(6.0 / ((1.0 + slope_sq) * static_cast<double>(p.layers[l].in)));
        CounterRng rng(config.weight_init_seed, l, rng_domain::weight_init);
        for (T& w : p.weights(l)) w = static_cast<T>(bound * (2.0 * rng.uniform() - 1.0));
    }
    return p;
}

template <typename T>
bool MlpParams<T>::all_finite() const {
    for (T v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {

template <typename T>
void linear(const MlpParams<T>& params, std::size_t layer, const Matrix<T>& x, Matrix<T>& y,
            std::vector<T>& scratch) {
    const LayerShape& s = params.layers[layer];
    if (x.cols() != s.in)
        throw std::invalid_argument("layer " + std::to_string(layer) + " expects " + std::to_string(s.in) +
                                    " inputs, got " + std::to_string(x.cols()));
    y.resize(x.rows(), s.out);
    const auto bias = params.bias(layer);
    for (std::size_t r = 0; r < x.rows(); ++r) std::copy(bias.begin(), bias.end(), y.row(r).begin());
    scratch.resize(s.in * s.out);
    transpose_into(params.weights(layer).data(), s.out, s.in, scratch.data());
    gemm_accumulate(x.rows(), s.out, s.in, x.data(), s.in, scratch.data(), s.out, y.data(), s.out);
}

bool ends_block(std::size_t hidden_index, std::uint32_t skip_period) { return hidden_index % skip_period == 0; }

}  // namespace

template <typename T>
void forward_normalized(const MlpParams<T>& params, const Matrix<T>& input, ForwardCache<T>& cache) {
    const std::size_t hidden = params.config.hidden_layers;
    cache.input = input;
    cache.states.resize(hidden + 1);
    cache.rectified.resize(hidden + 1);

    linear(params, 0, cache.input, cache.states[0], cache.transposed);
    std::size_t block_start = 0;
    for (std::size_t l = 1; l <= hidden; ++l) {
        Matrix<T>& z = cache.rectified[l];
        linear(params, l, cache.states[l - 1], z, cache.transposed);
        for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] = std::max(z.data()[i], T(0));
        Matrix<T>& h = cache.states[l];
        h = z;
        if (ends_block(l, params.config.skip_period)) {
            const Matrix<T>& skip = cache.states[block_start];
            for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] += skip.data()[i];
            block_start = l;
        }
    }
    linear(params, hidden + 1, cache.states[hidden], cache.output, cache.transposed);
}

template <typename T>
Matrix<double> forward(const MlpParams<T>& params, const Matrix<double>& inputs, std::size_t chunk_rows) {
    if (inputs.cols() != params.config.input_dim)
        throw std::invalid_argument("input has " + std::to_string(inputs.cols()) + " features, network expects " +
                                    std::to_string(params.config.input_dim));
    const std::size_t in = params.config.input_dim;
    const std::size_t out = params.config.output_dim;
    Matrix<double> result(inputs.rows(), out);
    ForwardCache<T> cache;
    Matrix<T> x;
    for (std::size_t r0 = 0; r0 < inputs.rows(); r0 += chunk_rows) {
        const std::size_t rows = std::min(chunk_rows, inputs.rows() - r0);
        x.resize(rows, in);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < in; ++c)
                x(r, c) = static_cast<T>(params.input_norm.normalize(c, inputs(r0 + r, c)));
        forward_normalized(params, x, cache);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < out; ++c)
                result(r0 + r, c) = params.output_norm.denormalize(c, static_cast<double>(cache.output(r, c)));
    }
    return result;
}

template <typename T>
double mse_loss(const Matrix<T>& prediction, const Matrix<T>& target) {
    if (prediction.rows() != target.rows() || prediction.cols() != target.cols())
        throw std::invalid_argument("prediction and target shapes differ");
    if (prediction.size() == 0) throw std::invalid_argument("mse_loss of an empty batch");
    double sum = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const double d = static_cast<double>(prediction.data()[i]) - static_cast<double>(target.data()[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(prediction.size());
}

template <typename T>
void backward(const MlpParams<T>& params, ForwardCache<T>& cache, const Matrix<T>& target, double denominator,
              std::span<T> grad) {
    const std::size_t hidden = params.config.hidden_layers;
    const std::size_t batch = cache.output.rows();
    if (target.rows() != batch || target.cols() != cache.output.cols())
        throw std::invalid_argument("target shape does not match the forward batch");
    if (grad.size() != params.values.size()) throw std::invalid_argument("gradient buffer has the wrong size");

    std::vector<T>& scratch = cache.transposed;
    // dz: gradient at the current layer's pre-activation; g: at its input.
    Matrix<T> dz(batch, cache.output.cols());
    const T scale = static_cast<T>(2.0 / denominator);
    for (std::size_t i = 0; i < dz.size(); ++i) dz.data()[i] = scale * (cache.output.data()[i] - target.data()[i]);

    Matrix<T> g;
    Matrix<T> skip_grad;
    std::size_t skip_target = hidden + 1;  // state index awaiting a residual gradient

    auto accumulate_layer = [&](std::size_t layer, const Matrix<T>& layer_input, bool need_input_grad) {
        const LayerShape& s = params.layers[layer];
        T* gw = grad.data() + s.weight_offset;
        T* gb = grad.data() + s.bias_offset;
        scratch.resize(s.out * batch);
        transpose_into(dz.data(), batch, s.out, scratch.data());
        gemm_accumulate(s.out, s.in, batch, scratch.data(), batch, layer_input.data(), s.in, gw, s.in);
        for (std::size_t o = 0; o < s.out; ++o) {
            T acc = 0;
            const T* col = scratch.data() + o * batch;
            for (std::size_t r = 0; r < batch; ++r) acc += col[r];
            gb[o] += acc;
        }
        if (!need_input_grad) return;
        g.resize(batch, s.in);
        g.fill(T(0));
        gemm_accumulate(batch, s.in, s.out, dz.data(), s.out, params.weights(layer).data(), s.in, g.data(), s.in);
    };

    accumulate_layer(hidden + 1, cache.states[hidden], true);
    for (std::size_t l = hidden; l >= 1; --l) {
        // g is the gradient w.r.t. states[l].
        if (l == skip_target) {
            for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] += skip_grad.data()[i];
        }
        if (ends_block(l, params.config.skip_period)) {
            skip_grad = g;
            skip_target = l - params.config.skip_period;
        }
        const Matrix<T>& r = cache.rectified[l];
        dz.resize(batch, r.cols());
        for (std::size_t i = 0; i < dz.size(); ++i) dz.data()[i] = r.data()[i] > T(0) ? g.data()[i] : T(0);
        accumulate_layer(l, cache.states[l - 1], true);
    }
    if (skip_target == 0) {
        for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] += skip_grad.data()[i];
    }
    dz = g;
    accumulate_layer(0, cache.input, false);
}

template <typename T>
double loss_and_gradient(const MlpParams<T>& params, const Matrix<T>& inputs, const Matrix<T>& targets,
                         std::span<T> grad) {
    ForwardCache<T> cache;
    forward_normalized(params, inputs, cache);
    const double loss = mse_loss(cache.output, targets);
    backward(params, cache, targets, static_cast<double>(targets.size()), grad);
    return loss;
}

#define LENSPROXY_INSTANTIATE(T)                                                                           \
    template struct MlpParams<T>;                                                                          \
    template void forward_normalized<T>(const MlpParams<T>&, const Matrix<T>&, ForwardCache<T>&);          \
    template Matrix<double> forward<T>(const MlpParams<T>&, const Matrix<double>&, std::size_t);           \
    template double mse_loss<T>(const Matrix<T>&, const Matrix<T>&);                                      \
    template void backward<T>(const MlpParams<T>&, ForwardCache<T>&, const Matrix<T>&, double, std::span<T>); \
    template double loss_and_gradient<T>(const MlpParams<T>&, const Matrix<T>&, const Matrix<T>&, std::span<T>);

LENSPROXY_INSTANTIATE(float)
LENSPROXY_INSTANTIATE(double)

#undef LENSPROXY_INSTANTIATE

}  // namespace lensproxy::nn
