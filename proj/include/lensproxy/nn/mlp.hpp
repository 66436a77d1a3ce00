#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lensproxy/nn/matrix.hpp"

namespace lensproxy::nn {

/// Residual-skip MLP shape. Layer 0 is a linear input projection to
/// hidden_width, followed by hidden_layers ReLU layers of hidden_width; the
/// input of every group of skip_period hidden layers is added to the group's
/// output. The last layer is a linear projection to output_dim.
struct MlpConfig {
    std::uint32_t input_dim = 4;
    std::uint32_t output_dim = 4;
    std::uint32_t hidden_width = 256;
    std::uint32_t hidden_layers = 6;
    std::uint32_t skip_period = 3;
    std::uint64_t weight_init_seed = 0;

    void validate() const;
    std::size_t layer_count() const { return hidden_layers + 2; }
    std::size_t parameter_count() const;

    friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

/// normalized = (value - offset) * scale
struct FeatureNorm {
    double offset = 0.0;
    double scale = 1.0;

    friend bool operator==(const FeatureNorm&, const FeatureNorm&) = default;
};

struct Normalization {
    std::vector<FeatureNorm> features;

    static Normalization identity(std::size_t n) { return {std::vector<FeatureNorm>(n)}; }

    /// Maps the observed [min, max] of each column to [-1, 1]. Constant columns
    /// get offset = value, scale = 1.
    static Normalization fit(const Matrix<double>& samples);

    double normalize(std::size_t feature, double value) const {
        return (value - features[feature].offset) * features[feature].scale;
    }
    double denormalize(std::size_t feature, double value) const {
        return value / features[feature].scale + features[feature].offset;
    }

    friend bool operator==(const Normalization&, const Normalization&) = default;
};

struct LayerShape {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;  ///< out x in, row-major
    std::size_t bias_offset = 0;
};

std::vector<LayerShape> layer_shapes(const MlpConfig& config);

/// Network parameters stored in one flat buffer so optimizers and gradient
/// buffers share a single layout.
template <typename T>
struct MlpParams {
    MlpConfig config;
    std::vector<LayerShape> layers;
    std::vector<T> values;
    Normalization input_norm;
    Normalization output_norm;

    /// Zero weights, identity normalization.
    static MlpParams zeros(const MlpConfig& config);

    /// Kaiming-uniform weights (fan-in, PyTorch's linear-layer gain) drawn from
    /// the stream keyed by config.weight_init_seed; zero biases.
    static MlpParams kaiming(const MlpConfig& config);

    std::span<T> weights(std::size_t layer) {
        return {values.data() + layers[layer].weight_offset, layers[layer].in * layers[layer].out};
    }
    std::span<const T> weights(std::size_t layer) const {
        return {values.data() + layers[layer].weight_offset, layers[layer].in * layers[layer].out};
    }
    std::span<T> bias(std::size_t layer) {
        return {values.data() + layers[layer].bias_offset, layers[layer].out};
    }
    std::span<const T> bias(std::size_t layer) const {
        return {values.data() + layers[layer].bias_offset, layers[layer].out};
    }

    template <typename U>
    MlpParams<U> cast() const {
        MlpParams<U> out;
        out.config = config;
        out.layers = layers;
        out.values.assign(values.begin(), values.end());
        out.input_norm = input_norm;
        out.output_norm = output_norm;
        return out;
    }

    bool all_finite() const;
};

/// Activations kept by forward() for backward().
template <typename T>
struct ForwardCache {
    Matrix<T> input;                  ///< normalized network input
    std::vector<Matrix<T>> states;    ///< states[l]: output of layer l after any residual add (l < layer_count-1)
    std::vector<Matrix<T>> rectified; ///< rectified[l]: ReLU output of hidden layer l before the residual add
    Matrix<T> output;                 ///< raw network output, normalized units
    std::vector<T> transposed;        ///< scratch
};

/// Raw network on already-normalized inputs (rows = batch).
template <typename T>
void forward_normalized(const MlpParams<T>& params, const Matrix<T>& input, ForwardCache<T>& cache);

/// Physical inputs to physical outputs: normalize, run the network, denormalize.
template <typename T>
Matrix<double> forward(const MlpParams<T>& params, const Matrix<double>& inputs, std::size_t chunk_rows = 4096);

/// Mean over batch and features of the squared difference.
template <typename T>
double mse_loss(const Matrix<T>& prediction, const Matrix<T>& target);

/// Accumulates into `grad` (layout of params.values) the gradient of
///   sum over the chunk of squared error / denominator
/// where the prediction is cache.output. Passing denominator = N * output_dim
/// for a batch of N split into chunks yields exact gradients of mse_loss.
template <typename T>
void backward(const MlpParams<T>& params, ForwardCache<T>& cache, const Matrix<T>& target, double denominator,
              std::span<T> grad);

/// Loss and gradient of mse_loss(forward_normalized(inputs), targets) in one call.
template <typename T>
double loss_and_gradient(const MlpParams<T>& params, const Matrix<T>& inputs, const Matrix<T>& targets,
                         std::span<T> grad);

}  // namespace lensproxy::nn
