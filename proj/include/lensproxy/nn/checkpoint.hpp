#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "lensproxy/nn/mlp.hpp"

namespace lensproxy::nn {

// Weight checkpoint, little-endian:
//   "R2RW", u16 version = 1,
//   u32 input_dim, output_dim, hidden_width, hidden_layers, skip_period, u64 weight_init_seed,
//   input_dim  x (f64 offset, f64 scale)   input normalization
//   output_dim x (f64 offset, f64 scale)   output normalization
//   per layer: out x in f32 weights (row-major), out f32 biases.

std::string encode_checkpoint(const MlpParams<float>& params);
MlpParams<float> decode_checkpoint(std::string_view bytes);

void save_checkpoint(const MlpParams<float>& params, const std::filesystem::path& path);
MlpParams<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace lensproxy::nn
