#include "lensproxy/nn/checkpoint.hpp"

#include <cmath>

#include "lensproxy/io.hpp"

namespace lensproxy::nn {

namespace {
constexpr char kMagic[4] = {'R', '2', 'R', 'W'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

std::string encode_checkpoint(const MlpParams<float>& params) {
    const MlpConfig& c = params.config;
    ByteWriter w;
    w.put_bytes(std::string_view(kMagic, 4));
    w.put<std::uint16_t>(kVersion);
    w.put<std::uint32_t>(c.input_dim);
    w.put<std::uint32_t>(c.output_dim);
    w.put<std::uint32_t>(c.hidden_width);
    w.put<std::uint32_t>(c.hidden_layers);
    w.put<std::uint32_t>(c.skip_period);
    w.put<std::uint64_t>(c.weight_init_seed);
    for (const auto* norm : {&params.input_norm, &params.output_norm})
        for (const FeatureNorm& f : norm->features) {
            w.put<double>(f.offset);
            w.put<double>(f.scale);
        }
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        for (float v : params.weights(l)) w.put<float>(v);
        for (float v : params.bias(l)) w.put<float>(v);
    }
    return w.bytes();
}

MlpParams<float> decode_checkpoint(std::string_view bytes) {
    ByteReader r(bytes);
    if (r.get_bytes(4, "magic") != std::string_view(kMagic, 4))
        throw FormatError(FormatError::Kind::MalformedHeader, 0, "not a weight checkpoint: bad magic at byte 0");
    const auto version_at = r.offset();
    const auto version = r.get<std::uint16_t>("version");
    if (version != kVersion)
        throw FormatError(FormatError::Kind::VersionMismatch, version_at,
                          "unsupported checkpoint version " + std::to_string(version));
    MlpConfig c;
    const auto config_at = r.offset();
    c.input_dim = r.get<std::uint32_t>("input_dim");
    c.output_dim = r.get<std::uint32_t>("output_dim");
    c.hidden_width = r.get<std::uint32_t>("hidden_width");
    c.hidden_layers = r.get<std::uint32_t>("hidden_layers");
    c.skip_period = r.get<std::uint32_t>("skip_period");
    c.weight_init_seed = r.get<std::uint64_t>("weight_init_seed");
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(FormatError::Kind::MalformedHeader, config_at, std::string("bad network config: ") + e.what());
    }
    if (c.hidden_width > (1u << 16) || c.hidden_layers > 4096 || c.input_dim > 4096 || c.output_dim > 4096)
        throw FormatError(FormatError::Kind::MalformedHeader, config_at, "network config out of range");

    MlpParams<float> p = MlpParams<float>::zeros(c);
    for (auto* norm : {&p.input_norm, &p.output_norm})
        for (FeatureNorm& f : norm->features) {
            const auto at = r.offset();
            f.offset = r.get<double>("normalization offset");
            f.scale = r.get<double>("normalization scale");
            if (!std::isfinite(f.offset) || !(f.scale > 0.0) || !std::isfinite(f.scale))
                throw FormatError(FormatError::Kind::BadRecord, at, "invalid normalization entry");
        }
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        for (float& v : p.weights(l)) v = r.get<float>("layer weights");
        for (float& v : p.bias(l)) v = r.get<float>("layer biases");
    }
    if (r.remaining() != 0)
        throw FormatError(FormatError::Kind::MalformedHeader, r.offset(), "trailing bytes after the last layer");
    return p;
}

void save_checkpoint(const MlpParams<float>& params, const std::filesystem::path& path) {
    write_file_atomic(path, encode_checkpoint(params));
}

MlpParams<float> load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw std::runtime_error("checkpoint not found: " + path.string());
    return decode_checkpoint(read_file(path));
}

}  // namespace lensproxy::nn
