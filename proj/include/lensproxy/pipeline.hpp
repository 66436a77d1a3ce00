#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lensproxy/optics.hpp"
#include "lensproxy/proxy.hpp"

namespace lensproxy {

/// Bad configuration or usage; the CLI maps it to exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct PipelineConfig {
    std::filesystem::path out_dir = "run";
    std::filesystem::path prescription;  ///< empty: <out_dir>/prescription.txt
    std::filesystem::path dataset;       ///< empty: <out_dir>/dataset.r2rd

    double extent = 12.0;
    std::uint32_t cells_per_side = 24;
    std::uint32_t rays_per_cell = 1024;
    std::uint64_t seed = 0;
    double split = 0.8;

    std::uint32_t hidden_width = 256;
    std::uint32_t hidden_layers = 6;
    std::uint32_t skip_period = 3;
    std::uint32_t epochs = 3000;
    std::uint32_t batch_size = 256;
    double lr = 5e-4;
    double final_lr = 1e-5;
    double weight_decay = 1e-2;
    double adam_epsilon = 1e-6;
    std::uint32_t progress_every = 50;

    std::uint64_t novel_rays = 1'000'000;
    std::vector<std::size_t> bench_sizes{100, 10'000, 1'000'000};
    int bench_repetitions = 5;
    std::uint32_t spot_rays = 2000;
    double spot_depth = 0.0;  ///< 0: paraxial image plane of the prescription

    unsigned threads = 0;  ///< 0: all hardware threads
    bool deterministic = true;

    std::filesystem::path prescription_path() const;
    std::filesystem::path dataset_path() const;
    std::filesystem::path out(std::string_view name) const { return out_dir / name; }

    SourceGrid grid() const;
    TrainOptions train_options() const;

    /// Throws ConfigError when a field violates an operation's precondition.
    void validate() const;
};

/// Applies one `key = value` assignment. Throws ConfigError for unknown keys or
/// unparsable values.
void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value);

/// Flat `key = value` lines; '#' starts a comment. Errors name the line.
void apply_config_text(PipelineConfig& config, std::string_view text);
void apply_config_file(PipelineConfig& config, const std::filesystem::path& path);

std::string format_config(const PipelineConfig& config);

// Subcommands. Each writes its outputs atomically under out_dir and logs a
// short summary to `log`.

void cmd_design(const SingletSpec& spec, const std::filesystem::path& out, std::ostream& log);
GenerationReport cmd_gen(const PipelineConfig& config, std::ostream& log);
TrainResult cmd_train(const PipelineConfig& config, std::ostream& log);
std::vector<EvalReport> cmd_eval(const PipelineConfig& config, std::ostream& log);
std::vector<BenchRow> cmd_bench(const PipelineConfig& config, std::ostream& log);
void cmd_plot(const PipelineConfig& config, std::ostream& log);

}  // namespace lensproxy
