#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lensproxy/dataset.hpp"
#include "lensproxy/nn/adamw.hpp"
#include "lensproxy/nn/mlp.hpp"
#include "lensproxy/optics.hpp"

namespace lensproxy {

using Params = nn::MlpParams<float>;

// ---------------------------------------------------------------------------
// Features

/// Rows of (pix, piy, dix, diy).
nn::Matrix<double> input_features(const std::vector<RaySample>& records);
/// Rows of (pox, poy, dox, doy).
nn::Matrix<double> output_features(const std::vector<RaySample>& records);

struct NormalizationPair {
    nn::Normalization input;
    nn::Normalization output;
};

/// Min/max normalization of the four input and four output features.
NormalizationPair fit_normalization(const std::vector<RaySample>& training_records);

/// Proxy prediction for every row of `inputs`; rows are split across threads in
/// fixed chunks, so the result does not depend on the thread count.
nn::Matrix<double> predict(const Params& params, const nn::Matrix<double>& inputs, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Metrics

struct ErrorStats {
    double mean = 0.0;
    double median = 0.0;
    double p95 = 0.0;
};

/// Mean, median and 95th percentile (linear interpolation between order statistics).
ErrorStats summarize(std::vector<double> values);

struct EvalReport {
    std::string condition;
    std::size_t n_rays = 0;
    ErrorStats pos_error_um;
    ErrorStats ang_error_deg;
};

/// Angle in degrees between two forward directions given by transverse components.
double angular_error_deg(Vec2 a, Vec2 b);

/// Compares rows of (px, py, dx, dy). Position error in micrometers (inputs in
/// mm), angular error in degrees. Throws std::domain_error naming the first
/// truth row whose direction cannot be reconstructed; predicted directions
/// outside the unit disk are projected onto its rim.
EvalReport compare_outputs(const nn::Matrix<double>& predicted, const nn::Matrix<double>& truth,
                           const std::string& condition);

EvalReport evaluate(const Params& params, const std::vector<RaySample>& records, const std::string& condition,
                    unsigned threads = 1);

std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& report);
std::string eval_csv(const std::vector<EvalReport>& reports);
std::string format_eval_table(const std::vector<EvalReport>& reports);

// ---------------------------------------------------------------------------
// Training

struct HistoryRow {
    std::uint32_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double test_pos_um = 0.0;
    double test_ang_deg = 0.0;
};

std::string history_csv(const std::vector<HistoryRow>& history);

struct TrainOptions {
    nn::MlpConfig network;
    nn::AdamWSettings optimizer;
    std::uint32_t epochs = 3000;
    std::uint32_t batch_size = 256;
    std::uint64_t seed = 0;  ///< shuffling stream; weight init uses network.weight_init_seed
    unsigned threads = 1;
    /// When false, partial gradients are summed in completion order.
    bool deterministic = true;
    std::function<void(const HistoryRow&)> on_epoch;
};

struct TrainResult {
    Params final_params;
    Params best_params;
    std::uint32_t best_epoch = 0;
    std::vector<HistoryRow> history;
};

/// Minimizes the mean squared error on normalized outputs over the train cells,
/// evaluating the test cells after every epoch.
TrainResult train(const Dataset& dataset, const DatasetSplit& split, const TrainOptions& options);

/// File-level training job.
struct TrainRun {
    std::filesystem::path prescription;
    std::filesystem::path dataset;
    SourceGrid grid;  ///< expected grid; must match the dataset header
    double split_fraction = 0.8;
    TrainOptions options;
    std::filesystem::path checkpoint;       ///< final weights
    std::filesystem::path best_checkpoint;  ///< lowest test positional error
    std::filesystem::path history;
};

TrainResult run_training(const TrainRun& run);

// ---------------------------------------------------------------------------
// Experiments

/// Evaluates only the records of the split's test cells. Throws when the split's
/// test cells overlap its train cells or no record falls in a test cell.
EvalReport experiment_unseen_cell(const Params& params, const std::vector<RaySample>& records,
                                  const DatasetSplit& split, unsigned threads = 1);

struct NovelPattern {
    std::vector<RaySample> samples;  ///< survivors; cell_id is the grid cell holding the origin
    std::uint64_t requested = 0;
};

/// Fresh rays: origins uniform over the whole source square, directions uniform
/// toward the entrance disk, drawn from streams disjoint from dataset generation.
NovelPattern sample_novel_pattern(const OpticalSystem& system, const SourceGrid& grid, std::uint64_t count,
                                  std::uint64_t seed, unsigned threads = 1);

EvalReport experiment_novel_pattern(const Params& params, const OpticalSystem& system, const SourceGrid& grid,
                                    std::uint64_t count, std::uint64_t seed, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Queries

struct InputRay {
    Vec2 position;
    Vec2 direction;  ///< transverse components
};

struct OutputRay {
    Vec2 position;
    Vec2 direction;  ///< transverse components
};

/// Free-space transport of rays given on the plane z = from_z to z = to_z.
/// Throws std::domain_error for to_z < from_z or a direction with d_z <= 1e-9.
std::vector<OutputRay> transport(const std::vector<OutputRay>& rays, double from_z, double to_z);

/// Proxy rays on the training target plane.
std::vector<OutputRay> proxy_at_target(const Params& params, const std::vector<InputRay>& inputs,
                                       unsigned threads = 1);

/// Exact rays on the system's target plane; nullopt where a ray does not emerge.
std::vector<std::optional<OutputRay>> exact_at_target(const OpticalSystem& system,
                                                      const std::vector<InputRay>& inputs);

/// Proxy query followed by free-space transport from target_z to depth_z.
std::vector<OutputRay> query_at_depth(const Params& params, const std::vector<InputRay>& inputs, double target_z,
                                      double depth_z, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Benchmark

struct BenchRow {
    std::string method;  ///< "exact" or "proxy"
    std::size_t batch_size = 0;
    double rays_per_second_median = 0.0;
};

struct BenchOptions {
    std::vector<std::size_t> batch_sizes{100, 10'000, 1'000'000};
    int repetitions = 5;
    std::uint64_t seed = 0;
};

/// Single-threaded throughput of exact tracing (Newton intersections, transport to
/// the target plane) against proxy inference on the same input rays.
std::vector<BenchRow> bench(const Params& params, const OpticalSystem& system, const SourceGrid& grid,
                            const BenchOptions& options);

std::string bench_csv(const std::vector<BenchRow>& rows);

// ---------------------------------------------------------------------------
// Spot diagrams

/// Exact intersections with z = depth_z of `count` rays from `origin` on the
/// source plane toward the entrance disk.
std::vector<Vec2> spot_points_exact(const OpticalSystem& system, Vec2 origin, std::size_t count,
                                    std::uint64_t seed, double depth_z);

/// The same input rays answered by the proxy, transported to depth_z. Input rays
/// the exact tracer would vignette are skipped so both diagrams share inputs.
std::vector<Vec2> spot_points_proxy(const Params& params, const OpticalSystem& system, Vec2 origin,
                                    std::size_t count, std::uint64_t seed, double depth_z);

/// Root-mean-square distance from the centroid.
double rms_radius(const std::vector<Vec2>& points);
/// Largest distance from the centroid.
double max_radius(const std::vector<Vec2>& points);

std::string spot_svg(const std::vector<Vec2>& points, const std::string& title);
std::string spot_csv(const std::vector<Vec2>& points);

/// Writes `<stem>.svg` and `<stem>.csv`.
void write_spot_diagram(const std::vector<Vec2>& points, const std::filesystem::path& stem, const std::string& title);

}  // namespace lensproxy
