#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "lensproxy/io.hpp"
#include "lensproxy/nn/checkpoint.hpp"
#include "lensproxy/parallel.hpp"
#include "lensproxy/prescription.hpp"
#include "lensproxy/proxy.hpp"
#include "lensproxy/rng.hpp"

namespace lensproxy {

namespace {

// Gradient work unit. Fixed so the reduction order does not depend on threads.
constexpr std::size_t kChunkRows = 256;

void check_disjoint(const DatasetSplit& split) {
    for (std::uint32_t c : split.test_cells)
        if (split.is_train(c))
            throw std::invalid_argument("cell " + std::to_string(c) + " is in both the train and the test split");
}

nn::Matrix<float> normalized(const nn::Matrix<double>& m, const nn::Normalization& norm) {
    nn::Matrix<float> out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = static_cast<float>(norm.normalize(c, m(r, c)));
    return out;
}

bool better(const HistoryRow& a, const HistoryRow& b) {
    if (a.test_pos_um != b.test_pos_um) return a.test_pos_um < b.test_pos_um;
    return a.test_ang_deg < b.test_ang_deg;
}

}  // namespace

TrainResult train(const Dataset& dataset, const DatasetSplit& split, const TrainOptions& o) {
    if (o.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (o.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (o.network.input_dim != 4 || o.network.output_dim != 4)
        throw std::invalid_argument("ray networks map 4 input features to 4 output features");
    check_disjoint(split);

    const auto train_records = select_cells(dataset.records, split.train_cells);
    const auto test_records = select_cells(dataset.records, split.test_cells);
    if (train_records.empty()) throw std::invalid_argument("no records fall in the train cells");
    if (test_records.empty()) throw std::invalid_argument("no records fall in the test cells");

    const NormalizationPair norms = fit_normalization(train_records);
    Params params = Params::kaiming(o.network);
    params.input_norm = norms.input;
    params.output_norm = norms.output;

    const nn::Matrix<float> inputs = normalized(input_features(train_records), norms.input);
    const nn::Matrix<float> targets = normalized(output_features(train_records), norms.output);
    const nn::Matrix<double> test_inputs = input_features(test_records);
    const nn::Matrix<double> test_truth = output_features(test_records);
    const std::size_t n = train_records.size();
    const std::size_t n_params = params.values.size();

    nn::OptimizerState<float> state(n_params, o.optimizer);
    const std::size_t max_chunks = (std::min<std::size_t>(o.batch_size, n) + kChunkRows - 1) / kChunkRows;
    struct ChunkWork {
        nn::Matrix<float> x, y;
        nn::ForwardCache<float> cache;
        std::vector<float> grad;
        double sse = 0.0;
    };
    std::vector<ChunkWork> work(max_chunks);
    for (auto& w : work) w.grad.assign(n_params, 0.0f);
    std::vector<float> grad(n_params);
    std::vector<std::uint32_t> order(n);
    std::mutex reduce_mutex;

    TrainResult result;
    result.history.reserve(o.epochs);

    for (std::uint32_t epoch = 0; epoch < o.epochs; ++epoch) {
        const double lr = nn::lr_at(o.optimizer, epoch, o.epochs);

        std::iota(order.begin(), order.end(), 0u);
        CounterRng rng(o.seed, epoch, rng_domain::shuffle);
        for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

        double epoch_sse = 0.0;
        for (std::size_t b0 = 0; b0 < n; b0 += o.batch_size) {
            const std::size_t rows = std::min<std::size_t>(o.batch_size, n - b0);
            const std::size_t chunks = (rows + kChunkRows - 1) / kChunkRows;
            const double denominator = static_cast<double>(rows * 4);
            if (!o.deterministic) std::fill(grad.begin(), grad.end(), 0.0f);

            parallel_for(chunks, o.threads, [&](std::size_t k) {
                ChunkWork& w = work[k];
                const std::size_t c0 = b0 + k * kChunkRows;
                const std::size_t c_rows = std::min(kChunkRows, b0 + rows - c0);
                w.x.resize(c_rows, 4);
                w.y.resize(c_rows, 4);
                for (std::size_t r = 0; r < c_rows; ++r) {
                    const std::uint32_t src = order[c0 + r];
                    std::copy_n(inputs.row(src).data(), 4, w.x.row(r).data());
                    std::copy_n(targets.row(src).data(), 4, w.y.row(r).data());
                }
                std::fill(w.grad.begin(), w.grad.end(), 0.0f);
                nn::forward_normalized(params, w.x, w.cache);
                double sse = 0.0;
                for (std::size_t i = 0; i < w.y.size(); ++i) {
                    const double d = static_cast<double>(w.cache.output.data()[i]) - w.y.data()[i];
                    sse += d * d;
                }
                w.sse = sse;
                nn::backward(params, w.cache, w.y, denominator, std::span<float>(w.grad));
                if (!o.deterministic) {
                    std::lock_guard lock(reduce_mutex);
                    for (std::size_t i = 0; i < n_params; ++i) grad[i] += w.grad[i];
                    epoch_sse += w.sse;
                }
            });

            if (o.deterministic) {
                std::copy(work[0].grad.begin(), work[0].grad.end(), grad.begin());
                epoch_sse += work[0].sse;
                for (std::size_t k = 1; k < chunks; ++k) {
                    for (std::size_t i = 0; i < n_params; ++i) grad[i] += work[k].grad[i];
                    epoch_sse += work[k].sse;
                }
            }
            if (!std::isfinite(epoch_sse))
                throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch));
            nn::adamw_step(state, std::span<float>(params.values), std::span<const float>(grad), lr);
        }

        if (!params.all_finite())
            throw std::runtime_error("non-finite parameters after epoch " + std::to_string(epoch));

        const EvalReport test = compare_outputs(predict(params, test_inputs, o.threads), test_truth, "test");
        HistoryRow row{epoch, lr, epoch_sse / static_cast<double>(n * 4), test.pos_error_um.mean,
                       test.ang_error_deg.mean};
        if (!std::isfinite(row.test_pos_um) || !std::isfinite(row.test_ang_deg))
            throw std::runtime_error("non-finite test metrics at epoch " + std::to_string(epoch));
        if (result.history.empty() || better(row, result.history[result.best_epoch])) {
            result.best_params = params;
            result.best_epoch = epoch;
        }
        result.history.push_back(row);
        if (o.on_epoch) o.on_epoch(row);
    }
    result.final_params = std::move(params);
    return result;
}

TrainResult run_training(const TrainRun& run) {
    for (const auto& path : {run.prescription, run.dataset})
        if (!std::filesystem::exists(path)) throw std::runtime_error("input not found: " + path.string());
    run.grid.validate();

    const OpticalSystem system = load_prescription(run.prescription);
    Dataset dataset = load_dataset(run.dataset, format_for(run.dataset));
    if (dataset.grid.cells_per_side == 0) {
        dataset.grid = run.grid;
    } else if (dataset.grid.cells_per_side != run.grid.cells_per_side || dataset.grid.extent != run.grid.extent) {
        throw std::invalid_argument("dataset grid (" + std::to_string(dataset.grid.cells_per_side) + " cells, " +
                                    format_double(dataset.grid.extent) + " mm) does not match the configured grid (" +
                                    std::to_string(run.grid.cells_per_side) + " cells, " +
                                    format_double(run.grid.extent) + " mm)");
    }
    dataset.grid.center = run.grid.center;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        const RaySample& r = dataset.records[i];
        if (r.cell_id >= dataset.grid.cell_count() || !(r.p_i == cell_center(dataset.grid, r.cell_id)))
            throw std::invalid_argument("record " + std::to_string(i) +
                                        " does not sit on a cell center of the configured grid");
    }
    // Spot-check that the records were traced through this prescription.
    const std::size_t stride = std::max<std::size_t>(1, dataset.records.size() / 16);
    for (std::size_t i = 0; i < dataset.records.size(); i += stride) {
        const RaySample& r = dataset.records[i];
        const auto again = trace_sample(system, r.p_i, reconstruct_direction(r.d_i), r.cell_id);
        if (!again || norm(again->p_o - r.p_o) > 1e-6 || norm(again->d_o - r.d_o) > 1e-9)
            throw std::invalid_argument("record " + std::to_string(i) +
                                        " is not reproduced by the prescription; dataset and prescription disagree");
    }

    const DatasetSplit split = split_cells(dataset.grid, run.split_fraction, run.options.seed);
    TrainResult result = train(dataset, split, run.options);
    nn::save_checkpoint(result.final_params, run.checkpoint);
    if (!run.best_checkpoint.empty()) nn::save_checkpoint(result.best_params, run.best_checkpoint);
    if (!run.history.empty()) write_file_atomic(run.history, history_csv(result.history));
    return result;
}

}  // namespace lensproxy
