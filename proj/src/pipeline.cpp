#include "lensproxy/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "lensproxy/io.hpp"
#include "lensproxy/nn/checkpoint.hpp"
#include "lensproxy/parallel.hpp"
#include "lensproxy/prescription.hpp"

namespace lensproxy {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty())
        throw ConfigError("invalid value for " + std::string(key) + ": '" + std::string(value) + "'");
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("invalid value for " + std::string(key) + ": '" + std::string(value) + "'");
}

// Plain integers or powers of ten written as 1e6.
std::uint64_t parse_count(std::string_view key, std::string_view value) {
    const double v = parse_number<double>(key, value);
    if (!(v >= 0 && v <= 0x1p53) || v != std::floor(v))
        throw ConfigError("invalid count for " + std::string(key) + ": '" + std::string(value) + "'");
    return static_cast<std::uint64_t>(v);
}

std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view value) {
    std::vector<std::size_t> out;
    while (!value.empty()) {
        const auto comma = value.find(',');
        const std::string_view item = trim(value.substr(0, comma));
        const std::uint64_t v = parse_count(key, item);
        if (v < 1) throw ConfigError("invalid batch size in " + std::string(key) + ": '" + std::string(item) + "'");
        out.push_back(static_cast<std::size_t>(v));
        if (comma == std::string_view::npos) break;
        value.remove_prefix(comma + 1);
    }
    if (out.empty()) throw ConfigError(std::string(key) + " needs at least one batch size");
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& sizes) {
    std::string out;
    for (std::size_t i = 0; i < sizes.size(); ++i) out += (i ? "," : "") + std::to_string(sizes[i]);
    return out;
}

// Dataset plus the grid it was generated on, checked against the configuration.
Dataset load_run_dataset(const PipelineConfig& config) {
    const auto path = config.dataset_path();
    if (!std::filesystem::exists(path)) throw std::runtime_error("dataset not found: " + path.string());
    Dataset dataset = load_dataset(path, format_for(path));
    const SourceGrid grid = config.grid();
    if (dataset.grid.cells_per_side == 0) {
        dataset.grid = grid;
    } else if (dataset.grid.cells_per_side != grid.cells_per_side || dataset.grid.extent != grid.extent) {
        throw ConfigError("dataset " + path.string() + " was generated on a different grid (" +
                          std::to_string(dataset.grid.cells_per_side) + " cells, " +
                          format_double(dataset.grid.extent) + " mm)");
    }
    dataset.grid.center = grid.center;
    return dataset;
}

OpticalSystem load_run_prescription(const PipelineConfig& config) {
    const auto path = config.prescription_path();
    if (!std::filesystem::exists(path)) throw std::runtime_error("prescription not found: " + path.string());
    return load_prescription(path);
}

Params load_run_checkpoint(const PipelineConfig& config) { return nn::load_checkpoint(config.out("model.r2rw")); }

std::string cell_list(const std::vector<std::uint32_t>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? " " : "") + std::to_string(cells[i]);
    return out;
}

}  // namespace

std::filesystem::path PipelineConfig::prescription_path() const {
    return prescription.empty() ? out("prescription.txt") : prescription;
}

std::filesystem::path PipelineConfig::dataset_path() const {
    return dataset.empty() ? out("dataset.r2rd") : dataset;
}

SourceGrid PipelineConfig::grid() const {
    SourceGrid g;
    g.extent = extent;
    g.cells_per_side = cells_per_side;
    return g;
}

TrainOptions PipelineConfig::train_options() const {
    TrainOptions o;
    o.network.hidden_width = hidden_width;
    o.network.hidden_layers = hidden_layers;
    o.network.skip_period = skip_period;
    o.network.weight_init_seed = seed;
    o.optimizer.base_lr = lr;
    o.optimizer.final_lr = final_lr;
    o.optimizer.weight_decay = weight_decay;
    o.optimizer.epsilon = adam_epsilon;
    o.epochs = epochs;
    o.batch_size = batch_size;
    o.seed = seed;
    o.threads = resolve_threads(threads);
    o.deterministic = deterministic;
    return o;
}

void PipelineConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    require(out_dir != "", "out_dir must not be empty");
    require(extent > 0.0, "extent must be > 0");
    require(cells_per_side >= 1, "cells_per_side must be >= 1");
    require(rays_per_cell >= 1, "rays_per_cell must be >= 1");
    require(split > 0.0 && split < 1.0, "split must lie strictly between 0 and 1");
    require(hidden_width >= 1 && hidden_layers >= 1 && skip_period >= 1,
            "hidden_width, hidden_layers and skip_period must be >= 1");
    require(epochs >= 1, "epochs must be >= 1");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(lr > 0.0 && final_lr > 0.0, "lr and final_lr must be > 0");
    require(weight_decay >= 0.0, "weight_decay must be >= 0");
    require(adam_epsilon > 0.0, "adam_epsilon must be > 0");
    require(novel_rays >= 1, "novel_rays must be >= 1");
    require(!bench_sizes.empty(), "bench_sizes must not be empty");
    require(bench_repetitions >= 1, "bench_repetitions must be >= 1");
    require(spot_rays >= 1, "spot_rays must be >= 1");
    const std::uint64_t cells = std::uint64_t{cells_per_side} * cells_per_side;
    const auto train_cells = static_cast<std::uint64_t>(std::llround(split * static_cast<double>(cells)));
    require(train_cells >= 1 && train_cells < cells, "split leaves the train or the test side without cells");
}

void apply_setting(PipelineConfig& c, std::string_view key, std::string_view value) {
    value = trim(value);
    if (key == "out_dir") c.out_dir = std::string(value);
    else if (key == "prescription") c.prescription = std::string(value);
    else if (key == "dataset") c.dataset = std::string(value);
    else if (key == "extent") c.extent = parse_number<double>(key, value);
    else if (key == "cells_per_side") c.cells_per_side = parse_number<std::uint32_t>(key, value);
    else if (key == "rays_per_cell") c.rays_per_cell = parse_number<std::uint32_t>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "split") c.split = parse_number<double>(key, value);
    else if (key == "hidden_width") c.hidden_width = parse_number<std::uint32_t>(key, value);
    else if (key == "hidden_layers") c.hidden_layers = parse_number<std::uint32_t>(key, value);
    else if (key == "skip_period") c.skip_period = parse_number<std::uint32_t>(key, value);
    else if (key == "epochs") c.epochs = parse_number<std::uint32_t>(key, value);
    else if (key == "batch_size") c.batch_size = parse_number<std::uint32_t>(key, value);
    else if (key == "lr") c.lr = parse_number<double>(key, value);
    else if (key == "final_lr") c.final_lr = parse_number<double>(key, value);
    else if (key == "weight_decay") c.weight_decay = parse_number<double>(key, value);
    else if (key == "adam_epsilon") c.adam_epsilon = parse_number<double>(key, value);
    else if (key == "progress_every") c.progress_every = parse_number<std::uint32_t>(key, value);
    else if (key == "novel_rays") c.novel_rays = parse_count(key, value);
    else if (key == "bench_sizes") c.bench_sizes = parse_sizes(key, value);
    else if (key == "bench_repetitions") c.bench_repetitions = parse_number<int>(key, value);
    else if (key == "spot_rays") c.spot_rays = parse_number<std::uint32_t>(key, value);
    else if (key == "spot_depth") c.spot_depth = parse_number<double>(key, value);
    else if (key == "threads") c.threads = parse_number<unsigned>(key, value);
    else if (key == "deterministic") c.deterministic = parse_bool(key, value);
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void apply_config_text(PipelineConfig& config, std::string_view text) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        try {
            apply_setting(config, trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void apply_config_file(PipelineConfig& config, const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    apply_config_text(config, read_file(path));
}

std::string format_config(const PipelineConfig& c) {
    std::ostringstream out;
    out << "out_dir = " << c.out_dir.string() << "\n"
        << "prescription = " << c.prescription_path().string() << "\n"
        << "dataset = " << c.dataset_path().string() << "\n"
        << "extent = " << format_double(c.extent) << "\n"
        << "cells_per_side = " << c.cells_per_side << "\n"
        << "rays_per_cell = " << c.rays_per_cell << "\n"
        << "seed = " << c.seed << "\n"
        << "split = " << format_double(c.split) << "\n"
        << "hidden_width = " << c.hidden_width << "\n"
        << "hidden_layers = " << c.hidden_layers << "\n"
        << "skip_period = " << c.skip_period << "\n"
        << "epochs = " << c.epochs << "\n"
        << "batch_size = " << c.batch_size << "\n"
        << "lr = " << format_double(c.lr) << "\n"
        << "final_lr = " << format_double(c.final_lr) << "\n"
        << "weight_decay = " << format_double(c.weight_decay) << "\n"
        << "adam_epsilon = " << format_double(c.adam_epsilon) << "\n"
        << "progress_every = " << c.progress_every << "\n"
        << "novel_rays = " << c.novel_rays << "\n"
        << "bench_sizes = " << join_sizes(c.bench_sizes) << "\n"
        << "bench_repetitions = " << c.bench_repetitions << "\n"
        << "spot_rays = " << c.spot_rays << "\n"
        << "spot_depth = " << format_double(c.spot_depth) << "\n"
        << "threads = " << c.threads << "\n"
        << "deterministic = " << (c.deterministic ? "true" : "false") << "\n";
    return out.str();
}

void cmd_design(const SingletSpec& spec, const std::filesystem::path& out, std::ostream& log) {
    OpticalSystem system;
    try {
        system = design_singlet(spec);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    save_prescription(system, out);
    char line[160];
    std::snprintf(line, sizeof line, "designed singlet: R = %.6f mm, paraxial efl = %.6f mm, bfl = %.6f mm\n",
                  system.surfaces.front().radius, paraxial_efl(system), paraxial_bfl(system));
    log << line << "wrote " << out.string() << "\n";
}

GenerationReport cmd_gen(const PipelineConfig& config, std::ostream& log) {
    config.validate();
    const auto prescription = config.prescription_path();
    if (config.prescription.empty() && !std::filesystem::exists(prescription))
        cmd_design(SingletSpec{}, prescription, log);
    const OpticalSystem system = load_run_prescription(config);
    const SourceGrid grid = config.grid();

    GenerateOptions options;
    options.threads = resolve_threads(config.threads);
    GenerationResult result = generate(system, grid, config.rays_per_cell, config.seed, options);
    const auto dataset_path = config.dataset_path();
    save_dataset(result.dataset, dataset_path, format_for(dataset_path));
    write_file_atomic(config.out("generation_report.txt"), result.report.to_text());

    const DatasetSplit split = split_cells(grid, config.split, config.seed);
    write_file_atomic(config.out("split.txt"), "seed " + std::to_string(split.seed) + "\ntrain " +
                                                   cell_list(split.train_cells) + "\ntest " +
                                                   cell_list(split.test_cells) + "\n");

    log << "generated " << result.report.total_kept() << " of " << result.report.total_sampled() << " rays over "
        << grid.cell_count() << " cells (" << split.train_cells.size() << " train, " << split.test_cells.size()
        << " test)\nwrote " << dataset_path.string() << "\n";
    return result.report;
}

TrainResult cmd_train(const PipelineConfig& config, std::ostream& log) {
    config.validate();
    TrainRun run;
    run.prescription = config.prescription_path();
    run.dataset = config.dataset_path();
    run.grid = config.grid();
    run.split_fraction = config.split;
    run.options = config.train_options();
    run.checkpoint = config.out("model.r2rw");
    run.best_checkpoint = config.out("model_best.r2rw");
    run.history = config.out("history.csv");

    const std::uint32_t every = config.progress_every;
    const std::uint32_t last = config.epochs - 1;
    run.options.on_epoch = [&log, every, last](const HistoryRow& row) {
        if (every == 0 || (row.epoch % every != 0 && row.epoch != last)) return;
        char line[160];
        std::snprintf(line, sizeof line, "epoch %5u  lr %.3e  loss %.4e  test %.2f um  %.4f deg\n", row.epoch,
                      row.lr, row.train_loss, row.test_pos_um, row.test_ang_deg);
        log << line << std::flush;
    };
    try {
        TrainResult result = run_training(run);
        const HistoryRow& best = result.history[result.best_epoch];
        log << "best epoch " << best.epoch << ": " << best.test_pos_um << " um, " << best.test_ang_deg << " deg\n"
            << "wrote " << run.checkpoint.string() << "\n";
        return result;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

std::vector<EvalReport> cmd_eval(const PipelineConfig& config, std::ostream& log) {
    config.validate();
    const Params params = load_run_checkpoint(config);
    const OpticalSystem system = load_run_prescription(config);
    const Dataset dataset = load_run_dataset(config);
    const unsigned threads = resolve_threads(config.threads);

    const DatasetSplit split = split_cells(dataset.grid, config.split, config.seed);
    std::vector<EvalReport> reports;
    reports.push_back(experiment_unseen_cell(params, dataset.records, split, threads));
    reports.push_back(experiment_novel_pattern(params, system, dataset.grid, config.novel_rays, config.seed, threads));
    write_file_atomic(config.out("eval.csv"), eval_csv(reports));
    log << format_eval_table(reports);
    return reports;
}

std::vector<BenchRow> cmd_bench(const PipelineConfig& config, std::ostream& log) {
    config.validate();
    const Params params = load_run_checkpoint(config);
    const OpticalSystem system = load_run_prescription(config);
    BenchOptions options;
    options.batch_sizes = config.bench_sizes;
    options.repetitions = config.bench_repetitions;
    options.seed = config.seed;
    std::vector<BenchRow> rows = bench(params, system, config.grid(), options);
    const std::string csv = bench_csv(rows);
    write_file_atomic(config.out("bench.csv"), csv);
    log << csv;
    return rows;
}

void cmd_plot(const PipelineConfig& config, std::ostream& log) {
    config.validate();
    const Params params = load_run_checkpoint(config);
    const OpticalSystem system = load_run_prescription(config);
    const double depth = config.spot_depth != 0.0 ? config.spot_depth : paraxial_image_z(system, system.source_z);
    if (depth < system.target_z)
        throw ConfigError("spot_depth " + format_double(depth) + " lies before the target plane at " +
                          format_double(system.target_z));
    const Vec2 origin = config.grid().center;

    const auto exact = spot_points_exact(system, origin, config.spot_rays, config.seed, depth);
    const auto proxy = spot_points_proxy(params, system, origin, config.spot_rays, config.seed, depth);
    if (exact.empty()) throw std::runtime_error("no ray from the source point reaches the spot plane");

    char title[160];
    std::snprintf(title, sizeof title, "exact trace, z = %.3f mm", depth);
    write_spot_diagram(exact, config.out("spot_exact"), title);
    std::snprintf(title, sizeof title, "proxy, z = %.3f mm", depth);
    write_spot_diagram(proxy, config.out("spot_proxy"), title);

    char line[200];
    std::snprintf(line, sizeof line, "spot at z = %.4f mm, %zu rays: exact rms %.2f um, proxy rms %.2f um\n", depth,
                  exact.size(), 1e3 * rms_radius(exact), 1e3 * rms_radius(proxy));
    log << line << "wrote " << config.out("spot_exact.svg").string() << " and " << config.out("spot_proxy.svg").string()
        << "\n";
}

}  // namespace lensproxy
