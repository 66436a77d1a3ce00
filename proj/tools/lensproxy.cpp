#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lensproxy/pipeline.hpp"

using namespace lensproxy;

namespace {

struct CommonFlags {
    std::optional<std::string> config;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    bool fast = false;
    std::vector<std::string> settings;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "key = value config file");
    cmd->add_option("--out-dir", f.out_dir, "directory for all outputs");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--threads", f.threads, "worker threads (0 = all cores)");
    cmd->add_flag("--fast", f.fast, "allow nondeterministic gradient reduction");
    cmd->add_option("--set", f.settings, "override a config key, e.g. --set epochs=500")->take_all();
}

PipelineConfig resolve(const CommonFlags& f) {
    PipelineConfig config;
    if (f.config) apply_config_file(config, *f.config);
    for (const std::string& s : f.settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
    }
    if (f.out_dir) config.out_dir = *f.out_dir;
    if (f.seed) config.seed = *f.seed;
    if (f.threads) config.threads = *f.threads;
    if (f.fast) config.deterministic = false;
    config.validate();
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact lens ray tracing and a neural proxy ray tracer"};
    app.require_subcommand(1);

    SingletSpec spec;
    std::optional<double> focal, aperture;
    std::string design_out = "prescription.txt";
    auto* design = app.add_subcommand("design", "design a biconvex singlet and write its prescription");
    design->add_option("--focal", focal, "paraxial focal length, mm")->required();
    design->add_option("--aperture", aperture, "clear aperture diameter, mm")->required();
    design->add_option("--index", spec.index, "refractive index")->capture_default_str();
    design->add_option("--thickness", spec.center_thickness, "center thickness, mm")->capture_default_str();
    design->add_option("--source-distance", spec.source_distance, "source plane before the first vertex, mm")
        ->capture_default_str();
    design->add_option("--target-gap", spec.target_gap, "target plane behind the last vertex, mm")
        ->capture_default_str();
    design->add_option("--out", design_out, "output prescription file")->capture_default_str();

    CommonFlags flags;
    auto* gen = app.add_subcommand("gen", "generate the ray dataset and the cell split");
    auto* train = app.add_subcommand("train", "train the proxy network");
    auto* eval = app.add_subcommand("eval", "evaluate unseen cells and a novel ray pattern");
    auto* bench = app.add_subcommand("bench", "compare exact tracing and proxy throughput");
    auto* plot = app.add_subcommand("plot", "write exact and proxy spot diagrams");
    auto* show = app.add_subcommand("config", "print the resolved configuration");
    for (auto* cmd : {gen, train, eval, bench, plot, show}) add_common(cmd, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (design->parsed()) {
            spec.focal = *focal;
            spec.aperture = *aperture;
            cmd_design(spec, design_out, std::cout);
            return 0;
        }
        const PipelineConfig config = resolve(flags);
        if (gen->parsed()) cmd_gen(config, std::cout);
        else if (train->parsed()) cmd_train(config, std::cout);
        else if (eval->parsed()) cmd_eval(config, std::cout);
        else if (bench->parsed()) cmd_bench(config, std::cout);
        else if (plot->parsed()) cmd_plot(config, std::cout);
        else if (show->parsed()) std::cout << format_config(config);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
