#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lensproxy/parallel.hpp"
#include "lensproxy/proxy.hpp"
#include "lensproxy/rng.hpp"

namespace lensproxy {

EvalReport experiment_unseen_cell(const Params& params, const std::vector<RaySample>& records,
                                  const DatasetSplit& split, unsigned threads) {
    if (split.test_cells.empty()) throw std::invalid_argument("split has no test cells");
    for (std::uint32_t c : split.test_cells)
        if (split.is_train(c))
            throw std::invalid_argument("test cell " + std::to_string(c) +
                                        " is also a train cell; refusing to report leaked results");
    const auto held_out = select_cells(records, split.test_cells);
    for (const auto& r : held_out)
        if (split.is_train(r.cell_id)) throw std::logic_error("train record reached the unseen-cell evaluation");
    if (held_out.empty()) throw std::invalid_argument("no records fall in the test cells");
    return evaluate(params, held_out, "unseen_grid_cell", threads);
}

namespace {

constexpr std::size_t kNovelBlock = 4096;

std::uint32_t cell_of(const SourceGrid& grid, Vec2 p) {
    const double pitch = grid.pitch();
    auto index = [&](double v, double center) {
        const double k = std::floor((v - (center - 0.5 * grid.extent)) / pitch);
        return static_cast<std::uint32_t>(std::clamp(k, 0.0, static_cast<double>(grid.cells_per_side - 1)));
    };
    return index(p.y, grid.center.y) * grid.cells_per_side + index(p.x, grid.center.x);
}

}  // namespace

NovelPattern sample_novel_pattern(const OpticalSystem& system, const SourceGrid& grid, std::uint64_t count,
                                  std::uint64_t seed, unsigned threads) {
    grid.validate();
    system.validate();
    if (count < 1) throw std::invalid_argument("novel pattern needs at least one ray");
    const EntranceDisk disk = entrance_disk(system);
    const std::size_t blocks = (count + kNovelBlock - 1) / kNovelBlock;
    std::vector<std::vector<RaySample>> kept(blocks);

    parallel_for(blocks, threads, [&](std::size_t b) {
        CounterRng origins(seed, b, rng_domain::novel_origins);
        CounterRng aims(seed, b, rng_domain::novel_directions);
        const std::size_t n = std::min<std::uint64_t>(kNovelBlock, count - b * kNovelBlock);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 p{grid.center.x + (origins.uniform() - 0.5) * grid.extent,
                         grid.center.y + (origins.uniform() - 0.5) * grid.extent};
            const double u = aims.uniform();
            const double v = aims.uniform();
            const Vec2 q = disk.radius * concentric_disk(u, v);
            const Vec3 d = normalize(Vec3{q.x, q.y, disk.z} - Vec3{p.x, p.y, system.source_z});
            if (auto s = trace_sample(system, p, d, cell_of(grid, p))) kept[b].push_back(*s);
        }
    });

    NovelPattern pattern;
    pattern.requested = count;
    for (auto& block : kept) pattern.samples.insert(pattern.samples.end(), block.begin(), block.end());
    return pattern;
}

EvalReport experiment_novel_pattern(const Params& params, const OpticalSystem& system, const SourceGrid& grid,
                                    std::uint64_t count, std::uint64_t seed, unsigned threads) {
    const NovelPattern pattern = sample_novel_pattern(system, grid, count, seed, threads);
    if (pattern.samples.empty()) throw std::runtime_error("no novel-pattern ray emerged from the system");
    return evaluate(params, pattern.samples, "novel_ray_pattern", threads);
}

std::vector<OutputRay> transport(const std::vector<OutputRay>& rays, double from_z, double to_z) {
    if (to_z < from_z) throw std::domain_error("query depth lies before the training target plane");
    std::vector<OutputRay> out;
    out.reserve(rays.size());
    for (const OutputRay& r : rays) {
        const Vec3 d = reconstruct_direction(r.direction);
        if (!(d.z > 1e-9)) throw std::domain_error("reconstructed direction is parallel to the target plane");
        out.push_back({propagate_to_plane({{r.position.x, r.position.y, from_z}, d}, to_z), r.direction});
    }
    return out;
}

std::vector<OutputRay> proxy_at_target(const Params& params, const std::vector<InputRay>& inputs, unsigned threads) {
    nn::Matrix<double> x(inputs.size(), 4);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        x(i, 0) = inputs[i].position.x;
        x(i, 1) = inputs[i].position.y;
        x(i, 2) = inputs[i].direction.x;
        x(i, 3) = inputs[i].direction.y;
    }
    const nn::Matrix<double> y = predict(params, x, threads);
    std::vector<OutputRay> out(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) out[i] = {{y(i, 0), y(i, 1)}, {y(i, 2), y(i, 3)}};
    return out;
}

std::vector<std::optional<OutputRay>> exact_at_target(const OpticalSystem& system,
                                                      const std::vector<InputRay>& inputs) {
    std::vector<std::optional<OutputRay>> out;
    out.reserve(inputs.size());
    for (const InputRay& in : inputs) {
        const auto s = trace_sample(system, in.position, reconstruct_direction(in.direction));
        out.push_back(s ? std::optional<OutputRay>(OutputRay{s->p_o, s->d_o}) : std::nullopt);
    }
    return out;
}

std::vector<OutputRay> query_at_depth(const Params& params, const std::vector<InputRay>& inputs, double target_z,
                                      double depth_z, unsigned threads) {
    if (depth_z < target_z) throw std::domain_error("query depth lies before the training target plane");
    return transport(proxy_at_target(params, inputs, threads), target_z, depth_z);
}

}  // namespace lensproxy
