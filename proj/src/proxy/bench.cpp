#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "lensproxy/io.hpp"
#include "lensproxy/proxy.hpp"
#include "lensproxy/rng.hpp"

namespace lensproxy {

namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct BenchInputs {
    std::vector<Ray3> rays;
    nn::Matrix<double> features;
};

BenchInputs make_inputs(const OpticalSystem& system, const SourceGrid& grid, std::size_t n, std::uint64_t seed) {
    const EntranceDisk disk = entrance_disk(system);
    CounterRng rng(seed, n, rng_domain::novel_origins);
    BenchInputs in;
    in.rays.reserve(n);
    in.features = nn::Matrix<double>(n, 4);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 p{grid.center.x + (rng.uniform() - 0.5) * grid.extent,
                     grid.center.y + (rng.uniform() - 0.5) * grid.extent};
        const double u = rng.uniform();
        const double v = rng.uniform();
        const Vec2 q = disk.radius * concentric_disk(u, v);
        const Vec3 d = normalize(Vec3{q.x, q.y, disk.z} - Vec3{p.x, p.y, system.source_z});
        in.rays.push_back({{p.x, p.y, system.source_z}, d});
        in.features(i, 0) = p.x;
        in.features(i, 1) = p.y;
        in.features(i, 2) = d.x;
        in.features(i, 3) = d.y;
    }
    return in;
}

}  // namespace

std::vector<BenchRow> bench(const Params& params, const OpticalSystem& system, const SourceGrid& grid,
                            const BenchOptions& options) {
    if (options.repetitions < 1) throw std::invalid_argument("benchmark needs at least one repetition");
    std::vector<BenchRow> rows;
    volatile double sink = 0.0;
    for (std::size_t batch : options.batch_sizes) {
        if (batch < 1) throw std::invalid_argument("batch sizes must be >= 1");
        const BenchInputs in = make_inputs(system, grid, batch, options.seed);

        std::vector<double> exact_times, proxy_times;
        for (int rep = 0; rep < options.repetitions; ++rep) {
            const auto t0 = Clock::now();
            double acc = 0.0;
            for (const Ray3& ray : in.rays) {
                const TraceOutcome outcome = trace(ray, system);
                if (const Ray3* out = emerged_ray(outcome)) {
                    const Vec2 p = propagate_to_plane(*out, system.target_z);
                    acc += p.x;
                }
            }
            exact_times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
            sink = sink + acc;

            const auto t1 = Clock::now();
            const nn::Matrix<double> y = predict(params, in.features, 1);
            proxy_times.push_back(std::chrono::duration<double>(Clock::now() - t1).count());
            sink = sink + y(0, 0);
        }
        rows.push_back({"exact", batch, static_cast<double>(batch) / median(exact_times)});
        rows.push_back({"proxy", batch, static_cast<double>(batch) / median(proxy_times)});
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::string out = "method,batch_size,rays_per_second_median\n";
    for (const auto& r : rows)
        out += r.method + "," + std::to_string(r.batch_size) + "," + format_double(r.rays_per_second_median) + "\n";
    return out;
}

}  // namespace lensproxy
