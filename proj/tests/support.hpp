#pragma once

#include <cmath>
#include <random>

#include "lensproxy/optics.hpp"

namespace testing {

// Property-test input source, independent of the library's own RNG.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
    bool coin() { return integer(0, 1) == 1; }

    lensproxy::Vec3 unit_vector() {
        for (;;) {
            lensproxy::Vec3 v{uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)};
            const double n = lensproxy::norm(v);
            if (n > 1e-3 && n <= 1.0) return (1.0 / n) * v;
        }
    }

    /// Unit vector with z >= min_z.
    lensproxy::Vec3 forward_direction(double min_z) {
        for (;;) {
            lensproxy::Vec3 v = unit_vector();
            if (v.z >= min_z) return v;
        }
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

inline lensproxy::Surface sphere(double vertex_z, double radius, double semi, double index_after) {
    return {lensproxy::SurfaceKind::SphericalRefractor, vertex_z, radius, semi, index_after};
}

inline lensproxy::Surface plane(double vertex_z, double semi, double index_after) {
    return {lensproxy::SurfaceKind::PlanarRefractor, vertex_z, 0.0, semi, index_after};
}

}  // namespace testing
