#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "lensproxy/vec.hpp"

namespace lensproxy {

/// A ray in lens space: origin in millimeters, unit direction.
struct Ray3 {
    Vec3 origin;
    Vec3 direction;
};

enum class SurfaceKind { SphericalRefractor, PlanarRefractor, Stop };

/// One interface of a sequential system. `radius` is signed: positive when
/// the center of curvature lies downstream of the vertex. Ignored for planar
/// refractors and stops. Stops leave the medium unchanged, so their
/// `index_after` is ignored.
struct Surface {
    SurfaceKind kind = SurfaceKind::SphericalRefractor;
    double vertex_z = 0.0;
    double radius = 0.0;
    double semi_aperture = 0.0;
    double index_after = 1.0;

    bool is_refractor() const { return kind != SurfaceKind::Stop; }
    bool is_curved() const { return kind == SurfaceKind::SphericalRefractor; }

    /// Axial position of the surface at lateral radius `r`. Requires |r| <= |radius|
    /// for spherical surfaces.
    double sag_z(double r) const;
};

struct OpticalSystem {
    std::vector<Surface> surfaces;
    double index_before_first = 1.0;
    double source_z = 0.0;
    double target_z = 0.0;

    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const;

    /// z of the rearmost point of the last surface's clear aperture.
    double rear_extent_z() const;
};

struct SurfaceHit {
    Vec3 point;
    Vec3 normal;  ///< unit, oriented so that dot(normal, direction) < 0
    double t = 0.0;
    int iterations = 0;
};

/// Closed-form ray/surface intersection. Spherical surfaces return the root on
/// the hemisphere containing the vertex; the clear aperture is not enforced here.
std::optional<SurfaceHit> intersect_analytic(const Ray3& ray, const Surface& surface);

struct NewtonOptions {
    double tolerance = 1e-10;
    int max_iterations = 64;
};

/// Newton iteration on f(t) = z(t) - sag(r(t)), started from the vertex plane and
/// stopped once a step moves the point less than `tolerance` mm along the ray.
/// Iterates are kept within |radius| of the axis, where the sag is defined.
std::optional<SurfaceHit> intersect_newton(const Ray3& ray, const Surface& surface,
                                           NewtonOptions options = {});

/// Vector Snell refraction. Returns nullopt on total internal reflection.
std::optional<Vec3> refract(Vec3 direction, Vec3 normal, double n1, double n2);

/// Lateral (x, y) where the ray crosses z = plane_z.
/// Throws std::domain_error when direction.z <= 1e-9.
Vec2 propagate_to_plane(const Ray3& ray, double plane_z);

namespace outcome {
struct Emerged {
    Ray3 ray;
};
struct Vignetted {
    std::size_t surface;
};
struct TotalInternalReflection {
    std::size_t surface;
};
struct Missed {
    std::size_t surface;
};
}  // namespace outcome

using TraceOutcome = std::variant<outcome::Emerged, outcome::Vignetted,
                                  outcome::TotalInternalReflection, outcome::Missed>;

enum class IntersectMethod { Newton, Analytic };

/// Sequential trace through every surface. The emerged ray's origin lies on the
/// last surface (or is the input ray itself for an empty system).
TraceOutcome trace(const Ray3& ray, const OpticalSystem& system,
                   IntersectMethod method = IntersectMethod::Newton);

inline const Ray3* emerged_ray(const TraceOutcome& result) {
    if (const auto* e = std::get_if<outcome::Emerged>(&result)) return &e->ray;
    return nullptr;
}
const Ray3* emerged_ray(TraceOutcome&&) = delete;

// Paraxial analysis in the (height, reduced angle n*u) convention.

using Mat2 = std::array<std::array<double, 2>, 2>;

/// System matrix from the first vertex to the last vertex.
Mat2 paraxial_matrix(const OpticalSystem& system);

/// Effective focal length -1/C. Throws std::domain_error for afocal systems.
double paraxial_efl(const OpticalSystem& system);

/// Back focal distance measured from the last vertex.
double paraxial_bfl(const OpticalSystem& system);

/// Axial position of the paraxial image of an on-axis point at `object_z`.
double paraxial_image_z(const OpticalSystem& system, double object_z);

struct SingletSpec {
    double focal = 60.0;
    double aperture = 50.6;
    double index = 1.5168;
    double center_thickness = 14.0;
    double source_distance = 100.0;  ///< source plane sits this far before the first vertex
    double target_gap = 1.0;         ///< target plane sits this far behind the last vertex
};

/// Symmetric biconvex singlet (R1 = -R2) whose paraxial EFL matches `focal`.
/// Throws std::invalid_argument when no radius larger than the semi-aperture works.
OpticalSystem design_singlet(const SingletSpec& spec);

}  // namespace lensproxy
