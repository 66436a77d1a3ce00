#include "lensproxy/optics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lensproxy {

namespace {

Vec3 at(const Ray3& ray, double t) { return ray.origin + t * ray.direction; }

Vec3 face_against(Vec3 normal, Vec3 direction) {
    return dot(normal, direction) > 0.0 ? -normal : normal;
}

Vec3 sphere_center(const Surface& s) { return {0.0, 0.0, s.vertex_z + s.radius}; }

// Points on the vertex hemisphere sit on the opposite side of the center from
// the direction the radius points.
bool on_vertex_hemisphere(const Surface& s, Vec3 p) {
    return (p.z - sphere_center(s).z) * s.radius <= 0.0;
}

std::optional<SurfaceHit> plane_hit(const Ray3& ray, const Surface& s) {
    if (ray.direction.z == 0.0) return std::nullopt;
    const double t = (s.vertex_z - ray.origin.z) / ray.direction.z;
    if (!(t >= 0.0)) return std::nullopt;
    SurfaceHit hit;
    hit.t = t;
    hit.point = at(ray, t);
    hit.point.z = s.vertex_z;
    hit.normal = face_against({0.0, 0.0, -1.0}, ray.direction);
    return hit;
}

}  // namespace

double Surface::sag_z(double r) const {
    if (!is_curved()) return vertex_z;
    const double root = std::sqrt(radius * radius - r * r);
    return vertex_z + radius - std::copysign(root, radius);
}

void OpticalSystem::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
    if (!(index_before_first >= 1.0)) fail("index_before must be >= 1");
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
        const Surface& s = surfaces[i];
        const std::string tag = "surface " + std::to_string(i) + ": ";
        if (!(s.semi_aperture > 0.0)) fail(tag + "semi_aperture must be > 0");
        if (!(s.index_after >= 1.0)) fail(tag + "index_after must be >= 1");
        if (s.is_curved() && !(std::abs(s.radius) > s.semi_aperture))
            fail(tag + "|radius| must exceed semi_aperture");
        if (i > 0 && !(s.vertex_z > surfaces[i - 1].vertex_z))
            fail(tag + "vertex_z must increase strictly");
    }
    if (surfaces.empty()) {
        if (!(target_z >= source_z)) fail("target_z must not precede source_z");
        return;
    }
    if (!(source_z < surfaces.front().vertex_z)) fail("source_z must precede the first vertex");
    if (!(target_z > surfaces.back().vertex_z)) fail("target_z must follow the last vertex");
}

double OpticalSystem::rear_extent_z() const {
    if (surfaces.empty()) return source_z;
    const Surface& last = surfaces.back();
    return std::max(last.vertex_z, last.sag_z(last.semi_aperture));
}

std::optional<SurfaceHit> intersect_analytic(const Ray3& ray, const Surface& surface) {
    if (!surface.is_curved()) return plane_hit(ray, surface);

    const Vec3 center = sphere_center(surface);
    const Vec3 oc = ray.origin - center;
    const double b = dot(oc, ray.direction);
    const double c = dot(oc, oc) - surface.radius * surface.radius;
    const double disc = b * b - c;
    if (disc < 0.0) return std::nullopt;

    // Numerically stable pair of roots of t^2 + 2bt + c = 0.
    const double q = -b - std::copysign(std::sqrt(disc), b);
    double roots[2] = {q, q != 0.0 ? c / q : 0.0};
    if (roots[1] < roots[0]) std::swap(roots[0], roots[1]);

    for (double t : roots) {
        if (t < 0.0) continue;
        const Vec3 p = at(ray, t);
        if (!on_vertex_hemisphere(surface, p)) continue;
        SurfaceHit hit;
        hit.t = t;
        hit.point = p;
        hit.normal = face_against(normalize(p - center), ray.direction);
        return hit;
    }
    return std::nullopt;
}

std::optional<SurfaceHit> intersect_newton(const Ray3& ray, const Surface& surface,
                                           NewtonOptions options) {
    if (!(options.tolerance > 0.0)) throw std::invalid_argument("newton tolerance must be > 0");
    const Vec3 d = ray.direction;
    if (!(d.z > 0.0)) return std::nullopt;

    const bool curved = surface.is_curved();
    const double r2_max = surface.radius * surface.radius;
    double t = (surface.vertex_z - ray.origin.z) / d.z;

    // Iterates must stay within the sphere's radius of the axis. A start outside
    // it is pulled toward the ray's closest approach to the axis; Newton steps
    // that would leave it are halved.
    auto inside = [&](double tt) {
        const Vec3 q = at(ray, tt);
        return !curved || q.x * q.x + q.y * q.y < r2_max;
    };
    if (!inside(t)) {
        const double lateral = d.x * d.x + d.y * d.y;
        if (lateral == 0.0) return std::nullopt;
        const double t_axis = -(ray.origin.x * d.x + ray.origin.y * d.y) / lateral;
        if (!inside(t_axis)) return std::nullopt;
        while (!inside(t)) t = t_axis + 0.5 * (t - t_axis);
    }

    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        const Vec3 p = at(ray, t);
        const double s = p.x * p.x + p.y * p.y;
        const double f = p.z - surface.sag_z(std::sqrt(s));
        double df = d.z;
        if (curved) {
            const double root = std::sqrt(r2_max - s);
            df -= std::copysign(1.0, surface.radius) * (p.x * d.x + p.y * d.y) / root;
        }
        if (df == 0.0 || !std::isfinite(df)) return std::nullopt;
        double step = f / df;
        bool damped = false;
        while (!inside(t - step)) {
            step *= 0.5;
            damped = true;
        }
        t -= step;
        if (damped) continue;
        if (std::abs(step) < options.tolerance) {
            if (t < 0.0) return std::nullopt;
            SurfaceHit hit;
            hit.t = t;
            hit.point = at(ray, t);
            hit.iterations = iter;
            if (curved) {
                hit.normal = face_against(normalize(hit.point - sphere_center(surface)), d);
            } else {
                hit.normal = face_against({0.0, 0.0, -1.0}, d);
            }
            return hit;
        }
    }
    return std::nullopt;
}

std::optional<Vec3> refract(Vec3 direction, Vec3 normal, double n1, double n2) {
    const double mu = n1 / n2;
    const double c = -dot(normal, direction);
    const double k = 1.0 - mu * mu * (1.0 - c * c);
    if (k < 0.0) return std::nullopt;
    return mu * direction + (mu * c - std::sqrt(k)) * normal;
}

Vec2 propagate_to_plane(const Ray3& ray, double plane_z) {
    if (!(ray.direction.z > 1e-9))
        throw std::domain_error("ray does not travel toward the plane (direction z <= 1e-9)");
    if (plane_z < ray.origin.z)
        throw std::domain_error("plane lies behind the ray origin");
    const double t = (plane_z - ray.origin.z) / ray.direction.z;
    return {ray.origin.x + t * ray.direction.x, ray.origin.y + t * ray.direction.y};
}

TraceOutcome trace(const Ray3& ray, const OpticalSystem& system, IntersectMethod method) {
    Ray3 current = ray;
    double n_current = system.index_before_first;
    for (std::size_t i = 0; i < system.surfaces.size(); ++i) {
        const Surface& s = system.surfaces[i];
        const auto hit = method == IntersectMethod::Newton ? intersect_newton(current, s)
                                                           : intersect_analytic(current, s);
        if (!hit) return outcome::Missed{i};

        const double r2 = hit->point.x * hit->point.x + hit->point.y * hit->point.y;
        if (r2 > s.semi_aperture * s.semi_aperture) return outcome::Vignetted{i};

        current.origin = hit->point;
        if (!s.is_refractor()) continue;

        const auto bent = refract(current.direction, hit->normal, n_current, s.index_after);
        if (!bent) return outcome::TotalInternalReflection{i};
        current.direction = *bent;
        n_current = s.index_after;
    }
    return outcome::Emerged{current};
}

Mat2 paraxial_matrix(const OpticalSystem& system) {
    Mat2 m{{{1.0, 0.0}, {0.0, 1.0}}};
    auto apply = [&m](const Mat2& a) {
        Mat2 r{};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) r[i][j] = a[i][0] * m[0][j] + a[i][1] * m[1][j];
        m = r;
    };
    double n = system.index_before_first;
    for (std::size_t i = 0; i < system.surfaces.size(); ++i) {
        const Surface& s = system.surfaces[i];
        if (i > 0) apply({{{1.0, (s.vertex_z - system.surfaces[i - 1].vertex_z) / n}, {0.0, 1.0}}});
        if (!s.is_refractor()) continue;
        const double power = s.is_curved() ? (s.index_after - n) / s.radius : 0.0;
        apply({{{1.0, 0.0}, {-power, 1.0}}});
        n = s.index_after;
    }
    return m;
}

namespace {

double exit_index(const OpticalSystem& system) {
    double n = system.index_before_first;
    for (const Surface& s : system.surfaces)
        if (s.is_refractor()) n = s.index_after;
    return n;
}

}  // namespace

double paraxial_efl(const OpticalSystem& system) {
    const double c = paraxial_matrix(system)[1][0];
    if (std::abs(c) < 1e-15) throw std::domain_error("afocal system has no effective focal length");
    return -1.0 / c;
}

double paraxial_bfl(const OpticalSystem& system) {
    const Mat2 m = paraxial_matrix(system);
    if (std::abs(m[1][0]) < 1e-15) throw std::domain_error("afocal system has no back focus");
    return -m[0][0] * exit_index(system) / m[1][0];
}

double paraxial_image_z(const OpticalSystem& system, double object_z) {
    if (system.surfaces.empty()) throw std::domain_error("empty system forms no image");
    const Mat2 m = paraxial_matrix(system);
    const double lead = (system.surfaces.front().vertex_z - object_z) / system.index_before_first;
    // Marginal ray leaving the object point on axis: y = 0, nu = 1.
    const double y = m[0][0] * lead + m[0][1];
    const double nu = m[1][0] * lead + m[1][1];
    if (std::abs(nu) < 1e-15) throw std::domain_error("image at infinity");
    return system.surfaces.back().vertex_z - y * exit_index(system) / nu;
}

OpticalSystem design_singlet(const SingletSpec& spec) {
    if (!(spec.focal > 0.0)) throw std::invalid_argument("focal length must be > 0");
    if (!(spec.aperture > 0.0)) throw std::invalid_argument("aperture must be > 0");
    if (!(spec.index > 1.0)) throw std::invalid_argument("index must be > 1");
    if (!(spec.center_thickness > 0.0)) throw std::invalid_argument("center thickness must be > 0");
    if (!(spec.source_distance > 0.0) || !(spec.target_gap > 0.0))
        throw std::invalid_argument("source distance and target gap must be > 0");

    const double n = spec.index;
    const double t = spec.center_thickness;
    const double semi = 0.5 * spec.aperture;
    const double wanted = 1.0 / spec.focal;
    // Thick-lens power for R1 = R, R2 = -R. Monotone decreasing for R above (n-1)t/n.
    auto power = [&](double r) { return (n - 1.0) * (2.0 / r - (n - 1.0) * t / (n * r * r)); };

    double lo = std::max(semi, (n - 1.0) * t / n);
    lo = std::nextafter(lo, INFINITY);
    if (power(lo) < wanted)
        throw std::invalid_argument("no radius larger than the semi-aperture reaches the requested focal length");
    double hi = 2.0 * lo;
    while (power(hi) > wanted) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (power(mid) > wanted ? lo : hi) = mid;
    }
    const double radius = 0.5 * (lo + hi);

    OpticalSystem system;
    system.index_before_first = 1.0;
    system.surfaces = {
        {SurfaceKind::SphericalRefractor, 0.0, radius, semi, n},
        {SurfaceKind::SphericalRefractor, t, -radius, semi, 1.0},
    };
    system.source_z = -spec.source_distance;
    system.target_z = t + spec.target_gap;
    system.validate();
    return system;
}

}  // namespace lensproxy
