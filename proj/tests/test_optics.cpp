#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lensproxy/optics.hpp"
#include "support.hpp"

using namespace lensproxy;
using testing::Gen;
using testing::plane;
using testing::sphere;

namespace {

OpticalSystem flat_plate(double z0, double thickness, double index) {
    OpticalSystem s;
    s.surfaces = {plane(z0, 1e3, index), plane(z0 + thickness, 1e3, 1.0)};
    s.source_z = z0 - 10.0;
    s.target_z = z0 + thickness + 10.0;
    return s;
}

double sin_to_normal(Vec3 d, Vec3 n) { return norm(cross(d, n)); }

}  // namespace

TEST_CASE("analytic intersection examples") {
    const Surface s = sphere(0.0, 50.0, 20.0, 1.5);

    auto hit = intersect_analytic({{0, 0, -10}, {0, 0, 1}}, s);
    REQUIRE(hit);
    CHECK(hit->point.x == doctest::Approx(0.0));
    CHECK(hit->point.z == doctest::Approx(0.0));
    CHECK(hit->normal.z == doctest::Approx(-1.0));

    hit = intersect_analytic({{10, 0, -10}, {0, 0, 1}}, s);
    REQUIRE(hit);
    CHECK(std::abs(hit->point.z - (50.0 - std::sqrt(2400.0))) < 1e-12);
    CHECK(std::abs(hit->point.z - 1.010205) < 1e-6);
    CHECK(dot(hit->normal, Vec3{0, 0, 1}) < 0.0);
    CHECK(std::abs(norm(hit->normal) - 1.0) < 1e-14);

    hit = intersect_analytic({{0, 0, 0}, {0, 0, 1}}, plane(5.0, 10.0, 1.5));
    REQUIRE(hit);
    CHECK(hit->point.z == doctest::Approx(5.0));
    CHECK(hit->normal.z == doctest::Approx(-1.0));
}

TEST_CASE("analytic intersection picks the vertex hemisphere for negative radii") {
    const Surface s = sphere(10.0, -40.0, 20.0, 1.0);
    const auto hit = intersect_analytic({{5, 0, 0}, {0, 0, 1}}, s);
    REQUIRE(hit);
    CHECK(std::abs(hit->point.z - (10.0 - 40.0 + std::sqrt(1600.0 - 25.0))) < 1e-12);
}

TEST_CASE("ray missing a small sphere reports no hit") {
    const Surface s = sphere(0.0, 5.0, 4.0, 1.5);
    CHECK_FALSE(intersect_analytic({{6, 0, -10}, {0, 0, 1}}, s));
    CHECK_FALSE(intersect_newton({{6, 0, -10}, {0, 0, 1}}, s));
    // Crosses the radius-5 cylinder but passes outside the sphere.
    const Ray3 skew{{-10, 4.9, 0.25}, normalize(Vec3{20, 0, 0.5})};
    CHECK_FALSE(intersect_analytic(skew, s));
    CHECK_FALSE(intersect_newton(skew, s));
}

TEST_CASE("newton reaches a deep concave cap from outside the sphere's radius") {
    // The ray crosses the vertex plane 30 mm off axis, beyond |R| = 20.
    const Surface s = sphere(0.0, -20.0, 19.0, 1.5);
    const double rr = 18.0;
    const Vec3 target{rr, 0, s.sag_z(rr)};
    const Vec3 origin{-10, 0, -40};
    const Ray3 ray{origin, normalize(target - origin)};
    REQUIRE(std::abs(ray.origin.x + (0 - origin.z) / ray.direction.z * ray.direction.x) > 20.0);
    const auto a = intersect_analytic(ray, s);
    const auto n = intersect_newton(ray, s);
    REQUIRE(a);
    REQUIRE(n);
    CHECK(norm(a->point - target) < 1e-9);
    CHECK(norm(n->point - target) < 1e-9);
}

TEST_CASE("newton on a plane converges in one step") {
    const auto hit = intersect_newton({{1, 2, -3}, normalize(Vec3{0.1, -0.2, 1})}, plane(4.0, 10.0, 1.5));
    REQUIRE(hit);
    CHECK(hit->iterations == 1);
    CHECK(std::abs(hit->point.z - 4.0) < 1e-12);
}

TEST_CASE("newton on a plane parallel to the ray misses") {
    CHECK_FALSE(intersect_newton({{0, 0, 0}, {1, 0, 0}}, plane(5.0, 10.0, 1.5)));
    CHECK_FALSE(intersect_analytic({{0, 0, 0}, {1, 0, 0}}, plane(5.0, 10.0, 1.5)));
}

TEST_CASE("both intersection methods find a known point of the surface") {
    // Rays aimed at a chosen point of the cap; when that point is the first crossing
    // both solvers must return it.
    Gen g(11);
    int compared = 0, tried = 0;
    double worst_newton = 0.0, worst_analytic = 0.0;
    while (compared < 10000) {
        ++tried;
        const double radius = (g.coin() ? 1.0 : -1.0) * g.uniform(15.0, 300.0);
        const Surface s = g.integer(0, 9) == 0
                              ? plane(g.uniform(-5, 5), 50.0, 1.5)
                              : sphere(g.uniform(-5, 5), radius, g.uniform(0.2, 0.9) * std::abs(radius), 1.5);
        const double reach = s.is_curved() ? s.semi_aperture : 20.0;
        const double rr = reach * std::sqrt(g.uniform(0, 1));
        const double phi = g.uniform(0, 2 * std::numbers::pi);
        const Vec3 target{rr * std::cos(phi), rr * std::sin(phi), s.sag_z(rr)};
        const Vec3 origin{g.uniform(-reach, reach), g.uniform(-reach, reach),
                          s.vertex_z - std::abs(radius) - g.uniform(1, 40)};
        const Ray3 ray{origin, normalize(target - origin)};
        const auto a = intersect_analytic(ray, s);
        REQUIRE(a);
        if (norm(a->point - target) > 1e-6) continue;  // the ray crosses the cap earlier elsewhere
        const auto n = intersect_newton(ray, s);
        REQUIRE(n);
        worst_analytic = std::max(worst_analytic, norm(a->point - target));
        worst_newton = std::max(worst_newton, norm(n->point - target));
        ++compared;
    }
    CHECK(tried < 2 * compared);
    CHECK(worst_analytic < 1e-9);
    CHECK(worst_newton < 1e-9);
}

TEST_CASE("refraction examples") {
    auto d = refract({0, 0, 1}, {0, 0, -1}, 1.0, 1.5);
    REQUIRE(d);
    CHECK(d->z == doctest::Approx(1.0));
    CHECK(std::abs(d->x) < 1e-15);

    d = refract({0.6, 0, 0.8}, {0, 0, -1}, 1.0, 1.5);
    REQUIRE(d);
    CHECK(std::abs(d->x - 0.4) < 1e-15);
    CHECK(std::abs(d->z - std::sqrt(1 - 0.16)) < 1e-15);
    CHECK(std::abs(d->z - 0.916515) < 1e-6);

    const double s45 = std::sin(std::numbers::pi / 4);
    CHECK_FALSE(refract({s45, 0, s45}, {0, 0, -1}, 1.5, 1.0));
}

TEST_CASE("refraction properties over random inputs") {
    Gen g(12);
    double norm_err = 0, snell_err = 0, triple = 0, reverse_err = 0;
    int transmitted = 0;
    for (int i = 0; i < 100000; ++i) {
        const Vec3 d = g.unit_vector();
        Vec3 n = g.unit_vector();
        if (dot(n, d) > 0) n = -1.0 * n;
        if (dot(n, d) > -1e-3) continue;
        const double n1 = g.uniform(1.0, 2.0), n2 = g.uniform(1.0, 2.0);
        const auto out = refract(d, n, n1, n2);
        if (!out) {
            CHECK(n1 * sin_to_normal(d, n) > n2 * (1 - 1e-12));
            continue;
        }
        ++transmitted;
        norm_err = std::max(norm_err, std::abs(norm(*out) - 1.0));
        snell_err = std::max(snell_err, std::abs(n1 * sin_to_normal(d, n) - n2 * sin_to_normal(*out, n)));
        triple = std::max(triple, std::abs(dot(*out, cross(d, n))));
        const auto back = refract(-1.0 * *out, -1.0 * n, n2, n1);
        REQUIRE(back);
        reverse_err = std::max(reverse_err, norm(*back + d));
    }
    CHECK(transmitted > 50000);
    CHECK(norm_err < 1e-12);
    CHECK(snell_err < 1e-12);
    CHECK(triple < 1e-12);
    CHECK(reverse_err < 1e-10);
}

TEST_CASE("propagation examples") {
    Vec2 p = propagate_to_plane({{1, 2, 0}, {0, 0, 1}}, 5.0);
    CHECK(p.x == doctest::Approx(1.0));
    CHECK(p.y == doctest::Approx(2.0));
    p = propagate_to_plane({{0, 0, 0}, {0.6, 0, 0.8}}, 8.0);
    CHECK(std::abs(p.x - 6.0) < 1e-14);
    CHECK(std::abs(p.y) < 1e-14);
    CHECK_THROWS_AS(propagate_to_plane({{0, 0, 0}, {0, 1, 0}}, 5.0), std::domain_error);
}

TEST_CASE("empty system returns the input ray") {
    OpticalSystem empty;
    Gen g(13);
    for (int i = 0; i < 100; ++i) {
        const Ray3 ray{{g.uniform(-5, 5), g.uniform(-5, 5), 0}, g.forward_direction(0.2)};
        const TraceOutcome result = trace(ray, empty);
        const Ray3* e = emerged_ray(result);
        REQUIRE(e);
        CHECK(e->origin == ray.origin);
        CHECK(e->direction == ray.direction);
    }
}

TEST_CASE("flat plate keeps every direction") {
    Gen g(14);
    double worst = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const OpticalSystem plate = flat_plate(g.uniform(-5, 5), g.uniform(0.5, 20), g.uniform(1.0, 2.0));
        const Ray3 ray{{g.uniform(-5, 5), g.uniform(-5, 5), plate.source_z}, g.forward_direction(0.3)};
        const TraceOutcome result = trace(ray, plate);
        const Ray3* e = emerged_ray(result);
        REQUIRE(e);
        const Vec3 diff = e->direction - ray.direction;
        worst = std::max({worst, std::abs(diff.x), std::abs(diff.y), std::abs(diff.z)});
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("traced directions stay unit length") {
    const OpticalSystem lens = design_singlet({});
    Gen g(15);
    double worst = 0.0;
    int emerged = 0;
    for (int i = 0; i < 100000; ++i) {
        const Vec3 origin{g.uniform(-6, 6), g.uniform(-6, 6), lens.source_z};
        const double r = 25.3 * std::sqrt(g.uniform(0, 1)), phi = g.uniform(0, 2 * std::numbers::pi);
        const Vec3 aim{r * std::cos(phi), r * std::sin(phi), lens.surfaces[0].vertex_z};
        const TraceOutcome result = trace({origin, normalize(aim - origin)}, lens);
        if (const Ray3* e = emerged_ray(result)) {
            worst = std::max(worst, std::abs(norm(e->direction) - 1.0));
            ++emerged;
        }
    }
    CHECK(emerged > 80000);
    CHECK(worst < 1e-12);
}

TEST_CASE("axial ray is a fixed point of centered systems") {
    Gen g(16);
    for (int i = 0; i < 200; ++i) {
        OpticalSystem s;
        double z = 0.0;
        const int count = g.integer(1, 8);
        for (int k = 0; k < count; ++k) {
            const double radius = (g.coin() ? 1.0 : -1.0) * g.uniform(20, 200);
            if (g.integer(0, 3) == 0) s.surfaces.push_back(plane(z, 10.0, g.uniform(1.0, 1.9)));
            else s.surfaces.push_back(sphere(z, radius, 10.0, g.uniform(1.0, 1.9)));
            z += g.uniform(5, 20);
        }
        s.surfaces.back().index_after = 1.0;
        s.source_z = -50.0;
        s.target_z = z + 5.0;
        const TraceOutcome result = trace({{0, 0, s.source_z}, {0, 0, 1}}, s);
        const Ray3* e = emerged_ray(result);
        REQUIRE(e);
        CHECK(e->origin.x == 0.0);
        CHECK(e->origin.y == 0.0);
        CHECK(e->direction.z == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(std::abs(e->direction.x) < 1e-15);
    }
}

TEST_CASE("trace reports vignetting, total internal reflection and misses") {
    const OpticalSystem lens = design_singlet({});
    auto result = trace({{30, 0, lens.source_z}, {0, 0, 1}}, lens);
    REQUIRE(std::holds_alternative<outcome::Vignetted>(result));
    CHECK(std::get<outcome::Vignetted>(result).surface == 0);

    OpticalSystem glass_to_air;
    glass_to_air.index_before_first = 1.5;
    glass_to_air.surfaces = {plane(0.0, 100.0, 1.0)};
    glass_to_air.source_z = -10;
    glass_to_air.target_z = 10;
    const double s45 = std::sin(std::numbers::pi / 4);
    result = trace({{0, 0, -10}, {s45, 0, s45}}, glass_to_air);
    REQUIRE(std::holds_alternative<outcome::TotalInternalReflection>(result));
    CHECK(std::get<outcome::TotalInternalReflection>(result).surface == 0);

    OpticalSystem ball;
    ball.surfaces = {sphere(0.0, 5.0, 4.9, 1.5), sphere(10.0, -5.0, 4.9, 1.0)};
    ball.source_z = -10;
    ball.target_z = 20;
    result = trace({{8, 0, -10}, {0, 0, 1}}, ball);
    CHECK(std::holds_alternative<outcome::Missed>(result));
}

TEST_CASE("stops clip without refracting") {
    OpticalSystem s;
    s.surfaces = {{SurfaceKind::Stop, 0.0, 0.0, 2.0, 1.7}};
    s.source_z = -5;
    s.target_z = 5;
    const Vec3 d = normalize(Vec3{0.1, 0, 1});
    const TraceOutcome through = trace({{0, 0, -5}, d}, s);
    REQUIRE(emerged_ray(through));
    CHECK(emerged_ray(through)->direction == d);
    CHECK(std::holds_alternative<outcome::Vignetted>(trace({{3, 0, -5}, {0, 0, 1}}, s)));
}

TEST_CASE("analytic and newton traces agree through the singlet") {
    const OpticalSystem lens = design_singlet({});
    Gen g(17);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Vec3 origin{g.uniform(-6, 6), g.uniform(-6, 6), lens.source_z};
        const Vec3 aim{g.uniform(-18, 18), g.uniform(-18, 18), 0.0};
        const Ray3 ray{origin, normalize(aim - origin)};
        const TraceOutcome a = trace(ray, lens, IntersectMethod::Analytic);
        const TraceOutcome n = trace(ray, lens, IntersectMethod::Newton);
        if (!emerged_ray(a) || !emerged_ray(n)) continue;
        worst = std::max(worst, norm(propagate_to_plane(*emerged_ray(a), lens.target_z) -
                                     propagate_to_plane(*emerged_ray(n), lens.target_z)));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("paraxial examples") {
    OpticalSystem single;
    single.surfaces = {sphere(0.0, 51.68, 10.0, 1.5168)};
    single.source_z = -10;
    single.target_z = 10;
    CHECK(std::abs(paraxial_efl(single) - 100.0) < 1e-9);

    CHECK_THROWS_AS(paraxial_efl(OpticalSystem{}), std::domain_error);
    CHECK_THROWS_AS(paraxial_efl(flat_plate(0, 5, 1.5)), std::domain_error);
}

TEST_CASE("thick lens efl matches the lensmaker formula") {
    Gen g(18);
    for (int i = 0; i < 100; ++i) {
        const double r1 = g.uniform(30, 200), r2 = -g.uniform(30, 200), t = g.uniform(1, 20), n = g.uniform(1.4, 1.9);
        OpticalSystem s;
        s.surfaces = {sphere(0, r1, 10, n), sphere(t, r2, 10, 1.0)};
        s.source_z = -10;
        s.target_z = t + 10;
        const double power = (n - 1) * (1 / r1 - 1 / r2 + (n - 1) * t / (n * r1 * r2));
        CHECK(paraxial_efl(s) == doctest::Approx(1 / power).epsilon(1e-12));
    }
}

TEST_CASE("near-axis parallel ray focuses at the paraxial back focus") {
    const OpticalSystem lens = design_singlet({});
    const TraceOutcome result = trace({{0.05, 0, lens.source_z}, {0, 0, 1}}, lens);
    const Ray3* e = emerged_ray(result);
    REQUIRE(e);
    REQUIRE(e->direction.x < 0);
    const double crossing = e->origin.z - e->origin.x * e->direction.z / e->direction.x;
    const double bfl = lens.surfaces.back().vertex_z + paraxial_bfl(lens);
    CHECK(std::abs(crossing - bfl) / paraxial_bfl(lens) < 2e-3);
}

TEST_CASE("designed singlet") {
    SingletSpec spec;
    spec.center_thickness = 8.0;
    const OpticalSystem thin = design_singlet(spec);
    CHECK(std::abs(paraxial_efl(thin) - 60.0) < 0.06);

    const OpticalSystem lens = design_singlet({});
    REQUIRE(lens.surfaces.size() == 2);
    CHECK(std::abs(paraxial_efl(lens) - 60.0) < 1e-9);
    CHECK(lens.surfaces[0].radius == doctest::Approx(-lens.surfaces[1].radius));
    CHECK(lens.surfaces[0].semi_aperture == doctest::Approx(25.3));
    CHECK(lens.target_z - lens.surfaces.back().vertex_z == doctest::Approx(1.0));
    CHECK(lens.surfaces[0].vertex_z - lens.source_z == doctest::Approx(100.0));
    CHECK_NOTHROW(lens.validate());
    // The 14 mm lens keeps a positive edge: the two caps do not cross inside the aperture.
    CHECK(lens.surfaces[1].sag_z(25.3) > lens.surfaces[0].sag_z(25.3));

    SingletSpec limit;
    limit.center_thickness = 1e-7;
    limit.aperture = 20.0;
    CHECK(design_singlet(limit).surfaces[0].radius == doctest::Approx(2 * 60 * 0.5168).epsilon(1e-6));
    CHECK(std::abs(2 * 60 * 0.5168 - 62.016) < 1e-9);

    SingletSpec huge;
    huge.aperture = 200.0;
    CHECK_THROWS_AS(design_singlet(huge), std::invalid_argument);
}

TEST_CASE("system validation") {
    OpticalSystem s = design_singlet({});
    CHECK_NOTHROW(s.validate());

    auto broken = s;
    broken.surfaces[0].semi_aperture = 100.0;
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
    broken = s;
    broken.surfaces[0].index_after = 0.9;
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
    broken = s;
    broken.source_z = 1.0;
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
    broken = s;
    broken.target_z = 0.0;
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
    broken = s;
    std::swap(broken.surfaces[0].vertex_z, broken.surfaces[1].vertex_z);
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
}
