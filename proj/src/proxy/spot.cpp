#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "lensproxy/io.hpp"
#include "lensproxy/proxy.hpp"

namespace lensproxy {

namespace {

constexpr std::uint64_t kSpotStream = ~0ULL;

struct SpotInputs {
    std::vector<InputRay> inputs;
    std::vector<Ray3> emerged;
};

SpotInputs spot_inputs(const OpticalSystem& system, Vec2 origin, std::size_t count, std::uint64_t seed) {
    SpotInputs s;
    const Vec3 from{origin.x, origin.y, system.source_z};
    for (const Vec3& d : sample_directions(origin, system, count, seed, kSpotStream)) {
        const TraceOutcome outcome = trace({from, d}, system);
        if (const Ray3* out = emerged_ray(outcome)) {
            s.inputs.push_back({origin, {d.x, d.y}});
            s.emerged.push_back(*out);
        }
    }
    return s;
}

Vec2 centroid(const std::vector<Vec2>& points) {
    if (points.empty()) throw std::invalid_argument("spot diagram needs at least one point");
    Vec2 c{};
    for (Vec2 p : points) c = c + p;
    return (1.0 / static_cast<double>(points.size())) * c;
}

double nice_step(double span) {
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) return m * mag;
    return 10.0 * mag;
}

}  // namespace

std::vector<Vec2> spot_points_exact(const OpticalSystem& system, Vec2 origin, std::size_t count, std::uint64_t seed,
                                    double depth_z) {
    const SpotInputs s = spot_inputs(system, origin, count, seed);
    std::vector<Vec2> points;
    points.reserve(s.emerged.size());
    for (const Ray3& r : s.emerged) points.push_back(propagate_to_plane(r, depth_z));
    return points;
}

std::vector<Vec2> spot_points_proxy(const Params& params, const OpticalSystem& system, Vec2 origin,
                                    std::size_t count, std::uint64_t seed, double depth_z) {
    const SpotInputs s = spot_inputs(system, origin, count, seed);
    std::vector<Vec2> points;
    for (const OutputRay& r : query_at_depth(params, s.inputs, system.target_z, depth_z)) points.push_back(r.position);
    return points;
}

double rms_radius(const std::vector<Vec2>& points) {
    const Vec2 c = centroid(points);
    double sum = 0.0;
    for (Vec2 p : points) {
        const Vec2 d = p - c;
        sum += d.x * d.x + d.y * d.y;
    }
    return std::sqrt(sum / static_cast<double>(points.size()));
}

double max_radius(const std::vector<Vec2>& points) {
    const Vec2 c = centroid(points);
    double r = 0.0;
    for (Vec2 p : points) r = std::max(r, norm(p - c));
    return r;
}

std::string spot_svg(const std::vector<Vec2>& points, const std::string& title) {
    const Vec2 c = centroid(points);
    double half = 0.0;
    for (Vec2 p : points) half = std::max({half, std::abs(p.x - c.x), std::abs(p.y - c.y)});
    half = half > 0.0 ? 1.1 * half : 1e-3;
    const double step = nice_step(2.0 * half);

    constexpr double size = 640.0, margin = 70.0, plot = size - 2.0 * margin;
    auto sx = [&](double x) { return margin + (x - (c.x - half)) / (2.0 * half) * plot; };
    auto sy = [&](double y) { return margin + ((c.y + half) - y) / (2.0 * half) * plot; };

    std::string svg;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                  size, size, size, size);
    svg += buf;
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"30\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">",
                  size / 2);
    svg += buf;
    for (char ch : title) {
        if (ch == '<') svg += "&lt;";
        else if (ch == '&') svg += "&amp;";
        else svg += ch;
    }
    svg += "</text>\n";
    std::snprintf(buf, sizeof buf, "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"black\"/>\n",
                  margin, margin, plot, plot);
    svg += buf;

    const double first_x = std::ceil((c.x - half) / step) * step;
    for (double x = first_x; x <= c.x + half; x += step) {
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.2f\" y1=\"%.1f\" x2=\"%.2f\" y2=\"%.1f\" stroke=\"black\"/>"
                      "<text x=\"%.2f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">%g</text>\n",
                      sx(x), margin + plot, sx(x), margin + plot + 6, sx(x), margin + plot + 20, x);
        svg += buf;
    }
    const double first_y = std::ceil((c.y - half) / step) * step;
    for (double y = first_y; y <= c.y + half; y += step) {
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%.2f\" x2=\"%.1f\" y2=\"%.2f\" stroke=\"black\"/>"
                      "<text x=\"%.1f\" y=\"%.2f\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">%g</text>\n",
                      margin - 6, sy(y), margin, sy(y), margin - 9, sy(y) + 4, y);
        svg += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">x (mm)</text>\n"
                  "<text x=\"18\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
                  "transform=\"rotate(-90 18 %.1f)\">y (mm)</text>\n",
                  size / 2, size - 20, size / 2, size / 2);
    svg += buf;

    svg += "<g fill=\"steelblue\" fill-opacity=\"0.6\">\n";
    for (Vec2 p : points) {
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"1.5\"/>\n", sx(p.x), sy(p.y));
        svg += buf;
    }
    svg += "</g>\n</svg>\n";
    return svg;
}

std::string spot_csv(const std::vector<Vec2>& points) {
    std::string out = "x_mm,y_mm\n";
    for (Vec2 p : points) out += format_double(p.x) + "," + format_double(p.y) + "\n";
    return out;
}

void write_spot_diagram(const std::vector<Vec2>& points, const std::filesystem::path& stem, const std::string& title) {
    std::filesystem::path svg = stem, csv = stem;
    svg += ".svg";
    csv += ".csv";
    write_file_atomic(svg, spot_svg(points, title));
    write_file_atomic(csv, spot_csv(points));
}

}  // namespace lensproxy
