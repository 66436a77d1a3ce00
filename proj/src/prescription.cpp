#include "lensproxy/prescription.hpp"

#include <charconv>
#include <map>
#include <optional>
#include <sstream>

#include "lensproxy/io.hpp"

namespace lensproxy {

namespace {

[[noreturn]] void bad_line(std::size_t line, const std::string& message) {
    throw FormatError(FormatError::Kind::BadRecord, line,
                      "prescription line " + std::to_string(line) + ": " + message);
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_number(std::string_view token, std::size_t line, std::string_view key) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size())
        bad_line(line, "invalid number '" + std::string(token) + "' for " + std::string(key));
    return value;
}

std::pair<std::string_view, std::string_view> split_pair(std::string_view token, std::size_t line) {
    const auto eq = token.find('=');
    if (eq == std::string_view::npos || eq == 0)
        bad_line(line, "expected key=value, got '" + std::string(token) + "'");
    return {token.substr(0, eq), token.substr(eq + 1)};
}

Surface parse_surface(std::string_view rest, std::size_t line) {
    std::map<std::string, std::string_view, std::less<>> fields;
    std::size_t pos = 0;
    while (pos < rest.size()) {
        const auto next = rest.find_first_of(" \t", pos);
        const auto token = trim(rest.substr(pos, next == std::string_view::npos ? rest.npos : next - pos));
        pos = next == std::string_view::npos ? rest.size() : next + 1;
        if (token.empty()) continue;
        auto [key, value] = split_pair(token, line);
        if (!fields.emplace(std::string(key), value).second)
            bad_line(line, "duplicate field " + std::string(key));
    }

    auto take = [&](std::string_view key) -> std::optional<std::string_view> {
        auto it = fields.find(key);
        if (it == fields.end()) return std::nullopt;
        auto v = it->second;
        fields.erase(it);
        return v;
    };
    auto number = [&](std::string_view key) {
        auto v = take(key);
        if (!v) bad_line(line, "missing field " + std::string(key));
        return parse_number(*v, line, key);
    };

    Surface s;
    const auto kind = take("kind");
    if (!kind) bad_line(line, "missing field kind");
    if (*kind == "spherical") s.kind = SurfaceKind::SphericalRefractor;
    else if (*kind == "planar") s.kind = SurfaceKind::PlanarRefractor;
    else if (*kind == "stop") s.kind = SurfaceKind::Stop;
    else bad_line(line, "unknown surface kind '" + std::string(*kind) + "'");

    s.vertex_z = number("vertex_z");
    s.semi_aperture = number("semi_aperture");
    if (s.kind == SurfaceKind::SphericalRefractor) {
        s.radius = number("radius");
    } else if (auto r = take("radius")) {
        s.radius = parse_number(*r, line, "radius");
    }
    if (auto n = take("index_after")) {
        s.index_after = parse_number(*n, line, "index_after");
    } else if (s.kind != SurfaceKind::Stop) {
        bad_line(line, "missing field index_after");
    }
    if (!fields.empty()) bad_line(line, "unknown field " + fields.begin()->first);
    return s;
}

const char* kind_name(SurfaceKind kind) {
    switch (kind) {
        case SurfaceKind::SphericalRefractor: return "spherical";
        case SurfaceKind::PlanarRefractor: return "planar";
        case SurfaceKind::Stop: return "stop";
    }
    return "?";
}

}  // namespace

OpticalSystem parse_prescription(std::string_view text) {
    OpticalSystem system;
    bool have_index = false;
    bool have_source = false;
    bool have_target = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.starts_with("surface") && (line.size() == 7 || line[7] == ' ' || line[7] == '\t')) {
            system.surfaces.push_back(parse_surface(line.substr(7), line_no));
            continue;
        }
        auto [key, value] = split_pair(line, line_no);
        auto once = [&](bool& seen) {
            if (seen) bad_line(line_no, "duplicate header key '" + std::string(key) + "'");
            seen = true;
            return parse_number(value, line_no, key);
        };
        if (key == "index_before") system.index_before_first = once(have_index);
        else if (key == "source_z") system.source_z = once(have_source);
        else if (key == "target_z") system.target_z = once(have_target);
        else bad_line(line_no, "unknown header key '" + std::string(key) + "'");
    }
    if (!have_source) bad_line(line_no, "missing source_z");
    if (!have_target) bad_line(line_no, "missing target_z");
    try {
        system.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(FormatError::Kind::BadRecord, line_no, std::string("invalid prescription: ") + e.what());
    }
    return system;
}

std::string format_prescription(const OpticalSystem& system) {
    std::ostringstream out;
    out << "index_before=" << format_double(system.index_before_first) << '\n';
    out << "source_z=" << format_double(system.source_z) << '\n';
    out << "target_z=" << format_double(system.target_z) << '\n';
    for (const Surface& s : system.surfaces) {
        out << "surface kind=" << kind_name(s.kind) << " vertex_z=" << format_double(s.vertex_z);
        if (s.is_curved()) out << " radius=" << format_double(s.radius);
        out << " semi_aperture=" << format_double(s.semi_aperture)
            << " index_after=" << format_double(s.index_after) << '\n';
    }
    return out.str();
}

OpticalSystem load_prescription(const std::filesystem::path& path) {
    return parse_prescription(read_file(path));
}

void save_prescription(const OpticalSystem& system, const std::filesystem::path& path) {
    write_file_atomic(path, format_prescription(system));
}

}  // namespace lensproxy
