#include "lensproxy/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "lensproxy/io.hpp"
#include "lensproxy/parallel.hpp"
#include "lensproxy/rng.hpp"

namespace lensproxy {

void SourceGrid::validate() const {
    if (!(extent > 0.0)) throw std::invalid_argument("grid extent must be > 0");
    if (cells_per_side < 1) throw std::invalid_argument("grid needs at least one cell per side");
}

Vec2 cell_center(const SourceGrid& grid, std::uint32_t id) {
    const std::uint32_t row = id / grid.cells_per_side;
    const std::uint32_t col = id % grid.cells_per_side;
    const double pitch = grid.pitch();
    const double half = 0.5 * grid.extent;
    return {grid.center.x - half + (col + 0.5) * pitch, grid.center.y - half + (row + 0.5) * pitch};
}

std::vector<CellCenter> cell_centers(const SourceGrid& grid) {
    grid.validate();
    std::vector<CellCenter> out;
    out.reserve(grid.cell_count());
    for (std::uint32_t id = 0; id < grid.cell_count(); ++id) out.push_back({id, cell_center(grid, id)});
    return out;
}

Vec3 reconstruct_direction(Vec2 t) {
    const double s = t.x * t.x + t.y * t.y;
    if (!(s < 1.0)) throw std::domain_error("transverse direction has norm >= 1");
    return {t.x, t.y, std::sqrt(1.0 - s)};
}

EntranceDisk entrance_disk(const OpticalSystem& system) {
    if (system.surfaces.empty())
        throw std::invalid_argument("system has no first surface to sample an entrance aperture from");
    const Surface& first = system.surfaces.front();
    return {first.vertex_z, first.semi_aperture};
}

Vec2 concentric_disk(double u, double v) {
    const double a = 2.0 * u - 1.0;
    const double b = 2.0 * v - 1.0;
    if (a == 0.0 && b == 0.0) return {};
    constexpr double quarter = std::numbers::pi / 4.0;
    double r, phi;
    if (std::abs(a) > std::abs(b)) {
        r = a;
        phi = quarter * (b / a);
    } else {
        r = b;
        phi = 2.0 * quarter - quarter * (a / b);
    }
    return {r * std::cos(phi), r * std::sin(phi)};
}

std::vector<Vec2> sample_disk_points(const EntranceDisk& disk, std::size_t count, std::uint64_t seed,
                                     std::uint64_t stream) {
    if (!(disk.radius > 0.0)) throw std::invalid_argument("entrance disk has no aperture");
    CounterRng rng(seed, stream, rng_domain::directions);
    std::vector<Vec2> points;
    points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double u = rng.uniform();
        const double v = rng.uniform();
        points.push_back(disk.radius * concentric_disk(u, v));
    }
    return points;
}

std::vector<Vec3> sample_directions(Vec2 origin, double source_z, const EntranceDisk& disk,
                                    std::size_t count, std::uint64_t seed, std::uint64_t stream) {
    if (count < 1) throw std::invalid_argument("direction count must be >= 1");
    const Vec3 from{origin.x, origin.y, source_z};
    std::vector<Vec3> dirs;
    dirs.reserve(count);
    for (Vec2 p : sample_disk_points(disk, count, seed, stream))
        dirs.push_back(normalize(Vec3{p.x, p.y, disk.z} - from));
    return dirs;
}

std::vector<Vec3> sample_directions(Vec2 origin, const OpticalSystem& system, std::size_t count,
                                    std::uint64_t seed, std::uint64_t stream) {
    return sample_directions(origin, system.source_z, entrance_disk(system), count, seed, stream);
}

std::optional<RaySample> trace_sample(const OpticalSystem& system, Vec2 p_i, Vec3 d_i,
                                      std::uint32_t cell_id) {
    const TraceOutcome result = trace({{p_i.x, p_i.y, system.source_z}, d_i}, system);
    const Ray3* out = emerged_ray(result);
    if (!out || !(out->direction.z > 1e-9)) return std::nullopt;
    RaySample s;
    s.cell_id = cell_id;
    s.p_i = p_i;
    s.d_i = {d_i.x, d_i.y};
    s.p_o = propagate_to_plane(*out, system.target_z);
    s.d_o = {out->direction.x, out->direction.y};
    return s;
}

std::uint64_t GenerationReport::total_sampled() const {
    std::uint64_t n = 0;
    for (const auto& c : cells) n += c.sampled;
    return n;
}

std::uint64_t GenerationReport::total_kept() const {
    std::uint64_t n = 0;
    for (const auto& c : cells) n += c.kept;
    return n;
}

std::string GenerationReport::to_text() const {
    std::uint64_t vig = 0, tir = 0, miss = 0;
    for (const auto& c : cells) {
        vig += c.vignetted;
        tir += c.total_internal_reflection;
        miss += c.missed;
    }
    std::ostringstream out;
    out << "cells " << cells.size() << "\n"
        << "sampled " << total_sampled() << "\n"
        << "kept " << total_kept() << "\n"
        << "dropped_vignetted " << vig << "\n"
        << "dropped_tir " << tir << "\n"
        << "dropped_missed " << miss << "\n"
        << "\n# cell_id sampled kept vignetted tir missed\n";
    for (const auto& c : cells)
        out << c.cell_id << ' ' << c.sampled << ' ' << c.kept << ' ' << c.vignetted << ' '
            << c.total_internal_reflection << ' ' << c.missed << '\n';
    return out.str();
}

GenerationResult generate(const OpticalSystem& system, const SourceGrid& grid,
                          std::uint32_t rays_per_cell, std::uint64_t seed, const GenerateOptions& options) {
    grid.validate();
    system.validate();
    if (rays_per_cell < 1) throw std::invalid_argument("rays_per_cell must be >= 1");
    const EntranceDisk disk = options.entrance ? *options.entrance : entrance_disk(system);

    const auto centers = cell_centers(grid);
    std::vector<std::vector<RaySample>> per_cell(centers.size());
    std::vector<CellReport> reports(centers.size());

    parallel_for(centers.size(), options.threads, [&](std::size_t k) {
        const CellCenter& cell = centers[k];
        CellReport& rep = reports[k];
        rep.cell_id = cell.id;
        auto& out = per_cell[k];
        out.reserve(rays_per_cell);
        const Vec3 origin{cell.position.x, cell.position.y, system.source_z};
        for (const Vec3& d : sample_directions(cell.position, system.source_z, disk, rays_per_cell, seed, cell.id)) {
            ++rep.sampled;
            const TraceOutcome result = trace({origin, d}, system);
            std::visit(
                [&](const auto& o) {
                    using T = std::decay_t<decltype(o)>;
                    if constexpr (std::is_same_v<T, outcome::Emerged>) {
                        RaySample s;
                        s.cell_id = cell.id;
                        s.p_i = cell.position;
                        s.d_i = {d.x, d.y};
                        s.p_o = propagate_to_plane(o.ray, system.target_z);
                        s.d_o = {o.ray.direction.x, o.ray.direction.y};
                        out.push_back(s);
                        ++rep.kept;
                    } else if constexpr (std::is_same_v<T, outcome::Vignetted>) {
                        ++rep.vignetted;
                    } else if constexpr (std::is_same_v<T, outcome::TotalInternalReflection>) {
                        ++rep.total_internal_reflection;
                    } else {
                        ++rep.missed;
                    }
                },
                result);
        }
    });

    GenerationResult result;
    result.dataset.grid = grid;
    for (std::size_t k = 0; k < centers.size(); ++k) {
        if (reports[k].kept == 0)
            throw std::runtime_error("cell " + std::to_string(centers[k].id) +
                                     " produced no emerging rays; source geometry does not fit the system");
        result.dataset.records.insert(result.dataset.records.end(), per_cell[k].begin(), per_cell[k].end());
    }
    result.report.cells = std::move(reports);
    return result;
}

bool DatasetSplit::is_test(std::uint32_t cell) const {
    return std::binary_search(test_cells.begin(), test_cells.end(), cell);
}

bool DatasetSplit::is_train(std::uint32_t cell) const {
    return std::binary_search(train_cells.begin(), train_cells.end(), cell);
}

DatasetSplit split_cells(const SourceGrid& grid, double fraction, std::uint64_t seed) {
    grid.validate();
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split fraction must lie in (0, 1)");
    const std::uint32_t n = grid.cell_count();
    const auto n_train = static_cast<std::uint32_t>(std::llround(fraction * n));
    if (n_train == 0 || n_train == n)
        throw std::invalid_argument("split leaves the train or the test side empty");

    std::vector<std::uint32_t> ids(n);
    for (std::uint32_t i = 0; i < n; ++i) ids[i] = i;
    CounterRng rng(seed, 0, rng_domain::split);
    for (std::uint32_t i = n - 1; i > 0; --i) std::swap(ids[i], ids[rng.below(i + 1)]);

    DatasetSplit split;
    split.seed = seed;
    split.train_cells.assign(ids.begin(), ids.begin() + n_train);
    split.test_cells.assign(ids.begin() + n_train, ids.end());
    std::sort(split.train_cells.begin(), split.train_cells.end());
    std::sort(split.test_cells.begin(), split.test_cells.end());
    return split;
}

std::vector<RaySample> select_cells(const std::vector<RaySample>& records,
                                    const std::vector<std::uint32_t>& sorted_cells) {
    std::vector<RaySample> out;
    for (const auto& r : records)
        if (std::binary_search(sorted_cells.begin(), sorted_cells.end(), r.cell_id)) out.push_back(r);
    return out;
}

namespace {

constexpr char kMagic[4] = {'R', '2', 'R', 'D'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kRecordBytes = 4 + 8 * 8;
constexpr const char* kCsvHeader = "cell_id,pix,piy,dix,diy,pox,poy,dox,doy";

}  // namespace

std::string encode_binary(const Dataset& dataset) {
    ByteWriter w;
    w.put_bytes(std::string_view(kMagic, 4));
    w.put<std::uint16_t>(kVersion);
    w.put<std::uint64_t>(dataset.records.size());
    w.put<double>(dataset.grid.extent);
    w.put<std::int64_t>(dataset.grid.cells_per_side);
    for (const auto& r : dataset.records) {
        w.put<std::uint32_t>(r.cell_id);
        for (double v : {r.p_i.x, r.p_i.y, r.d_i.x, r.d_i.y, r.p_o.x, r.p_o.y, r.d_o.x, r.d_o.y}) w.put<double>(v);
    }
    return w.bytes();
}

Dataset decode_binary(std::string_view bytes) {
    ByteReader r(bytes);
    if (r.get_bytes(4, "magic") != std::string_view(kMagic, 4))
        throw FormatError(FormatError::Kind::MalformedHeader, 0, "not a ray dataset: bad magic at byte 0");
    const auto version_at = r.offset();
    const auto version = r.get<std::uint16_t>("version");
    if (version != kVersion)
        throw FormatError(FormatError::Kind::VersionMismatch, version_at,
                          "unsupported dataset version " + std::to_string(version) + " at byte " +
                              std::to_string(version_at));
    const auto count = r.get<std::uint64_t>("record count");
    Dataset d;
    d.grid.extent = r.get<double>("grid extent");
    const auto header_end = r.offset();
    const auto cells = r.get<std::int64_t>("cells per side");
    if (cells < 1 || cells > 0xffff || !(d.grid.extent > 0.0))
        throw FormatError(FormatError::Kind::MalformedHeader, header_end, "invalid grid metadata in header");
    d.grid.cells_per_side = static_cast<std::uint32_t>(cells);

    if (r.remaining() / kRecordBytes < count)
        throw FormatError(FormatError::Kind::Truncated, r.offset() + (r.remaining() / kRecordBytes) * kRecordBytes,
                          "truncated record " + std::to_string(r.remaining() / kRecordBytes) + " of " +
                              std::to_string(count) + " at byte " +
                              std::to_string(r.offset() + (r.remaining() / kRecordBytes) * kRecordBytes));
    d.records.resize(count);
    for (auto& rec : d.records) {
        rec.cell_id = r.get<std::uint32_t>("cell id");
        for (double* v : {&rec.p_i.x, &rec.p_i.y, &rec.d_i.x, &rec.d_i.y, &rec.p_o.x, &rec.p_o.y, &rec.d_o.x,
                          &rec.d_o.y})
            *v = r.get<double>("record field");
    }
    if (r.remaining() != 0)
        throw FormatError(FormatError::Kind::MalformedHeader, r.offset(),
                          "trailing bytes after the last record at byte " + std::to_string(r.offset()));
    return d;
}

std::string encode_csv(const std::vector<RaySample>& records) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const auto& r : records) {
        out += std::to_string(r.cell_id);
        for (double v : {r.p_i.x, r.p_i.y, r.d_i.x, r.d_i.y, r.p_o.x, r.p_o.y, r.d_o.x, r.d_o.y}) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

std::vector<RaySample> decode_csv(std::string_view text) {
    std::vector<RaySample> records;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (!header_seen) {
            if (line != kCsvHeader)
                throw FormatError(FormatError::Kind::MalformedHeader, line_no,
                                  "line 1: expected header '" + std::string(kCsvHeader) + "'");
            header_seen = true;
            continue;
        }
        if (line.empty()) continue;

        std::vector<std::string_view> cols;
        for (std::size_t start = 0;;) {
            auto comma = line.find(',', start);
            cols.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (cols.size() != 9)
            throw FormatError(FormatError::Kind::BadRecord, line_no,
                              "line " + std::to_string(line_no) + ": expected 9 columns, found " +
                                  std::to_string(cols.size()));
        RaySample rec;
        auto bad = [&](std::string_view col) {
            return FormatError(FormatError::Kind::BadRecord, line_no,
                               "line " + std::to_string(line_no) + ": invalid value '" + std::string(col) + "'");
        };
        {
            auto [p, ec] = std::from_chars(cols[0].data(), cols[0].data() + cols[0].size(), rec.cell_id);
            if (ec != std::errc() || p != cols[0].data() + cols[0].size()) throw bad(cols[0]);
        }
        double* fields[] = {&rec.p_i.x, &rec.p_i.y, &rec.d_i.x, &rec.d_i.y,
                            &rec.p_o.x, &rec.p_o.y, &rec.d_o.x, &rec.d_o.y};
        for (int k = 0; k < 8; ++k) {
            const auto col = cols[k + 1];
            auto [p, ec] = std::from_chars(col.data(), col.data() + col.size(), *fields[k]);
            if (ec != std::errc() || p != col.data() + col.size()) throw bad(col);
        }
        records.push_back(rec);
    }
    if (!header_seen) throw FormatError(FormatError::Kind::MalformedHeader, 1, "line 1: missing CSV header");
    return records;
}

DatasetFormat format_for(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? DatasetFormat::Csv : DatasetFormat::Binary;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DatasetFormat format) {
    write_file_atomic(path, format == DatasetFormat::Binary ? encode_binary(dataset) : encode_csv(dataset.records));
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    const std::string bytes = read_file(path);
    if (format == DatasetFormat::Binary) return decode_binary(bytes);
    Dataset d;
    d.records = decode_csv(bytes);
    d.grid.cells_per_side = 0;
    return d;
}

}  // namespace lensproxy
