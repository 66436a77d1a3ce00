#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lensproxy/optics.hpp"
#include "lensproxy/vec.hpp"

namespace lensproxy {

/// Square source on the source plane, split into cells_per_side^2 cells.
struct SourceGrid {
    double extent = 12.0;
    std::uint32_t cells_per_side = 24;
    Vec2 center{};

    double pitch() const { return extent / cells_per_side; }
    std::uint32_t cell_count() const { return cells_per_side * cells_per_side; }
    void validate() const;
};

struct CellCenter {
    std::uint32_t id;
    Vec2 position;
};

/// Row-major: id = row * cells_per_side + column, x follows the column.
std::vector<CellCenter> cell_centers(const SourceGrid& grid);
Vec2 cell_center(const SourceGrid& grid, std::uint32_t id);

/// One training pair. Directions keep only their transverse components; the
/// axial component is +sqrt(1 - x^2 - y^2).
struct RaySample {
    std::uint32_t cell_id = 0;
    Vec2 p_i;
    Vec2 d_i;
    Vec2 p_o;
    Vec2 d_o;

    friend bool operator==(const RaySample&, const RaySample&) = default;
};

/// Forward unit direction from its transverse components.
/// Throws std::domain_error when x^2 + y^2 >= 1.
Vec3 reconstruct_direction(Vec2 transverse);

/// Disk that sampled directions aim at, perpendicular to the axis.
struct EntranceDisk {
    double z = 0.0;
    double radius = 0.0;
};

/// The first surface's clear aperture on its vertex plane.
/// Throws std::invalid_argument for a system without surfaces.
EntranceDisk entrance_disk(const OpticalSystem& system);

/// Shirley's concentric square-to-disk map of a point in [0,1)^2.
Vec2 concentric_disk(double u, double v);

/// `count` points uniformly distributed on the disk, drawn from the stream keyed
/// by (seed, stream).
std::vector<Vec2> sample_disk_points(const EntranceDisk& disk, std::size_t count,
                                     std::uint64_t seed, std::uint64_t stream);

/// Unit directions from `origin` on the source plane toward uniform points of the
/// entrance disk. Deterministic in (seed, stream, origin, count).
std::vector<Vec3> sample_directions(Vec2 origin, double source_z, const EntranceDisk& disk,
                                    std::size_t count, std::uint64_t seed, std::uint64_t stream);

std::vector<Vec3> sample_directions(Vec2 origin, const OpticalSystem& system, std::size_t count,
                                    std::uint64_t seed, std::uint64_t stream);

struct CellReport {
    std::uint32_t cell_id = 0;
    std::uint64_t sampled = 0;
    std::uint64_t kept = 0;
    std::uint64_t vignetted = 0;
    std::uint64_t total_internal_reflection = 0;
    std::uint64_t missed = 0;
};

struct GenerationReport {
    std::vector<CellReport> cells;

    std::uint64_t total_sampled() const;
    std::uint64_t total_kept() const;
    std::string to_text() const;
};

struct Dataset {
    SourceGrid grid;
    std::vector<RaySample> records;
};

struct GenerateOptions {
    unsigned threads = 1;
    /// Replaces the first-surface aperture as the sampling target.
    std::optional<EntranceDisk> entrance;
};

struct GenerationResult {
    Dataset dataset;
    GenerationReport report;
};

/// Samples, traces and records rays for every cell. Rays that do not emerge are
/// dropped and counted. Throws std::runtime_error if a cell keeps no ray.
GenerationResult generate(const OpticalSystem& system, const SourceGrid& grid,
                          std::uint32_t rays_per_cell, std::uint64_t seed,
                          const GenerateOptions& options = {});

/// Exact ground truth for one input ray, or nullopt when it does not emerge.
std::optional<RaySample> trace_sample(const OpticalSystem& system, Vec2 p_i, Vec3 d_i,
                                      std::uint32_t cell_id = 0);

struct DatasetSplit {
    std::vector<std::uint32_t> train_cells;  ///< sorted
    std::vector<std::uint32_t> test_cells;   ///< sorted
    std::uint64_t seed = 0;

    bool is_test(std::uint32_t cell) const;
    bool is_train(std::uint32_t cell) const;
};

/// Seeded permutation of the cells; the first round(fraction * N) train.
DatasetSplit split_cells(const SourceGrid& grid, double fraction, std::uint64_t seed);

std::vector<RaySample> select_cells(const std::vector<RaySample>& records,
                                    const std::vector<std::uint32_t>& sorted_cells);

enum class DatasetFormat { Binary, Csv };

/// Binary layout (little-endian): "R2RD", u16 version = 1, u64 count,
/// f64 extent, i64 cells_per_side, then per record u32 cell_id and eight f64
/// (p_i, d_i, p_o, d_o).
std::string encode_binary(const Dataset& dataset);
Dataset decode_binary(std::string_view bytes);

/// CSV with header `cell_id,pix,piy,dix,diy,pox,poy,dox,doy`. Grid metadata is
/// not stored; a dataset loaded from CSV reports cells_per_side = 0.
std::string encode_csv(const std::vector<RaySample>& records);
std::vector<RaySample> decode_csv(std::string_view text);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DatasetFormat format);
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);

/// Picks the format from the extension: ".csv" is CSV, anything else binary.
DatasetFormat format_for(const std::filesystem::path& path);

}  // namespace lensproxy
