#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <stdexcept>

#include "lensproxy/dataset.hpp"
#include "lensproxy/io.hpp"
#include "support.hpp"

using namespace lensproxy;
namespace fs = std::filesystem;

namespace {

SourceGrid grid_of(std::uint32_t cells, double extent = 12.0) {
    SourceGrid g;
    g.cells_per_side = cells;
    g.extent = extent;
    return g;
}

const GenerationResult& small_run() {
    static const GenerationResult result = generate(design_singlet({}), grid_of(4), 64, 5);
    return result;
}

}  // namespace

TEST_CASE("cell centers") {
    const auto centers = cell_centers(grid_of(24));
    REQUIRE(centers.size() == 576);
    CHECK(grid_of(24).pitch() == 0.5);
    CHECK(centers.front().position == Vec2{-5.75, -5.75});
    CHECK(centers.back().position == Vec2{5.75, 5.75});
    CHECK(centers[1].position == Vec2{-5.25, -5.75});
    CHECK(centers[24].position == Vec2{-5.75, -5.25});

    const auto single = cell_centers(grid_of(1));
    REQUIRE(single.size() == 1);
    CHECK(single[0].position == Vec2{0, 0});

    SourceGrid shifted = grid_of(2, 2.0);
    shifted.center = {10, -10};
    CHECK(cell_center(shifted, 3) == Vec2{10.5, -9.5});

    CHECK_THROWS_AS(cell_centers(grid_of(0)), std::invalid_argument);
    CHECK_THROWS_AS(cell_centers(grid_of(4, 0.0)), std::invalid_argument);
}

TEST_CASE("concentric map sends the square onto the unit disk") {
    testing::Gen g(31);
    for (int i = 0; i < 10000; ++i) CHECK(norm(concentric_disk(g.uniform(0, 1), g.uniform(0, 1))) <= 1.0 + 1e-15);
    CHECK(concentric_disk(0.5, 0.5) == Vec2{0, 0});
    CHECK(norm(concentric_disk(1.0, 0.5)) == doctest::Approx(1.0));
}

TEST_CASE("disk samples follow the uniform radial law") {
    const EntranceDisk disk{0.0, 25.3};
    const std::size_t n = 1'000'000;
    const auto points = sample_disk_points(disk, n, 1, 0);
    std::vector<double> r2(n);
    for (std::size_t i = 0; i < n; ++i) r2[i] = (points[i].x * points[i].x + points[i].y * points[i].y) /
                                                (disk.radius * disk.radius);
    std::sort(r2.begin(), r2.end());
    // Kolmogorov-Smirnov distance against F(r) = r^2 / R^2, i.e. r2 ~ U(0, 1).
    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
        ks = std::max({ks, std::abs(r2[i] - lo), std::abs(hi - r2[i])});
    }
    CHECK(ks < 0.002);
    CHECK(r2.back() <= 1.0);

    // Angular uniformity: quadrant counts within 5 sigma.
    std::array<std::size_t, 4> quadrant{};
    for (const Vec2 p : points) ++quadrant[(p.x >= 0 ? 1 : 0) + (p.y >= 0 ? 2 : 0)];
    for (std::size_t q : quadrant) CHECK(std::abs(static_cast<double>(q) - n / 4.0) < 5 * std::sqrt(n * 3.0 / 16));
}

TEST_CASE("direction sampling") {
    const OpticalSystem lens = design_singlet({});
    const auto a = sample_directions({1, 2}, lens, 1000, 9, 3);
    const auto b = sample_directions({1, 2}, lens, 1000, 9, 3);
    REQUIRE(a.size() == 1000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == b[i]);
        CHECK(std::abs(norm(a[i]) - 1.0) < 1e-14);
        CHECK(a[i].z > 0);
        // Every direction lands inside the entrance disk.
        const double t = (lens.surfaces[0].vertex_z - lens.source_z) / a[i].z;
        const Vec2 hit{1 + t * a[i].x, 2 + t * a[i].y};
        CHECK(norm(hit) <= 25.3 + 1e-9);
    }
    CHECK_FALSE(sample_directions({1, 2}, lens, 10, 10, 3)[0] == a[0]);
    CHECK_FALSE(sample_directions({1, 2}, lens, 10, 9, 4)[0] == a[0]);

    // An on-axis origin aimed at the disk center points along the axis.
    const auto axial = sample_directions({0, 0}, -100.0, EntranceDisk{0.0, 1e-300}, 1, 0, 0);
    CHECK(axial[0].z == 1.0);

    CHECK_THROWS_AS(sample_directions({0, 0}, OpticalSystem{}, 10, 0, 0), std::invalid_argument);
}

TEST_CASE("generated records satisfy the record invariants") {
    const auto& run = small_run();
    const SourceGrid grid = grid_of(4);
    const OpticalSystem lens = design_singlet({});
    CHECK(run.report.total_sampled() == 16 * 64);
    CHECK(run.report.total_kept() == run.dataset.records.size());
    for (const auto& c : run.report.cells) CHECK(c.sampled == c.kept + c.vignetted + c.total_internal_reflection + c.missed);

    double worst_p = 0.0, worst_d = 0.0;
    for (const RaySample& r : run.dataset.records) {
        CHECK(r.p_i == cell_center(grid, r.cell_id));
        CHECK(r.d_i.x * r.d_i.x + r.d_i.y * r.d_i.y < 1.0);
        CHECK(r.d_o.x * r.d_o.x + r.d_o.y * r.d_o.y < 1.0);
        const auto again = trace_sample(lens, r.p_i, reconstruct_direction(r.d_i), r.cell_id);
        REQUIRE(again);
        worst_p = std::max(worst_p, norm(again->p_o - r.p_o));
        worst_d = std::max({worst_d, std::abs(again->d_o.x - r.d_o.x), std::abs(again->d_o.y - r.d_o.y)});
    }
    CHECK(worst_p < 1e-10);
    CHECK(worst_d < 1e-12);
}

TEST_CASE("generation does not depend on the worker count") {
    const OpticalSystem lens = design_singlet({});
    GenerateOptions one, many;
    one.threads = 1;
    many.threads = 4;
    const auto a = generate(lens, grid_of(5), 50, 77, one);
    const auto b = generate(lens, grid_of(5), 50, 77, many);
    CHECK(encode_binary(a.dataset) == encode_binary(b.dataset));
    CHECK(a.report.to_text() == b.report.to_text());
}

TEST_CASE("empty system at zero distance is the identity") {
    OpticalSystem empty;
    empty.source_z = 0.0;
    empty.target_z = 0.0;
    GenerateOptions options;
    options.entrance = EntranceDisk{10.0, 3.0};
    const auto run = generate(empty, grid_of(3), 20, 1, options);
    REQUIRE(run.dataset.records.size() == 9 * 20);
    for (const auto& r : run.dataset.records) {
        CHECK(r.p_o == r.p_i);
        CHECK(r.d_o == r.d_i);
    }
}

TEST_CASE("axial cell spot is centered within Monte Carlo error") {
    const OpticalSystem lens = design_singlet({});
    const auto run = generate(lens, grid_of(1), 20000, 3);
    const auto& recs = run.dataset.records;
    const double n = static_cast<double>(recs.size());
    double mx = 0, my = 0, sx = 0, sy = 0;
    for (const auto& r : recs) mx += r.p_o.x / n, my += r.p_o.y / n;
    for (const auto& r : recs) sx += (r.p_o.x - mx) * (r.p_o.x - mx), sy += (r.p_o.y - my) * (r.p_o.y - my);
    const double se_x = std::sqrt(sx / (n - 1) / n), se_y = std::sqrt(sy / (n - 1) / n);
    CHECK(std::abs(mx) < 3 * se_x);
    CHECK(std::abs(my) < 3 * se_y);
}

TEST_CASE("cell split") {
    const auto split = split_cells(grid_of(24), 0.8, 42);
    CHECK(split.train_cells.size() == 461);
    CHECK(split.test_cells.size() == 115);
    std::set<std::uint32_t> all(split.train_cells.begin(), split.train_cells.end());
    for (auto c : split.test_cells) {
        CHECK_FALSE(split.is_train(c));
        CHECK(split.is_test(c));
        all.insert(c);
    }
    CHECK(all.size() == 576);
    CHECK(std::is_sorted(split.train_cells.begin(), split.train_cells.end()));

    const auto again = split_cells(grid_of(24), 0.8, 42);
    CHECK(again.train_cells == split.train_cells);
    CHECK(split_cells(grid_of(24), 0.8, 43).train_cells != split.train_cells);
}

TEST_CASE("half split of a 2x2 grid") {
    const auto split = split_cells(grid_of(2), 0.5, 0);
    CHECK(split.train_cells.size() == 2);
    CHECK(split.test_cells.size() == 2);
}

TEST_CASE("degenerate splits are rejected") {
    CHECK_THROWS_AS(split_cells(grid_of(1), 0.8, 0), std::invalid_argument);
    CHECK_THROWS_AS(split_cells(grid_of(4), 0.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(split_cells(grid_of(4), 1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(split_cells(grid_of(4), 0.99, 0), std::invalid_argument);
}

TEST_CASE("binary round trip is bit exact") {
    const auto& run = small_run();
    const Dataset back = decode_binary(encode_binary(run.dataset));
    CHECK(back.records == run.dataset.records);
    CHECK(back.grid.extent == 12.0);
    CHECK(back.grid.cells_per_side == 4);

    const fs::path dir = fs::temp_directory_path() / "lensproxy_test_dataset";
    fs::remove_all(dir);
    save_dataset(run.dataset, dir / "d.r2rd", DatasetFormat::Binary);
    CHECK(load_dataset(dir / "d.r2rd", DatasetFormat::Binary).records == run.dataset.records);
    save_dataset(run.dataset, dir / "d.csv", format_for(dir / "d.csv"));
    CHECK(load_dataset(dir / "d.csv", DatasetFormat::Csv).records == run.dataset.records);
    fs::remove_all(dir);
}

TEST_CASE("empty datasets are valid files") {
    Dataset empty;
    const std::string bytes = encode_binary(empty);
    CHECK(bytes.size() == 4 + 2 + 8 + 8 + 8);
    CHECK(decode_binary(bytes).records.empty());
    CHECK(decode_csv(encode_csv({})).empty());
}

TEST_CASE("binary decoding errors") {
    const std::string good = encode_binary(small_run().dataset);
    auto kind_of = [](const std::string& bytes) {
        try {
            decode_binary(bytes);
        } catch (const FormatError& e) {
            return e.kind();
        }
        return FormatError::Kind::Io;
    };
    std::string bad_magic = good;
    bad_magic[0] = 'X';
    CHECK(kind_of(bad_magic) == FormatError::Kind::MalformedHeader);
    std::string bad_version = good;
    bad_version[4] = 2;
    CHECK(kind_of(bad_version) == FormatError::Kind::VersionMismatch);
    CHECK(kind_of(good.substr(0, good.size() - 3)) == FormatError::Kind::Truncated);
    CHECK(kind_of(good + "xx") != FormatError::Kind::Io);
}

TEST_CASE("csv errors name the line") {
    std::string csv = encode_csv(small_run().dataset.records);
    // Drop the last column of the sixth record, which sits on line 7.
    std::size_t pos = 0;
    for (int i = 0; i < 6; ++i) pos = csv.find('\n', pos) + 1;
    const std::size_t eol = csv.find('\n', pos);
    const std::size_t comma = csv.rfind(',', eol);
    csv.erase(comma, eol - comma);
    try {
        decode_csv(csv);
        FAIL("expected a parse error");
    } catch (const FormatError& e) {
        CHECK(e.position() == 7);
        CHECK(std::string(e.what()).find("line 7") != std::string::npos);
    }
    CHECK_THROWS_AS(decode_csv("wrong,header\n"), FormatError);
    CHECK_THROWS_AS(decode_csv(""), FormatError);
}

TEST_CASE("reconstructed directions") {
    CHECK(reconstruct_direction({0, 0}) == Vec3{0, 0, 1});
    CHECK(reconstruct_direction({0.6, 0}).z == doctest::Approx(0.8));
    CHECK_THROWS_AS(reconstruct_direction({1, 0}), std::domain_error);
}
