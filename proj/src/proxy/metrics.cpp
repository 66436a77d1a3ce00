#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "lensproxy/io.hpp"
#include "lensproxy/parallel.hpp"
#include "lensproxy/proxy.hpp"

namespace lensproxy {

nn::Matrix<double> input_features(const std::vector<RaySample>& records) {
    nn::Matrix<double> m(records.size(), 4);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const RaySample& r = records[i];
        m(i, 0) = r.p_i.x;
        m(i, 1) = r.p_i.y;
        m(i, 2) = r.d_i.x;
        m(i, 3) = r.d_i.y;
    }
    return m;
}

nn::Matrix<double> output_features(const std::vector<RaySample>& records) {
    nn::Matrix<double> m(records.size(), 4);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const RaySample& r = records[i];
        m(i, 0) = r.p_o.x;
        m(i, 1) = r.p_o.y;
        m(i, 2) = r.d_o.x;
        m(i, 3) = r.d_o.y;
    }
    return m;
}

NormalizationPair fit_normalization(const std::vector<RaySample>& training_records) {
    if (training_records.empty()) throw std::invalid_argument("cannot fit normalization without training records");
    return {nn::Normalization::fit(input_features(training_records)),
            nn::Normalization::fit(output_features(training_records))};
}

nn::Matrix<double> predict(const Params& params, const nn::Matrix<double>& inputs, unsigned threads) {
    constexpr std::size_t chunk = 4096;
    const std::size_t cols = params.config.output_dim;
    nn::Matrix<double> out(inputs.rows(), cols);
    const std::size_t chunks = (inputs.rows() + chunk - 1) / chunk;
    parallel_for(chunks, threads, [&](std::size_t k) {
        const std::size_t r0 = k * chunk;
        const std::size_t rows = std::min(chunk, inputs.rows() - r0);
        nn::Matrix<double> part(rows, inputs.cols());
        std::copy_n(inputs.data() + r0 * inputs.cols(), rows * inputs.cols(), part.data());
        const nn::Matrix<double> y = nn::forward(params, part, chunk);
        std::copy_n(y.data(), rows * cols, out.data() + r0 * cols);
    });
    return out;
}

ErrorStats summarize(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("no values to summarize");
    std::sort(values.begin(), values.end());
    ErrorStats s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return values[lo] + frac * (values[hi] - values[lo]);
    };
    s.median = quantile(0.5);
    s.p95 = quantile(0.95);
    return s;
}

namespace {

// Half-angle form: symmetric in (u, v), exactly zero for identical inputs, accurate at small angles.
double angle_deg(Vec3 u, Vec3 v) { return 2.0 * std::atan2(norm(u - v), norm(u + v)) * (180.0 / std::numbers::pi); }

// Predictions are not guaranteed to be reconstructible; project them onto the
// closed unit disk so the angle stays defined.
Vec3 clamped_direction(Vec2 t) {
    const double s = t.x * t.x + t.y * t.y;
    if (s < 1.0) return {t.x, t.y, std::sqrt(1.0 - s)};
    const double r = std::sqrt(s);
    return {t.x / r, t.y / r, 0.0};
}

}  // namespace

double angular_error_deg(Vec2 a, Vec2 b) { return angle_deg(reconstruct_direction(a), reconstruct_direction(b)); }

EvalReport compare_outputs(const nn::Matrix<double>& predicted, const nn::Matrix<double>& truth,
                           const std::string& condition) {
    if (predicted.rows() != truth.rows() || predicted.cols() != 4 || truth.cols() != 4)
        throw std::invalid_argument("prediction and truth must both be N x 4");
    if (truth.rows() == 0) throw std::invalid_argument("no rays to evaluate");
    std::vector<double> pos(truth.rows()), ang(truth.rows());
    for (std::size_t i = 0; i < truth.rows(); ++i) {
        pos[i] = std::hypot(predicted(i, 0) - truth(i, 0), predicted(i, 1) - truth(i, 1)) * 1000.0;
        const Vec2 t{truth(i, 2), truth(i, 3)};
        if (!(t.x * t.x + t.y * t.y < 1.0))
            throw std::domain_error("record " + std::to_string(i) + ": direction is not a forward unit vector");
        const Vec3 u = clamped_direction({predicted(i, 2), predicted(i, 3)});
        const Vec3 v = reconstruct_direction(t);
        ang[i] = angle_deg(u, v);
    }
    EvalReport report;
    report.condition = condition;
    report.n_rays = truth.rows();
    report.pos_error_um = summarize(std::move(pos));
    report.ang_error_deg = summarize(std::move(ang));
    return report;
}

EvalReport evaluate(const Params& params, const std::vector<RaySample>& records, const std::string& condition,
                    unsigned threads) {
    if (records.empty()) throw std::invalid_argument("no records to evaluate");
    return compare_outputs(predict(params, input_features(records), threads), output_features(records), condition);
}

std::string eval_csv_header() {
    return "condition,n_rays,pos_mean_um,pos_median_um,pos_p95_um,ang_mean_deg,ang_median_deg,ang_p95_deg";
}

std::string eval_csv_row(const EvalReport& r) {
    std::string row = r.condition + "," + std::to_string(r.n_rays);
    for (double v : {r.pos_error_um.mean, r.pos_error_um.median, r.pos_error_um.p95, r.ang_error_deg.mean,
                     r.ang_error_deg.median, r.ang_error_deg.p95})
        row += "," + format_double(v);
    return row;
}

std::string eval_csv(const std::vector<EvalReport>& reports) {
    std::string out = eval_csv_header() + "\n";
    for (const auto& r : reports) out += eval_csv_row(r) + "\n";
    return out;
}

std::string format_eval_table(const std::vector<EvalReport>& reports) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-20s %10s %12s %12s %12s %12s %12s %12s\n", "condition", "n_rays",
                  "pos_mean_um", "pos_med_um", "pos_p95_um", "ang_mean_deg", "ang_med_deg", "ang_p95_deg");
    out << line;
    for (const auto& r : reports) {
        std::snprintf(line, sizeof line, "%-20s %10zu %12.3f %12.3f %12.3f %12.5f %12.5f %12.5f\n",
                      r.condition.c_str(), r.n_rays, r.pos_error_um.mean, r.pos_error_um.median, r.pos_error_um.p95,
                      r.ang_error_deg.mean, r.ang_error_deg.median, r.ang_error_deg.p95);
        out << line;
    }
    out << "(statistics are per-ray; compare the mean columns against published single-number errors)\n";
    return out.str();
}

std::string history_csv(const std::vector<HistoryRow>& history) {
    std::string out = "epoch,lr,train_loss,test_pos_um,test_ang_deg\n";
    for (const auto& h : history)
        out += std::to_string(h.epoch) + "," + format_double(h.lr) + "," + format_double(h.train_loss) + "," +
               format_double(h.test_pos_um) + "," + format_double(h.test_ang_deg) + "\n";
    return out;
}

}  // namespace lensproxy
