#include "driftlock/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "driftlock/errors.hpp"

namespace driftlock {

double NoiseTrace::value_at(double t_s) const {
    if (values.empty()) throw ParameterError("value_at on empty trace");
    if (values.size() == 1) return values.front();
    double idx = (t_s - t0_s) / dt_s;
    if (idx <= 0.0) return values.front();
    double last = static_cast<double>(values.size() - 1);
    if (idx >= last) return values.back();
    double fl = std::floor(idx);
    auto i = static_cast<std::size_t>(fl);
    double frac = idx - fl;
    if (frac == 0.0) return values[i];
    return values[i] + frac * (values[i + 1] - values[i]);
}

double NoiseTrace::rms() const {
    if (values.empty()) return 0.0;
    double acc = 0.0;
    for (double v : values) acc += v * v;
    return std::sqrt(acc / static_cast<double>(values.size()));
}

void NoiseTrace::validate() const {
    if (!(dt_s > 0.0) || !std::isfinite(dt_s)) throw ParameterError("trace dt_s must be finite and > 0");
    if (!std::isfinite(t0_s)) throw ParameterError("trace t0_s must be finite");
    if (values.empty()) throw ParameterError("trace must hold at least one sample");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw ParameterError("trace sample " + std::to_string(i) + " is not finite");
        }
    }
}

double window_mean(const NoiseTrace& trace, double t_lo_s, double t_hi_s) {
    if (!(t_hi_s > t_lo_s)) throw ParameterError("window_mean needs t_hi > t_lo");
    const double lo = std::max(t_lo_s, trace.t0_s);
    const double hi = std::min(t_hi_s, trace.end_time_s());
    if (!(hi > lo)) return trace.value_at(std::clamp(t_lo_s, trace.t0_s, trace.end_time_s()));

    // Integrate the piecewise-linear interpolant segment by segment.
    const double dt = trace.dt_s;
    auto seg_lo = static_cast<std::size_t>(std::floor((lo - trace.t0_s) / dt));
    auto seg_hi = static_cast<std::size_t>(std::ceil((hi - trace.t0_s) / dt));
    seg_hi = std::min(seg_hi, trace.size() - 1);

    double integral = 0.0;
    for (std::size_t i = seg_lo; i < seg_hi; ++i) {
        double a = std::max(lo, trace.time_at(i));
        double b = std::min(hi, trace.time_at(i + 1));
        if (b <= a) continue;
        double va = trace.value_at(a);
        double vb = trace.value_at(b);
        integral += 0.5 * (va + vb) * (b - a);
    }
    return integral / (hi - lo);
}

void save_trace(const NoiseTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out << "time_s,freq_offset_hz\n";
    char buf[80];
    for (std::size_t i = 0; i < trace.values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", trace.time_at(i), trace.values[i]);
        out << buf;
    }
    if (!out) throw FormatError("write failed: " + path.string());
}

NoiseTrace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "time_s,freq_offset_hz") {
        throw FormatError(path.string() + ": row 1: expected header 'time_s,freq_offset_hz'");
    }

    std::vector<double> times;
    std::vector<double> vals;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char* s = line.c_str();
        char* end = nullptr;
        double t = std::strtod(s, &end);
        if (end == s || *end != ',') {
            throw FormatError(path.string() + ": row " + std::to_string(row) + ": malformed row");
        }
        const char* s2 = end + 1;
        double v = std::strtod(s2, &end);
        if (end == s2 || *end != '\0') {
            throw FormatError(path.string() + ": row " + std::to_string(row) + ": malformed row");
        }
        if (!std::isfinite(t) || !std::isfinite(v)) {
            throw FormatError(path.string() + ": row " + std::to_string(row) + ": non-finite value");
        }
        if (!times.empty() && t <= times.back()) {
            throw FormatError(path.string() + ": row " + std::to_string(row) + ": non-monotone time");
        }
        times.push_back(t);
        vals.push_back(v);
    }
    if (times.size() < 2) throw FormatError(path.string() + ": need at least 2 samples");

    const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    if (!(dt > 0.0)) throw FormatError(path.string() + ": non-increasing time column");
    for (std::size_t i = 0; i < times.size(); ++i) {
        double expected = times.front() + static_cast<double>(i) * dt;
        if (std::abs(times[i] - expected) > 1e-6 * dt) {
            throw FormatError(path.string() + ": row " + std::to_string(i + 2) +
                              ": non-uniform sampling (jitter above 1e-6 relative)");
        }
    }

    NoiseTrace trace;
    trace.dt_s = dt;
    trace.t0_s = times.front();
    trace.values = std::move(vals);
    trace.label = path.filename().string();
    trace.validate();
    return trace;
}

} // namespace driftlock
