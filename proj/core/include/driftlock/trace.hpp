// NoiseTrace: a uniformly sampled resonance-frequency offset series.
//
// Sample i lives at exactly t0_s + i * dt_s; no cumulative time accumulation
// anywhere, so long traces carry no rounding drift.
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace driftlock {

struct NoiseTrace {
    double dt_s = 1.0;
    double t0_s = 0.0;
    std::vector<double> values; // resonance-frequency offsets [Hz]
    std::string label;

    std::size_t size() const { return values.size(); }
    double time_at(std::size_t i) const { return t0_s + static_cast<double>(i) * dt_s; }
    double end_time_s() const { return time_at(values.empty() ? 0 : values.size() - 1); }
    double duration_s() const {
        return values.empty() ? 0.0 : static_cast<double>(values.size() - 1) * dt_s;
    }

    /// Linear interpolation, clamped at the ends. A query that lands exactly
    /// on a sample returns that sample bit-for-bit.
    double value_at(double t_s) const;

    /// Root mean square about zero (not about the mean).
    double rms() const;

    /// Enforces the type invariants: dt_s > 0, non-empty, all values finite.
    /// Throws ParameterError.
    void validate() const;
};

/// Mean of the piecewise-linear interpolant over [t_lo, t_hi] (exact
/// trapezoidal integration), clamped to the trace span.
double window_mean(const NoiseTrace& trace, double t_lo_s, double t_hi_s);

/// CSV persistence. Format: header `time_s,freq_offset_hz`, one sample per
/// row, %.17g, LF line endings. save/load round-trips bit-identically.
void save_trace(const NoiseTrace& trace, const std::filesystem::path& path);

/// Throws FormatError (with the offending row number) on malformed rows,
/// non-monotone time, or relative sampling jitter above 1e-6.
NoiseTrace load_trace(const std::filesystem::path& path);

} // namespace driftlock
