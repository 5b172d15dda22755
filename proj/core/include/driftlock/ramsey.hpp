// Ramsey measurement under a residual-detuning trace, and the
// linewidth-vs-update-speed sweep that chains tracker -> control loop ->
// Ramsey -> spectrum -> peak fit.
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "driftlock/control.hpp"
#include "driftlock/ramsey_curve.hpp"
#include "driftlock/spectral.hpp"
#include "driftlock/tracker.hpp"
#include "driftlock/trace.hpp"

namespace driftlock::ramsey {

struct Readout {
    bool ideal = true;
    double contrast = 0.3;        // fluorescence dip depth between spin states
    double photons_per_shot = 0.05;
};

struct RamseyConfig {
    double bias_hz = 1e6;                // deliberate detuning
    std::vector<double> extra_biases_hz; // additional resonances, equal weight
    std::vector<double> t_evol_s;        // free-evolution grid, ascending
    int shots_per_point = 1;
    double shot_wall_time_s = 5e-3;
    double intrinsic_t2_s = 0.0;         // decoherence not due to tracked noise; inf allowed
    double decay_exponent = 1.0;         // p in exp(-(t/T2)^p)
    Readout readout;
    bool interleaved = true;             // cycle the grid each sweep (default) vs sequential

    void validate() const;
    double wall_span_s() const {
        return static_cast<double>(shots_per_point) * static_cast<double>(t_evol_s.size()) *
               shot_wall_time_s;
    }
    /// Convenience: uniform grid from start to stop inclusive.
    static std::vector<double> uniform_grid(double start_s, double stop_s, int points);
};

/// Executes shots in wall-clock order against the residual trace (linear
/// interpolation at shot times). For a shot at wall time s with evolution
/// time t the population is the equal-weight mean over biases b of
///   1/2 [1 + exp(-(t/T2)^p) cos(2 pi (b + residual(s)) t)],
/// optionally passed through photon-count readout statistics.
RamseyCurve simulate_ramsey(const NoiseTrace& residual, const RamseyConfig& cfg, std::uint64_t seed);

struct SweepPoint {
    double nu_hz = 0.0;
    double l_hz = 0.0;       // fitted HWHM
    double l_sigma_hz = 0.0;
    double t2_star_s = 0.0;
    std::string flag = "ok"; // ok | unreliable_t2 | failed
    std::string note;
};

struct SweepConfig {
    std::vector<double> nu_hz;
    ctrl::Scheme scheme = ctrl::Scheme::IdealFeedback;
    std::optional<tracker::TrackerConfig> tracker; // required for feedback / feedforward
    std::shared_ptr<const predictor::PredictorModel> model; // feedforward only
    std::optional<double> horizon_s;
    RamseyConfig ramsey;
    /// Resize each point's evolution span to its own residual coherence time
    /// (keeping the configured point count), the way an adaptive acquisition
    /// would; a fixed grid cannot resolve a sweep whose linewidths span
    /// orders of magnitude. The span is capped so the grid's Nyquist range
    /// still covers the bias line.
    bool adapt_span = true;
    /// When > 0 the ideal-feedback corrections are computed from a zero-phase
    /// moving-average view of the noise (the trace a detector of that
    /// bandwidth records) while the spin still sees the full noise. Content
    /// above the detection band then passes through uncorrected instead of
    /// being copied stale into the correction. Ignored for tracked schemes,
    /// whose detection window already sets the band.
    double correction_lowpass_window_s = 0.0;
};

/// One full tracker -> loop -> Ramsey -> spectrum pass at a single update
/// speed: the warm-up-trimmed residual, the measured curve, its spectrum,
/// and the band the peak fits should use.
struct PipelineResult {
    ctrl::ControlRun run;
    NoiseTrace residual;
    RamseyCurve curve;
    spectral::Spectrum spectrum;
    std::pair<double, double> fit_band_hz;
};

PipelineResult run_pipeline(const NoiseTrace& noise, const SweepConfig& cfg, double nu_hz,
                            std::uint64_t point_seed);

/// One pipeline run per update speed with a per-point derived seed; points
/// may execute concurrently (`parallel` threads) with identical results.
/// An ODMR tracker's period follows the control period at each point. A
/// failed point is flagged, never dropped.
std::vector<SweepPoint> sweep_linewidth(const NoiseTrace& noise, const SweepConfig& cfg,
                                        std::uint64_t seed, int parallel = 1);

/// CSV: header `nu_hz,l_hz,l_sigma_hz,t2_star_s,flag`.
void save_sweep(const std::vector<SweepPoint>& points, const std::filesystem::path& path);

/// CSV persistence of a Ramsey curve: header `t_evol_s,signal,std_err`.
void save_curve(const RamseyCurve& curve, const std::filesystem::path& path);
RamseyCurve load_curve(const std::filesystem::path& path);

} // namespace driftlock::ramsey
