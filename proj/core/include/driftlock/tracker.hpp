// Frequency-detection models: ODMR sweep tracking and lock-in (LIA) tracking.
//
// Both produce an EstimateStream whose entries carry the wall-clock time the
// estimate becomes usable (t_avail) and the effective center time of the data
// it summarizes (t_eff); the difference is the detection latency the control
// loop has to live with.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "driftlock/trace.hpp"

namespace driftlock::tracker {

/// Full-lineshape sweep tracking. One estimate per period: the sweep occupies
/// the first n_points * dwell_s of each period, the estimate becomes usable at
/// the period's end, and its effective time is the sweep midpoint. The sweep
/// recenters on the previous valid estimate.
struct OdmrConfig {
    double f0_hz = 0.0;    // initial sweep center, in trace-offset units
    double range_hz = 0.0; // sweep span
    int n_points = 0;
    double dwell_s = 0.0;
    double period_s = 0.0;    // tracking period tau
    double contrast = 0.0;    // dip depth, in (0, 1]
    double count_rate_hz = 0; // photon rate; +inf disables photon noise
    double linewidth_hz = 0;  // dip HWHM; 0 selects the default range_hz / 5

    void validate() const;
    double sweep_duration_s() const { return n_points * dwell_s; }
    double dip_hwhm_hz() const { return linewidth_hz > 0.0 ? linewidth_hz : range_hz / 5.0; }
};

/// Lock-in tracking: a trailing moving average over window_s plus Gaussian
/// measurement noise of sigma_floor_hz / sqrt(window_s), updated every
/// update_period_s. Latency is window_s / 2 by construction.
struct LiaConfig {
    double window_s = 0.0;
    double update_period_s = 0.0;
    double sigma_floor_hz = 0.0;    // noise scale at 1 s of integration
    double capture_range_hz = 0.0;  // offsets beyond this lose lock

    void validate() const;
};

using TrackerConfig = std::variant<OdmrConfig, LiaConfig>;

enum class EstimateFlag { Ok, Invalid, OutOfCapture };

std::string to_string(EstimateFlag flag);
EstimateFlag estimate_flag_from_string(const std::string& token);

struct Estimate {
    double t_avail_s = 0.0;
    double t_eff_s = 0.0;
    double est_hz = 0.0;
    double sigma_hz = 0.0;
    EstimateFlag flag = EstimateFlag::Ok;
};

struct EstimateStream {
    std::vector<Estimate> entries;

    /// Median spacing of t_avail (the estimate cadence).
    double cadence_s() const;
    /// Enforces strictly increasing t_avail and t_avail >= t_eff.
    void validate() const;
};

/// CSV persistence: header `t_avail_s,t_eff_s,est_hz,sigma_hz,flag`.
void save_estimates(const EstimateStream& stream, const std::filesystem::path& path);
EstimateStream load_estimates(const std::filesystem::path& path);

EstimateStream odmr_track(const NoiseTrace& trace, const OdmrConfig& cfg, std::uint64_t seed);
EstimateStream lia_track(const NoiseTrace& trace, const LiaConfig& cfg, std::uint64_t seed);

} // namespace driftlock::tracker
