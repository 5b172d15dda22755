#include "driftlock/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>

#include "driftlock/errors.hpp"
#include "driftlock/rng.hpp"
#include "driftlock/spectral.hpp"

namespace driftlock::tracker {

namespace {

constexpr double kTimeSlack = 1e-9;

double lorentzian_unit(double x, double hwhm) {
    return hwhm * hwhm / (x * x + hwhm * hwhm);
}

} // namespace

void OdmrConfig::validate() const {
    if (n_points < 3) throw ParameterError("odmr.n_points must be >= 3");
    if (!(range_hz > 0.0)) throw ParameterError("odmr.range_hz must be > 0");
    if (!(dwell_s > 0.0)) throw ParameterError("odmr.dwell_s must be > 0");
    if (!(period_s > 0.0)) throw ParameterError("odmr.period_s must be > 0");
    if (dwell_s * n_points > period_s * (1.0 + 1e-12)) {
        throw ParameterError("odmr sweep (n_points * dwell_s) must fit inside period_s");
    }
    if (!(contrast > 0.0) || contrast > 1.0) throw ParameterError("odmr.contrast must be in (0, 1]");
    if (!(count_rate_hz > 0.0)) throw ParameterError("odmr.count_rate_hz must be > 0");
    if (linewidth_hz < 0.0) throw ParameterError("odmr.linewidth_hz must be >= 0");
}

void LiaConfig::validate() const {
    if (!(window_s > 0.0)) throw ParameterError("lia.window_s must be > 0");
    if (!(update_period_s > 0.0)) throw ParameterError("lia.update_period_s must be > 0");
    if (!(capture_range_hz > 0.0)) throw ParameterError("lia.capture_range_hz must be > 0");
    if (sigma_floor_hz < 0.0) throw ParameterError("lia.sigma_floor_hz must be >= 0");
}

std::string to_string(EstimateFlag flag) {
    switch (flag) {
    case EstimateFlag::Ok: return "ok";
    case EstimateFlag::Invalid: return "invalid";
    case EstimateFlag::OutOfCapture: return "out_of_capture";
    }
    return "ok";
}

EstimateFlag estimate_flag_from_string(const std::string& token) {
    if (token == "ok") return EstimateFlag::Ok;
    if (token == "invalid") return EstimateFlag::Invalid;
    if (token == "out_of_capture") return EstimateFlag::OutOfCapture;
    throw FormatError("unknown estimate flag '" + token + "'");
}

double EstimateStream::cadence_s() const {
    if (entries.size() < 2) throw SizeError("cadence_s needs at least 2 estimates");
    std::vector<double> diffs;
    diffs.reserve(entries.size() - 1);
    for (std::size_t i = 1; i < entries.size(); ++i) {
        diffs.push_back(entries[i].t_avail_s - entries[i - 1].t_avail_s);
    }
    std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
    return diffs[diffs.size() / 2];
}

void EstimateStream::validate() const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (e.t_avail_s < e.t_eff_s) {
            throw ParameterError("estimate " + std::to_string(i) + " violates causality (t_avail < t_eff)");
        }
        if (i > 0 && !(e.t_avail_s > entries[i - 1].t_avail_s)) {
            throw ParameterError("estimate t_avail_s must be strictly increasing at entry " + std::to_string(i));
        }
    }
}

void save_estimates(const EstimateStream& stream, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out << "t_avail_s,t_eff_s,est_hz,sigma_hz,flag\n";
    char buf[160];
    for (const auto& e : stream.entries) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,", e.t_avail_s, e.t_eff_s, e.est_hz,
                      e.sigma_hz);
        out << buf << to_string(e.flag) << '\n';
    }
    if (!out) throw FormatError("write failed: " + path.string());
}

EstimateStream load_estimates(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t_avail_s,t_eff_s,est_hz,sigma_hz,flag") {
        throw FormatError(path.string() + ": row 1: unexpected header");
    }
    EstimateStream stream;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Estimate e;
        const char* s = line.c_str();
        char* end = nullptr;
        double* fields[4] = {&e.t_avail_s, &e.t_eff_s, &e.est_hz, &e.sigma_hz};
        for (double* field : fields) {
            *field = std::strtod(s, &end);
            if (end == s || *end != ',') {
                throw FormatError(path.string() + ": row " + std::to_string(row) + ": malformed row");
            }
            s = end + 1;
        }
        e.flag = estimate_flag_from_string(std::string(s));
        stream.entries.push_back(e);
    }
    stream.validate();
    return stream;
}

EstimateStream odmr_track(const NoiseTrace& trace, const OdmrConfig& cfg, std::uint64_t seed) {
    trace.validate();
    cfg.validate();
    if (trace.duration_s() + kTimeSlack < cfg.period_s) {
        throw CoverageError("odmr_track: trace shorter than one tracking period");
    }

    const int n = cfg.n_points;
    const double hwhm = cfg.dip_hwhm_hz();
    const double sweep_duration = cfg.sweep_duration_s();
    const bool ideal_readout = std::isinf(cfg.count_rate_hz);
    const double mean_counts_scale = ideal_readout ? 1.0 : cfg.count_rate_hz * cfg.dwell_s;

    Rng rng(seed);
    EstimateStream stream;
    double center = cfg.f0_hz;
    double held_est = cfg.f0_hz;

    std::vector<double> freqs(n);
    std::vector<double> counts(n);
    const auto n_periods = static_cast<std::size_t>(
        std::floor(trace.duration_s() / cfg.period_s + kTimeSlack));
    for (std::size_t k = 0; k < n_periods; ++k) {
        const double sweep_start = trace.t0_s + static_cast<double>(k) * cfg.period_s;
        for (int j = 0; j < n; ++j) {
            freqs[j] = center - 0.5 * cfg.range_hz +
                       cfg.range_hz * static_cast<double>(j) / static_cast<double>(n - 1);
            const double dwell_lo = sweep_start + cfg.dwell_s * j;
            const double true_offset = window_mean(trace, dwell_lo, dwell_lo + cfg.dwell_s);
            const double signal = 1.0 - cfg.contrast * lorentzian_unit(freqs[j] - true_offset, hwhm);
            counts[j] = ideal_readout
                            ? signal
                            : static_cast<double>(rng.poisson(mean_counts_scale * signal));
        }

        // Flip the dip into a peak so the shared Lorentzian fitter applies.
        const double top = *std::max_element(counts.begin(), counts.end());
        spectral::Spectrum dip;
        dip.freqs_hz = freqs;
        dip.amps.resize(n);
        for (int j = 0; j < n; ++j) dip.amps[j] = top - counts[j];
        dip.n_signal = static_cast<std::size_t>(n);
        dip.zero_pad_factor = 1;
        dip.dt_s = 0.0;
        dip.coherent_gain = 1.0;

        // Dip minimum seeds the center; scanning forward breaks ties toward
        // the lower frequency.
        int seed_idx = 0;
        for (int j = 1; j < n; ++j) {
            if (counts[j] < counts[seed_idx]) seed_idx = j;
        }
        std::vector<spectral::Peak> init(1);
        init[0].center_hz = freqs[seed_idx];
        init[0].hwhm_hz = hwhm;
        init[0].amplitude = dip.amps[seed_idx];

        Estimate e;
        e.t_eff_s = sweep_start + 0.5 * sweep_duration;
        e.t_avail_s = trace.t0_s + static_cast<double>(k + 1) * cfg.period_s;
        try {
            auto fit = spectral::fit_lorentzian(dip, 1, init);
            const double fitted = fit.peaks[0].center_hz;
            if (fitted < freqs.front() || fitted > freqs.back()) {
                throw FitError("fitted dip center outside the sweep range");
            }
            e.est_hz = fitted;
            e.sigma_hz = fit.peak_sigmas[0].center_hz;
            e.flag = EstimateFlag::Ok;
            held_est = fitted;
            center = fitted;
        } catch (const Error&) {
            // Lost the dip: hold the last valid estimate and keep sweeping
            // around it.
            e.est_hz = held_est;
            e.sigma_hz = std::numeric_limits<double>::quiet_NaN();
            e.flag = EstimateFlag::Invalid;
        }
        stream.entries.push_back(e);
    }
    stream.validate();
    return stream;
}

EstimateStream lia_track(const NoiseTrace& trace, const LiaConfig& cfg, std::uint64_t seed) {
    trace.validate();
    cfg.validate();
    if (trace.duration_s() + kTimeSlack < cfg.window_s) {
        throw CoverageError("lia_track: trace shorter than the detection window");
    }

    const double sigma = cfg.sigma_floor_hz / std::sqrt(cfg.window_s);
    Rng rng(seed);
    EstimateStream stream;
    double held_est = 0.0;

    const double t_first = trace.t0_s + cfg.window_s;
    const auto n_updates = static_cast<std::size_t>(std::floor(
                               (trace.end_time_s() - t_first) / cfg.update_period_s + kTimeSlack)) +
                           1;
    for (std::size_t i = 0; i < n_updates; ++i) {
        const double t = t_first + static_cast<double>(i) * cfg.update_period_s;
        const double truth = window_mean(trace, t - cfg.window_s, t);
        const double noisy = truth + sigma * rng.gauss();

        Estimate e;
        e.t_avail_s = t;
        e.t_eff_s = t - 0.5 * cfg.window_s;
        e.sigma_hz = sigma;
        if (std::abs(truth) > cfg.capture_range_hz) {
            e.flag = EstimateFlag::OutOfCapture;
            e.est_hz = held_est;
        } else {
            e.flag = EstimateFlag::Ok;
            e.est_hz = noisy;
            held_est = noisy;
        }
        stream.entries.push_back(e);
    }
    stream.validate();
    return stream;
}

} // namespace driftlock::tracker
