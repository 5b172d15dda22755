#include "driftlock/ramsey.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <thread>

#include "driftlock/errors.hpp"
#include "driftlock/noise.hpp"
#include "driftlock/rng.hpp"
#include "driftlock/spectral.hpp"

namespace driftlock::ramsey {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi_ = 3.1415926535897932384626433832795;

} // namespace

void RamseyConfig::validate() const {
    if (!(bias_hz >= 0.0)) throw ParameterError("ramsey.bias_hz must be >= 0");
    for (double b : extra_biases_hz) {
        if (!(b >= 0.0)) throw ParameterError("ramsey.extra_biases_hz entries must be >= 0");
    }
    if (t_evol_s.size() < 2) throw ParameterError("ramsey.t_evol_s needs at least 2 points");
    for (std::size_t i = 0; i < t_evol_s.size(); ++i) {
        if (!(t_evol_s[i] > 0.0)) throw ParameterError("ramsey.t_evol_s must be > 0");
        if (i > 0 && !(t_evol_s[i] > t_evol_s[i - 1])) {
            throw ParameterError("ramsey.t_evol_s must be strictly ascending");
        }
    }
    if (shots_per_point < 1) throw ParameterError("ramsey.shots_per_point must be >= 1");
    if (!(shot_wall_time_s > 0.0)) throw ParameterError("ramsey.shot_wall_time_s must be > 0");
    if (!(intrinsic_t2_s > 0.0)) throw ParameterError("ramsey.intrinsic_t2_s must be > 0");
    if (!(decay_exponent > 0.0)) throw ParameterError("ramsey.decay_exponent must be > 0");
    if (!readout.ideal) {
        if (!(readout.contrast > 0.0) || readout.contrast > 1.0) {
            throw ParameterError("ramsey.readout.contrast must be in (0, 1]");
        }
        if (!(readout.photons_per_shot > 0.0)) {
            throw ParameterError("ramsey.readout.photons_per_shot must be > 0");
        }
    }
}

std::vector<double> RamseyConfig::uniform_grid(double start_s, double stop_s, int points) {
    if (points < 2 || !(stop_s > start_s) || !(start_s > 0.0)) {
        throw ParameterError("uniform_grid needs points >= 2 and 0 < start < stop");
    }
    std::vector<double> grid(static_cast<std::size_t>(points));
    const double step = (stop_s - start_s) / static_cast<double>(points - 1);
    for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = start_s + step * i;
    return grid;
}

RamseyCurve simulate_ramsey(const NoiseTrace& residual, const RamseyConfig& cfg, std::uint64_t seed) {
    residual.validate();
    cfg.validate();

    const auto grid_n = cfg.t_evol_s.size();
    const auto total_shots = static_cast<std::size_t>(cfg.shots_per_point) * grid_n;
    const double span = cfg.wall_span_s();
    if (span > residual.duration_s() * (1.0 + 1e-9)) {
        throw CoverageError("simulate_ramsey: residual trace spans " +
                            std::to_string(residual.duration_s()) + " s but the measurement needs " +
                            std::to_string(span) + " s");
    }

    std::vector<double> biases;
    biases.push_back(cfg.bias_hz);
    biases.insert(biases.end(), cfg.extra_biases_hz.begin(), cfg.extra_biases_hz.end());
    const double bias_weight = 1.0 / static_cast<double>(biases.size());
    const double inv_t2 = 1.0 / cfg.intrinsic_t2_s;
    const double p = cfg.decay_exponent;

    Rng rng(seed);
    std::vector<double> mean(grid_n, 0.0);
    std::vector<double> m2(grid_n, 0.0);
    std::vector<std::size_t> count(grid_n, 0);

    for (std::size_t shot = 0; shot < total_shots; ++shot) {
        const std::size_t point = cfg.interleaved ? shot % grid_n : shot / cfg.shots_per_point;
        const double t = cfg.t_evol_s[point];
        const double wall = residual.t0_s + static_cast<double>(shot) * cfg.shot_wall_time_s;
        const double offset = residual.value_at(wall);

        const double envelope = std::exp(-std::pow(t * inv_t2, p));
        double population = 0.0;
        for (double b : biases) {
            population += 0.5 * (1.0 + envelope * std::cos(kTwoPi * (b + offset) * t));
        }
        population *= bias_weight;

        double recorded = population;
        if (!cfg.readout.ideal) {
            const double bright = cfg.readout.photons_per_shot;
            const double mean_counts = bright * (1.0 - cfg.readout.contrast * (1.0 - population));
            const auto counts = static_cast<double>(rng.poisson(mean_counts));
            recorded = (counts / bright - (1.0 - cfg.readout.contrast)) / cfg.readout.contrast;
        }

        // Welford accumulation per grid point.
        ++count[point];
        const double delta = recorded - mean[point];
        mean[point] += delta / static_cast<double>(count[point]);
        m2[point] += delta * (recorded - mean[point]);
    }

    RamseyCurve curve;
    curve.t_evol_s = cfg.t_evol_s;
    curve.signal = std::move(mean);
    curve.std_err.resize(grid_n, 0.0);
    for (std::size_t i = 0; i < grid_n; ++i) {
        const auto n = count[i];
        curve.std_err[i] = n > 1 ? std::sqrt(m2[i] / (static_cast<double>(n) * static_cast<double>(n - 1)))
                                 : 0.0;
    }
    curve.wall_span_s = span;
    return curve;
}

PipelineResult run_pipeline(const NoiseTrace& noise_trace, const SweepConfig& cfg, double nu_hz,
                            std::uint64_t point_seed) {
    if (!(nu_hz > 0.0)) throw ParameterError("update speed must be > 0");
    const double tau = 1.0 / nu_hz;
    if (tau < noise_trace.dt_s * (1.0 - 1e-9)) {
        throw ParameterError("tau below the trace sample period");
    }
    const double cycle_span =
        static_cast<double>(cfg.ramsey.t_evol_s.size()) * cfg.ramsey.shot_wall_time_s;
    if (cycle_span > 0.25 * tau) {
        throw ParameterError("one sweep through the evolution grid spans " +
                             std::to_string(cycle_span) + " s, above tau/4 = " +
                             std::to_string(0.25 * tau) + " s; shrink the grid or shot time");
    }

    PipelineResult result;
    tracker::EstimateStream estimates;
    const bool needs_tracking =
        cfg.scheme == ctrl::Scheme::Feedback || cfg.scheme == ctrl::Scheme::Feedforward;
    if (needs_tracking) {
        if (!cfg.tracker) throw ParameterError("scheme needs a tracker config");
        if (const auto* odmr = std::get_if<tracker::OdmrConfig>(&*cfg.tracker)) {
            tracker::OdmrConfig per_point = *odmr;
            per_point.period_s = tau; // tracking period follows the control period
            estimates = tracker::odmr_track(noise_trace, per_point, Rng::derive(point_seed, 1));
        } else {
            estimates = tracker::lia_track(noise_trace, std::get<tracker::LiaConfig>(*cfg.tracker),
                                           Rng::derive(point_seed, 1));
        }
    }

    ctrl::ControlPolicy policy;
    policy.scheme = cfg.scheme;
    policy.update_period_s = tau;
    policy.model = cfg.model;
    policy.horizon_s = cfg.horizon_s;

    const bool prefilter = cfg.correction_lowpass_window_s > 0.0 &&
                           (cfg.scheme == ctrl::Scheme::IdealFeedback ||
                            cfg.scheme == ctrl::Scheme::OpenLoop);
    if (prefilter) {
        auto seen = noise::moving_average(noise_trace, cfg.correction_lowpass_window_s);
        result.run = ctrl::run_loop(seen, estimates, policy);
        result.residual = ctrl::apply_correction(noise_trace, result.run.correction);
    } else {
        result.run = ctrl::run_loop(noise_trace, estimates, policy);
        result.residual = result.run.residual;
    }

    // Measure on the settled loop: drop the open-loop warm-up samples.
    NoiseTrace& residual = result.residual;
    if (result.run.warmup_end_s > residual.t0_s) {
        const auto skip = static_cast<std::size_t>(
            std::ceil((result.run.warmup_end_s - residual.t0_s) / residual.dt_s - 1e-9));
        if (skip > 0 && skip < residual.size() - 1) {
            const double new_t0 = residual.time_at(skip);
            residual.values.erase(residual.values.begin(),
                                  residual.values.begin() + static_cast<std::ptrdiff_t>(skip));
            residual.t0_s = new_t0;
        }
    }

    double bias_lo = cfg.ramsey.bias_hz;
    double bias_hi = cfg.ramsey.bias_hz;
    for (double b : cfg.ramsey.extra_biases_hz) {
        bias_lo = std::min(bias_lo, b);
        bias_hi = std::max(bias_hi, b);
    }

    RamseyConfig ramsey_cfg = cfg.ramsey;
    if (cfg.adapt_span) {
        // Residual spread about its mean sets the dephasing envelope
        // exp(-2 pi^2 sigma^2 t^2); six decay constants capture the line.
        const auto n = static_cast<double>(residual.size());
        double mean = 0.0;
        for (double v : residual.values) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : residual.values) var += (v - mean) * (v - mean);
        const double sigma = std::sqrt(var / n);
        const auto points = ramsey_cfg.t_evol_s.size();
        double span = sigma > 0.0 ? 6.0 / (std::sqrt(2.0) * kPi_ * sigma)
                                  : std::numeric_limits<double>::infinity();
        span = std::min(span, 4.0 * ramsey_cfg.intrinsic_t2_s);
        if (bias_hi > 0.0) {
            // Keep the grid Nyquist range comfortably above the line.
            span = std::min(span, static_cast<double>(points) / (2.0 * 1.7 * bias_hi));
        }
        if (!std::isfinite(span) || !(span > 0.0)) {
            throw ParameterError("adaptive span failed: unbounded coherence with zero bias");
        }
        const double step = span / static_cast<double>(points);
        ramsey_cfg.t_evol_s = RamseyConfig::uniform_grid(step, span, static_cast<int>(points));
    }

    result.curve = simulate_ramsey(residual, ramsey_cfg, Rng::derive(point_seed, 2));

    const double dt_evol = result.curve.t_evol_s[1] - result.curve.t_evol_s[0];
    result.spectrum = spectral::fft_spectrum(result.curve.signal, dt_evol, {});
    // Fit around the known bias line; fall back to everything above the
    // DC leakage when the bias sits at zero.
    double f_lo = 5.0 * result.spectrum.df_hz();
    double f_hi = result.spectrum.freqs_hz.back();
    if (bias_lo > 0.0) {
        f_lo = std::max(f_lo, 0.3 * bias_lo);
        f_hi = std::min(f_hi, 1.7 * bias_hi);
    }
    result.fit_band_hz = {f_lo, f_hi};
    return result;
}

namespace {

SweepPoint run_sweep_point(const NoiseTrace& noise_trace, const SweepConfig& cfg, double nu,
                           std::uint64_t point_seed) {
    SweepPoint point;
    point.nu_hz = nu;
    try {
        auto pipeline = run_pipeline(noise_trace, cfg, nu, point_seed);
        auto peak = spectral::fit_lorentzian(pipeline.spectrum, 1, std::nullopt, pipeline.fit_band_hz);
        point.l_hz = peak.peaks[0].hwhm_hz;
        point.l_sigma_hz = peak.peak_sigmas[0].hwhm_hz;

        auto decay = spectral::fit_ramsey_decay(pipeline.curve, cfg.ramsey.decay_exponent);
        point.t2_star_s = decay.t2_star_s;
        if (!decay.reliable_t2) point.flag = "unreliable_t2";
    } catch (const Error& e) {
        point.flag = "failed";
        point.note = e.what();
    }
    return point;
}

} // namespace

std::vector<SweepPoint> sweep_linewidth(const NoiseTrace& noise, const SweepConfig& cfg,
                                        std::uint64_t seed, int parallel) {
    noise.validate();
    cfg.ramsey.validate();
    if (cfg.nu_hz.empty()) throw ParameterError("sweep needs at least one update speed");
    if (parallel < 1) parallel = 1;

    std::vector<SweepPoint> points(cfg.nu_hz.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cfg.nu_hz.size()) return;
            points[i] = run_sweep_point(noise, cfg, cfg.nu_hz[i], Rng::derive(seed, i));
        }
    };
    if (parallel == 1 || cfg.nu_hz.size() == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(parallel), cfg.nu_hz.size());
        threads.reserve(n_threads);
        for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    return points;
}

void save_sweep(const std::vector<SweepPoint>& points, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out << "nu_hz,l_hz,l_sigma_hz,t2_star_s,flag\n";
    char buf[160];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,", p.nu_hz, p.l_hz, p.l_sigma_hz,
                      p.t2_star_s);
        out << buf << p.flag << '\n';
    }
    if (!out) throw FormatError("write failed: " + path.string());
}

void save_curve(const RamseyCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out << "t_evol_s,signal,std_err\n";
    char buf[160];
    for (std::size_t i = 0; i < curve.t_evol_s.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", curve.t_evol_s[i], curve.signal[i],
                      curve.std_err[i]);
        out << buf;
    }
    if (!out) throw FormatError("write failed: " + path.string());
}

RamseyCurve load_curve(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t_evol_s,signal,std_err") throw FormatError(path.string() + ": row 1: unexpected header");
    RamseyCurve curve;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        double t = 0.0;
        double s = 0.0;
        double se = 0.0;
        const char* ptr = line.c_str();
        char* end = nullptr;
        t = std::strtod(ptr, &end);
        if (end == ptr || *end != ',') throw FormatError(path.string() + ": row " + std::to_string(row));
        ptr = end + 1;
        s = std::strtod(ptr, &end);
        if (end == ptr || *end != ',') throw FormatError(path.string() + ": row " + std::to_string(row));
        ptr = end + 1;
        se = std::strtod(ptr, &end);
        if (end == ptr || *end != '\0') throw FormatError(path.string() + ": row " + std::to_string(row));
        curve.t_evol_s.push_back(t);
        curve.signal.push_back(s);
        curve.std_err.push_back(se);
    }
    if (curve.t_evol_s.size() < 2) throw FormatError(path.string() + ": need at least 2 rows");
    return curve;
}

} // namespace driftlock::ramsey
