#include "driftlock/noise.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include <fftw3.h>

#include "driftlock/errors.hpp"
#include "driftlock/rng.hpp"

namespace driftlock::noise {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::size_t sample_count(double duration_s, double dt_s) {
    if (!(dt_s > 0.0) || !std::isfinite(dt_s)) throw ParameterError("dt_s must be finite and > 0");
    if (!(duration_s >= dt_s)) throw ParameterError("duration_s must be >= dt_s");
    return static_cast<std::size_t>(std::floor(duration_s / dt_s + 1e-9)) + 1;
}

void check_finite(double v, const char* name) {
    if (!std::isfinite(v)) throw ParameterError(std::string(name) + " is not finite");
}

void validate_component(const Component& component, double dt_s) {
    const double nyquist = 0.5 / dt_s;
    if (const auto* ou = std::get_if<OuComponent>(&component)) {
        check_finite(ou->relaxation_rate_per_s, "ou.relaxation_rate_per_s");
        check_finite(ou->stationary_std_hz, "ou.stationary_std_hz");
        if (ou->relaxation_rate_per_s < 0.0) throw ParameterError("ou.relaxation_rate_per_s must be >= 0");
        if (ou->stationary_std_hz < 0.0) throw ParameterError("ou.stationary_std_hz must be >= 0");
    } else if (const auto* pl = std::get_if<PowerLawComponent>(&component)) {
        check_finite(pl->exponent, "power_law.exponent");
        check_finite(pl->rms_amplitude_hz, "power_law.rms_amplitude_hz");
        check_finite(pl->low_cutoff_hz, "power_law.low_cutoff_hz");
        check_finite(pl->high_cutoff_hz, "power_law.high_cutoff_hz");
        if (pl->exponent < 0.0 || pl->exponent > 3.0) throw ParameterError("power_law.exponent must be in [0, 3]");
        if (pl->rms_amplitude_hz < 0.0) throw ParameterError("power_law.rms_amplitude_hz must be >= 0");
        if (!(pl->low_cutoff_hz > 0.0) || !(pl->high_cutoff_hz > pl->low_cutoff_hz)) {
            throw ParameterError("power_law cutoffs must satisfy 0 < low < high");
        }
        if (pl->high_cutoff_hz > nyquist * (1.0 + 1e-12)) {
            throw NyquistError("power_law.high_cutoff_hz exceeds the Nyquist frequency " +
                               std::to_string(nyquist) + " Hz for dt_s = " + std::to_string(dt_s));
        }
    } else if (const auto* sine = std::get_if<SineComponent>(&component)) {
        check_finite(sine->amplitude_hz, "sine.amplitude_hz");
        check_finite(sine->frequency_hz, "sine.frequency_hz");
        check_finite(sine->phase_rad, "sine.phase_rad");
        if (sine->frequency_hz < 0.0) throw ParameterError("sine.frequency_hz must be >= 0");
    } else if (const auto* c = std::get_if<ConstantComponent>(&component)) {
        check_finite(c->offset_hz, "constant.offset_hz");
    }
}

void generate_ou(const OuComponent& ou, Rng& rng, std::vector<double>& out, double dt_s) {
    const double phi = std::exp(-ou.relaxation_rate_per_s * dt_s);
    const double q = ou.stationary_std_hz * std::sqrt(std::max(0.0, 1.0 - phi * phi));
    double x = ou.stationary_std_hz * rng.gauss();
    out[0] = x;
    for (std::size_t i = 1; i < out.size(); ++i) {
        x = phi * x + q * rng.gauss();
        out[i] = x;
    }
}

void generate_power_law(const PowerLawComponent& pl, Rng& rng, std::vector<double>& out, double dt_s) {
    const auto n = out.size();
    const auto n_bins = n / 2 + 1;
    const double df = 1.0 / (static_cast<double>(n) * dt_s);

    std::vector<std::complex<double>> bins(n_bins, {0.0, 0.0});
    std::size_t populated = 0;
    for (std::size_t k = 1; k < n_bins; ++k) {
        const double f = static_cast<double>(k) * df;
        // Half-open band test with a hair of slack so high_cutoff == Nyquist
        // keeps the top bin.
        if (f < pl.low_cutoff_hz * (1.0 - 1e-12) || f > pl.high_cutoff_hz * (1.0 + 1e-12)) continue;
        const double amp = std::pow(f, -0.5 * pl.exponent);
        const double phase = kTwoPi * rng.uniform01();
        if (n % 2 == 0 && k == n_bins - 1) {
            bins[k] = {amp * std::cos(phase), 0.0}; // Nyquist bin must be real
        } else {
            bins[k] = {amp * std::cos(phase), amp * std::sin(phase)};
        }
        ++populated;
    }
    if (populated == 0) {
        throw ParameterError("power_law band [" + std::to_string(pl.low_cutoff_hz) + ", " +
                             std::to_string(pl.high_cutoff_hz) +
                             "] Hz contains no frequency bins on this grid; lengthen the trace");
    }

    fftw_plan plan = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                          reinterpret_cast<fftw_complex*>(bins.data()),
                                          out.data(), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    double rms = 0.0;
    for (double v : out) rms += v * v;
    rms = std::sqrt(rms / static_cast<double>(n));
    const double scale = rms > 0.0 ? pl.rms_amplitude_hz / rms : 0.0;
    for (double& v : out) v *= scale;
}

} // namespace

void validate(const NoiseSpec& spec, double dt_s) {
    if (!(dt_s > 0.0) || !std::isfinite(dt_s)) throw ParameterError("dt_s must be finite and > 0");
    for (const auto& component : spec.components) validate_component(component, dt_s);
}

NoiseTrace generate_component(const Component& component, std::uint64_t sub_seed,
                              double duration_s, double dt_s) {
    validate_component(component, dt_s);
    const std::size_t n = sample_count(duration_s, dt_s);

    NoiseTrace trace;
    trace.dt_s = dt_s;
    trace.t0_s = 0.0;
    trace.values.assign(n, 0.0);

    Rng rng(sub_seed);
    if (const auto* ou = std::get_if<OuComponent>(&component)) {
        generate_ou(*ou, rng, trace.values, dt_s);
        trace.label = "ou";
    } else if (const auto* pl = std::get_if<PowerLawComponent>(&component)) {
        generate_power_law(*pl, rng, trace.values, dt_s);
        trace.label = "power_law";
    } else if (const auto* sine = std::get_if<SineComponent>(&component)) {
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) * dt_s;
            trace.values[i] = sine->amplitude_hz * std::sin(kTwoPi * sine->frequency_hz * t + sine->phase_rad);
        }
        trace.label = "sine";
    } else if (const auto* c = std::get_if<ConstantComponent>(&component)) {
        trace.values.assign(n, c->offset_hz);
        trace.label = "constant";
    }
    return trace;
}

NoiseTrace generate(const NoiseSpec& spec, double duration_s, double dt_s) {
    validate(spec, dt_s);
    const std::size_t n = sample_count(duration_s, dt_s);

    NoiseTrace trace;
    trace.dt_s = dt_s;
    trace.t0_s = 0.0;
    trace.values.assign(n, 0.0);
    trace.label = "synthetic";

    for (std::size_t i = 0; i < spec.components.size(); ++i) {
        NoiseTrace part = generate_component(spec.components[i], Rng::derive(spec.seed, i),
                                             duration_s, dt_s);
        for (std::size_t j = 0; j < n; ++j) trace.values[j] += part.values[j];
    }
    trace.validate();
    return trace;
}

NoiseTrace moving_average(const NoiseTrace& trace, double window_s) {
    trace.validate();
    if (!(window_s > 0.0) || !std::isfinite(window_s)) {
        throw ParameterError("moving_average window_s must be finite and > 0");
    }
    NoiseTrace out = trace;
    const double half = 0.5 * window_s;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double t = trace.time_at(i);
        out.values[i] = window_mean(trace, t - half, t + half);
    }
    return out;
}

NoiseTrace resample(const NoiseTrace& trace, double dt_new_s) {
    trace.validate();
    if (!(dt_new_s > 0.0) || !std::isfinite(dt_new_s)) throw ParameterError("dt_new_s must be finite and > 0");
    if (dt_new_s == trace.dt_s) return trace;

    NoiseTrace out;
    out.dt_s = dt_new_s;
    out.t0_s = trace.t0_s;
    out.label = trace.label;
    const auto n = static_cast<std::size_t>(std::floor(trace.duration_s() / dt_new_s + 1e-9)) + 1;
    out.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.values.push_back(trace.value_at(out.time_at(i)));
    }
    return out;
}

} // namespace driftlock::noise
