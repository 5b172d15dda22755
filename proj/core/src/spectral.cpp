#include "driftlock/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <numeric>
#include <string>

#include <fftw3.h>

#include "driftlock/errors.hpp"
#include "levmar.hpp"

namespace driftlock::spectral {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.1415926535897932384626433832795;

// The FFTW planner is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::vector<std::complex<double>> rfft(std::vector<double>& in) {
    const auto n = in.size();
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                    reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

std::vector<double> make_window(WindowFn window, std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (window == WindowFn::Hann && n > 1) {
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n - 1)));
        }
    }
    return w;
}

double lorentzian_unit(double f, double center, double hwhm) {
    const double d = f - center;
    return hwhm * hwhm / (d * d + hwhm * hwhm);
}

} // namespace

Spectrum fft_spectrum(std::span<const double> signal, double dt_s, const SpectrumOptions& options) {
    if (signal.size() < 2) throw SizeError("fft_spectrum needs at least 2 samples");
    if (!(dt_s > 0.0)) throw ParameterError("fft_spectrum dt_s must be > 0");
    if (options.zero_pad_factor < 1) throw ParameterError("zero_pad_factor must be >= 1");

    const std::size_t n = signal.size();
    const std::size_t n_fft = n * static_cast<std::size_t>(options.zero_pad_factor);

    double mean = 0.0;
    if (options.remove_mean) {
        mean = std::accumulate(signal.begin(), signal.end(), 0.0) / static_cast<double>(n);
    }
    const std::vector<double> window = make_window(options.window, n);
    const double s1 = std::accumulate(window.begin(), window.end(), 0.0);

    std::vector<double> buf(n_fft, 0.0);
    for (std::size_t i = 0; i < n; ++i) buf[i] = (signal[i] - mean) * window[i];
    auto bins = rfft(buf);

    Spectrum spec;
    spec.window = options.window;
    spec.zero_pad_factor = options.zero_pad_factor;
    spec.n_signal = n;
    spec.dt_s = dt_s;
    spec.coherent_gain = s1;
    const double df = 1.0 / (static_cast<double>(n_fft) * dt_s);
    spec.freqs_hz.resize(bins.size());
    spec.amps.resize(bins.size());
    for (std::size_t k = 0; k < bins.size(); ++k) {
        spec.freqs_hz[k] = static_cast<double>(k) * df;
        const bool edge = (k == 0) || (n_fft % 2 == 0 && k == bins.size() - 1);
        spec.amps[k] = (edge ? 1.0 : 2.0) * std::abs(bins[k]) / s1;
    }
    return spec;
}

double spectrum_energy(const Spectrum& spectrum) {
    const double s1 = spectrum.coherent_gain;
    const std::size_t n_fft = spectrum.n_signal * static_cast<std::size_t>(spectrum.zero_pad_factor);
    double acc = 0.0;
    for (std::size_t k = 0; k < spectrum.amps.size(); ++k) {
        const bool edge = (k == 0) || (n_fft % 2 == 0 && k == spectrum.amps.size() - 1);
        const double a = spectrum.amps[k];
        acc += edge ? a * a : 0.5 * a * a;
    }
    return acc * s1 * s1 / static_cast<double>(n_fft);
}

Spectrum psd(const NoiseTrace& trace, const PsdOptions& options) {
    trace.validate();
    if (options.segments < 1) throw ParameterError("psd segments must be >= 1");
    const std::size_t n = trace.size();
    // 50% overlap: k segments of length L need L + (k-1) L/2 <= n.
    std::size_t seg_len = options.segments == 1
                              ? n
                              : 2 * n / (static_cast<std::size_t>(options.segments) + 1);
    if (seg_len < 2) throw SizeError("psd: trace too short for requested segment count");
    const std::size_t hop = options.segments == 1 ? seg_len : seg_len / 2;

    const std::vector<double> window = make_window(options.window, seg_len);
    double s2 = 0.0;
    for (double w : window) s2 += w * w;
    const double fs = 1.0 / trace.dt_s;

    const std::size_t n_bins = seg_len / 2 + 1;
    std::vector<double> power(n_bins, 0.0);
    std::size_t n_segments = 0;
    std::vector<double> buf(seg_len);
    for (std::size_t start = 0; start + seg_len <= n; start += hop) {
        double mean = 0.0;
        if (options.remove_mean) {
            for (std::size_t i = 0; i < seg_len; ++i) mean += trace.values[start + i];
            mean /= static_cast<double>(seg_len);
        }
        for (std::size_t i = 0; i < seg_len; ++i) buf[i] = (trace.values[start + i] - mean) * window[i];
        auto bins = rfft(buf);
        for (std::size_t k = 0; k < n_bins; ++k) {
            const bool edge = (k == 0) || (seg_len % 2 == 0 && k == n_bins - 1);
            power[k] += (edge ? 1.0 : 2.0) * std::norm(bins[k]) / (fs * s2);
        }
        ++n_segments;
        if (hop == 0) break;
    }
    if (n_segments == 0) throw SizeError("psd: no complete segment fits the trace");

    Spectrum spec;
    spec.window = options.window;
    spec.zero_pad_factor = 1;
    spec.n_signal = seg_len;
    spec.dt_s = trace.dt_s;
    spec.coherent_gain = std::accumulate(window.begin(), window.end(), 0.0);
    const double df = fs / static_cast<double>(seg_len);
    spec.freqs_hz.resize(n_bins);
    spec.amps.resize(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k) {
        spec.freqs_hz[k] = static_cast<double>(k) * df;
        spec.amps[k] = power[k] / static_cast<double>(n_segments);
    }
    return spec;
}

namespace {

struct FitWindowView {
    std::vector<double> freqs;
    std::vector<double> amps;
};

FitWindowView slice_band(const Spectrum& spectrum, std::optional<std::pair<double, double>> band) {
    FitWindowView view;
    for (std::size_t i = 0; i < spectrum.freqs_hz.size(); ++i) {
        const double f = spectrum.freqs_hz[i];
        if (band && (f < band->first || f > band->second)) continue;
        view.freqs.push_back(f);
        view.amps.push_back(spectrum.amps[i]);
    }
    return view;
}

/// Largest local maxima, descending by height; ties go to the lower
/// frequency by construction of the scan order.
std::vector<std::size_t> local_maxima(const std::vector<double>& amps) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 1; i + 1 < amps.size(); ++i) {
        if (amps[i] > amps[i - 1] && amps[i] >= amps[i + 1]) idx.push_back(i);
    }
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return amps[a] > amps[b]; });
    return idx;
}

double half_width_estimate(const FitWindowView& view, std::size_t peak, double baseline) {
    const double half = baseline + 0.5 * (view.amps[peak] - baseline);
    double left = view.freqs.front();
    double right = view.freqs.back();
    for (std::size_t i = peak; i-- > 0;) {
        if (view.amps[i] < half) {
            left = view.freqs[i];
            break;
        }
    }
    for (std::size_t i = peak + 1; i < view.amps.size(); ++i) {
        if (view.amps[i] < half) {
            right = view.freqs[i];
            break;
        }
    }
    double hwhm = 0.5 * (right - left);
    const double bin = view.freqs.size() > 1 ? view.freqs[1] - view.freqs[0] : 1.0;
    return std::max(hwhm, bin);
}

} // namespace

PeakFit fit_lorentzian(const Spectrum& spectrum, int n_peaks, std::optional<std::vector<Peak>> init,
                       std::optional<std::pair<double, double>> band) {
    if (n_peaks != 1 && n_peaks != 2) throw ParameterError("fit_lorentzian supports 1 or 2 peaks");
    FitWindowView view = slice_band(spectrum, band);
    const auto m = static_cast<int>(view.freqs.size());
    const int k_params = 1 + 3 * n_peaks;
    if (m < 5 * k_params) {
        throw SizeError("fit_lorentzian: " + std::to_string(m) + " points in window, need at least " +
                        std::to_string(5 * k_params));
    }
    const double bin = view.freqs[1] - view.freqs[0];

    // Initialization.
    Eigen::VectorXd params(k_params);
    const double baseline0 = *std::min_element(view.amps.begin(), view.amps.end());
    params(0) = baseline0;
    if (init) {
        if (static_cast<int>(init->size()) != n_peaks) {
            throw ParameterError("fit_lorentzian: init peak count mismatch");
        }
        for (int j = 0; j < n_peaks; ++j) {
            params(1 + 3 * j) = (*init)[j].amplitude;
            params(2 + 3 * j) = (*init)[j].center_hz;
            params(3 + 3 * j) = (*init)[j].hwhm_hz;
        }
    } else {
        auto maxima = local_maxima(view.amps);
        if (maxima.empty()) {
            maxima.push_back(static_cast<std::size_t>(
                std::max_element(view.amps.begin(), view.amps.end()) - view.amps.begin()));
        }
        std::vector<std::size_t> chosen;
        chosen.push_back(maxima[0]);
        if (n_peaks == 2) {
            const double w0 = half_width_estimate(view, maxima[0], baseline0);
            for (std::size_t c = 1; c < maxima.size() && chosen.size() < 2; ++c) {
                if (std::abs(view.freqs[maxima[c]] - view.freqs[chosen[0]]) > 0.5 * w0) {
                    chosen.push_back(maxima[c]);
                }
            }
            if (chosen.size() < 2) {
                // No second maximum; seed a split pair inside the single blob.
                const double cf = view.freqs[chosen[0]];
                params(1) = (view.amps[chosen[0]] - baseline0) * 0.6;
                params(2) = cf - 0.5 * w0;
                params(3) = 0.75 * w0;
                params(4) = (view.amps[chosen[0]] - baseline0) * 0.6;
                params(5) = cf + 0.5 * w0;
                params(6) = 0.75 * w0;
                chosen.clear();
            }
        }
        for (std::size_t j = 0; j < chosen.size(); ++j) {
            params(1 + 3 * static_cast<int>(j)) = view.amps[chosen[j]] - baseline0;
            params(2 + 3 * static_cast<int>(j)) = view.freqs[chosen[j]];
            params(3 + 3 * static_cast<int>(j)) = half_width_estimate(view, chosen[j], baseline0);
        }
    }

    auto residual_fn = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
        for (int i = 0; i < m; ++i) {
            const double f = view.freqs[i];
            double model = theta(0);
            jac(i, 0) = 1.0;
            for (int j = 0; j < n_peaks; ++j) {
                const double amp = theta(1 + 3 * j);
                const double center = theta(2 + 3 * j);
                const double hwhm = theta(3 + 3 * j);
                const double d = f - center;
                const double denom = d * d + hwhm * hwhm;
                const double u = hwhm * hwhm / denom;
                model += amp * u;
                jac(i, 1 + 3 * j) = u;
                jac(i, 2 + 3 * j) = amp * hwhm * hwhm * 2.0 * d / (denom * denom);
                jac(i, 3 + 3 * j) = amp * 2.0 * hwhm * d * d / (denom * denom);
            }
            r(i) = model - view.amps[i];
        }
    };

    auto result = detail::levmar(residual_fn, params, m);
    std::vector<double> last(result.params.data(), result.params.data() + result.params.size());
    if (!result.converged) {
        throw FitError("fit_lorentzian did not converge in " + std::to_string(result.iterations) +
                           " iterations",
                       last);
    }

    PeakFit fit;
    fit.baseline = result.params(0);
    fit.iterations = result.iterations;
    for (int j = 0; j < n_peaks; ++j) {
        Peak peak;
        peak.amplitude = result.params(1 + 3 * j);
        peak.center_hz = result.params(2 + 3 * j);
        peak.hwhm_hz = std::abs(result.params(3 + 3 * j)); // sign of hwhm is a gauge freedom
        if (peak.hwhm_hz < bin) {
            throw DegenerateFitError("fit_lorentzian: peak " + std::to_string(j) +
                                         " hwhm collapsed below one bin (" + std::to_string(bin) + " Hz)",
                                     last);
        }
        if (peak.center_hz < view.freqs.front() || peak.center_hz > view.freqs.back()) {
            // A component that escapes the window has degenerated into a
            // baseline term.
            throw DegenerateFitError("fit_lorentzian: peak " + std::to_string(j) +
                                         " center left the fit window",
                                     last);
        }
        Peak sigma;
        sigma.amplitude = std::sqrt(std::max(0.0, result.covariance(1 + 3 * j, 1 + 3 * j)));
        sigma.center_hz = std::sqrt(std::max(0.0, result.covariance(2 + 3 * j, 2 + 3 * j)));
        sigma.hwhm_hz = std::sqrt(std::max(0.0, result.covariance(3 + 3 * j, 3 + 3 * j)));
        fit.peaks.push_back(peak);
        fit.peak_sigmas.push_back(sigma);
    }
    // Sort by center, keeping sigmas aligned.
    std::vector<std::size_t> order(fit.peaks.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return fit.peaks[a].center_hz < fit.peaks[b].center_hz;
    });
    PeakFit sorted = fit;
    for (std::size_t j = 0; j < order.size(); ++j) {
        sorted.peaks[j] = fit.peaks[order[j]];
        sorted.peak_sigmas[j] = fit.peak_sigmas[order[j]];
    }
    sorted.residual_rms = std::sqrt(result.ssr / m);
    const double k = k_params;
    sorted.aicc = m * std::log(std::max(result.ssr / m, 1e-300)) + 2.0 * k +
                  2.0 * k * (k + 1.0) / (m - k - 1.0);
    return sorted;
}

PeakSelection select_lorentzian_peaks(const Spectrum& spectrum,
                                      std::optional<std::pair<double, double>> band) {
    std::optional<PeakFit> one;
    std::optional<PeakFit> two;
    try {
        one = fit_lorentzian(spectrum, 1, std::nullopt, band);
    } catch (const Error&) {
    }
    try {
        PeakFit candidate = fit_lorentzian(spectrum, 2, std::nullopt, band);
        const auto& a = candidate.peaks[0];
        const auto& b = candidate.peaks[1];
        const bool positive = a.amplitude > 0.0 && b.amplitude > 0.0;
        // Rayleigh-style admissibility: the fitted doublet (above baseline)
        // must actually dip between its components, otherwise the second
        // peak is just reshaping one line.
        auto height = [&](double f) {
            double y = 0.0;
            for (const auto& p : candidate.peaks) y += p.amplitude * lorentzian_unit(f, p.center_hz, p.hwhm_hz);
            return y;
        };
        const double mid = 0.5 * (a.center_hz + b.center_hz);
        const bool dips = height(mid) <= 0.75 * std::min(height(a.center_hz), height(b.center_hz));
        if (positive && dips) two = std::move(candidate);
    } catch (const Error&) {
    }
    if (two && (!one || two->aicc < one->aicc)) return {std::move(*two), 2};
    if (one) return {std::move(*one), 1};
    throw FitError("select_lorentzian_peaks: neither peak model converged admissibly");
}

RamseyDecayFit fit_ramsey_decay(const RamseyCurve& curve, double decay_exponent) {
    const auto m = static_cast<int>(curve.t_evol_s.size());
    if (m < 10) throw SizeError("fit_ramsey_decay needs at least 10 points");
    if (!(decay_exponent > 0.0)) throw ParameterError("decay_exponent must be > 0");
    const double p = decay_exponent;
    const auto& t = curve.t_evol_s;
    const auto& s = curve.signal;
    const double span = t.back() - t.front();

    double baseline0 = std::accumulate(s.begin(), s.end(), 0.0) / m;
    double amp0 = 0.5 * (*std::max_element(s.begin(), s.end()) - *std::min_element(s.begin(), s.end()));
    if (amp0 <= 0.0) throw FitError("fit_ramsey_decay: flat signal");

    // Frequency seed from the spectrum when the grid is uniform, otherwise
    // from zero-crossing counting.
    double freq0;
    const double dt0 = t[1] - t[0];
    bool uniform = true;
    for (int i = 1; i + 1 < m; ++i) {
        if (std::abs((t[i + 1] - t[i]) - dt0) > 1e-9 * dt0) {
            uniform = false;
            break;
        }
    }
    if (uniform) {
        auto spec = fft_spectrum(s, dt0, {});
        std::size_t best = 1;
        for (std::size_t k = 1; k < spec.amps.size(); ++k) {
            if (spec.amps[k] > spec.amps[best]) best = k;
        }
        freq0 = spec.freqs_hz[best];
    } else {
        int crossings = 0;
        for (int i = 1; i < m; ++i) {
            if ((s[i - 1] - baseline0) * (s[i] - baseline0) < 0.0) ++crossings;
        }
        freq0 = crossings / (2.0 * span);
    }
    if (freq0 <= 0.0) freq0 = 1.0 / span;

    // Envelope estimate: per-period maxima of |s - baseline|, log-regressed
    // against t^p.
    double t2_0 = span;
    {
        const double period = 1.0 / freq0;
        std::vector<double> xs;
        std::vector<double> ys;
        double seg_start = t.front();
        double seg_max = 0.0;
        double seg_t = t.front();
        for (int i = 0; i < m; ++i) {
            if (t[i] > seg_start + period) {
                if (seg_max > 0.0) {
                    xs.push_back(std::pow(seg_t, p));
                    ys.push_back(std::log(seg_max));
                }
                seg_start += period * std::floor((t[i] - seg_start) / period);
                seg_max = 0.0;
            }
            const double mag = std::abs(s[i] - baseline0);
            if (mag > seg_max) {
                seg_max = mag;
                seg_t = t[i];
            }
        }
        if (xs.size() >= 3) {
            const double n_pts = static_cast<double>(xs.size());
            double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n_pts;
            double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n_pts;
            double sxx = 0.0;
            double sxy = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                sxx += (xs[i] - mx) * (xs[i] - mx);
                sxy += (xs[i] - mx) * (ys[i] - my);
            }
            if (sxx > 0.0 && sxy < 0.0) t2_0 = std::pow(-sxx / sxy, 1.0 / p);
        }
    }

    auto residual_fn = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
        const double b = theta(0);
        const double a = theta(1);
        const double t2 = theta(2);
        const double f = theta(3);
        const double ph = theta(4);
        for (int i = 0; i < m; ++i) {
            const double x = std::abs(t[i] / t2);
            const double env = std::exp(-std::pow(x, p));
            const double angle = kTwoPi * f * t[i] + ph;
            const double c = std::cos(angle);
            const double sn = std::sin(angle);
            r(i) = b + a * env * c - s[i];
            jac(i, 0) = 1.0;
            jac(i, 1) = env * c;
            jac(i, 2) = a * env * c * p * std::pow(x, p) / t2;
            jac(i, 3) = -a * env * sn * kTwoPi * t[i];
            jac(i, 4) = -a * env * sn;
        }
    };

    // Phase is the least constrained start; probe the four quadrants.
    detail::LevMarResult best;
    bool have = false;
    for (double ph0 : {0.0, 0.5 * kPi, kPi, -0.5 * kPi}) {
        Eigen::VectorXd theta(5);
        theta << baseline0, amp0, t2_0, freq0, ph0;
        auto res = detail::levmar(residual_fn, theta, m);
        if (!have || res.ssr < best.ssr) {
            best = res;
            have = true;
        }
    }
    if (!best.converged) {
        std::vector<double> last(best.params.data(), best.params.data() + best.params.size());
        throw FitError("fit_ramsey_decay did not converge", last);
    }

    RamseyDecayFit fit;
    fit.baseline = best.params(0);
    fit.amplitude = best.params(1);
    fit.t2_star_s = std::abs(best.params(2));
    fit.freq_hz = std::abs(best.params(3));
    fit.phase_rad = std::remainder(best.params(4), kTwoPi);
    fit.residual_rms = std::sqrt(best.ssr / m);
    const double end_envelope = std::exp(-std::pow(t.back() / fit.t2_star_s, p));
    fit.reliable_t2 = std::isfinite(fit.t2_star_s) && end_envelope <= 0.8;
    return fit;
}

LinewidthFit fit_linewidth_law(std::span<const double> nu_hz, std::span<const double> l_hz,
                               bool with_offset) {
    const auto m = static_cast<int>(nu_hz.size());
    if (m < 3 || l_hz.size() != nu_hz.size()) {
        throw SizeError("fit_linewidth_law needs >= 3 (nu, l) pairs");
    }
    std::vector<double> x(m);
    std::vector<double> y(m);
    for (int i = 0; i < m; ++i) {
        if (!(nu_hz[i] > 0.0) || !(l_hz[i] > 0.0)) {
            throw ParameterError("fit_linewidth_law: nu and l must be > 0");
        }
        x[i] = std::log(nu_hz[i]);
        y[i] = std::log(l_hz[i]);
    }
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / m;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / m;
    double sxx = 0.0;
    double sxy = 0.0;
    for (int i = 0; i < m; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) throw FitError("fit_linewidth_law: all update speeds are equal");

    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;

    LinewidthFit fit;
    fit.with_offset = with_offset;
    if (!with_offset) {
        fit.n = -slope;
        fit.amplitude = std::exp(intercept);
        fit.d_hz = 0.0;
        double ssr_log = 0.0;
        double ssr_lin = 0.0;
        for (int i = 0; i < m; ++i) {
            const double ry = y[i] - (intercept + slope * x[i]);
            ssr_log += ry * ry;
            const double model = fit.amplitude * std::pow(nu_hz[i], -fit.n);
            ssr_lin += (model - l_hz[i]) * (model - l_hz[i]);
        }
        const double s2 = m > 2 ? ssr_log / (m - 2) : 0.0;
        fit.n_sigma = std::sqrt(s2 / sxx);
        fit.d_sigma_hz = 0.0;
        fit.rms_hz = std::sqrt(ssr_lin / m);
        return fit;
    }

    auto residual_fn = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
        const double a = theta(0);
        const double n = theta(1);
        const double d = theta.size() > 2 ? theta(2) : 0.0;
        for (int i = 0; i < m; ++i) {
            const double pw = std::pow(nu_hz[i], -n);
            r(i) = a * pw + d - l_hz[i];
            jac(i, 0) = pw;
            jac(i, 1) = -a * pw * x[i];
            if (theta.size() > 2) jac(i, 2) = 1.0;
        }
    };

    // Two starts: pure power law, and most of the smallest l as offset.
    const double l_min = *std::min_element(l_hz.begin(), l_hz.end());
    detail::LevMarResult best;
    bool have = false;
    for (double d0 : {0.0, 0.8 * l_min}) {
        double a0 = std::exp(intercept);
        double n0 = -slope;
        if (d0 > 0.0) {
            // Re-seed amplitude/exponent on the offset-corrected values.
            double sxy2 = 0.0;
            double my2 = 0.0;
            std::vector<double> y2(m);
            for (int i = 0; i < m; ++i) {
                y2[i] = std::log(std::max(l_hz[i] - d0, 1e-12 * l_min));
                my2 += y2[i];
            }
            my2 /= m;
            for (int i = 0; i < m; ++i) sxy2 += (x[i] - mx) * (y2[i] - my2);
            n0 = -sxy2 / sxx;
            a0 = std::exp(my2 + n0 * mx);
        }
        Eigen::VectorXd theta(3);
        theta << a0, n0, d0;
        auto res = detail::levmar(residual_fn, theta, m);
        if (!have || res.ssr < best.ssr) {
            best = res;
            have = true;
        }
    }
    if (!best.converged) {
        std::vector<double> last(best.params.data(), best.params.data() + best.params.size());
        throw FitError("fit_linewidth_law did not converge", last);
    }

    double d_sigma = std::sqrt(std::max(0.0, best.covariance(2, 2)));
    double d_fitted = best.params(2);
    if (d_fitted < 0.0) {
        // Bound d at zero: refit the pure power law with d pinned, keep the
        // unconstrained sigma so callers can still judge consistency with 0.
        Eigen::VectorXd theta(2);
        theta << best.params(0), best.params(1);
        auto pinned = detail::levmar(residual_fn, theta, m);
        best.params(0) = pinned.params(0);
        best.params(1) = pinned.params(1);
        best.ssr = pinned.ssr;
        best.covariance.topLeftCorner(2, 2) = pinned.covariance;
        d_fitted = 0.0;
    }
    fit.amplitude = best.params(0);
    fit.n = best.params(1);
    fit.d_hz = d_fitted;
    fit.n_sigma = std::sqrt(std::max(0.0, best.covariance(1, 1)));
    fit.d_sigma_hz = d_sigma;
    fit.rms_hz = std::sqrt(best.ssr / m);
    return fit;
}

void save_spectrum(const Spectrum& spectrum, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out << "freq_hz,amp\n";
    char buf[96];
    for (std::size_t i = 0; i < spectrum.freqs_hz.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", spectrum.freqs_hz[i], spectrum.amps[i]);
        out << buf;
    }
    if (!out) throw FormatError("write failed: " + path.string());
}

Spectrum load_spectrum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "freq_hz,amp") throw FormatError(path.string() + ": row 1: expected header 'freq_hz,amp'");
    Spectrum spec;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char* s = line.c_str();
        char* end = nullptr;
        const double f = std::strtod(s, &end);
        if (end == s || *end != ',') {
            throw FormatError(path.string() + ": row " + std::to_string(row) + ": malformed row");
        }
        const char* s2 = end + 1;
        const double a = std::strtod(s2, &end);
        if (end == s2 || *end != '\0') {
            throw FormatError(path.string() + ": row " + std::to_string(row) + ": malformed row");
        }
        if (!spec.freqs_hz.empty() && f <= spec.freqs_hz.back()) {
            throw FormatError(path.string() + ": row " + std::to_string(row) + ": frequencies must ascend");
        }
        spec.freqs_hz.push_back(f);
        spec.amps.push_back(a);
    }
    if (spec.freqs_hz.size() < 2) throw FormatError(path.string() + ": need at least 2 rows");
    spec.window = WindowFn::Rectangular;
    spec.zero_pad_factor = 1;
    spec.n_signal = spec.freqs_hz.size();
    spec.dt_s = 0.0;
    spec.coherent_gain = 1.0;
    return spec;
}

} // namespace driftlock::spectral
