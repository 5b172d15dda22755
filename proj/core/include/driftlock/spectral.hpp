// Spectral toolkit: FFT amplitude spectra, Welch power spectral density,
// Lorentzian peak fitting, Ramsey decay fitting, and the linewidth-vs-speed
// power-law regression.
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "driftlock/ramsey_curve.hpp"
#include "driftlock/trace.hpp"

namespace driftlock::spectral {

enum class WindowFn { Rectangular, Hann };

struct SpectrumOptions {
    WindowFn window = WindowFn::Hann;
    int zero_pad_factor = 4;
    bool remove_mean = true;
};

/// One-sided spectrum. For amplitude spectra (fft_spectrum) a pure cosine of
/// amplitude A peaks at A; interior bins carry the factor 2, DC and Nyquist
/// carry 1, everything divided by the window's coherent gain sum(w). For
/// power spectra (psd) amps holds one-sided density in units^2/Hz.
struct Spectrum {
    std::vector<double> freqs_hz;
    std::vector<double> amps;
    WindowFn window = WindowFn::Hann;
    int zero_pad_factor = 1;
    std::size_t n_signal = 0;
    double dt_s = 0.0;
    double coherent_gain = 0.0; // sum of window samples

    double df_hz() const { return freqs_hz.size() > 1 ? freqs_hz[1] - freqs_hz[0] : 0.0; }
};

Spectrum fft_spectrum(std::span<const double> signal, double dt_s, const SpectrumOptions& options = {});

/// Energy of the windowed (mean-removed, pre-padding) signal reconstructed
/// from an amplitude spectrum; equals sum((w_i x_i)^2) by Parseval.
double spectrum_energy(const Spectrum& spectrum);

struct PsdOptions {
    int segments = 8; // Welch segment count at 50% overlap
    WindowFn window = WindowFn::Hann;
    bool remove_mean = true;
};

Spectrum psd(const NoiseTrace& trace, const PsdOptions& options = {});

struct Peak {
    double center_hz = 0.0;
    double hwhm_hz = 0.0;
    double amplitude = 0.0; // height above baseline
};

struct PeakFit {
    std::vector<Peak> peaks;       // sorted by center
    std::vector<Peak> peak_sigmas; // 1-sigma uncertainties, same layout
    double baseline = 0.0;
    double residual_rms = 0.0;
    double aicc = 0.0; // small-sample-corrected information criterion; lower wins
    int iterations = 0;
};

/// Sum-of-Lorentzians-plus-baseline least squares (Levenberg-Marquardt with
/// analytic Jacobian). Initialization from the largest local maxima; pass
/// `init` to override. `band` restricts the fit window (Hz).
PeakFit fit_lorentzian(const Spectrum& spectrum, int n_peaks,
                       std::optional<std::vector<Peak>> init = std::nullopt,
                       std::optional<std::pair<double, double>> band = std::nullopt);

struct PeakSelection {
    PeakFit fit;
    int n_peaks = 1;
};

/// One peak or two? Fits both and keeps the two-peak model only when it is
/// admissible: it converged, beats the single peak on the information
/// criterion, both components have positive amplitude, and the centers are
/// resolved (separated by at least the mean fitted width). A two-peak fit
/// that fails or degenerates counts as evidence for one peak.
PeakSelection select_lorentzian_peaks(const Spectrum& spectrum,
                                      std::optional<std::pair<double, double>> band = std::nullopt);

struct RamseyDecayFit {
    double t2_star_s = 0.0;
    double freq_hz = 0.0;
    double phase_rad = 0.0;
    double amplitude = 0.0;
    double baseline = 0.0;
    bool reliable_t2 = true; // false when the curve shows < 20% envelope decay
    double residual_rms = 0.0;
};

/// Fits baseline + A exp(-(t/T2)^p) cos(2 pi f t + phase) with p fixed.
RamseyDecayFit fit_ramsey_decay(const RamseyCurve& curve, double decay_exponent = 1.0);

struct LinewidthFit {
    double n = 0.0;         // exponent of l = A / nu^n (+ d)
    double d_hz = 0.0;      // residual broadening, >= 0
    double amplitude = 1.0; // A
    double n_sigma = 0.0;
    double d_sigma_hz = 0.0;
    double rms_hz = 0.0; // residual rms in linear l-space
    bool with_offset = false;
};

/// No-offset form: straight-line regression of ln(l) on ln(nu). Offset form:
/// Levenberg-Marquardt on l = A nu^-n + d with d bounded at 0.
LinewidthFit fit_linewidth_law(std::span<const double> nu_hz, std::span<const double> l_hz,
                               bool with_offset);

/// CSV persistence: header `freq_hz,amp`. Loading recovers only the grid and
/// values (window metadata is not round-tripped), which is all the fits need.
void save_spectrum(const Spectrum& spectrum, const std::filesystem::path& path);
Spectrum load_spectrum(const std::filesystem::path& path);

} // namespace driftlock::spectral
