// Synthetic resonance-drift generation and trace transforms.
//
// A NoiseSpec sums independent components. Component i of a spec with seed s
// draws from the stream Rng::derive(s, i), so generating any single component
// with its derived sub-seed reproduces exactly its contribution to the sum.
#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "driftlock/trace.hpp"

namespace driftlock::noise {

/// Ornstein-Uhlenbeck (exponentially correlated) drift. Discretized exactly:
/// x[k+1] = phi x[k] + sigma sqrt(1-phi^2) w[k] with phi = exp(-rate dt), so
/// the stationary standard deviation is sigma at any dt. The initial sample
/// draws from the stationary distribution. rate 0 degenerates to a frozen
/// random offset.
struct OuComponent {
    double relaxation_rate_per_s = 0.0;
    double stationary_std_hz = 0.0;
};

/// 1/f^alpha band noise synthesized in the frequency domain: bin amplitudes
/// proportional to f^(-alpha/2) between the cutoffs, uniform random phases,
/// inverse transform, then rescaled so the realized rms equals
/// rms_amplitude_hz.
struct PowerLawComponent {
    double exponent = 1.0; // alpha in [0, 3]
    double rms_amplitude_hz = 0.0;
    double low_cutoff_hz = 0.0;
    double high_cutoff_hz = 0.0;
};

/// amplitude * sin(2 pi f t + phase), t measured from the trace start.
struct SineComponent {
    double amplitude_hz = 0.0;
    double frequency_hz = 0.0;
    double phase_rad = 0.0;
};

struct ConstantComponent {
    double offset_hz = 0.0;
};

using Component = std::variant<OuComponent, PowerLawComponent, SineComponent, ConstantComponent>;

struct NoiseSpec {
    std::vector<Component> components;
    std::uint64_t seed = 0;
};

/// Throws ParameterError / NyquistError when a component is out of range for
/// the grid (power-law cutoffs are checked against the dt_s Nyquist limit).
void validate(const NoiseSpec& spec, double dt_s);

/// floor(duration/dt)+1 samples starting at t=0; components summed.
/// Deterministic given spec.seed.
NoiseTrace generate(const NoiseSpec& spec, double duration_s, double dt_s);

/// One component on its own stream. generate() is the elementwise sum of
/// generate_component(components[i], Rng::derive(seed, i), ...) over i.
NoiseTrace generate_component(const Component& component, std::uint64_t sub_seed,
                              double duration_s, double dt_s);

/// Linear interpolation onto a new uniform grid with the same start time.
/// Endpoints are preserved when the duration divides evenly.
NoiseTrace resample(const NoiseTrace& trace, double dt_new_s);

/// Zero-phase moving average: sample i becomes the mean of the piecewise
/// linear interpolant over [t_i - window/2, t_i + window/2], clamped at the
/// ends. This is the trace a detector of that bandwidth would record.
NoiseTrace moving_average(const NoiseTrace& trace, double window_s);

} // namespace driftlock::noise
