// Closed-loop engine: sample-and-hold corrections updated every tau seconds
// under feedback (latest estimate), feedforward (predicted future value),
// ideal feedback (true value, zero delay), or open loop (no correction).
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "driftlock/predictor.hpp"
#include "driftlock/tracker.hpp"
#include "driftlock/trace.hpp"

namespace driftlock::ctrl {

enum class Scheme { Feedback, Feedforward, IdealFeedback, OpenLoop };

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& token);

struct ControlPolicy {
    Scheme scheme = Scheme::OpenLoop;
    double update_period_s = 1.0; // tau
    std::shared_ptr<const predictor::PredictorModel> model; // feedforward only
    /// Feedforward target: the applied prediction aims horizon_s ahead of the
    /// newest estimate's effective time. Leave unset to cancel the tracker
    /// latency exactly (the prediction sample closest to the update instant).
    std::optional<double> horizon_s;

    void validate() const;
};

struct CorrectionStep {
    double t_s = 0.0;
    double c_hz = 0.0;
};

struct ControlRun {
    NoiseTrace residual;                 // trace - correction, same grid as the input
    std::vector<CorrectionStep> correction; // right-continuous step function at multiples of tau
    Scheme scheme = Scheme::OpenLoop;
    double update_period_s = 0.0;
    double warmup_end_s = 0.0; // first instant with a non-warm-up correction
    int held_updates = 0;      // updates where a failure held the previous correction
    tracker::EstimateStream estimates;
};

/// Simulates the loop over the full trace. Corrections change only at
/// t0 + k tau; before any estimate is usable the correction is 0 (open-loop
/// warm-up). Predictor failures hold the previous correction and are counted.
ControlRun run_loop(const NoiseTrace& trace, const tracker::EstimateStream& estimates,
                    const ControlPolicy& policy);

/// Applies a right-continuous correction step function to a trace (sample i
/// sees the last step at or before its time). run_loop uses this internally;
/// it is exposed so corrections computed on one view of the noise can be
/// scored against another.
NoiseTrace apply_correction(const NoiseTrace& trace, std::span<const CorrectionStep> correction);

/// eta = 1 - rms(residual) / rms(original), rms about zero. Throws
/// UndefinedEfficiencyError when the original is identically zero.
double efficiency(const NoiseTrace& original, const NoiseTrace& residual);

/// Efficiency of a run against its input trace; warm-up samples are excluded
/// unless requested.
double run_efficiency(const NoiseTrace& original, const ControlRun& run, bool include_warmup = false);

/// eta per update speed nu = 1/tau. Ideal feedback and open loop need no
/// estimates; feedback/feedforward take the stream (and model) to reuse at
/// every speed.
std::vector<std::pair<double, double>> efficiency_curve(
    const NoiseTrace& trace, std::span<const double> speeds_hz, Scheme scheme,
    const tracker::EstimateStream* estimates = nullptr,
    std::shared_ptr<const predictor::PredictorModel> model = nullptr);

} // namespace driftlock::ctrl
