#include "driftlock/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "driftlock/errors.hpp"

namespace driftlock::ctrl {

std::string to_string(Scheme scheme) {
    switch (scheme) {
    case Scheme::Feedback: return "feedback";
    case Scheme::Feedforward: return "feedforward";
    case Scheme::IdealFeedback: return "ideal_feedback";
    case Scheme::OpenLoop: return "open_loop";
    }
    return "open_loop";
}

Scheme scheme_from_string(const std::string& token) {
    if (token == "feedback") return Scheme::Feedback;
    if (token == "feedforward") return Scheme::Feedforward;
    if (token == "ideal_feedback" || token == "ideal") return Scheme::IdealFeedback;
    if (token == "open_loop" || token == "open") return Scheme::OpenLoop;
    throw ConfigError("unknown control scheme '" + token + "'");
}

void ControlPolicy::validate() const {
    if (!(update_period_s > 0.0) || !std::isfinite(update_period_s)) {
        throw ParameterError("control.update_period_s must be finite and > 0");
    }
    if (scheme == Scheme::Feedforward) {
        if (!model) throw ParameterError("feedforward control requires a predictor model");
        if (horizon_s && !(*horizon_s >= 0.0)) throw ParameterError("control.horizon_s must be >= 0");
    }
}

ControlRun run_loop(const NoiseTrace& trace, const tracker::EstimateStream& estimates,
                    const ControlPolicy& policy) {
    trace.validate();
    estimates.validate();
    policy.validate();
    const double tau = policy.update_period_s;
    if (tau < trace.dt_s * (1.0 - 1e-9)) {
        throw ParameterError("update period must be at least the trace sample period");
    }

    ControlRun run;
    run.scheme = policy.scheme;
    run.update_period_s = tau;
    run.estimates = estimates;

    const double t0 = trace.t0_s;
    const double t_end = trace.end_time_s();
    const auto n_updates =
        static_cast<std::size_t>(std::floor((t_end - t0) / tau + 1e-9)) + 1;

    const auto& entries = estimates.entries;
    double cadence = 0.0;
    if (policy.scheme == Scheme::Feedforward) {
        cadence = estimates.cadence_s();
    }
    const int m_in = policy.model ? policy.model->input_length : 0;
    const int n_out = policy.model ? policy.model->output_length : 0;

    bool warmed_up = policy.scheme == Scheme::IdealFeedback || policy.scheme == Scheme::OpenLoop;
    run.warmup_end_s = warmed_up ? t0 : std::numeric_limits<double>::infinity();

    std::vector<double> recent(static_cast<std::size_t>(std::max(m_in, 0)));
    std::size_t avail = 0; // entries with t_avail <= current update instant
    double correction = 0.0;

    run.correction.reserve(n_updates);
    for (std::size_t k = 0; k < n_updates; ++k) {
        const double t_k = t0 + static_cast<double>(k) * tau;
        while (avail < entries.size() && entries[avail].t_avail_s <= t_k + 1e-9 * tau) ++avail;

        switch (policy.scheme) {
        case Scheme::OpenLoop:
            correction = 0.0;
            break;
        case Scheme::IdealFeedback:
            correction = trace.value_at(t_k);
            break;
        case Scheme::Feedback:
            if (avail > 0) {
                correction = entries[avail - 1].est_hz;
                if (!warmed_up) {
                    warmed_up = true;
                    run.warmup_end_s = t_k;
                }
            }
            break;
        case Scheme::Feedforward:
            if (avail >= static_cast<std::size_t>(m_in)) {
                for (int j = 0; j < m_in; ++j) {
                    recent[static_cast<std::size_t>(j)] =
                        entries[avail - static_cast<std::size_t>(m_in) + static_cast<std::size_t>(j)].est_hz;
                }
                const double t_last_eff = entries[avail - 1].t_eff_s;
                const double target = policy.horizon_s ? t_last_eff + *policy.horizon_s : t_k;
                auto pick = static_cast<long>(std::llround((target - t_last_eff) / cadence)) - 1;
                const auto idx = static_cast<std::size_t>(std::clamp<long>(pick, 0, n_out - 1));
                try {
                    predictor::PredictContext context{t_last_eff, cadence};
                    auto prediction = predictor::predict(*policy.model, recent, context);
                    if (!std::isfinite(prediction[idx])) throw ModelError("non-finite prediction");
                    correction = prediction[idx];
                    if (!warmed_up) {
                        warmed_up = true;
                        run.warmup_end_s = t_k;
                    }
                } catch (const Error&) {
                    // Predictor failure: hold the previous correction.
                    ++run.held_updates;
                }
            }
            break;
        }
        run.correction.push_back({t_k, correction});
    }

    run.residual = apply_correction(trace, run.correction);
    return run;
}

NoiseTrace apply_correction(const NoiseTrace& trace, std::span<const CorrectionStep> correction) {
    trace.validate();
    if (correction.empty()) throw ParameterError("apply_correction: empty correction");
    NoiseTrace residual;
    residual.dt_s = trace.dt_s;
    residual.t0_s = trace.t0_s;
    residual.label = trace.label.empty() ? "residual" : trace.label + ".residual";
    residual.values.resize(trace.size());
    double min_gap = trace.dt_s;
    if (correction.size() > 1) min_gap = std::min(min_gap, correction[1].t_s - correction[0].t_s);
    const double slack = 1e-9 * min_gap;
    std::size_t step = 0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double t_i = trace.time_at(i);
        while (step + 1 < correction.size() && correction[step + 1].t_s <= t_i + slack) ++step;
        residual.values[i] = trace.values[i] - correction[step].c_hz;
    }
    return residual;
}

double efficiency(const NoiseTrace& original, const NoiseTrace& residual) {
    if (original.size() != residual.size() || original.dt_s != residual.dt_s) {
        throw ParameterError("efficiency: traces must share length and dt");
    }
    const double rms0 = original.rms();
    if (rms0 == 0.0) throw UndefinedEfficiencyError("efficiency undefined for an all-zero original trace");
    return 1.0 - residual.rms() / rms0;
}

double run_efficiency(const NoiseTrace& original, const ControlRun& run, bool include_warmup) {
    if (include_warmup || run.warmup_end_s <= original.t0_s) return efficiency(original, run.residual);
    const double start = run.warmup_end_s;
    NoiseTrace orig_slice;
    NoiseTrace res_slice;
    orig_slice.dt_s = res_slice.dt_s = original.dt_s;
    orig_slice.t0_s = res_slice.t0_s = start;
    for (std::size_t i = 0; i < original.size(); ++i) {
        if (original.time_at(i) + 1e-9 * original.dt_s < start) continue;
        orig_slice.values.push_back(original.values[i]);
        res_slice.values.push_back(run.residual.values[i]);
    }
    if (orig_slice.values.empty()) {
        throw UndefinedEfficiencyError("run never left warm-up; no samples to score");
    }
    return efficiency(orig_slice, res_slice);
}

std::vector<std::pair<double, double>> efficiency_curve(
    const NoiseTrace& trace, std::span<const double> speeds_hz, Scheme scheme,
    const tracker::EstimateStream* estimates,
    std::shared_ptr<const predictor::PredictorModel> model) {
    const bool needs_estimates = scheme == Scheme::Feedback || scheme == Scheme::Feedforward;
    if (needs_estimates && estimates == nullptr) {
        throw ParameterError("efficiency_curve: scheme " + to_string(scheme) + " needs an estimate stream");
    }
    static const tracker::EstimateStream kEmpty;
    std::vector<std::pair<double, double>> curve;
    curve.reserve(speeds_hz.size());
    for (double nu : speeds_hz) {
        if (!(nu > 0.0)) throw ParameterError("efficiency_curve: update speed must be > 0");
        ControlPolicy policy;
        policy.scheme = scheme;
        policy.update_period_s = 1.0 / nu;
        policy.model = model;
        auto run = run_loop(trace, needs_estimates ? *estimates : kEmpty, policy);
        curve.emplace_back(nu, run_efficiency(trace, run));
    }
    return curve;
}

} // namespace driftlock::ctrl
