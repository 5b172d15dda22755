// driftlock: deterministic simulation and analysis of measurement-based
// drift correction on a resonant sensor. Every subcommand reads one JSON
// config, writes its artifacts plus a manifest into the output directory,
// and is bit-reproducible from (config, seed).
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "driftlock/control.hpp"
#include "driftlock/errors.hpp"
#include "driftlock/noise.hpp"
#include "driftlock/predictor.hpp"
#include "driftlock/ramsey.hpp"
#include "driftlock/rng.hpp"
#include "driftlock/spectral.hpp"
#include "driftlock/tracker.hpp"
#include "driftlock/trace.hpp"

namespace {

using json = nlohmann::json;
using namespace driftlock;

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitGeneric = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumeric = 4;

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string file_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

/// Write-temp-then-rename so a crash never leaves a half-written artifact.
void atomic_write(const std::filesystem::path& target,
                  const std::function<void(const std::filesystem::path&)>& writer) {
    auto tmp = target;
    tmp += ".tmp";
    writer(tmp);
    std::filesystem::rename(tmp, target);
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed_override = 0;
    bool has_seed_override = false;
};

struct Workspace {
    cli::RunConfig config;
    std::filesystem::path out;
    json manifest;
    std::vector<std::string> outputs;

    std::uint64_t seed() const { return config.seed; }

    void note_output(const std::string& name) { outputs.push_back(name); }

    void write_manifest() {
        manifest["outputs"] = outputs;
        atomic_write(out / "manifest.json", [&](const std::filesystem::path& p) {
            std::ofstream f(p, std::ios::binary);
            f << manifest.dump(2) << '\n';
            if (!f) throw FormatError("write failed: " + p.string());
        });
    }
};

Workspace open_workspace(const std::string& command, const CommonArgs& args) {
    Workspace ws;
    ws.config = cli::load_config(args.config_path);
    if (args.has_seed_override) ws.config.seed = args.seed_override;

    std::filesystem::path out;
    if (!args.out_dir.empty()) {
        out = args.out_dir;
    } else if (ws.config.output_dir) {
        out = *ws.config.output_dir;
    } else {
        throw ConfigError("no output directory: set config.output_dir or pass --out");
    }
    std::filesystem::create_directories(out);
    ws.out = out;

    ws.manifest["command"] = command;
    ws.manifest["version"] = kVersion;
    ws.manifest["seed"] = ws.config.seed;
    ws.manifest["config_path"] = args.config_path;
    ws.manifest["config_hash"] = file_hash(args.config_path);
    ws.manifest["config"] = ws.config.document;
    if (args.has_seed_override) ws.manifest["seed_override"] = args.seed_override;
    return ws;
}

/// The input trace: --input wins, then noise.trace_path, then synthesis from
/// noise.spec with the noise-stream seed.
NoiseTrace resolve_trace(Workspace& ws, const std::string& input_override) {
    if (!input_override.empty()) {
        ws.manifest["inputs"]["trace"] = {{"path", input_override}, {"hash", file_hash(input_override)}};
        return load_trace(input_override);
    }
    if (!ws.config.noise) throw ConfigError("config.noise: missing (and no --input given)");
    const auto& section = *ws.config.noise;
    if (section.trace_path) {
        ws.manifest["inputs"]["trace"] = {{"path", section.trace_path->string()},
                                          {"hash", file_hash(*section.trace_path)}};
        return load_trace(*section.trace_path);
    }
    noise::NoiseSpec spec = *section.spec;
    spec.seed = cli::stream_seed(ws.seed(), cli::SeedStream::Noise);
    auto trace = noise::generate(spec, section.duration_s, section.dt_s);
    ws.manifest["inputs"]["trace"] = {{"synthesized", true}, {"seed", spec.seed}};
    return trace;
}

tracker::EstimateStream run_tracker(Workspace& ws, const NoiseTrace& trace) {
    if (!ws.config.tracker) throw ConfigError("config.tracker: missing");
    const auto seed = cli::stream_seed(ws.seed(), cli::SeedStream::Tracker);
    if (const auto* odmr = std::get_if<tracker::OdmrConfig>(&*ws.config.tracker)) {
        return tracker::odmr_track(trace, *odmr, seed);
    }
    return tracker::lia_track(trace, std::get<tracker::LiaConfig>(*ws.config.tracker), seed);
}

std::shared_ptr<const predictor::PredictorModel> load_policy_model(const Workspace& ws,
                                                                   const std::string& model_override) {
    std::filesystem::path path;
    if (!model_override.empty()) {
        path = model_override;
    } else if (ws.config.control && ws.config.control->model_path) {
        path = *ws.config.control->model_path;
    } else {
        throw ConfigError("feedforward control needs control.model_path or --model");
    }
    return std::make_shared<predictor::PredictorModel>(predictor::load_model(path));
}

json linewidth_fit_to_json(const spectral::LinewidthFit& fit) {
    return json{{"n", fit.n},
                {"n_sigma", fit.n_sigma},
                {"d_hz", fit.d_hz},
                {"d_sigma_hz", fit.d_sigma_hz},
                {"amplitude", fit.amplitude},
                {"rms_hz", fit.rms_hz},
                {"with_offset", fit.with_offset}};
}

json peak_fit_to_json(const spectral::PeakFit& fit) {
    json peaks = json::array();
    for (std::size_t i = 0; i < fit.peaks.size(); ++i) {
        peaks.push_back({{"center_hz", fit.peaks[i].center_hz},
                         {"center_sigma_hz", fit.peak_sigmas[i].center_hz},
                         {"hwhm_hz", fit.peaks[i].hwhm_hz},
                         {"hwhm_sigma_hz", fit.peak_sigmas[i].hwhm_hz},
                         {"amplitude", fit.peaks[i].amplitude}});
    }
    return json{{"peaks", peaks},
                {"baseline", fit.baseline},
                {"residual_rms", fit.residual_rms},
                {"aicc", fit.aicc}};
}

json decay_fit_to_json(const spectral::RamseyDecayFit& fit) {
    return json{{"t2_star_s", fit.t2_star_s}, {"freq_hz", fit.freq_hz},
                {"phase_rad", fit.phase_rad}, {"amplitude", fit.amplitude},
                {"baseline", fit.baseline},   {"reliable_t2", fit.reliable_t2},
                {"residual_rms", fit.residual_rms}};
}

void write_json(Workspace& ws, const std::string& name, const json& doc) {
    atomic_write(ws.out / name, [&](const std::filesystem::path& p) {
        std::ofstream f(p, std::ios::binary);
        f << doc.dump(2) << '\n';
        if (!f) throw FormatError("write failed: " + p.string());
    });
    ws.note_output(name);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_generate(const CommonArgs& args) {
    Workspace ws = open_workspace("generate", args);
    if (!ws.config.noise || !ws.config.noise->spec) {
        throw ConfigError("config.noise.spec: missing (generate synthesizes a trace)");
    }
    auto trace = resolve_trace(ws, "");
    atomic_write(ws.out / "trace.csv", [&](const std::filesystem::path& p) { save_trace(trace, p); });
    ws.note_output("trace.csv");
    ws.write_manifest();
    std::printf("trace: %zu samples, dt %.6g s, duration %.6g s, rms %.6g Hz\n", trace.size(),
                trace.dt_s, trace.duration_s(), trace.rms());
    return kExitOk;
}

int cmd_track(const CommonArgs& args, const std::string& input) {
    Workspace ws = open_workspace("track", args);
    auto trace = resolve_trace(ws, input);
    auto estimates = run_tracker(ws, trace);
    atomic_write(ws.out / "estimates.csv",
                 [&](const std::filesystem::path& p) { tracker::save_estimates(estimates, p); });
    ws.note_output("estimates.csv");
    ws.write_manifest();
    const auto& entries = estimates.entries;
    double latency = entries.empty() ? 0.0 : entries.front().t_avail_s - entries.front().t_eff_s;
    std::printf("estimates: %zu entries, latency %.6g s\n", entries.size(), latency);
    return kExitOk;
}

int cmd_loop(const CommonArgs& args, const std::string& input, const std::string& scheme_override,
             const std::string& model_override) {
    Workspace ws = open_workspace("loop", args);
    if (!ws.config.control) throw ConfigError("config.control: missing");
    auto trace = resolve_trace(ws, input);

    ctrl::ControlPolicy policy;
    policy.scheme = scheme_override.empty() ? ws.config.control->scheme
                                            : ctrl::scheme_from_string(scheme_override);
    policy.update_period_s = ws.config.control->update_period_s;
    policy.horizon_s = ws.config.control->horizon_s;

    tracker::EstimateStream estimates;
    if (policy.scheme == ctrl::Scheme::Feedback || policy.scheme == ctrl::Scheme::Feedforward) {
        estimates = run_tracker(ws, trace);
    }
    if (policy.scheme == ctrl::Scheme::Feedforward) {
        policy.model = load_policy_model(ws, model_override);
        std::filesystem::path model_file = model_override.empty()
                                               ? *ws.config.control->model_path
                                               : std::filesystem::path(model_override);
        ws.manifest["inputs"]["model"] = {{"path", model_file.string()}, {"hash", file_hash(model_file)}};
    }

    auto run = ctrl::run_loop(trace, estimates, policy);
    atomic_write(ws.out / "residual.csv",
                 [&](const std::filesystem::path& p) { save_trace(run.residual, p); });
    ws.note_output("residual.csv");
    atomic_write(ws.out / "correction.csv", [&](const std::filesystem::path& p) {
        std::ofstream f(p, std::ios::binary);
        f << "t_s,correction_hz\n";
        char buf[80];
        for (const auto& step : run.correction) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", step.t_s, step.c_hz);
            f << buf;
        }
        if (!f) throw FormatError("write failed: " + p.string());
    });
    ws.note_output("correction.csv");
    if (!estimates.entries.empty()) {
        atomic_write(ws.out / "estimates.csv",
                     [&](const std::filesystem::path& p) { tracker::save_estimates(estimates, p); });
        ws.note_output("estimates.csv");
    }

    json run_doc;
    run_doc["scheme"] = ctrl::to_string(run.scheme);
    run_doc["update_period_s"] = run.update_period_s;
    run_doc["warmup_end_s"] = run.warmup_end_s;
    run_doc["held_updates"] = run.held_updates;
    run_doc["efficiency"] = ctrl::run_efficiency(trace, run);
    run_doc["efficiency_with_warmup"] = ctrl::run_efficiency(trace, run, true);
    run_doc["residual_rms_hz"] = run.residual.rms();
    run_doc["original_rms_hz"] = trace.rms();
    run_doc["files"] = {{"residual", "residual.csv"}, {"correction", "correction.csv"}};
    write_json(ws, "run.json", run_doc);
    ws.write_manifest();
    std::printf("loop: scheme %s, eta %.4f (steady state), residual rms %.6g Hz\n",
                ctrl::to_string(run.scheme).c_str(), run_doc["efficiency"].get<double>(),
                run.residual.rms());
    return kExitOk;
}

int cmd_train(const CommonArgs& args, const std::string& input) {
    Workspace ws = open_workspace("train", args);
    if (!ws.config.train) throw ConfigError("config.train: missing");
    const auto& section = *ws.config.train;
    auto trace = resolve_trace(ws, input);

    std::vector<double> series;
    if (section.source == "estimates") {
        auto estimates = run_tracker(ws, trace);
        series.reserve(estimates.entries.size());
        for (const auto& e : estimates.entries) series.push_back(e.est_hz);
    } else {
        series = trace.values;
    }

    auto dataset = predictor::build_dataset(series, section.input_length, section.output_length);
    auto result = predictor::train(dataset, section.hidden, section.config);

    atomic_write(ws.out / "model.json",
                 [&](const std::filesystem::path& p) { predictor::save_model(result.model, p); });
    ws.note_output("model.json");
    atomic_write(ws.out / "training_report.csv", [&](const std::filesystem::path& p) {
        std::ofstream f(p, std::ios::binary);
        f << "epoch,train_mse,val_mse\n";
        char buf[96];
        for (std::size_t e = 0; e < result.report.train_loss.size(); ++e) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e, result.report.train_loss[e],
                          result.report.val_loss[e]);
            f << buf;
        }
        if (!f) throw FormatError("write failed: " + p.string());
    });
    ws.note_output("training_report.csv");
    ws.manifest["model_hash"] = file_hash(ws.out / "model.json");
    ws.write_manifest();
    const auto best = static_cast<std::size_t>(result.report.best_epoch);
    std::printf("train: %zu windows, best epoch %d, val mse %.6g%s\n", dataset.size(),
                result.report.best_epoch, result.report.val_loss[best],
                result.report.early_stopped ? " (early stop)" : "");
    return kExitOk;
}

int cmd_ramsey(const CommonArgs& args, const std::string& input) {
    Workspace ws = open_workspace("ramsey", args);
    if (!ws.config.ramsey) throw ConfigError("config.ramsey: missing");
    auto residual = resolve_trace(ws, input);
    auto curve =
        ramsey::simulate_ramsey(residual, *ws.config.ramsey, cli::stream_seed(ws.seed(), cli::SeedStream::Ramsey));

    atomic_write(ws.out / "curve.csv", [&](const std::filesystem::path& p) { ramsey::save_curve(curve, p); });
    ws.note_output("curve.csv");

    const double dt_evol = curve.t_evol_s[1] - curve.t_evol_s[0];
    auto spectrum = spectral::fft_spectrum(curve.signal, dt_evol, {});
    atomic_write(ws.out / "spectrum.csv",
                 [&](const std::filesystem::path& p) { spectral::save_spectrum(spectrum, p); });
    ws.note_output("spectrum.csv");

    json fits;
    try {
        auto decay = spectral::fit_ramsey_decay(curve, ws.config.ramsey->decay_exponent);
        fits["decay"] = decay_fit_to_json(decay);
    } catch (const Error& e) {
        fits["decay"] = {{"error", e.what()}};
    }
    try {
        auto selection = spectral::select_lorentzian_peaks(
            spectrum, std::make_pair(5.0 * spectrum.df_hz(), spectrum.freqs_hz.back()));
        fits["peaks"] = peak_fit_to_json(selection.fit);
        fits["n_peaks"] = selection.n_peaks;
    } catch (const Error& e) {
        fits["peaks"] = {{"error", e.what()}};
    }
    write_json(ws, "fits.json", fits);
    ws.write_manifest();
    std::printf("ramsey: %zu points, wall span %.6g s\n", curve.t_evol_s.size(), curve.wall_span_s);
    return kExitOk;
}

int cmd_sweep(const CommonArgs& args, const std::string& input, const std::string& scheme_override,
              const std::string& model_override, int parallel) {
    Workspace ws = open_workspace("sweep", args);
    if (!ws.config.sweep) throw ConfigError("config.sweep: missing");
    if (!ws.config.ramsey) throw ConfigError("config.ramsey: missing");
    auto trace = resolve_trace(ws, input);

    ramsey::SweepConfig sweep_cfg;
    sweep_cfg.nu_hz = ws.config.sweep->nu_hz;
    sweep_cfg.scheme = scheme_override.empty() ? ws.config.sweep->scheme
                                               : ctrl::scheme_from_string(scheme_override);
    sweep_cfg.tracker = ws.config.tracker;
    sweep_cfg.ramsey = *ws.config.ramsey;
    sweep_cfg.adapt_span = ws.config.sweep->adapt_span;
    sweep_cfg.correction_lowpass_window_s = ws.config.sweep->correction_lowpass_window_s;
    if (ws.config.control) sweep_cfg.horizon_s = ws.config.control->horizon_s;
    if (sweep_cfg.scheme == ctrl::Scheme::Feedforward) {
        sweep_cfg.model = load_policy_model(ws, model_override);
    }

    auto points = ramsey::sweep_linewidth(trace, sweep_cfg, cli::stream_seed(ws.seed(), cli::SeedStream::Sweep),
                                          parallel);
    atomic_write(ws.out / "sweep.csv",
                 [&](const std::filesystem::path& p) { ramsey::save_sweep(points, p); });
    ws.note_output("sweep.csv");

    std::vector<double> nu;
    std::vector<double> l;
    int failures = 0;
    for (const auto& point : points) {
        if (point.flag == "failed") {
            ++failures;
            std::fprintf(stderr, "point nu=%g failed: %s\n", point.nu_hz, point.note.c_str());
            continue;
        }
        nu.push_back(point.nu_hz);
        l.push_back(point.l_hz);
    }

    json law = json::object();
    if (nu.size() >= 3) {
        try {
            law["power_law"] = linewidth_fit_to_json(spectral::fit_linewidth_law(nu, l, false));
            law["power_law_with_offset"] = linewidth_fit_to_json(spectral::fit_linewidth_law(nu, l, true));
        } catch (const Error& e) {
            law["error"] = e.what();
        }
    } else {
        law["error"] = "fewer than 3 clean points; no law fit";
    }
    write_json(ws, "law_fit.json", law);
    ws.write_manifest();

    for (const auto& point : points) {
        std::printf("nu %.6g Hz: l %.6g Hz, T2* %.6g s [%s]\n", point.nu_hz, point.l_hz,
                    point.t2_star_s, point.flag.c_str());
    }
    if (law.contains("power_law_with_offset")) {
        const auto& fit = law["power_law_with_offset"];
        std::printf("law: n %.4f +- %.4f, d %.6g +- %.6g Hz\n", fit["n"].get<double>(),
                    fit["n_sigma"].get<double>(), fit["d_hz"].get<double>(),
                    fit["d_sigma_hz"].get<double>());
    }
    return failures == 0 ? kExitOk : kExitNumeric;
}

int cmd_fit(const CommonArgs& args, const std::string& law_csv, bool with_offset,
            const std::string& lorentzian_csv, int n_peaks, const std::string& decay_csv,
            double decay_exponent) {
    const int modes = (!law_csv.empty() ? 1 : 0) + (!lorentzian_csv.empty() ? 1 : 0) +
                      (!decay_csv.empty() ? 1 : 0);
    if (modes != 1) {
        throw ConfigError("fit: give exactly one of --law, --lorentzian, --ramsey-decay");
    }

    Workspace ws = open_workspace("fit", args);
    json result;
    if (!law_csv.empty()) {
        std::ifstream in(law_csv, std::ios::binary);
        if (!in) throw FormatError("cannot open " + law_csv);
        std::string line;
        std::getline(in, line);
        if (!line.starts_with("nu_hz,l_hz")) {
            throw FormatError(law_csv + ": row 1: expected 'nu_hz,l_hz,...' header");
        }
        std::vector<double> nu;
        std::vector<double> l;
        std::size_t row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (line.empty()) continue;
            if (line.find(",failed") != std::string::npos) continue; // skip flagged points
            char* end = nullptr;
            const double a = std::strtod(line.c_str(), &end);
            if (*end != ',') throw FormatError(law_csv + ": row " + std::to_string(row));
            const double b = std::strtod(end + 1, &end);
            nu.push_back(a);
            l.push_back(b);
        }
        ws.manifest["inputs"]["points"] = {{"path", law_csv}, {"hash", file_hash(law_csv)}};
        auto fit = spectral::fit_linewidth_law(nu, l, with_offset);
        result["law"] = linewidth_fit_to_json(fit);
        std::printf("law: n %.6g +- %.2g, d %.6g +- %.2g Hz, amplitude %.6g, rms %.6g Hz\n", fit.n,
                    fit.n_sigma, fit.d_hz, fit.d_sigma_hz, fit.amplitude, fit.rms_hz);
    } else if (!lorentzian_csv.empty()) {
        auto spectrum = spectral::load_spectrum(lorentzian_csv);
        ws.manifest["inputs"]["spectrum"] = {{"path", lorentzian_csv}, {"hash", file_hash(lorentzian_csv)}};
        if (n_peaks == 0) {
            auto selection = spectral::select_lorentzian_peaks(spectrum);
            result["peaks"] = peak_fit_to_json(selection.fit);
            result["n_peaks"] = selection.n_peaks;
            std::printf("model selection: %d peak(s)\n", selection.n_peaks);
        } else {
            auto fit = spectral::fit_lorentzian(spectrum, n_peaks);
            result["peaks"] = peak_fit_to_json(fit);
            result["n_peaks"] = n_peaks;
        }
        for (const auto& p : result["peaks"]["peaks"]) {
            std::printf("peak: center %.6g Hz, hwhm %.6g Hz\n", p["center_hz"].get<double>(),
                        p["hwhm_hz"].get<double>());
        }
    } else {
        auto curve = ramsey::load_curve(decay_csv);
        ws.manifest["inputs"]["curve"] = {{"path", decay_csv}, {"hash", file_hash(decay_csv)}};
        auto fit = spectral::fit_ramsey_decay(curve, decay_exponent);
        result["decay"] = decay_fit_to_json(fit);
        std::printf("decay: T2* %.6g s, freq %.6g Hz%s\n", fit.t2_star_s, fit.freq_hz,
                    fit.reliable_t2 ? "" : " (unreliable)");
    }
    write_json(ws, "fit.json", result);
    ws.write_manifest();
    return kExitOk;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"driftlock: drift tracking, prediction, and correction simulator"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    auto add_common = [](CLI::App* cmd, CommonArgs& args) {
        cmd->add_option("--config", args.config_path, "run configuration (JSON)")->required();
        cmd->add_option("--out", args.out_dir, "output directory (overrides config.output_dir)");
        auto* seed = cmd->add_option("--seed", args.seed_override, "override the config seed");
        seed->each([&args](const std::string&) { args.has_seed_override = true; });
    };

    CommonArgs gen_args;
    add_common(app.add_subcommand("generate", "synthesize a drift trace"), gen_args);

    CommonArgs track_args;
    std::string track_input;
    auto* track = app.add_subcommand("track", "run a tracker over a trace");
    add_common(track, track_args);
    track->add_option("--input", track_input, "trace CSV (overrides config.noise)");

    CommonArgs loop_args;
    std::string loop_input;
    std::string loop_scheme;
    std::string loop_model;
    auto* loop = app.add_subcommand("loop", "run the control loop");
    add_common(loop, loop_args);
    loop->add_option("--input", loop_input, "trace CSV (overrides config.noise)");
    loop->add_option("--scheme", loop_scheme, "feedback|feedforward|ideal|open");
    loop->add_option("--model", loop_model, "predictor model JSON (feedforward)");

    CommonArgs train_args;
    std::string train_input;
    auto* train = app.add_subcommand("train", "train the noise predictor");
    add_common(train, train_args);
    train->add_option("--input", train_input, "trace CSV (overrides config.noise)");

    CommonArgs ramsey_args;
    std::string ramsey_input;
    auto* rams = app.add_subcommand("ramsey", "simulate a Ramsey measurement on a residual trace");
    add_common(rams, ramsey_args);
    rams->add_option("--input", ramsey_input, "residual trace CSV (overrides config.noise)");

    CommonArgs sweep_args;
    std::string sweep_input;
    std::string sweep_scheme;
    std::string sweep_model;
    int sweep_parallel = 1;
    auto* sweep = app.add_subcommand("sweep", "linewidth vs update speed");
    add_common(sweep, sweep_args);
    sweep->add_option("--input", sweep_input, "trace CSV (overrides config.noise)");
    sweep->add_option("--scheme", sweep_scheme, "feedback|feedforward|ideal|open");
    sweep->add_option("--model", sweep_model, "predictor model JSON (feedforward)");
    sweep->add_option("--parallel", sweep_parallel, "worker threads for sweep points");

    CommonArgs fit_args;
    std::string fit_law;
    std::string fit_lorentzian;
    std::string fit_decay;
    bool fit_with_offset = true;
    bool fit_no_offset = false;
    int fit_peaks = 0;
    double fit_exponent = 1.0;
    auto* fit = app.add_subcommand("fit", "stand-alone fits on CSV artifacts");
    add_common(fit, fit_args);
    fit->add_option("--law", fit_law, "sweep CSV for the linewidth power law");
    fit->add_flag("--with-offset,!--no-offset", fit_with_offset, "fit l = A/nu^n + d (default on)");
    fit->add_option("--lorentzian", fit_lorentzian, "spectrum CSV for peak fitting");
    fit->add_option("--peaks", fit_peaks, "peak count (0 = model selection)");
    fit->add_option("--ramsey-decay", fit_decay, "curve CSV for the decay fit");
    fit->add_option("--exponent", fit_exponent, "decay exponent p");
    (void)fit_no_offset;

    CLI11_PARSE(app, argc, argv);

    if (app.got_subcommand("generate")) return cmd_generate(gen_args);
    if (app.got_subcommand("track")) return cmd_track(track_args, track_input);
    if (app.got_subcommand("loop")) return cmd_loop(loop_args, loop_input, loop_scheme, loop_model);
    if (app.got_subcommand("train")) return cmd_train(train_args, train_input);
    if (app.got_subcommand("ramsey")) return cmd_ramsey(ramsey_args, ramsey_input);
    if (app.got_subcommand("sweep")) {
        return cmd_sweep(sweep_args, sweep_input, sweep_scheme, sweep_model, sweep_parallel);
    }
    if (app.got_subcommand("fit")) {
        return cmd_fit(fit_args, fit_law, fit_with_offset, fit_lorentzian, fit_peaks, fit_decay,
                       fit_exponent);
    }
    return kExitGeneric;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        switch (e.kind()) {
        case ErrorKind::Config: return kExitConfig;
        case ErrorKind::Input: return kExitInput;
        case ErrorKind::Numeric: return kExitNumeric;
        }
        return kExitGeneric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kExitGeneric;
    }
}
