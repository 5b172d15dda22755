#include "config.hpp"

#include <fstream>
#include <set>

#include "driftlock/errors.hpp"
#include "driftlock/rng.hpp"

namespace driftlock::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError(path + ": " + message);
}

/// Strict-object cursor: every get_* marks its key; close() rejects leftovers.
class Obj {
public:
    Obj(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) fail(path_, "expected an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        if (!node_.contains(key)) fail(path_ + "." + key, "missing required field");
        return node_.at(key);
    }

    template <typename T> T get(const std::string& key) {
        const json& v = raw(key);
        try {
            return v.get<T>();
        } catch (const json::exception&) {
            fail(path_ + "." + key, "wrong type");
        }
    }

    template <typename T> T get_or(const std::string& key, T fallback) {
        if (!node_.contains(key)) return fallback;
        return get<T>(key);
    }

    std::string child_path(const std::string& key) const { return path_ + "." + key; }

    void close() {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            if (!seen_.contains(it.key())) fail(path_ + "." + it.key(), "unknown key");
        }
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

noise::NoiseSpec parse_noise_spec(const json& node, const std::string& path) {
    Obj obj(node, path);
    const json& comps = obj.raw("components");
    if (!comps.is_array() || comps.empty()) fail(path + ".components", "expected a non-empty array");
    noise::NoiseSpec spec;
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const std::string cpath = path + ".components[" + std::to_string(i) + "]";
        Obj comp(comps[i], cpath);
        const auto type = comp.get<std::string>("type");
        if (type == "ou") {
            noise::OuComponent ou;
            ou.relaxation_rate_per_s = comp.get<double>("relaxation_rate_per_s");
            ou.stationary_std_hz = comp.get<double>("stationary_std_hz");
            spec.components.emplace_back(ou);
        } else if (type == "power_law") {
            noise::PowerLawComponent pl;
            pl.exponent = comp.get<double>("exponent");
            pl.rms_amplitude_hz = comp.get<double>("rms_amplitude_hz");
            pl.low_cutoff_hz = comp.get<double>("low_cutoff_hz");
            pl.high_cutoff_hz = comp.get<double>("high_cutoff_hz");
            spec.components.emplace_back(pl);
        } else if (type == "sine") {
            noise::SineComponent sine;
            sine.amplitude_hz = comp.get<double>("amplitude_hz");
            sine.frequency_hz = comp.get<double>("frequency_hz");
            sine.phase_rad = comp.get_or<double>("phase_rad", 0.0);
            spec.components.emplace_back(sine);
        } else if (type == "constant") {
            noise::ConstantComponent c;
            c.offset_hz = comp.get<double>("offset_hz");
            spec.components.emplace_back(c);
        } else {
            fail(cpath + ".type", "unknown component type '" + type + "'");
        }
        comp.close();
    }
    obj.close();
    return spec;
}

NoiseSection parse_noise(const json& node, const std::string& path) {
    Obj obj(node, path);
    NoiseSection section;
    if (obj.has("trace_path")) section.trace_path = obj.get<std::string>("trace_path");
    if (obj.has("spec")) section.spec = parse_noise_spec(obj.raw("spec"), path + ".spec");
    if (section.trace_path && section.spec) fail(path, "give either trace_path or spec, not both");
    if (!section.trace_path && !section.spec) fail(path, "needs trace_path or spec");
    section.duration_s = obj.get_or<double>("duration_s", 20000.0);
    section.dt_s = obj.get_or<double>("dt_s", 1.0);
    obj.close();
    return section;
}

tracker::TrackerConfig parse_tracker(const json& node, const std::string& path) {
    Obj obj(node, path);
    const auto variant = obj.get<std::string>("variant");
    tracker::TrackerConfig result;
    if (variant == "lia") {
        Obj lia(obj.raw("lia"), path + ".lia");
        tracker::LiaConfig cfg;
        cfg.window_s = lia.get<double>("window_s");
        cfg.update_period_s = lia.get<double>("update_period_s");
        cfg.sigma_floor_hz = lia.get<double>("sigma_floor_hz");
        cfg.capture_range_hz = lia.get<double>("capture_range_hz");
        lia.close();
        result = cfg;
    } else if (variant == "odmr") {
        Obj odmr(obj.raw("odmr"), path + ".odmr");
        tracker::OdmrConfig cfg;
        cfg.f0_hz = odmr.get_or<double>("f0_hz", 0.0);
        cfg.range_hz = odmr.get<double>("range_hz");
        cfg.n_points = odmr.get<int>("n_points");
        cfg.dwell_s = odmr.get<double>("dwell_s");
        cfg.period_s = odmr.get<double>("period_s");
        cfg.contrast = odmr.get<double>("contrast");
        cfg.count_rate_hz = odmr.get<double>("count_rate_hz");
        cfg.linewidth_hz = odmr.get_or<double>("linewidth_hz", 0.0);
        odmr.close();
        result = cfg;
    } else {
        fail(path + ".variant", "expected 'lia' or 'odmr'");
    }
    obj.close();
    return result;
}

ControlSection parse_control(const json& node, const std::string& path) {
    Obj obj(node, path);
    ControlSection section;
    section.scheme = ctrl::scheme_from_string(obj.get<std::string>("scheme"));
    section.update_period_s = obj.get<double>("update_period_s");
    if (obj.has("horizon_s")) section.horizon_s = obj.get<double>("horizon_s");
    if (obj.has("model_path")) section.model_path = obj.get<std::string>("model_path");
    obj.close();
    return section;
}

TrainSection parse_train(const json& node, const std::string& path) {
    Obj obj(node, path);
    TrainSection section;
    section.source = obj.get_or<std::string>("source", std::string("estimates"));
    if (section.source != "estimates" && section.source != "trace") {
        fail(path + ".source", "expected 'estimates' or 'trace'");
    }
    section.input_length = obj.get<int>("input_length");
    section.output_length = obj.get<int>("output_length");
    section.hidden = obj.get<int>("hidden");
    section.config.epochs = obj.get<int>("epochs");
    section.config.learning_rate = obj.get<double>("learning_rate");
    section.config.batch_size = obj.get<int>("batch_size");
    section.config.seed = obj.get<std::uint64_t>("seed");
    section.config.validation_fraction = obj.get_or<double>("validation_fraction", 0.2);
    section.config.gradient_clip_norm = obj.get_or<double>("gradient_clip_norm", 1.0);
    section.config.early_stop_patience = obj.get_or<int>("early_stop_patience", 10);
    obj.close();
    return section;
}

ramsey::RamseyConfig parse_ramsey(const json& node, const std::string& path) {
    Obj obj(node, path);
    ramsey::RamseyConfig cfg;
    cfg.bias_hz = obj.get<double>("bias_hz");
    if (obj.has("extra_biases_hz")) {
        cfg.extra_biases_hz = obj.get<std::vector<double>>("extra_biases_hz");
    }
    {
        Obj grid(obj.raw("t_evol"), path + ".t_evol");
        const double start = grid.get<double>("start_s");
        const double stop = grid.get<double>("stop_s");
        const int points = grid.get<int>("points");
        grid.close();
        cfg.t_evol_s = ramsey::RamseyConfig::uniform_grid(start, stop, points);
    }
    cfg.shots_per_point = obj.get<int>("shots_per_point");
    cfg.shot_wall_time_s = obj.get_or<double>("shot_wall_time_s", 5e-3);
    cfg.intrinsic_t2_s = obj.get<double>("intrinsic_t2_s");
    cfg.decay_exponent = obj.get_or<double>("decay_exponent", 1.0);
    cfg.interleaved = obj.get_or<bool>("interleaved", true);
    if (obj.has("readout")) {
        const json& readout = obj.raw("readout");
        if (readout.is_string() && readout.get<std::string>() == "ideal") {
            cfg.readout.ideal = true;
        } else {
            Obj ro(readout, path + ".readout");
            cfg.readout.ideal = false;
            cfg.readout.contrast = ro.get<double>("contrast");
            cfg.readout.photons_per_shot = ro.get<double>("photons_per_shot");
            ro.close();
        }
    }
    obj.close();
    return cfg;
}

SweepSection parse_sweep(const json& node, const std::string& path) {
    Obj obj(node, path);
    SweepSection section;
    section.nu_hz = obj.get<std::vector<double>>("nu_hz");
    if (section.nu_hz.empty()) fail(path + ".nu_hz", "expected a non-empty array");
    section.scheme = ctrl::scheme_from_string(obj.get<std::string>("scheme"));
    section.adapt_span = obj.get_or<bool>("adapt_span", true);
    section.correction_lowpass_window_s = obj.get_or<double>("correction_lowpass_window_s", 0.0);
    obj.close();
    return section;
}

} // namespace

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }

    RunConfig cfg;
    Obj root(doc, "config");
    if (!root.has("seed")) fail("config.seed", "missing required field");
    cfg.seed = root.get<std::uint64_t>("seed");
    if (root.has("output_dir")) cfg.output_dir = root.get<std::string>("output_dir");
    if (root.has("noise")) cfg.noise = parse_noise(root.raw("noise"), "config.noise");
    if (root.has("tracker")) cfg.tracker = parse_tracker(root.raw("tracker"), "config.tracker");
    if (root.has("control")) cfg.control = parse_control(root.raw("control"), "config.control");
    if (root.has("train")) cfg.train = parse_train(root.raw("train"), "config.train");
    if (root.has("ramsey")) cfg.ramsey = parse_ramsey(root.raw("ramsey"), "config.ramsey");
    if (root.has("sweep")) cfg.sweep = parse_sweep(root.raw("sweep"), "config.sweep");
    root.close();

    cfg.document = std::move(doc);
    return cfg;
}

std::uint64_t stream_seed(std::uint64_t global_seed, SeedStream stream) {
    return Rng::derive(global_seed, static_cast<std::uint64_t>(stream));
}

} // namespace driftlock::cli
