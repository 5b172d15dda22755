// Declarative run configuration: one JSON document drives every subcommand.
// Parsing is strict: unknown keys are rejected with their full field path.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "driftlock/control.hpp"
#include "driftlock/noise.hpp"
#include "driftlock/predictor.hpp"
#include "driftlock/ramsey.hpp"
#include "driftlock/tracker.hpp"

namespace driftlock::cli {

struct NoiseSection {
    std::optional<std::filesystem::path> trace_path;
    std::optional<noise::NoiseSpec> spec; // seed filled from the global seed
    double duration_s = 20000.0;
    double dt_s = 1.0;
};

struct ControlSection {
    ctrl::Scheme scheme = ctrl::Scheme::IdealFeedback;
    double update_period_s = 1.0;
    std::optional<double> horizon_s;
    std::optional<std::filesystem::path> model_path;
};

struct TrainSection {
    std::string source = "estimates"; // estimates | trace
    int input_length = 60;
    int output_length = 10;
    int hidden = 32;
    predictor::TrainConfig config;
};

struct SweepSection {
    std::vector<double> nu_hz;
    ctrl::Scheme scheme = ctrl::Scheme::IdealFeedback;
    bool adapt_span = true;
    double correction_lowpass_window_s = 0.0;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> output_dir;
    std::optional<NoiseSection> noise;
    std::optional<tracker::TrackerConfig> tracker;
    std::optional<ControlSection> control;
    std::optional<TrainSection> train;
    std::optional<ramsey::RamseyConfig> ramsey;
    std::optional<SweepSection> sweep;

    nlohmann::json document; // the validated raw document, for the manifest
};

/// Throws ConfigError with a field path on schema violations.
RunConfig load_config(const std::filesystem::path& path);

/// Derived-stream indices off the global seed, one per pipeline stage.
enum class SeedStream : std::uint64_t { Noise = 0, Tracker = 1, Ramsey = 2, Sweep = 3 };
std::uint64_t stream_seed(std::uint64_t global_seed, SeedStream stream);

} // namespace driftlock::cli
