// Noise forecasting: a from-scratch single-layer LSTM with a fully-connected
// output head, trained by backpropagation through time, plus the trivial
// baselines (persistence, linear extrapolation) and a test-only oracle that
// reads the true future from a bound trace.
//
// The model maps the most recent M tracked values to N predicted values, all
// at the tracking cadence. Inputs are normalized by (mean, scale) captured at
// dataset construction; outputs are de-normalized, so shifting a series by a
// constant shifts predictions by exactly that constant.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "driftlock/errors.hpp"
#include "driftlock/trace.hpp"

namespace driftlock::predictor {

enum class Kind { Lstm, Persistence, Oracle, LinearExtrap };

std::string to_string(Kind kind);
Kind kind_from_string(const std::string& token);

struct Normalization {
    double mean_hz = 0.0;
    double scale_hz = 1.0;
};

/// Gate weights for the standard LSTM cell (scalar input, width H):
///   i = sigmoid(w_i x + U_i h + b_i)     f, o likewise
///   g = tanh(w_g x + U_g h + b_g)
///   c <- f .* c + i .* g;  h <- o .* tanh(c)
/// followed by y = fc_w h_M + fc_b on the final hidden state.
struct LstmWeights {
    Eigen::VectorXd w_i, w_f, w_o, w_g; // H x 1 input maps
    Eigen::MatrixXd u_i, u_f, u_o, u_g; // H x H recurrent maps
    Eigen::VectorXd b_i, b_f, b_o, b_g; // H biases
    Eigen::MatrixXd fc_w;               // N x H output map
    Eigen::VectorXd fc_b;               // N
};

struct PredictorModel {
    Kind kind = Kind::Persistence;
    int input_length = 0;  // M
    int output_length = 0; // N
    int hidden = 0;        // H (lstm only)
    Normalization norm;
    LstmWeights weights;                            // lstm only
    std::shared_ptr<const NoiseTrace> oracle_trace; // oracle only, test-side binding

    static PredictorModel persistence(int m, int n);
    static PredictorModel linear_extrap(int m, int n);
    static PredictorModel oracle(int m, int n, std::shared_ptr<const NoiseTrace> trace);

    /// Throws ModelError on inconsistent weight shapes or non-finite values.
    void validate() const;
};

struct TrainConfig {
    int epochs = 80;
    double learning_rate = 3e-3;
    int batch_size = 64;
    std::uint64_t seed = 0;
    double validation_fraction = 0.2;
    double gradient_clip_norm = 1.0; // <= 0 disables clipping
    int early_stop_patience = 10;

    void validate() const;
};

/// Stride-1 sliding windows over a series, stored normalized; row i holds
/// samples [i, i+M) as input and [i+M, i+M+N) as target.
struct WindowDataset {
    Eigen::MatrixXd inputs;  // k x M, normalized
    Eigen::MatrixXd targets; // k x N, normalized
    Normalization norm;
    std::string source;

    std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
};

struct TrainingReport {
    std::vector<double> train_loss; // normalized-space MSE per epoch
    std::vector<double> val_loss;
    int best_epoch = -1;
    bool early_stopped = false;
};

struct TrainResult {
    PredictorModel model;
    TrainingReport report;
};

/// Training diverged (non-finite loss); carries the report so far and the
/// last finite model state.
class TrainingError : public Error {
public:
    TrainingError(const std::string& what, TrainingReport report, PredictorModel last_model)
        : Error(ErrorKind::Numeric, what), report_(std::move(report)), model_(std::move(last_model)) {}
    const TrainingReport& report() const { return report_; }
    const PredictorModel& last_model() const { return model_; }

private:
    TrainingReport report_;
    PredictorModel model_;
};

/// Throws SizeError when the series is shorter than M + N. Normalization is
/// mean/std of the series with a 1e-9 Hz floor on the scale.
WindowDataset build_dataset(std::span<const double> series, int input_length, int output_length);

/// Full LSTM pass on one raw (de-normalized) window of M values.
std::vector<double> lstm_forward(const PredictorModel& model, std::span<const double> input);

/// MSE-over-all-horizons training with Adam (beta1 0.9, beta2 0.999,
/// eps 1e-8), shuffled mini-batches, global gradient-norm clipping, and early
/// stopping on held-out validation MSE (the time-ordered tail of the windows).
/// Bit-deterministic given cfg.seed.
TrainResult train(const WindowDataset& dataset, int hidden, const TrainConfig& cfg);

/// Analytic BPTT gradients vs central finite differences (step 1e-5 on the
/// normalized scale) for a randomly initialized small model; returns the
/// maximum relative error over every parameter.
double grad_check(int hidden, int input_length, int output_length, std::uint64_t seed);

/// Flat analytic gradient of loss_scale * MSE for one normalized window, in
/// canonical parameter order. Exposed for the gradient tests.
Eigen::VectorXd bptt_gradients(const PredictorModel& model, std::span<const double> norm_input,
                               std::span<const double> norm_target, double loss_scale = 1.0);

/// Number of trainable parameters for an (H, M, N) architecture.
int parameter_count(int hidden, int output_length);

struct PredictContext {
    double t_last_eff_s = 0.0; // effective time of the newest input value
    double step_s = 0.0;       // cadence; prediction j targets t_last_eff + (j+1) step
};

/// Dispatch over model.kind. The oracle needs the time context overload and a
/// bound trace, otherwise it throws ConfigError.
std::vector<double> predict(const PredictorModel& model, std::span<const double> recent);
std::vector<double> predict(const PredictorModel& model, std::span<const double> recent,
                            const PredictContext& context);

/// JSON persistence (format_version guarded); round-trips bit-identically.
void save_model(const PredictorModel& model, const std::filesystem::path& path);
PredictorModel load_model(const std::filesystem::path& path);

} // namespace driftlock::predictor
