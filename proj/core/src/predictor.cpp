#include "driftlock/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "driftlock/rng.hpp"

namespace driftlock::predictor {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd sigmoid(const MatrixXd& x) {
    return ((-x.array()).exp() + 1.0).inverse().matrix();
}

struct ForwardCache {
    std::vector<MatrixXd> i, f, o, g, c, tanh_c, h; // h/c indexed 0..M (0 = initial zeros)
    MatrixXd y;                                     // N x B
};

/// Batched forward pass in normalized space. Columns of `x` (M x B) are
/// windows; returns hidden/cell/gate history when `cache` is non-null.
MatrixXd lstm_forward_batch(const LstmWeights& w, const MatrixXd& x, ForwardCache* cache) {
    const auto hidden = static_cast<int>(w.b_i.size());
    const auto steps = static_cast<int>(x.rows());
    const auto batch = static_cast<int>(x.cols());

    MatrixXd h = MatrixXd::Zero(hidden, batch);
    MatrixXd c = MatrixXd::Zero(hidden, batch);
    if (cache) {
        cache->i.resize(steps);
        cache->f.resize(steps);
        cache->o.resize(steps);
        cache->g.resize(steps);
        cache->c.resize(steps + 1);
        cache->tanh_c.resize(steps);
        cache->h.resize(steps + 1);
        cache->h[0] = h;
        cache->c[0] = c;
    }

    for (int t = 0; t < steps; ++t) {
        const auto xt = x.row(t); // 1 x B
        MatrixXd ai = (w.u_i * h + w.w_i * xt).colwise() + w.b_i;
        MatrixXd af = (w.u_f * h + w.w_f * xt).colwise() + w.b_f;
        MatrixXd ao = (w.u_o * h + w.w_o * xt).colwise() + w.b_o;
        MatrixXd ag = (w.u_g * h + w.w_g * xt).colwise() + w.b_g;
        MatrixXd gi = sigmoid(ai);
        MatrixXd gf = sigmoid(af);
        MatrixXd go = sigmoid(ao);
        MatrixXd gg = ag.array().tanh().matrix();
        c = gf.cwiseProduct(c) + gi.cwiseProduct(gg);
        MatrixXd tc = c.array().tanh().matrix();
        h = go.cwiseProduct(tc);
        if (cache) {
            cache->i[t] = std::move(gi);
            cache->f[t] = std::move(gf);
            cache->o[t] = std::move(go);
            cache->g[t] = std::move(gg);
            cache->c[t + 1] = c;
            cache->tanh_c[t] = std::move(tc);
            cache->h[t + 1] = h;
        }
    }
    MatrixXd y = (w.fc_w * h).colwise() + w.fc_b;
    if (cache) cache->y = y;
    return y;
}

/// Backward pass; returns gradients in an LstmWeights-shaped struct.
/// `dy` is dLoss/dY (N x B).
LstmWeights lstm_backward_batch(const LstmWeights& w, const MatrixXd& x, const ForwardCache& cache,
                                const MatrixXd& dy) {
    const auto hidden = static_cast<int>(w.b_i.size());
    const auto steps = static_cast<int>(x.rows());
    const auto batch = static_cast<int>(x.cols());

    LstmWeights grad;
    grad.w_i = VectorXd::Zero(hidden);
    grad.w_f = VectorXd::Zero(hidden);
    grad.w_o = VectorXd::Zero(hidden);
    grad.w_g = VectorXd::Zero(hidden);
    grad.u_i = MatrixXd::Zero(hidden, hidden);
    grad.u_f = MatrixXd::Zero(hidden, hidden);
    grad.u_o = MatrixXd::Zero(hidden, hidden);
    grad.u_g = MatrixXd::Zero(hidden, hidden);
    grad.b_i = VectorXd::Zero(hidden);
    grad.b_f = VectorXd::Zero(hidden);
    grad.b_o = VectorXd::Zero(hidden);
    grad.b_g = VectorXd::Zero(hidden);
    grad.fc_w = dy * cache.h[steps].transpose();
    grad.fc_b = dy.rowwise().sum();

    MatrixXd dh = w.fc_w.transpose() * dy;
    MatrixXd dc = MatrixXd::Zero(hidden, batch);
    for (int t = steps - 1; t >= 0; --t) {
        const MatrixXd& gi = cache.i[t];
        const MatrixXd& gf = cache.f[t];
        const MatrixXd& go = cache.o[t];
        const MatrixXd& gg = cache.g[t];
        const MatrixXd& tc = cache.tanh_c[t];
        const MatrixXd& c_prev = cache.c[t];
        const MatrixXd& h_prev = cache.h[t];

        MatrixXd d_o = dh.cwiseProduct(tc);
        dc += dh.cwiseProduct(go).cwiseProduct((1.0 - tc.array().square()).matrix());
        MatrixXd d_i = dc.cwiseProduct(gg);
        MatrixXd d_g = dc.cwiseProduct(gi);
        MatrixXd d_f = dc.cwiseProduct(c_prev);

        MatrixXd da_i = d_i.cwiseProduct(gi).cwiseProduct((1.0 - gi.array()).matrix());
        MatrixXd da_f = d_f.cwiseProduct(gf).cwiseProduct((1.0 - gf.array()).matrix());
        MatrixXd da_o = d_o.cwiseProduct(go).cwiseProduct((1.0 - go.array()).matrix());
        MatrixXd da_g = d_g.cwiseProduct((1.0 - gg.array().square()).matrix());

        const auto xt = x.row(t); // 1 x B
        grad.w_i += da_i * xt.transpose();
        grad.w_f += da_f * xt.transpose();
        grad.w_o += da_o * xt.transpose();
        grad.w_g += da_g * xt.transpose();
        grad.u_i += da_i * h_prev.transpose();
        grad.u_f += da_f * h_prev.transpose();
        grad.u_o += da_o * h_prev.transpose();
        grad.u_g += da_g * h_prev.transpose();
        grad.b_i += da_i.rowwise().sum();
        grad.b_f += da_f.rowwise().sum();
        grad.b_o += da_o.rowwise().sum();
        grad.b_g += da_g.rowwise().sum();

        dh = w.u_i.transpose() * da_i + w.u_f.transpose() * da_f + w.u_o.transpose() * da_o +
             w.u_g.transpose() * da_g;
        dc = dc.cwiseProduct(gf);
    }
    return grad;
}

// Canonical flat parameter order: w_i w_f w_o w_g, u_i u_f u_o u_g
// (row-major), b_i b_f b_o b_g, fc_w (row-major), fc_b. This order is also
// the serialization order.
void pack_matrix_rowmajor(const MatrixXd& m, double* out) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) *out++ = m(r, c);
    }
}

void unpack_matrix_rowmajor(MatrixXd& m, const double* in) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = *in++;
    }
}

VectorXd pack(const LstmWeights& w) {
    const auto h = w.b_i.size();
    const auto n = w.fc_b.size();
    VectorXd theta(4 * h + 4 * h * h + 4 * h + n * h + n);
    double* p = theta.data();
    for (const auto* v : {&w.w_i, &w.w_f, &w.w_o, &w.w_g}) {
        std::copy(v->data(), v->data() + h, p);
        p += h;
    }
    for (const auto* m : {&w.u_i, &w.u_f, &w.u_o, &w.u_g}) {
        pack_matrix_rowmajor(*m, p);
        p += h * h;
    }
    for (const auto* v : {&w.b_i, &w.b_f, &w.b_o, &w.b_g}) {
        std::copy(v->data(), v->data() + h, p);
        p += h;
    }
    pack_matrix_rowmajor(w.fc_w, p);
    p += n * h;
    std::copy(w.fc_b.data(), w.fc_b.data() + n, p);
    return theta;
}

LstmWeights unpack(const VectorXd& theta, int hidden, int output_length) {
    LstmWeights w;
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto n = static_cast<Eigen::Index>(output_length);
    w.w_i.resize(h);
    w.w_f.resize(h);
    w.w_o.resize(h);
    w.w_g.resize(h);
    w.u_i.resize(h, h);
    w.u_f.resize(h, h);
    w.u_o.resize(h, h);
    w.u_g.resize(h, h);
    w.b_i.resize(h);
    w.b_f.resize(h);
    w.b_o.resize(h);
    w.b_g.resize(h);
    w.fc_w.resize(n, h);
    w.fc_b.resize(n);
    const double* p = theta.data();
    for (auto* v : {&w.w_i, &w.w_f, &w.w_o, &w.w_g}) {
        std::copy(p, p + h, v->data());
        p += h;
    }
    for (auto* m : {&w.u_i, &w.u_f, &w.u_o, &w.u_g}) {
        unpack_matrix_rowmajor(*m, p);
        p += h * h;
    }
    for (auto* v : {&w.b_i, &w.b_f, &w.b_o, &w.b_g}) {
        std::copy(p, p + h, v->data());
        p += h;
    }
    unpack_matrix_rowmajor(w.fc_w, p);
    p += n * h;
    std::copy(p, p + n, w.fc_b.data());
    return w;
}

/// Scaled-uniform initialization, forget-gate bias +1. Draw order is fixed
/// (the canonical parameter order), so initialization is seed-deterministic.
LstmWeights init_weights(int hidden, int output_length, Rng& rng) {
    const double r = 1.0 / std::sqrt(static_cast<double>(hidden));
    const int count = parameter_count(hidden, output_length);
    VectorXd theta(count);
    for (int i = 0; i < count; ++i) theta(i) = r * (2.0 * rng.uniform01() - 1.0);
    LstmWeights w = unpack(theta, hidden, output_length);
    w.b_i.setZero();
    w.b_f.setConstant(1.0);
    w.b_o.setZero();
    w.b_g.setZero();
    w.fc_b.setZero();
    return w;
}

double mse(const MatrixXd& y, const MatrixXd& target) {
    return (y - target).squaredNorm() / static_cast<double>(y.size());
}

void check_finite_block(const MatrixXd& m, const char* name) {
    if (!m.allFinite()) throw ModelError(std::string("weight block ") + name + " has non-finite values");
}

} // namespace

int parameter_count(int hidden, int output_length) {
    return 4 * hidden * hidden + 8 * hidden + output_length * hidden + output_length;
}

std::string to_string(Kind kind) {
    switch (kind) {
    case Kind::Lstm: return "lstm";
    case Kind::Persistence: return "persistence";
    case Kind::Oracle: return "oracle";
    case Kind::LinearExtrap: return "linear_extrap";
    }
    return "persistence";
}

Kind kind_from_string(const std::string& token) {
    if (token == "lstm") return Kind::Lstm;
    if (token == "persistence") return Kind::Persistence;
    if (token == "oracle") return Kind::Oracle;
    if (token == "linear_extrap") return Kind::LinearExtrap;
    throw ConfigError("unknown predictor kind '" + token + "'");
}

PredictorModel PredictorModel::persistence(int m, int n) {
    PredictorModel model;
    model.kind = Kind::Persistence;
    model.input_length = m;
    model.output_length = n;
    return model;
}

PredictorModel PredictorModel::linear_extrap(int m, int n) {
    PredictorModel model;
    model.kind = Kind::LinearExtrap;
    model.input_length = m;
    model.output_length = n;
    return model;
}

PredictorModel PredictorModel::oracle(int m, int n, std::shared_ptr<const NoiseTrace> trace) {
    PredictorModel model;
    model.kind = Kind::Oracle;
    model.input_length = m;
    model.output_length = n;
    model.oracle_trace = std::move(trace);
    return model;
}

void PredictorModel::validate() const {
    if (input_length < 1 || output_length < 1) {
        throw ModelError("predictor needs input_length >= 1 and output_length >= 1");
    }
    if (!(norm.scale_hz > 0.0)) throw ModelError("normalization scale must be > 0");
    if (kind != Kind::Lstm) return;
    if (hidden < 1) throw ModelError("lstm hidden width must be >= 1");
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto n = static_cast<Eigen::Index>(output_length);
    auto expect = [&](Eigen::Index got, Eigen::Index want, const char* name) {
        if (got != want) {
            throw ModelError(std::string("weight block ") + name + " has inconsistent shape");
        }
    };
    for (const auto* v : {&weights.w_i, &weights.w_f, &weights.w_o, &weights.w_g}) expect(v->size(), h, "w_*");
    for (const auto* m : {&weights.u_i, &weights.u_f, &weights.u_o, &weights.u_g}) {
        expect(m->rows(), h, "u_*");
        expect(m->cols(), h, "u_*");
    }
    for (const auto* v : {&weights.b_i, &weights.b_f, &weights.b_o, &weights.b_g}) expect(v->size(), h, "b_*");
    expect(weights.fc_w.rows(), n, "fc_w");
    expect(weights.fc_w.cols(), h, "fc_w");
    expect(weights.fc_b.size(), n, "fc_b");
    for (const auto* m : {&weights.u_i, &weights.u_f, &weights.u_o, &weights.u_g, &weights.fc_w}) {
        check_finite_block(*m, "u/fc");
    }
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ParameterError("train.epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ParameterError("train.learning_rate must be > 0");
    if (batch_size < 1) throw ParameterError("train.batch_size must be >= 1");
    if (!(validation_fraction > 0.0) || !(validation_fraction < 1.0)) {
        throw ParameterError("train.validation_fraction must be in (0, 1)");
    }
    if (early_stop_patience < 1) throw ParameterError("train.early_stop_patience must be >= 1");
}

WindowDataset build_dataset(std::span<const double> series, int input_length, int output_length) {
    const int m = input_length;
    const int n = output_length;
    if (m < 1 || n < 1) throw ParameterError("build_dataset needs M >= 1 and N >= 1");
    const auto len = static_cast<int>(series.size());
    if (len < m + n) {
        throw SizeError("build_dataset: series length " + std::to_string(len) + " < M + N = " +
                        std::to_string(m + n));
    }

    WindowDataset ds;
    double mean = std::accumulate(series.begin(), series.end(), 0.0) / len;
    double var = 0.0;
    for (double v : series) var += (v - mean) * (v - mean);
    var /= len;
    ds.norm.mean_hz = mean;
    ds.norm.scale_hz = std::max(std::sqrt(var), 1e-9); // floor for constant series

    const int k = len - m - n + 1;
    ds.inputs.resize(k, m);
    ds.targets.resize(k, n);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < m; ++j) ds.inputs(i, j) = (series[i + j] - mean) / ds.norm.scale_hz;
        for (int j = 0; j < n; ++j) ds.targets(i, j) = (series[i + m + j] - mean) / ds.norm.scale_hz;
    }
    return ds;
}

std::vector<double> lstm_forward(const PredictorModel& model, std::span<const double> input) {
    if (model.kind != Kind::Lstm) throw ModelError("lstm_forward on a non-lstm model");
    model.validate();
    if (static_cast<int>(input.size()) != model.input_length) {
        throw ModelError("lstm_forward: input length " + std::to_string(input.size()) +
                         " != M = " + std::to_string(model.input_length));
    }
    MatrixXd x(model.input_length, 1);
    for (int t = 0; t < model.input_length; ++t) x(t, 0) = (input[t] - model.norm.mean_hz) / model.norm.scale_hz;
    MatrixXd y = lstm_forward_batch(model.weights, x, nullptr);
    std::vector<double> out(model.output_length);
    for (int j = 0; j < model.output_length; ++j) out[j] = model.norm.mean_hz + model.norm.scale_hz * y(j, 0);
    return out;
}

Eigen::VectorXd bptt_gradients(const PredictorModel& model, std::span<const double> norm_input,
                               std::span<const double> norm_target, double loss_scale) {
    if (model.kind != Kind::Lstm) throw ModelError("bptt_gradients on a non-lstm model");
    MatrixXd x(norm_input.size(), 1);
    for (std::size_t t = 0; t < norm_input.size(); ++t) x(static_cast<int>(t), 0) = norm_input[t];
    MatrixXd target(norm_target.size(), 1);
    for (std::size_t j = 0; j < norm_target.size(); ++j) target(static_cast<int>(j), 0) = norm_target[j];

    ForwardCache cache;
    MatrixXd y = lstm_forward_batch(model.weights, x, &cache);
    MatrixXd dy = 2.0 * loss_scale * (y - target) / static_cast<double>(y.size());
    return pack(lstm_backward_batch(model.weights, x, cache, dy));
}

double grad_check(int hidden, int input_length, int output_length, std::uint64_t seed) {
    Rng rng(seed);
    PredictorModel model;
    model.kind = Kind::Lstm;
    model.input_length = input_length;
    model.output_length = output_length;
    model.hidden = hidden;
    model.weights = init_weights(hidden, output_length, rng);

    std::vector<double> input(input_length);
    std::vector<double> target(output_length);
    for (double& v : input) v = 2.0 * rng.uniform01() - 1.0;
    for (double& v : target) v = 2.0 * rng.uniform01() - 1.0;

    VectorXd analytic = bptt_gradients(model, input, target);

    MatrixXd x(input_length, 1);
    for (int t = 0; t < input_length; ++t) x(t, 0) = input[t];
    MatrixXd tm(output_length, 1);
    for (int j = 0; j < output_length; ++j) tm(j, 0) = target[j];
    auto loss_at = [&](const VectorXd& theta) {
        LstmWeights w = unpack(theta, hidden, output_length);
        return mse(lstm_forward_batch(w, x, nullptr), tm);
    };

    const double step = 1e-5;
    VectorXd theta = pack(model.weights);
    double worst = 0.0;
    for (int i = 0; i < theta.size(); ++i) {
        VectorXd tp = theta;
        VectorXd tn = theta;
        tp(i) += step;
        tn(i) -= step;
        const double numeric = (loss_at(tp) - loss_at(tn)) / (2.0 * step);
        const double ga = analytic(i);
        // The 1e-6 denominator floor keeps central-difference roundoff on
        // vanishing components (|g| ~ 1e-7 on an O(1) loss) from masquerading
        // as gradient error; a derivation bug scales with the component.
        const double denom = std::max({std::abs(ga), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(ga - numeric) / denom);
    }
    return worst;
}

TrainResult train(const WindowDataset& dataset, int hidden, const TrainConfig& cfg) {
    cfg.validate();
    const auto k = static_cast<int>(dataset.size());
    if (k < 2) throw SizeError("train: need at least 2 windows to split train/validation");
    const int m = static_cast<int>(dataset.inputs.cols());
    const int n = static_cast<int>(dataset.targets.cols());
    if (hidden < 1) throw ParameterError("train: hidden width must be >= 1");

    int n_val = std::clamp(static_cast<int>(std::lround(cfg.validation_fraction * k)), 1, k - 1);
    const int n_train = k - n_val;

    // Time-ordered split: validation is the most recent tail.
    MatrixXd val_x = dataset.inputs.bottomRows(n_val).transpose();   // m x n_val
    MatrixXd val_t = dataset.targets.bottomRows(n_val).transpose(); // n x n_val

    PredictorModel model;
    model.kind = Kind::Lstm;
    model.input_length = m;
    model.output_length = n;
    model.hidden = hidden;
    model.norm = dataset.norm;

    Rng rng(cfg.seed);
    model.weights = init_weights(hidden, n, rng);

    const int count = parameter_count(hidden, n);
    VectorXd adam_m = VectorXd::Zero(count);
    VectorXd adam_v = VectorXd::Zero(count);
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    long adam_t = 0;

    std::vector<int> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    TrainingReport report;
    double best_val = std::numeric_limits<double>::infinity();
    VectorXd best_theta = pack(model.weights);
    int since_best = 0;

    VectorXd theta = pack(model.weights);
    VectorXd last_finite_theta = theta;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Deterministic Fisher-Yates shuffle from the run seed.
        for (int i = n_train - 1; i > 0; --i) {
            const auto j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
            std::swap(order[i], order[j]);
        }

        double epoch_loss = 0.0;
        int n_batches = 0;
        for (int start = 0; start < n_train; start += cfg.batch_size) {
            const int b = std::min(cfg.batch_size, n_train - start);
            MatrixXd bx(m, b);
            MatrixXd bt(n, b);
            for (int col = 0; col < b; ++col) {
                bx.col(col) = dataset.inputs.row(order[start + col]).transpose();
                bt.col(col) = dataset.targets.row(order[start + col]).transpose();
            }

            LstmWeights w = unpack(theta, hidden, n);
            ForwardCache cache;
            MatrixXd y = lstm_forward_batch(w, bx, &cache);
            const double loss = mse(y, bt);
            if (!std::isfinite(loss)) {
                PredictorModel last = model;
                last.weights = unpack(last_finite_theta, hidden, n);
                throw TrainingError("training diverged at epoch " + std::to_string(epoch), report,
                                    std::move(last));
            }
            last_finite_theta = theta;
            epoch_loss += loss;
            ++n_batches;

            MatrixXd dy = 2.0 * (y - bt) / static_cast<double>(y.size());
            VectorXd grad = pack(lstm_backward_batch(w, bx, cache, dy));
            if (cfg.gradient_clip_norm > 0.0) {
                const double norm = grad.norm();
                if (norm > cfg.gradient_clip_norm) grad *= cfg.gradient_clip_norm / norm;
            }

            ++adam_t;
            adam_m = kBeta1 * adam_m + (1.0 - kBeta1) * grad;
            adam_v = kBeta2 * adam_v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
            const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_t));
            const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_t));
            for (int i = 0; i < count; ++i) {
                const double mhat = adam_m(i) / bias1;
                const double vhat = adam_v(i) / bias2;
                theta(i) -= cfg.learning_rate * mhat / (std::sqrt(vhat) + kEps);
            }
        }
        report.train_loss.push_back(epoch_loss / n_batches);

        LstmWeights w = unpack(theta, hidden, n);
        const double val_loss = mse(lstm_forward_batch(w, val_x, nullptr), val_t);
        report.val_loss.push_back(val_loss);

        if (val_loss < best_val) {
            best_val = val_loss;
            best_theta = theta;
            report.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.early_stop_patience) {
            report.early_stopped = true;
            break;
        }
    }

    model.weights = unpack(best_theta, hidden, n);
    model.validate();
    return {std::move(model), std::move(report)};
}

std::vector<double> predict(const PredictorModel& model, std::span<const double> recent) {
    if (model.kind == Kind::Oracle) {
        throw ConfigError("oracle predictor needs a time context; use the context overload");
    }
    return predict(model, recent, PredictContext{});
}

std::vector<double> predict(const PredictorModel& model, std::span<const double> recent,
                            const PredictContext& context) {
    if (static_cast<int>(recent.size()) != model.input_length) {
        throw ModelError("predict: expected " + std::to_string(model.input_length) + " recent values, got " +
                         std::to_string(recent.size()));
    }
    const int n = model.output_length;
    switch (model.kind) {
    case Kind::Lstm:
        return lstm_forward(model, recent);
    case Kind::Persistence:
        return std::vector<double>(static_cast<std::size_t>(n), recent.back());
    case Kind::LinearExtrap: {
        const auto m = static_cast<int>(recent.size());
        if (m == 1) return std::vector<double>(static_cast<std::size_t>(n), recent.back());
        // Least-squares line through (0..M-1, recent), extrapolated.
        const double mean_x = 0.5 * (m - 1);
        double mean_y = 0.0;
        for (double v : recent) mean_y += v;
        mean_y /= m;
        double sxx = 0.0;
        double sxy = 0.0;
        for (int t = 0; t < m; ++t) {
            sxx += (t - mean_x) * (t - mean_x);
            sxy += (t - mean_x) * (recent[t] - mean_y);
        }
        const double slope = sxy / sxx;
        std::vector<double> out(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
            out[static_cast<std::size_t>(j)] = mean_y + slope * (static_cast<double>(m + j) - mean_x);
        }
        return out;
    }
    case Kind::Oracle: {
        if (!model.oracle_trace) throw ConfigError("oracle predictor has no bound trace");
        if (!(context.step_s > 0.0)) throw ConfigError("oracle predictor needs a positive step_s context");
        std::vector<double> out(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
            out[static_cast<std::size_t>(j)] =
                model.oracle_trace->value_at(context.t_last_eff_s + (j + 1) * context.step_s);
        }
        return out;
    }
    }
    throw ModelError("predict: unknown model kind");
}

namespace {

nlohmann::json vector_to_json(const VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

nlohmann::json matrix_to_json_rowmajor(const MatrixXd& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
    }
    return arr;
}

VectorXd vector_from_json(const nlohmann::json& arr, Eigen::Index size, const std::string& name) {
    if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != size) {
        throw FormatError("model weights: field '" + name + "' has wrong length");
    }
    VectorXd v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = arr[static_cast<std::size_t>(i)].get<double>();
    return v;
}

MatrixXd matrix_from_json_rowmajor(const nlohmann::json& arr, Eigen::Index rows, Eigen::Index cols,
                                   const std::string& name) {
    if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != rows * cols) {
        throw FormatError("model weights: field '" + name + "' has wrong length");
    }
    MatrixXd m(rows, cols);
    std::size_t idx = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = arr[idx++].get<double>();
    }
    return m;
}

} // namespace

void save_model(const PredictorModel& model, const std::filesystem::path& path) {
    if (model.kind == Kind::Oracle) {
        throw ConfigError("oracle predictor is test-only and cannot be persisted");
    }
    model.validate();
    nlohmann::json doc;
    doc["format_version"] = 1;
    doc["kind"] = to_string(model.kind);
    doc["input_length"] = model.input_length;
    doc["output_length"] = model.output_length;
    doc["norm"] = {{"mean_hz", model.norm.mean_hz}, {"scale_hz", model.norm.scale_hz}};
    if (model.kind == Kind::Lstm) {
        doc["hidden"] = model.hidden;
        nlohmann::json w;
        w["w_i"] = vector_to_json(model.weights.w_i);
        w["w_f"] = vector_to_json(model.weights.w_f);
        w["w_o"] = vector_to_json(model.weights.w_o);
        w["w_g"] = vector_to_json(model.weights.w_g);
        w["u_i"] = matrix_to_json_rowmajor(model.weights.u_i);
        w["u_f"] = matrix_to_json_rowmajor(model.weights.u_f);
        w["u_o"] = matrix_to_json_rowmajor(model.weights.u_o);
        w["u_g"] = matrix_to_json_rowmajor(model.weights.u_g);
        w["b_i"] = vector_to_json(model.weights.b_i);
        w["b_f"] = vector_to_json(model.weights.b_f);
        w["b_o"] = vector_to_json(model.weights.b_o);
        w["b_g"] = vector_to_json(model.weights.b_g);
        w["fc_w"] = matrix_to_json_rowmajor(model.weights.fc_w);
        w["fc_b"] = vector_to_json(model.weights.fc_b);
        doc["weights"] = std::move(w);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw FormatError("write failed: " + path.string());
}

PredictorModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": invalid JSON: " + e.what());
    }
    if (!doc.contains("format_version") || doc["format_version"].get<int>() != 1) {
        throw FormatError(path.string() + ": unsupported model format_version");
    }
    PredictorModel model;
    model.kind = kind_from_string(doc.at("kind").get<std::string>());
    model.input_length = doc.at("input_length").get<int>();
    model.output_length = doc.at("output_length").get<int>();
    model.norm.mean_hz = doc.at("norm").at("mean_hz").get<double>();
    model.norm.scale_hz = doc.at("norm").at("scale_hz").get<double>();
    if (model.kind == Kind::Lstm) {
        model.hidden = doc.at("hidden").get<int>();
        const auto h = static_cast<Eigen::Index>(model.hidden);
        const auto n = static_cast<Eigen::Index>(model.output_length);
        const auto& w = doc.at("weights");
        model.weights.w_i = vector_from_json(w.at("w_i"), h, "w_i");
        model.weights.w_f = vector_from_json(w.at("w_f"), h, "w_f");
        model.weights.w_o = vector_from_json(w.at("w_o"), h, "w_o");
        model.weights.w_g = vector_from_json(w.at("w_g"), h, "w_g");
        model.weights.u_i = matrix_from_json_rowmajor(w.at("u_i"), h, h, "u_i");
        model.weights.u_f = matrix_from_json_rowmajor(w.at("u_f"), h, h, "u_f");
        model.weights.u_o = matrix_from_json_rowmajor(w.at("u_o"), h, h, "u_o");
        model.weights.u_g = matrix_from_json_rowmajor(w.at("u_g"), h, h, "u_g");
        model.weights.b_i = vector_from_json(w.at("b_i"), h, "b_i");
        model.weights.b_f = vector_from_json(w.at("b_f"), h, "b_f");
        model.weights.b_o = vector_from_json(w.at("b_o"), h, "b_o");
        model.weights.b_g = vector_from_json(w.at("b_g"), h, "b_g");
        model.weights.fc_w = matrix_from_json_rowmajor(w.at("fc_w"), n, h, "fc_w");
        model.weights.fc_b = vector_from_json(w.at("fc_b"), n, "fc_b");
    }
    model.validate();
    return model;
}

} // namespace driftlock::predictor
