#include "driftlock/ramsey.hpp"

#include <cmath>
#include <fstream>
#include <gtest/gtest.h>
#include <limits>

#include "driftlock/errors.hpp"
#include "driftlock/noise.hpp"
#include "driftlock/rng.hpp"
#include "driftlock/spectral.hpp"
#include "test_util.hpp"

using namespace driftlock;
using namespace driftlock::ramsey;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

NoiseTrace zero_trace(double duration_s, double dt_s = 1.0) {
    NoiseTrace trace;
    trace.dt_s = dt_s;
    trace.values.assign(static_cast<std::size_t>(duration_s / dt_s) + 1, 0.0);
    return trace;
}

RamseyConfig basic_config() {
    RamseyConfig cfg;
    cfg.bias_hz = 1e6;
    cfg.t_evol_s = RamseyConfig::uniform_grid(0.05e-6, 8e-6, 200);
    cfg.shots_per_point = 1;
    cfg.shot_wall_time_s = 5e-3;
    cfg.intrinsic_t2_s = 2e-6;
    return cfg;
}

} // namespace

TEST(SimulateRamsey, NoiselessFringeIsExact) {
    auto cfg = basic_config();
    cfg.intrinsic_t2_s = std::numeric_limits<double>::infinity();
    auto residual = zero_trace(10.0);
    auto curve = simulate_ramsey(residual, cfg, 1);
    ASSERT_EQ(curve.signal.size(), cfg.t_evol_s.size());
    for (std::size_t i = 0; i < curve.signal.size(); ++i) {
        const double expected = 0.5 * (1.0 + std::cos(kTwoPi * cfg.bias_hz * cfg.t_evol_s[i]));
        EXPECT_EQ(curve.signal[i], expected) << "point " << i;
    }
}

TEST(SimulateRamsey, DecayFitRecoversT2AndBias) {
    auto cfg = basic_config();
    auto residual = zero_trace(10.0);
    auto curve = simulate_ramsey(residual, cfg, 1);
    auto fit = spectral::fit_ramsey_decay(curve, cfg.decay_exponent);
    EXPECT_TRUE(fit.reliable_t2);
    EXPECT_NEAR(fit.t2_star_s, 2e-6, 0.01 * 2e-6);
    EXPECT_NEAR(fit.freq_hz, 1e6, 0.01 * 1e6);
}

TEST(SimulateRamsey, StaticGaussianDetuningMatchesEnsembleOracle) {
    // Shot-to-shot Gaussian detuning of std sigma_f multiplies the fringe by
    // exp(-2 pi^2 sigma_f^2 t^2) in the ensemble mean (the characteristic
    // function of the Gaussian).
    const double sigma_f = 30e3;
    auto cfg = basic_config();
    cfg.intrinsic_t2_s = std::numeric_limits<double>::infinity();
    cfg.t_evol_s = RamseyConfig::uniform_grid(0.05e-6, 12e-6, 120);
    cfg.shots_per_point = 400;

    NoiseTrace residual;
    residual.dt_s = cfg.shot_wall_time_s;
    Rng rng(8);
    const auto n = static_cast<std::size_t>(cfg.shots_per_point) * cfg.t_evol_s.size() + 2;
    residual.values.resize(n);
    for (double& v : residual.values) v = sigma_f * rng.gauss();

    auto curve = simulate_ramsey(residual, cfg, 3);
    for (std::size_t i = 0; i < curve.t_evol_s.size(); ++i) {
        const double t = curve.t_evol_s[i];
        const double envelope = std::exp(-2.0 * M_PI * M_PI * sigma_f * sigma_f * t * t);
        const double expected = 0.5 * (1.0 + envelope * std::cos(kTwoPi * cfg.bias_hz * t));
        EXPECT_NEAR(curve.signal[i], expected, 5.0 * curve.std_err[i] + 2e-3) << "point " << i;
    }
}

TEST(SimulateRamsey, LinewidthGrowsWithDetuningSpread) {
    // Each spread gets a span matched to its coherence time (about six
    // Gaussian decay constants), the way a real acquisition would size the
    // grid; otherwise the window swamps a fast-dying fringe.
    std::vector<double> widths;
    for (double sigma_f : {0.0, 10e3, 30e3, 100e3}) {
        RamseyConfig cfg = basic_config();
        cfg.intrinsic_t2_s = std::numeric_limits<double>::infinity();
        double span = 60e-6;
        if (sigma_f > 0.0) span = std::min(span, 6.0 / (std::sqrt(2.0) * M_PI * sigma_f));
        const int points = std::max(60, static_cast<int>(span / 0.1e-6));
        cfg.t_evol_s = RamseyConfig::uniform_grid(0.1e-6, span, points);
        cfg.shots_per_point = 500;

        NoiseTrace residual;
        residual.dt_s = cfg.shot_wall_time_s;
        Rng rng(5);
        const auto n = static_cast<std::size_t>(cfg.shots_per_point) * cfg.t_evol_s.size() + 2;
        residual.values.resize(n);
        for (double& v : residual.values) v = sigma_f * rng.gauss();

        auto curve = simulate_ramsey(residual, cfg, 7);
        const double dt = curve.t_evol_s[1] - curve.t_evol_s[0];
        auto spec = spectral::fft_spectrum(curve.signal, dt, {});
        auto fit = spectral::fit_lorentzian(spec, 1, std::nullopt, std::make_pair(0.3e6, 1.7e6));
        widths.push_back(fit.peaks[0].hwhm_hz);
    }
    for (std::size_t i = 1; i < widths.size(); ++i) {
        EXPECT_GT(widths[i], widths[i - 1]) << "step " << i;
    }
}

TEST(SimulateRamsey, PhotonReadoutIsUnbiased) {
    auto cfg = basic_config();
    cfg.t_evol_s = RamseyConfig::uniform_grid(0.05e-6, 4e-6, 40);
    cfg.shots_per_point = 4000;
    cfg.readout.ideal = false;
    cfg.readout.contrast = 0.3;
    cfg.readout.photons_per_shot = 0.05;
    auto residual = zero_trace(2000.0);
    auto curve = simulate_ramsey(residual, cfg, 11);
    for (std::size_t i = 0; i < curve.t_evol_s.size(); ++i) {
        const double t = curve.t_evol_s[i];
        const double expected = 0.5 * (1.0 + std::exp(-t / cfg.intrinsic_t2_s) *
                                                 std::cos(kTwoPi * cfg.bias_hz * t));
        EXPECT_NEAR(curve.signal[i], expected, 5.0 * curve.std_err[i] + 1e-3);
    }
}

TEST(SimulateRamsey, CoverageErrorWhenResidualTooShort) {
    auto cfg = basic_config();
    cfg.shots_per_point = 100; // needs 100 * 200 * 5 ms = 100 s
    auto residual = zero_trace(10.0);
    EXPECT_THROW(simulate_ramsey(residual, cfg, 1), CoverageError);
}

TEST(SimulateRamsey, DeterministicWithReadoutNoise) {
    auto cfg = basic_config();
    cfg.readout.ideal = false;
    cfg.shots_per_point = 50;
    auto residual = zero_trace(60.0);
    auto a = simulate_ramsey(residual, cfg, 17);
    auto b = simulate_ramsey(residual, cfg, 17);
    for (std::size_t i = 0; i < a.signal.size(); ++i) EXPECT_EQ(a.signal[i], b.signal[i]);
}

TEST(SweepLinewidth, IdealSweepProducesCleanPointsAndIsDeterministic) {
    noise::NoiseSpec spec;
    spec.seed = 4;
    spec.components.push_back(noise::OuComponent{1e-4, 50e3});
    auto noise_trace = noise::generate(spec, 4000.0, 1.0);

    SweepConfig cfg;
    cfg.nu_hz = {0.05, 0.2, 0.5};
    cfg.scheme = ctrl::Scheme::IdealFeedback;
    cfg.ramsey = basic_config();
    cfg.ramsey.t_evol_s = RamseyConfig::uniform_grid(0.05e-6, 10e-6, 80);
    cfg.ramsey.shots_per_point = 8;
    cfg.ramsey.intrinsic_t2_s = 4e-6;

    auto serial = sweep_linewidth(noise_trace, cfg, 99, 1);
    auto parallel = sweep_linewidth(noise_trace, cfg, 99, 3);
    ASSERT_EQ(serial.size(), 3u);
    for (std::size_t i = 0; i < serial.size(); ++i) {
        EXPECT_NE(serial[i].flag, "failed") << serial[i].note;
        EXPECT_EQ(serial[i].l_hz, parallel[i].l_hz);
        EXPECT_EQ(serial[i].t2_star_s, parallel[i].t2_star_s);
        EXPECT_GT(serial[i].l_hz, 0.0);
    }
}

TEST(SweepLinewidth, InfeasibleGridIsAHardErrorPerPoint) {
    auto noise_trace = zero_trace(4000.0);
    SweepConfig cfg;
    cfg.nu_hz = {0.5};
    cfg.scheme = ctrl::Scheme::IdealFeedback;
    cfg.ramsey = basic_config();
    // 200 points x 5 ms = 1 s sweep cycle > tau/4 = 0.5 s.
    auto points = sweep_linewidth(noise_trace, cfg, 1, 1);
    ASSERT_EQ(points.size(), 1u);
    EXPECT_EQ(points[0].flag, "failed");
    EXPECT_NE(points[0].note.find("sweep"), std::string::npos);
}

TEST(SweepCsv, RoundTripHeaderAndRows) {
    test_util::TempDir dir;
    std::vector<SweepPoint> points;
    points.push_back({0.1, 1234.5, 10.0, 2e-6, "ok", ""});
    points.push_back({0.2, 834.5, 8.0, 3e-6, "failed", "whatever"});
    save_sweep(points, dir.file("sweep.csv"));

    std::ifstream in(dir.file("sweep.csv"));
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "nu_hz,l_hz,l_sigma_hz,t2_star_s,flag");
    std::string row;
    std::getline(in, row);
    EXPECT_NE(row.find("ok"), std::string::npos);
}

TEST(RamseyCurveCsv, RoundTrip) {
    test_util::TempDir dir;
    RamseyCurve curve;
    curve.t_evol_s = {1e-6, 2e-6, 3e-6};
    curve.signal = {0.9, 0.5, 0.1};
    curve.std_err = {0.01, 0.01, 0.02};
    save_curve(curve, dir.file("curve.csv"));
    auto loaded = load_curve(dir.file("curve.csv"));
    ASSERT_EQ(loaded.t_evol_s.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(loaded.t_evol_s[i], curve.t_evol_s[i]);
        EXPECT_EQ(loaded.signal[i], curve.signal[i]);
    }
}
