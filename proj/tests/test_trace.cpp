#include "driftlock/trace.hpp"

#include <fstream>
#include <gtest/gtest.h>

#include "driftlock/errors.hpp"
#include "test_util.hpp"

using driftlock::FormatError;
using driftlock::NoiseTrace;

namespace {

NoiseTrace make_trace(std::vector<double> values, double dt = 1.0, double t0 = 0.0) {
    NoiseTrace trace;
    trace.dt_s = dt;
    trace.t0_s = t0;
    trace.values = std::move(values);
    return trace;
}

} // namespace

TEST(Trace, TimeAxisIsExact) {
    auto trace = make_trace(std::vector<double>(1000001, 0.0), 0.1);
    EXPECT_DOUBLE_EQ(trace.time_at(1000000), 0.1 * 1000000.0);
    EXPECT_DOUBLE_EQ(trace.duration_s(), 0.1 * 1000000.0);
}

TEST(Trace, ValueAtHitsNodesExactly) {
    auto trace = make_trace({1.5, -2.25, 7.0});
    EXPECT_EQ(trace.value_at(0.0), 1.5);
    EXPECT_EQ(trace.value_at(1.0), -2.25);
    EXPECT_EQ(trace.value_at(2.0), 7.0);
    EXPECT_DOUBLE_EQ(trace.value_at(0.5), -0.375);
    // Out-of-range queries clamp.
    EXPECT_EQ(trace.value_at(-5.0), 1.5);
    EXPECT_EQ(trace.value_at(99.0), 7.0);
}

TEST(Trace, WindowMeanOfLineIsMidpoint) {
    std::vector<double> values(101);
    for (int i = 0; i <= 100; ++i) values[i] = 3.0 * i; // slope 3 line
    auto trace = make_trace(std::move(values));
    // Mean of a linear function over [20, 40] is its value at 30.
    EXPECT_NEAR(driftlock::window_mean(trace, 20.0, 40.0), 90.0, 1e-9);
}

TEST(Trace, CsvRoundTripIsBitExact) {
    test_util::TempDir dir;
    auto trace = make_trace({100.0, 200.0, 300.0});
    trace.values[1] = 0.1 + 0.2; // force a non-representable decimal
    save_trace(trace, dir.file("t.csv"));
    auto loaded = driftlock::load_trace(dir.file("t.csv"));
    ASSERT_EQ(loaded.size(), trace.size());
    EXPECT_DOUBLE_EQ(loaded.dt_s, 1.0);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        EXPECT_EQ(loaded.values[i], trace.values[i]) << "sample " << i;
    }
}

TEST(Trace, LoadParsesSimpleFile) {
    test_util::TempDir dir;
    std::ofstream out(dir.file("t.csv"));
    out << "time_s,freq_offset_hz\n0,100\n1,200\n2,300\n";
    out.close();
    auto trace = driftlock::load_trace(dir.file("t.csv"));
    EXPECT_DOUBLE_EQ(trace.dt_s, 1.0);
    ASSERT_EQ(trace.size(), 3u);
    EXPECT_EQ(trace.values[0], 100.0);
    EXPECT_EQ(trace.values[1], 200.0);
    EXPECT_EQ(trace.values[2], 300.0);
}

TEST(Trace, LoadRejectsNonUniformSampling) {
    test_util::TempDir dir;
    std::ofstream out(dir.file("t.csv"));
    out << "time_s,freq_offset_hz\n0,1\n1,2\n2.5,3\n";
    out.close();
    EXPECT_THROW(driftlock::load_trace(dir.file("t.csv")), FormatError);
}

TEST(Trace, LoadRejectsNonMonotoneTimeWithRowNumber) {
    test_util::TempDir dir;
    std::ofstream out(dir.file("t.csv"));
    out << "time_s,freq_offset_hz\n0,1\n2,2\n1,3\n";
    out.close();
    try {
        driftlock::load_trace(dir.file("t.csv"));
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("row 4"), std::string::npos) << e.what();
    }
}

TEST(Trace, LoadRejectsMalformedRow) {
    test_util::TempDir dir;
    std::ofstream out(dir.file("t.csv"));
    out << "time_s,freq_offset_hz\n0,1\nbogus\n";
    out.close();
    EXPECT_THROW(driftlock::load_trace(dir.file("t.csv")), FormatError);
}
