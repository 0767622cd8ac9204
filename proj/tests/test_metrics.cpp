#include "fractalsort/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fractalsort;

TEST(TrafficMeter, FreshIsZero) {
    TrafficMeter m;
    EXPECT_EQ(m.bytes_read(), 0u);
    EXPECT_EQ(m.bytes_written(), 0u);
    EXPECT_EQ(m.peak_aux_bytes(), 0u);
    EXPECT_EQ(m.tracked_bytes(), 0u);
}

TEST(TrafficMeter, RecordAndPeak) {
    TrafficMeter m;
    m.record_read(8);
    m.record_read(8);
    EXPECT_EQ(m.bytes_read(), 16u);
    m.track_alloc(100);
    m.track_alloc(50);
    m.track_free(100);
    EXPECT_EQ(m.peak_aux_bytes(), 150u);
    EXPECT_EQ(m.tracked_bytes(), 50u);
    EXPECT_THROW(m.track_free(51), std::logic_error);
}

TEST(TrafficMeter, TouchRespectsCacheBudget) {
    TrafficMeter m(1000);
    m.touch_read(64, 1000);
    m.touch_write(64, 999);
    EXPECT_EQ(m.total_bytes(), 0u);
    m.touch_read(64, 1001);
    m.touch_write(32, 5000);
    EXPECT_EQ(m.bytes_read(), 64u);
    EXPECT_EQ(m.bytes_written(), 32u);
}

TEST(TrafficMeter, AbsorbConcurrentWorkers) {
    TrafficMeter m;
    m.track_alloc(10);
    std::vector<TrafficMeter> workers(2);
    workers[0].track_alloc(100);
    workers[0].track_free(60);
    workers[0].record_read(5);
    workers[1].track_alloc(30);
    workers[1].record_write(7);
    m.absorb_concurrent(workers);
    EXPECT_EQ(m.peak_aux_bytes(), 140u);
    EXPECT_EQ(m.tracked_bytes(), 80u);
    EXPECT_EQ(m.bytes_read(), 5u);
    EXPECT_EQ(m.bytes_written(), 7u);
}

TEST(TrackedBytes, Raii) {
    TrafficMeter m;
    {
        TrackedBytes a(&m, 40);
        a.resize(100);
        a.resize(20);
        EXPECT_EQ(m.tracked_bytes(), 20u);
    }
    EXPECT_EQ(m.tracked_bytes(), 0u);
    EXPECT_EQ(m.peak_aux_bytes(), 100u);
}

TEST(Metrics, BandwidthEfficiency) {
    EXPECT_DOUBLE_EQ(bandwidth_efficiency(4e9, 8e9), 0.5);
    EXPECT_DOUBLE_EQ(bandwidth_efficiency(3e9, 3e9), 1.0);
    EXPECT_THROW((void)bandwidth_efficiency(1, 0), std::invalid_argument);
    EXPECT_DOUBLE_EQ(essential_bytes(1u << 20, 16), 2.0 * (1u << 20) * 2);
}

TEST(Metrics, UnitThroughputReferences) {
    EXPECT_NEAR(kParadisReference.keys_per_sec_per_core() / 1e6, 14.59, 0.005);
    EXPECT_NEAR(kHistogramSortCpuReference.keys_per_sec_per_core() / 1e6, 25.30, 0.005);
    EXPECT_EQ(unit_throughput(0, 0, 1), 0.0);
    EXPECT_THROW((void)unit_throughput(10, 0, 1), std::invalid_argument);
    EXPECT_THROW((void)unit_throughput(10, 1, 0), std::invalid_argument);
}

TEST(RunReport, CsvRoundTrip) {
    RunReport r;
    r.n = 1u << 20;
    r.p = 16;
    r.b = 4;
    r.mode = "parallel";
    r.algorithm = "radix";
    r.latency_seconds = 0.0123;
    r.bytes_read = 123456;
    r.bytes_written = 7890;
    r.peak_aux_bytes = 4242;
    r.derive(2);
    const auto back = RunReport::from_csv(r.to_csv());
    EXPECT_EQ(back.n, r.n);
    EXPECT_EQ(back.p, r.p);
    EXPECT_EQ(back.b, r.b);
    EXPECT_EQ(back.mode, r.mode);
    EXPECT_EQ(back.algorithm, r.algorithm);
    EXPECT_DOUBLE_EQ(back.latency_seconds, r.latency_seconds);
    EXPECT_EQ(back.bytes_read, r.bytes_read);
    EXPECT_EQ(back.peak_aux_bytes, r.peak_aux_bytes);
    EXPECT_NEAR(back.b_eff, r.b_eff, 1e-5 * r.b_eff);
    EXPECT_NEAR(back.unit_throughput_keys_per_sec, r.unit_throughput_keys_per_sec, 1e-6 * r.unit_throughput_keys_per_sec);
    EXPECT_THROW(RunReport::from_csv("1,2,3"), std::invalid_argument);
    EXPECT_THROW(RunReport::from_csv("x,16,1,serial,fractal,1,1,1,1,1,1"), std::invalid_argument);
}
