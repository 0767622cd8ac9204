#include "fractalsort/batch_engine.hpp"
#include "fractalsort/baselines.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

using namespace fractalsort;

namespace {

std::vector<std::uint32_t> uniform_keys(std::size_t n, unsigned p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::uint32_t> keys(n);
    for (auto& k : keys) k = static_cast<std::uint32_t>(rng() >> (64 - p));
    return keys;
}

BatchConfig config(std::size_t b, BatchMode mode = BatchMode::serial, unsigned workers = 1) {
    BatchConfig c;
    c.batch_count = b;
    c.mode = mode;
    c.worker_limit = workers;
    return c;
}

} // namespace

TEST(BatchEngine, SerialEqualAcrossBatchCounts) {
    const auto keys = uniform_keys(100000, 32, 1);
    const auto expect = oracle_sort<std::uint32_t>(keys);
    for (std::size_t b : {1, 2, 5, 10, 20}) {
        EXPECT_EQ(fractal_sort<std::uint32_t>(keys, 32, config(b)), expect) << "b=" << b;
    }
}

TEST(BatchEngine, SingleBatchMatchesSingleShotPipeline) {
    const auto keys = uniform_keys(5000, 20, 2);
    const auto plan = SortPlan::make(keys.size(), 20);
    auto table = build_bins<std::uint32_t>(keys, plan);
    sort_bins(table);
    EXPECT_EQ(run_serial<std::uint32_t>(std::span<const std::uint32_t>(keys), config(1), plan),
              reconstruct_all<std::uint32_t>(table));
}

TEST(BatchEngine, ParallelEqualsSerial) {
    const auto keys = uniform_keys(100000, 32, 3);
    const auto serial = fractal_sort<std::uint32_t>(keys, 32, config(8));
    const auto parallel = fractal_sort<std::uint32_t>(keys, 32, config(8, BatchMode::parallel, 4));
    EXPECT_EQ(parallel, serial);
    for (int rep = 0; rep < 3; ++rep) {
        EXPECT_EQ(fractal_sort<std::uint32_t>(keys, 32, config(8, BatchMode::parallel, 4)), parallel);
    }
    EXPECT_EQ(fractal_sort<std::uint32_t>(keys, 32, config(8, BatchMode::parallel, 1)), serial);
}

TEST(BatchEngine, SharedHistogramMode) {
    const auto keys = uniform_keys(50000, 24, 4);
    auto c = config(6, BatchMode::parallel, 3);
    c.shared_histogram = true;
    PipelineStats stats;
    EXPECT_EQ(fractal_sort<std::uint32_t>(keys, 24, c, nullptr, &stats), oracle_sort<std::uint32_t>(keys));
    EXPECT_EQ(stats.workers, 3u);
}

TEST(BatchEngine, WorkerCountIsMinOfBatchesAndLimit) {
    const auto keys = uniform_keys(1000, 16, 5);
    PipelineStats stats;
    (void)fractal_sort<std::uint32_t>(keys, 16, config(3, BatchMode::parallel, 8), nullptr, &stats);
    EXPECT_EQ(stats.workers, 3u);
    (void)fractal_sort<std::uint32_t>(keys, 16, config(9, BatchMode::parallel, 2), nullptr, &stats);
    EXPECT_EQ(stats.workers, 2u);
}

TEST(BatchEngine, EmptyInput) {
    const std::vector<std::uint32_t> none;
    for (auto mode : {BatchMode::serial, BatchMode::parallel}) {
        EXPECT_TRUE(fractal_sort<std::uint32_t>(none, 32, config(4, mode, 2)).empty());
    }
}

TEST(BatchEngine, MoreBatchesThanKeys) {
    const std::vector<std::uint32_t> keys{9, 3, 7};
    const std::vector<std::uint32_t> expect{3, 7, 9};
    EXPECT_EQ(fractal_sort<std::uint32_t>(keys, 8, config(10)), expect);
    EXPECT_EQ(fractal_sort<std::uint32_t>(keys, 8, config(10, BatchMode::parallel, 4)), expect);
}

TEST(BatchEngine, ReuseAllocatesOnce) {
    const auto keys = uniform_keys(20000, 32, 6);
    PipelineStats reused;
    PipelineStats fresh;
    auto c = config(10);
    (void)fractal_sort<std::uint32_t>(keys, 32, c, nullptr, &reused);
    c.reuse_histogram = false;
    EXPECT_EQ(fractal_sort<std::uint32_t>(keys, 32, c, nullptr, &fresh), oracle_sort<std::uint32_t>(keys));
    EXPECT_GT(fresh.histogram_allocations, reused.histogram_allocations);
}

TEST(BatchEngine, RejectsBadInput) {
    const std::vector<std::uint32_t> keys{1u << 20};
    EXPECT_THROW(fractal_sort<std::uint32_t>(keys, 16, config(1)), std::out_of_range);
    EXPECT_THROW(fractal_sort<std::uint32_t>(keys, 16, config(0)), std::invalid_argument);
    EXPECT_THROW(fractal_sort<std::uint32_t>(keys, 40, config(1)), std::invalid_argument);
}

TEST(BatchEngine, WorkerFailureIsReported) {
    try {
        detail::run_workers(3, [](unsigned w) {
            if (w == 1) throw std::runtime_error("boom");
        });
        FAIL() << "expected a throw";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("worker 1"), std::string::npos);
    }
}

TEST(BatchEngine, StreamsFromSource) {
    const auto keys = uniform_keys(3333, 12, 7);
    SpanSource<std::uint32_t> source(keys);
    const auto plan = SortPlan::make(keys.size(), 12);
    EXPECT_EQ(run_serial<std::uint32_t>(source, config(4), plan), oracle_sort<std::uint32_t>(keys));
}

TEST(BatchEngine, SmallKeyTypes) {
    std::mt19937_64 rng(8);
    std::vector<std::uint8_t> k8(4000);
    for (auto& k : k8) k = static_cast<std::uint8_t>(rng());
    EXPECT_EQ(fractal_sort<std::uint8_t>(k8, 8, config(3)), oracle_sort<std::uint8_t>(k8));
    std::vector<std::uint64_t> k64(4000);
    for (auto& k : k64) k = rng();
    EXPECT_EQ(fractal_sort<std::uint64_t>(k64, 64, config(3, BatchMode::parallel, 2)), oracle_sort<std::uint64_t>(k64));
}

TEST(BatchEngine, PeakMemoryNonincreasingInBatches) {
    const auto keys = uniform_keys(1u << 18, 32, 9);
    std::uint64_t prev = ~std::uint64_t{0};
    for (std::size_t b : {1, 2, 5, 10, 20}) {
        TrafficMeter meter;
        (void)fractal_sort<std::uint32_t>(keys, 32, config(b), &meter);
        EXPECT_LE(meter.peak_aux_bytes(), prev + prev / 50) << "b=" << b;
        prev = meter.peak_aux_bytes();
        EXPECT_EQ(meter.tracked_bytes(), 0u);
    }
}

TEST(ChooseBatchParams, Clamps) {
    EXPECT_EQ(choose_batch_params(10, 32).batch_count, 2u);
    EXPECT_EQ(choose_batch_params(1ull << 40, 32).batch_count, 20u);
    EXPECT_EQ(choose_batch_params(1, 8).batch_count, 2u);
    EXPECT_EQ(choose_batch_params(10, 32).mode, BatchMode::serial);
    std::size_t prev = 0;
    for (std::uint64_t n = 1; n < (1ull << 30); n = n * 3 / 2 + 1) {
        const auto b = choose_batch_params(n, 32).batch_count;
        ASSERT_GE(b, prev);
        prev = b;
    }
}
