#pragma once
// baselines.hpp - comparison-sort oracle and an instrumented LSB radix sort.

#include "fractalsort/bits.hpp"
#include "fractalsort/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace fractalsort {

template <std::unsigned_integral Key>
struct BaselineResult {
    std::vector<Key> sorted_keys;
    double latency_seconds = 0.0;
    std::uint64_t peak_aux_bytes = 0;
    std::uint64_t traffic_bytes = 0;
    unsigned passes = 0;
};

template <std::unsigned_integral Key>
std::vector<Key> oracle_sort(std::span<const Key> keys) {
    std::vector<Key> out(keys.begin(), keys.end());
    std::sort(out.begin(), out.end());
    return out;
}

[[nodiscard]] inline unsigned radix_pass_count(unsigned precision_bits, unsigned digit_bits) {
    digit_bits = std::min(digit_bits, precision_bits);
    return (precision_bits + digit_bits - 1) / digit_bits;
}

inline void check_radix_config(unsigned precision_bits, unsigned digit_bits) {
    if (precision_bits < 1 || precision_bits > 64) throw std::invalid_argument("radix: precision must be 1..64");
    if (digit_bits < 1 || digit_bits > 16) throw std::invalid_argument("radix: digit bits must be 1..16");
}

// Stable LSB radix argsort over full keys: order[s] is the arrival position of
// the s-th smallest key, ties in arrival order.
template <std::unsigned_integral Key>
std::vector<std::uint32_t> lsb_radix_argsort(std::span<const Key> keys, unsigned precision_bits, unsigned digit_bits) {
    check_radix_config(precision_bits, digit_bits);
    digit_bits = std::min(digit_bits, precision_bits);
    std::vector<std::uint32_t> order(keys.size());
    std::vector<std::uint32_t> next(keys.size());
    std::iota(order.begin(), order.end(), std::uint32_t{0});
    std::vector<std::size_t> count(std::size_t{1} << digit_bits);
    const std::uint64_t mask = low_mask(digit_bits);
    for (unsigned shift = 0; shift < precision_bits; shift += digit_bits) {
        std::fill(count.begin(), count.end(), 0);
        for (const auto i : order) ++count[(std::uint64_t{keys[i]} >> shift) & mask];
        std::exclusive_scan(count.begin(), count.end(), count.begin(), std::size_t{0});
        for (const auto i : order) next[count[(std::uint64_t{keys[i]} >> shift) & mask]++] = i;
        order.swap(next);
    }
    return order;
}

// LSB radix sort: ceil(p / digit_bits) passes of histogram, exclusive prefix sum
// and stable scatter, ping-ponging between the output and one n-key scratch buffer.
// Each pass is charged two reads and one write of the key array; digit counts go
// through the cache-budget rule.
template <std::unsigned_integral Key>
BaselineResult<Key> lsb_radix_sort(std::span<const Key> keys, unsigned precision_bits, unsigned digit_bits,
                                   TrafficMeter* meter = nullptr) {
    check_radix_config(precision_bits, digit_bits);
    const auto start = std::chrono::steady_clock::now();
    digit_bits = std::min(digit_bits, precision_bits);
    const unsigned passes = radix_pass_count(precision_bits, digit_bits);
    const std::size_t n = keys.size();
    const std::uint64_t array_bytes = static_cast<std::uint64_t>(n) * sizeof(Key);

    TrafficMeter local(meter ? meter->cache_budget() : kDefaultCacheBudget);
    TrafficMeter& m = meter ? *meter : local;
    const std::uint64_t base_read = m.bytes_read();
    const std::uint64_t base_written = m.bytes_written();

    BaselineResult<Key> result;
    result.passes = passes;
    result.sorted_keys.resize(n);
    std::vector<Key> scratch(n);
    std::vector<std::size_t> count(std::size_t{1} << digit_bits);
    const std::uint64_t count_bytes = count.size() * sizeof(std::size_t);
    TrackedBytes scratch_mem(&m, array_bytes);
    TrackedBytes count_mem(&m, count_bytes);

    // pick the first destination so the last pass lands in the output
    std::span<const Key> src = keys;
    Key* dst = passes % 2 == 1 ? result.sorted_keys.data() : scratch.data();
    const std::uint64_t mask = low_mask(digit_bits);
    for (unsigned pass = 0; pass < passes; ++pass) {
        const unsigned shift = pass * digit_bits;
        std::fill(count.begin(), count.end(), 0);
        for (const Key k : src) ++count[(std::uint64_t{k} >> shift) & mask];
        m.record_read(array_bytes);
        std::exclusive_scan(count.begin(), count.end(), count.begin(), std::size_t{0});
        m.touch_read(count_bytes, count_bytes);
        for (const Key k : src) dst[count[(std::uint64_t{k} >> shift) & mask]++] = k;
        m.record_read(array_bytes);
        m.record_write(array_bytes);
        m.touch_write(static_cast<std::uint64_t>(n) * sizeof(std::size_t), count_bytes);
        src = std::span<const Key>(dst, n);
        dst = dst == scratch.data() ? result.sorted_keys.data() : scratch.data();
    }
    if (passes == 0) std::copy(keys.begin(), keys.end(), result.sorted_keys.begin());

    result.latency_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.peak_aux_bytes = m.peak_aux_bytes();
    result.traffic_bytes = (m.bytes_read() - base_read) + (m.bytes_written() - base_written);
    return result;
}

} // namespace fractalsort
