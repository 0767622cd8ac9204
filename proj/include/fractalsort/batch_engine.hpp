#pragma once
// batch_engine.hpp - batch-streaming sort driver.
//
// The input is consumed in b contiguous batches. Every batch updates the bin-level
// histogram and appends one entry segment (its keys' packed entries grouped by bin,
// arrival order within a bin). Once all batches are in, bins are emitted in ascending
// order: a bin's entries are gathered from the segments in batch order, argsorted,
// and recomposed into keys. Serial and parallel runs build the same segments, so
// they emit the same array.

#include "fractalsort/bin_sorter.hpp"
#include "fractalsort/bits.hpp"
#include "fractalsort/fractal_histogram.hpp"
#include "fractalsort/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <concepts>
#include <cstdint>
#include <exception>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fractalsort {

enum class BatchMode { serial, parallel };

[[nodiscard]] inline const char* to_string(BatchMode mode) noexcept {
    return mode == BatchMode::serial ? "serial" : "parallel";
}

struct BatchConfig {
    std::size_t batch_count = 2;
    BatchMode mode = BatchMode::serial;
    unsigned worker_limit = 1;
    bool reuse_histogram = true;
    // Parallel only: all workers update one histogram with atomic increments and
    // scatter entries through atomic bin cursors instead of merging local copies.
    bool shared_histogram = false;

    void validate() const {
        if (batch_count < 1) throw std::invalid_argument("BatchConfig: batch count must be >= 1");
        if (worker_limit < 1) throw std::invalid_argument("BatchConfig: worker limit must be >= 1");
    }
};

inline constexpr std::uint64_t kDefaultCacheSize = std::uint64_t{8} << 20;
inline constexpr std::size_t kMinBatches = 2;
inline constexpr std::size_t kMaxBatches = 20;

// Serial config with b = clamp(n * p / 8 / (cache_size / 4), 2, 20).
[[nodiscard]] inline BatchConfig choose_batch_params(std::uint64_t n, unsigned p,
                                                     std::uint64_t cache_size = kDefaultCacheSize) {
    BatchConfig config;
    if (n == 0) {
        config.batch_count = 1;
        return config;
    }
    const std::uint64_t target = std::max<std::uint64_t>(cache_size / 4, 1);
    const long double data_bytes = static_cast<long double>(n) * p / 8.0L;
    const long double ratio = data_bytes / static_cast<long double>(target);
    config.batch_count = ratio >= kMaxBatches ? kMaxBatches
                                              : std::clamp<std::size_t>(static_cast<std::size_t>(ratio), kMinBatches,
                                                                        kMaxBatches);
    return config;
}

struct PipelineStats {
    std::size_t batches = 0;
    unsigned workers = 1;
    std::size_t histogram_allocations = 0;
    std::uint64_t histogram_footprint = 0;
    std::uint64_t max_bin = 0;
};

// Pull-based key stream: total length up front, then batches on request.
template <class S, class Key>
concept KeySource = requires(S& s, std::span<Key> out) {
    { s.size() } -> std::convertible_to<std::uint64_t>;
    { s.pull(out) } -> std::convertible_to<std::size_t>;
};

template <std::unsigned_integral Key>
class SpanSource {
public:
    explicit SpanSource(std::span<const Key> keys) : keys_(keys) {}
    [[nodiscard]] std::uint64_t size() const noexcept { return keys_.size(); }
    std::size_t pull(std::span<Key> out) {
        const std::size_t m = std::min(out.size(), keys_.size() - pos_);
        std::copy_n(keys_.begin() + static_cast<std::ptrdiff_t>(pos_), m, out.begin());
        pos_ += m;
        return m;
    }

private:
    std::span<const Key> keys_;
    std::size_t pos_ = 0;
};

// One batch's packed entries grouped by bin. offsets has n_bins + 1 entries,
// each bit_width(batch length) bits wide.
struct EntrySegment {
    packed_vector entries;
    packed_vector offsets;

    [[nodiscard]] std::uint64_t bytes() const noexcept { return entries.bytes() + offsets.bytes(); }
};

// Histogram whose last level is the bin level of the plan.
[[nodiscard]] inline HistogramLayout pipeline_layout(const SortPlan& plan, std::uint64_t n) {
    HistogramLayout layout;
    layout.precision_bits = plan.precision_bits;
    layout.trie_depth = plan.bin_bits();
    layout.dense_depth = std::clamp(plan.bin_bits(), 1u, std::min(32u, plan.precision_bits));
    layout.capacity_hint = std::max<std::uint64_t>(n, 1);
    return layout;
}

namespace detail {

template <std::unsigned_integral Key>
void check_key_type(const SortPlan& plan) {
    plan.validate();
    if (plan.precision_bits > 8 * sizeof(Key)) throw std::invalid_argument("precision wider than key type");
}

template <std::unsigned_integral Key>
void check_keys(std::span<const Key> keys, unsigned p) {
    if (p >= 8 * sizeof(Key)) return;
    for (const Key k : keys) {
        if ((std::uint64_t{k} >> p) != 0) throw std::out_of_range("key wider than precision");
    }
}

// Count pass (also feeding `count` for the histogram) then stable scatter.
// `cursor` is n_bins words of caller-owned scratch.
template <std::unsigned_integral Key, class Count>
EntrySegment build_segment(std::span<const Key> batch, const SortPlan& plan, Count&& count,
                           std::vector<std::uint64_t>& cursor) {
    const std::uint64_t bins = plan.bin_count();
    cursor.assign(bins, 0);
    for (const Key k : batch) {
        count(k);
        ++cursor[bin_of(k, plan)];
    }
    EntrySegment seg;
    seg.offsets = packed_vector(bins + 1, static_cast<unsigned>(std::bit_width(batch.size())));
    std::uint64_t sum = 0;
    for (std::uint64_t b = 0; b < bins; ++b) {
        seg.offsets.set(b, sum);
        const std::uint64_t c = cursor[b];
        cursor[b] = sum;
        sum += c;
    }
    seg.offsets.set(bins, sum);
    seg.entries = packed_vector(batch.size(), plan.entry_width());
    for (const Key k : batch) seg.entries.set(cursor[bin_of(k, plan)]++, entry_of(k, plan));
    return seg;
}

inline void charge_histogram_updates(TrafficMeter& m, std::uint64_t keys, const FractalHistogram& hist) {
    const std::uint64_t touches = keys * (hist.depth() + 1) * sizeof(std::uint64_t);
    m.touch_read(touches, hist.footprint_bytes());
    m.touch_write(touches, hist.footprint_bytes());
}

// Emit all bins in ascending order into `out`.
template <std::unsigned_integral Key>
void emit_sorted(const FractalHistogram& hist, std::span<const EntrySegment> segments, const SortPlan& plan,
                 std::span<Key> out, TrafficMeter& m, PipelineStats& stats) {
    const unsigned level = plan.bin_bits();
    BinSortScratch scratch;
    TrackedBytes scratch_mem(&m, 0);
    std::uint64_t pos = 0;
    for (std::uint64_t b = 0; b < plan.bin_count(); ++b) {
        const std::uint64_t c = hist.counter(level, b);
        if (c == 0) continue;
        scratch.entries.clear();
        for (const auto& seg : segments) {
            if (seg.offsets.empty()) continue; // batch with no keys
            const std::uint64_t end = seg.offsets.get(b + 1);
            for (std::uint64_t i = seg.offsets.get(b); i < end; ++i) scratch.entries.push_back(seg.entries.get(i));
        }
        if (scratch.entries.size() != c) throw std::logic_error("bin population disagrees with histogram");
        const auto order = sort_bin(scratch.entries, plan.entry_width(), scratch);
        if (scratch.bytes() > scratch_mem.bytes()) scratch_mem.resize(scratch.bytes());
        for (std::uint64_t s = 0; s < c; ++s) out[pos++] = static_cast<Key>(compose_key(b, scratch.entries[order[s]], plan));
        const std::uint64_t touched = c * (sizeof(std::uint64_t) + 2 * sizeof(std::uint32_t));
        m.touch_read(touched, scratch.bytes());
        m.touch_write(touched, scratch.bytes());
        stats.max_bin = std::max(stats.max_bin, c);
    }
    if (pos != out.size()) throw std::logic_error("histogram total disagrees with input size");
    m.touch_read(plan.bin_count() * sizeof(std::uint64_t), hist.footprint_bytes());
    for (const auto& seg : segments) m.record_read(seg.entries.payload_bytes());
    m.record_write(out.size_bytes());
}

inline std::uint64_t segment_bytes(std::span<const EntrySegment> segments) {
    std::uint64_t bytes = 0;
    for (const auto& s : segments) bytes += s.bytes();
    return bytes;
}

// Run fn(worker) on `workers` threads (inline when there is one) and rethrow the
// first failure with its worker id.
template <class Fn>
void run_workers(unsigned workers, Fn&& fn) {
    std::vector<std::exception_ptr> errors(workers);
    auto guarded = [&](unsigned w) {
        try {
            fn(w);
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (workers == 1) {
        guarded(0);
    } else {
        std::vector<std::jthread> threads;
        threads.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) threads.emplace_back(guarded, w);
    }
    for (unsigned w = 0; w < workers; ++w) {
        if (!errors[w]) continue;
        try {
            std::rethrow_exception(errors[w]);
        } catch (const std::exception& e) {
            throw std::runtime_error("sort worker " + std::to_string(w) + " failed: " + e.what());
        } catch (...) {
            throw std::runtime_error("sort worker " + std::to_string(w) + " failed");
        }
    }
}

struct BatchSlices {
    std::uint64_t n = 0;
    std::size_t count = 1;
    std::uint64_t length = 0;

    BatchSlices(std::uint64_t total, std::size_t batches)
        : n(total), count(batches), length(batches == 0 ? 0 : (total + batches - 1) / batches) {}

    [[nodiscard]] std::uint64_t begin(std::size_t j) const noexcept { return std::min<std::uint64_t>(n, j * length); }
    [[nodiscard]] std::uint64_t size(std::size_t j) const noexcept {
        return std::min<std::uint64_t>(n, (j + 1) * length) - begin(j);
    }
};

} // namespace detail

// Serial batch stream: one persistent histogram and one reused batch buffer.
template <std::unsigned_integral Key, KeySource<Key> Source>
std::vector<Key> run_serial(Source& source, const BatchConfig& config, const SortPlan& plan,
                            TrafficMeter* meter = nullptr, PipelineStats* stats = nullptr) {
    config.validate();
    detail::check_key_type<Key>(plan);
    const std::uint64_t n = source.size();
    const detail::BatchSlices slices(n, config.batch_count);
    TrafficMeter local;
    TrafficMeter& m = meter ? *meter : local;
    PipelineStats st;
    st.batches = config.batch_count;

    const HistogramLayout layout = pipeline_layout(plan, n);
    FractalHistogram hist(layout);
    TrackedBytes hist_mem(&m, hist.footprint_bytes());
    std::size_t discarded_allocations = 0;

    std::vector<EntrySegment> segments;
    segments.reserve(config.batch_count);
    TrackedBytes segment_mem(&m, 0);
    {
        std::vector<Key> buffer(slices.length);
        const std::uint64_t buffer_bytes = buffer.size() * sizeof(Key);
        TrackedBytes buffer_mem(&m, buffer_bytes);
        std::vector<std::uint64_t> cursor;
        TrackedBytes cursor_mem(&m, n == 0 ? 0 : plan.bin_count() * sizeof(std::uint64_t));
        for (std::size_t j = 0; j < config.batch_count; ++j) {
            const std::uint64_t len = slices.size(j);
            if (len == 0) continue;
            const std::span<Key> batch(buffer.data(), len);
            if (source.pull(batch) != len) throw std::runtime_error("key source ended before its declared size");
            detail::check_keys<Key>(batch, plan.precision_bits);
            m.record_read(len * sizeof(Key));
            m.touch_write(len * sizeof(Key), buffer_bytes);

            std::optional<FractalHistogram> fresh;
            TrackedBytes fresh_mem;
            if (!config.reuse_histogram) {
                fresh.emplace(layout);
                fresh_mem = TrackedBytes(&m, fresh->footprint_bytes());
            }
            FractalHistogram& target = fresh ? *fresh : hist;
            EntrySegment seg = detail::build_segment<Key>(batch, plan, [&](Key k) { target.insert(k); }, cursor);
            m.touch_read(2 * len * sizeof(Key), buffer_bytes);
            detail::charge_histogram_updates(m, len, target);
            m.record_write(seg.entries.payload_bytes());
            if (fresh) {
                fresh_mem.resize(fresh->footprint_bytes());
                discarded_allocations += fresh->allocation_count();
                hist.merge(std::move(*fresh));
            }
            segments.push_back(std::move(seg));
            segment_mem.resize(detail::segment_bytes(segments));
            hist_mem.resize(hist.footprint_bytes());
        }
    }

    std::vector<Key> out(n);
    detail::emit_sorted<Key>(hist, segments, plan, out, m, st);
    st.histogram_allocations = hist.allocation_count() + discarded_allocations;
    st.histogram_footprint = hist.footprint_bytes();
    if (stats) *stats = st;
    return out;
}

template <std::unsigned_integral Key>
std::vector<Key> run_serial(std::span<const Key> keys, const BatchConfig& config, const SortPlan& plan,
                            TrafficMeter* meter = nullptr, PipelineStats* stats = nullptr) {
    SpanSource<Key> source(keys);
    return run_serial<Key>(source, config, plan, meter, stats);
}

// Parallel batches: min(b, worker_limit) workers own disjoint slices. By default each
// worker fills a private histogram and the privates are merged pairwise; with
// shared_histogram they update one histogram atomically.
template <std::unsigned_integral Key>
std::vector<Key> run_parallel(std::span<const Key> keys, const BatchConfig& config, const SortPlan& plan,
                              TrafficMeter* meter = nullptr, PipelineStats* stats = nullptr) {
    config.validate();
    detail::check_key_type<Key>(plan);
    detail::check_keys<Key>(keys, plan.precision_bits);
    const std::uint64_t n = keys.size();
    const detail::BatchSlices slices(n, config.batch_count);
    const unsigned workers =
        static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(config.batch_count, config.worker_limit)));
    TrafficMeter local;
    TrafficMeter& m = meter ? *meter : local;
    PipelineStats st;
    st.batches = config.batch_count;
    st.workers = workers;
    const HistogramLayout layout = pipeline_layout(plan, n);
    std::vector<TrafficMeter> worker_meters(workers, TrafficMeter(m.cache_budget()));
    auto slice = [&](std::size_t j) {
        return keys.subspan(static_cast<std::size_t>(slices.begin(j)), static_cast<std::size_t>(slices.size(j)));
    };

    std::vector<EntrySegment> segments;
    std::optional<FractalHistogram> global;
    TrackedBytes hist_mem;
    TrackedBytes segment_mem;

    if (!config.shared_histogram) {
        segments.resize(config.batch_count);
        std::vector<FractalHistogram> locals(workers, FractalHistogram(layout));
        std::vector<std::uint64_t> local_bytes(workers, 0);
        detail::run_workers(workers, [&](unsigned w) {
            TrafficMeter& wm = worker_meters[w];
            FractalHistogram& hist = locals[w];
            // the private histogram and the segments stay live past the worker
            std::uint64_t hist_bytes = hist.footprint_bytes();
            wm.track_alloc(hist_bytes);
            std::vector<std::uint64_t> cursor;
            TrackedBytes cursor_mem(&wm, plan.bin_count() * sizeof(std::uint64_t));
            for (std::size_t j = w; j < config.batch_count; j += workers) {
                const auto batch = slice(j);
                if (batch.empty()) continue;
                segments[j] = detail::build_segment<Key>(batch, plan, [&](Key k) { hist.insert(k); }, cursor);
                wm.record_read(batch.size_bytes());
                wm.touch_read(batch.size_bytes(), batch.size_bytes()); // scatter pass over the same slice
                detail::charge_histogram_updates(wm, batch.size(), hist);
                wm.record_write(segments[j].entries.payload_bytes());
                wm.track_alloc(segments[j].bytes());
                wm.track_resize(hist_bytes, hist.footprint_bytes());
                hist_bytes = hist.footprint_bytes();
            }
            local_bytes[w] = hist_bytes;
        });
        m.absorb_concurrent(worker_meters);

        // pairwise tree merge, each round's merges run concurrently
        for (unsigned stride = 1; stride < workers; stride *= 2) {
            std::vector<unsigned> targets;
            for (unsigned i = 0; i + stride < workers; i += 2 * stride) targets.push_back(i);
            detail::run_workers(static_cast<unsigned>(targets.size()), [&](unsigned t) {
                const unsigned i = targets[t];
                locals[i].merge(std::move(locals[i + stride]));
            });
        }
        std::size_t allocations = 0;
        for (const auto& h : locals) allocations += h.allocation_count();
        global.emplace(std::move(locals[0]));
        locals.clear();
        std::uint64_t freed = 0;
        for (const auto b : local_bytes) freed += b;
        m.track_free(freed);
        hist_mem = TrackedBytes(&m, global->footprint_bytes());
        st.histogram_allocations = allocations;
        // segments were tracked by the workers; hand them to one tracker
        const std::uint64_t seg_bytes = detail::segment_bytes(segments);
        m.track_free(seg_bytes);
        segment_mem = TrackedBytes(&m, seg_bytes);
    } else {
        global.emplace(layout);
        FractalHistogram& hist = *global;
        hist_mem = TrackedBytes(&m, hist.footprint_bytes());
        detail::run_workers(workers, [&](unsigned w) {
            for (std::size_t j = w; j < config.batch_count; j += workers) {
                const auto batch = slice(j);
                for (const Key k : batch) hist.insert_concurrent(k);
                worker_meters[w].record_read(batch.size_bytes());
                detail::charge_histogram_updates(worker_meters[w], batch.size(), hist);
            }
        });
        hist_mem.resize(hist.footprint_bytes());

        EntrySegment seg;
        seg.offsets = packed_vector(plan.bin_count() + 1, static_cast<unsigned>(std::bit_width(n)));
        std::vector<std::atomic<std::uint64_t>> cursor(plan.bin_count());
        std::uint64_t sum = 0;
        for (std::uint64_t b = 0; b < plan.bin_count(); ++b) {
            seg.offsets.set(b, sum);
            cursor[b].store(sum, std::memory_order_relaxed);
            sum += hist.counter(plan.bin_bits(), b);
        }
        seg.offsets.set(plan.bin_count(), sum);
        seg.entries = packed_vector(static_cast<std::size_t>(n), plan.entry_width());
        TrackedBytes cursor_mem(&m, cursor.size() * sizeof(std::uint64_t));
        segment_mem = TrackedBytes(&m, seg.bytes());
        detail::run_workers(workers, [&](unsigned w) {
            for (std::size_t j = w; j < config.batch_count; j += workers) {
                const auto batch = slice(j);
                for (const Key k : batch) {
                    const std::uint64_t at = cursor[bin_of(k, plan)].fetch_add(1, std::memory_order_relaxed);
                    seg.entries.atomic_fill(static_cast<std::size_t>(at), entry_of(k, plan));
                }
                worker_meters[w].record_read(batch.size_bytes());
            }
        });
        m.record_write(seg.entries.payload_bytes());
        m.absorb_concurrent(worker_meters);
        segments.push_back(std::move(seg));
        st.histogram_allocations = hist.allocation_count();
    }

    std::vector<Key> out(n);
    detail::emit_sorted<Key>(*global, segments, plan, out, m, st);
    st.histogram_footprint = global->footprint_bytes();
    if (stats) *stats = st;
    return out;
}

// Sort p-bit keys with the batch engine in the configured mode.
template <std::unsigned_integral Key>
std::vector<Key> fractal_sort(std::span<const Key> keys, unsigned p, const BatchConfig& config,
                              TrafficMeter* meter = nullptr, PipelineStats* stats = nullptr,
                              std::optional<unsigned> bin_depth = std::nullopt) {
    const SortPlan plan = SortPlan::make(keys.size(), p, bin_depth);
    return config.mode == BatchMode::serial ? run_serial<Key>(keys, config, plan, meter, stats)
                                            : run_parallel<Key>(keys, config, plan, meter, stats);
}

} // namespace fractalsort
