#pragma once
// bin_sorter.hpp - key decomposition into (bin, offset, trailing), packed entry
// tables, per-bin stable argsort and sorted-array reconstruction.
//
// A p-bit key splits, most significant first, into
//     bin      : trie_depth - bin_depth bits (the histogram's last level)
//     offset   : bin_depth bits (subtree below the bin)
//     trailing : p - trie_depth bits the trie never consumes
// and a packed entry is (offset << trailing_bits) | trailing, i.e. the key with
// its bin bits stripped.

#include "fractalsort/bits.hpp"
#include "fractalsort/metrics.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace fractalsort {

inline constexpr unsigned kDefaultMaxBinDepth = 8;

struct SortPlan {
    unsigned precision_bits = 32; // p
    unsigned trie_depth = 0;      // l_n = min(p, ceil(log2 n))
    unsigned bin_depth = 0;       // l_b
    unsigned trailing_bits = 32;  // t = p - l_n

    [[nodiscard]] static SortPlan make(std::uint64_t n, unsigned p, std::optional<unsigned> bin_depth = std::nullopt) {
        if (p < 1 || p > 64) throw std::invalid_argument("SortPlan: precision must be 1..64");
        SortPlan plan;
        plan.precision_bits = p;
        plan.trie_depth = std::min(p, ceil_log2(n));
        plan.bin_depth = std::min(plan.trie_depth, bin_depth.value_or(kDefaultMaxBinDepth));
        plan.trailing_bits = p - plan.trie_depth;
        plan.validate();
        return plan;
    }

    void validate() const {
        if (precision_bits < 1 || precision_bits > 64) throw std::invalid_argument("SortPlan: precision must be 1..64");
        if (trie_depth > precision_bits) throw std::invalid_argument("SortPlan: trie depth exceeds precision");
        if (bin_depth > trie_depth) throw std::invalid_argument("SortPlan: bin depth exceeds trie depth");
        if (trailing_bits != precision_bits - trie_depth) throw std::invalid_argument("SortPlan: trailing bits != p - l_n");
        if (bin_bits() > 40) throw std::invalid_argument("SortPlan: too many bins");
    }

    // Level of the histogram that holds the bin counters.
    [[nodiscard]] unsigned bin_bits() const noexcept { return trie_depth - bin_depth; }
    [[nodiscard]] std::uint64_t bin_count() const noexcept { return std::uint64_t{1} << bin_bits(); }
    [[nodiscard]] unsigned entry_width() const noexcept { return bin_depth + trailing_bits; }

    bool operator==(const SortPlan&) const = default;
};

struct KeyParts {
    std::uint64_t bin = 0;
    std::uint64_t offset = 0;
    std::uint64_t trailing = 0;
    bool operator==(const KeyParts&) const = default;
};

[[nodiscard]] inline std::uint64_t bin_of(std::uint64_t key, const SortPlan& plan) noexcept {
    return plan.entry_width() >= 64 ? 0 : key >> plan.entry_width();
}

[[nodiscard]] inline std::uint64_t entry_of(std::uint64_t key, const SortPlan& plan) noexcept {
    return key & low_mask(plan.entry_width());
}

[[nodiscard]] inline KeyParts decompose_key(std::uint64_t key, const SortPlan& plan) noexcept {
    const std::uint64_t entry = entry_of(key, plan);
    return KeyParts{bin_of(key, plan), plan.trailing_bits >= 64 ? 0 : entry >> plan.trailing_bits,
                    entry & low_mask(plan.trailing_bits)};
}

[[nodiscard]] inline std::uint64_t recompose_key(const KeyParts& parts, const SortPlan& plan) noexcept {
    const unsigned w = plan.entry_width();
    const std::uint64_t hi = w >= 64 ? 0 : parts.bin << w;
    const std::uint64_t mid = plan.trailing_bits >= 64 ? 0 : parts.offset << plan.trailing_bits;
    return hi | mid | parts.trailing;
}

// Key from its bin and packed entry: split the entry into trailing and offset,
// then concatenate bin | offset | trailing.
[[nodiscard]] inline std::uint64_t compose_key(std::uint64_t bin, std::uint64_t entry, const SortPlan& plan) noexcept {
    const unsigned t = plan.trailing_bits;
    const std::uint64_t trailing = entry & low_mask(t);
    const std::uint64_t offset = t >= 64 ? 0 : entry >> t;
    return recompose_key(KeyParts{bin, offset, trailing}, plan);
}

// Reusable buffers for sort_bin so repeated calls do not reallocate.
struct BinSortScratch {
    std::vector<std::uint32_t> index;
    std::vector<std::uint32_t> swap;
    std::vector<std::uint64_t> entries;

    [[nodiscard]] std::uint64_t bytes() const noexcept {
        return index.capacity() * sizeof(std::uint32_t) + swap.capacity() * sizeof(std::uint32_t) +
               entries.capacity() * sizeof(std::uint64_t);
    }
};

// Stable LSB radix argsort (8-bit digits) of one bin's entries. The returned view
// aliases scratch.index: entries[I[s]] is nondecreasing in s and equal entries keep
// arrival order.
inline std::span<const std::uint32_t> sort_bin(std::span<const std::uint64_t> entries, unsigned entry_width,
                                               BinSortScratch& scratch) {
    const std::size_t m = entries.size();
    if (m > std::numeric_limits<std::uint32_t>::max()) throw std::length_error("sort_bin: bin too large");
    auto& idx = scratch.index;
    auto& tmp = scratch.swap;
    idx.resize(m);
    tmp.resize(m);
    std::iota(idx.begin(), idx.end(), std::uint32_t{0});
    std::array<std::size_t, 256> count{};
    for (unsigned shift = 0; shift < entry_width; shift += 8) {
        count.fill(0);
        for (const auto i : idx) ++count[(entries[i] >> shift) & 0xFF];
        if (std::find(count.begin(), count.end(), m) != count.end()) continue; // one digit: order unchanged
        std::size_t sum = 0;
        for (auto& c : count) {
            const std::size_t cur = c;
            c = sum;
            sum += cur;
        }
        for (const auto i : idx) tmp[count[(entries[i] >> shift) & 0xFF]++] = i;
        idx.swap(tmp);
    }
    return {idx.data(), m};
}

inline std::vector<std::uint32_t> sort_bin(std::span<const std::uint64_t> entries, unsigned entry_width) {
    BinSortScratch scratch;
    const auto view = sort_bin(entries, entry_width, scratch);
    return {view.begin(), view.end()};
}

// Entries grouped by bin (arrival order within a bin), per-bin counts, and the
// within-bin argsort index once sort_bins has run.
struct BinTable {
    SortPlan plan;
    std::vector<std::uint64_t> counts;  // C
    std::vector<std::uint64_t> offsets; // exclusive prefix sums of C, size n_bins + 1
    packed_vector entries;              // E, entry_width bits each
    packed_vector index;                // I, bit_width(max C - 1) bits each

    [[nodiscard]] std::uint64_t size() const noexcept { return offsets.empty() ? 0 : offsets.back(); }
    [[nodiscard]] bool sorted() const noexcept { return index.size() == entries.size(); }
};

// Two-pass count-then-scatter, stable by arrival order.
template <std::unsigned_integral Key>
BinTable build_bins(std::span<const Key> keys, const SortPlan& plan) {
    plan.validate();
    BinTable table;
    table.plan = plan;
    table.counts.assign(plan.bin_count(), 0);
    for (const Key k : keys) {
        if (plan.precision_bits < 64 && (std::uint64_t{k} >> plan.precision_bits) != 0) {
            throw std::out_of_range("build_bins: key wider than precision");
        }
        ++table.counts[bin_of(k, plan)];
    }
    table.offsets.assign(plan.bin_count() + 1, 0);
    std::partial_sum(table.counts.begin(), table.counts.end(), table.offsets.begin() + 1);
    table.entries = packed_vector(keys.size(), plan.entry_width());
    std::vector<std::uint64_t> cursor(table.offsets.begin(), table.offsets.end() - 1);
    for (const Key k : keys) table.entries.set(cursor[bin_of(k, plan)]++, entry_of(k, plan));
    return table;
}

// Argsort every bin of the table into table.index.
inline void sort_bins(BinTable& table) {
    const std::uint64_t max_count =
        table.counts.empty() ? 0 : *std::max_element(table.counts.begin(), table.counts.end());
    table.index = packed_vector(table.entries.size(), max_count > 1 ? std::bit_width(max_count - 1) : 0);
    BinSortScratch scratch;
    for (std::uint64_t b = 0; b < table.counts.size(); ++b) {
        const std::uint64_t c = table.counts[b];
        if (c == 0) continue;
        const std::uint64_t base = table.offsets[b];
        scratch.entries.resize(c);
        for (std::uint64_t s = 0; s < c; ++s) scratch.entries[s] = table.entries.get(base + s);
        const auto order = sort_bin(scratch.entries, table.plan.entry_width(), scratch);
        for (std::uint64_t s = 0; s < c; ++s) table.index.set(base + s, order[s]);
    }
}

// Walk bins in ascending order, skipping empty ones, and emit
// bin | offset | trailing for every entry in within-bin sorted order.
// Charges one sequential read of I and one indexed read of E to the meter.
template <std::unsigned_integral Key>
void reconstruct_all(const packed_vector& entries, const packed_vector& index, std::span<const std::uint64_t> counts,
                     const SortPlan& plan, std::span<Key> out, TrafficMeter* meter = nullptr) {
    const std::uint64_t n = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    if (n != entries.size() || n != index.size()) {
        throw std::invalid_argument("reconstruct_all: bin counts do not match entry/index arrays");
    }
    if (counts.size() != plan.bin_count()) throw std::invalid_argument("reconstruct_all: bin count mismatch");
    if (out.size() != n) throw std::invalid_argument("reconstruct_all: output size mismatch");
    std::uint64_t offset = 0;
    std::uint64_t idx = 0;
    for (std::uint64_t b = 0; b < counts.size(); ++b) {
        const std::uint64_t c = counts[b];
        if (c == 0) continue;
        for (std::uint64_t s = 0; s < c; ++s) {
            const std::uint64_t arrival = index.get(offset + s);
            if (arrival >= c) throw std::invalid_argument("reconstruct_all: index outside its bin");
            out[idx++] = static_cast<Key>(compose_key(b, entries.get(offset + arrival), plan));
        }
        offset += c;
    }
    if (meter) {
        meter->record_read(index.payload_bytes());
        meter->record_read(entries.payload_bytes());
    }
}

template <std::unsigned_integral Key>
std::vector<Key> reconstruct_all(const BinTable& table, TrafficMeter* meter = nullptr) {
    if (!table.sorted()) throw std::invalid_argument("reconstruct_all: bins not sorted");
    std::vector<Key> out(table.size());
    reconstruct_all<Key>(table.entries, table.index, table.counts, table.plan, std::span<Key>(out), meter);
    return out;
}

} // namespace fractalsort
