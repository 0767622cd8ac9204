#pragma once
// fractal_histogram.hpp - compressed counting trie over key paths.
//
// Levels 0..dense_depth are flat arrays of tapered counters addressed purely by
// (level, path prefix): no node identifiers and no child references are stored.
// Levels below dense_depth are explicit nodes created on demand. Paths read key
// bits most-significant first, so an in-order walk visits keys in ascending order.
//
// Footprint bound: when the dense region is no wider than the key population
// (2^dense_levels <= min(n, 2^p)), packed counter storage satisfies
//     footprint_bytes() - header <= kFootprintConstant * min(n, 2^p) * w_avg_bytes
// where w_avg is the mean tapered width. The constant covers the two geometric
// level sums (2^(D+1) counters) and at most 2x word-slot padding.

#include "fractalsort/bits.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cstdint>
#include <memory>
#include <mutex>
#include <ostream>
#include <shared_mutex>
#include <stdexcept>
#include <vector>

namespace fractalsort {

struct HistogramLayout {
    unsigned precision_bits = 32;       // p
    unsigned trie_depth = 32;           // levels below the root, <= p
    unsigned dense_depth = 32;          // deepest implicitly addressed level
    std::uint64_t capacity_hint = 1;    // expected key count, sizes the tapered widths
    unsigned min_counter_width = 2;

    // Full-resolution histogram over p-bit keys.
    [[nodiscard]] static HistogramLayout for_keys(unsigned p, std::uint64_t capacity) {
        HistogramLayout layout;
        layout.precision_bits = p;
        layout.trie_depth = p;
        layout.dense_depth = std::min(p, 32u);
        layout.capacity_hint = std::max<std::uint64_t>(capacity, 1);
        return layout;
    }

    void validate() const {
        if (precision_bits < 1 || precision_bits > 64) throw std::invalid_argument("layout: precision must be 1..64");
        if (trie_depth > precision_bits) throw std::invalid_argument("layout: trie depth exceeds precision");
        if (dense_depth < 1 || dense_depth > precision_bits) {
            throw std::invalid_argument("layout: dense depth must be 1..precision");
        }
        if (dense_depth > 40) throw std::invalid_argument("layout: dense depth too large to materialize");
        if (min_counter_width < 1 || min_counter_width > 64) {
            throw std::invalid_argument("layout: min counter width must be 1..64");
        }
        if (capacity_hint < 1) throw std::invalid_argument("layout: capacity hint must be >= 1");
    }

    bool operator==(const HistogramLayout&) const = default;
};

// Tapered counter width for a level: one bit fewer per level below the root.
[[nodiscard]] constexpr unsigned counter_width(unsigned level, std::uint64_t capacity, unsigned min_counter_width = 1) {
    const unsigned root = static_cast<unsigned>(std::bit_width(capacity)); // ceil(log2(capacity + 1))
    const unsigned tapered = level >= root ? 0u : root - level;
    return std::min(64u, std::max(min_counter_width, tapered));
}

// Explicit node below the dense region. Counters are full width.
struct SparseNode {
    std::atomic<std::uint64_t> counter{0};
    std::array<std::atomic<SparseNode*>, 2> child{};
};

// Where a node lives: a slot of a dense level, or an explicit sparse node.
struct NodeSlot {
    bool dense = true;
    unsigned level = 0;
    std::uint64_t index = 0;      // within-level slot for dense nodes
    SparseNode* node = nullptr;   // sparse nodes only
};

class FractalHistogram {
public:
    static constexpr double kFootprintConstant = 4.0;
    static constexpr unsigned kPromotionStep = 4;

    explicit FractalHistogram(HistogramLayout layout) : layout_(layout), lock_(std::make_unique<std::shared_mutex>()) {
        layout_.validate();
        dense_last_ = std::min(layout_.dense_depth, layout_.trie_depth);
        dense_.resize(dense_last_ + 1);
    }

    FractalHistogram(const FractalHistogram& other)
        : layout_(other.layout_), dense_last_(other.dense_last_), dense_(other.dense_),
          lock_(std::make_unique<std::shared_mutex>()),
          materialized_(other.materialized_.load(std::memory_order_acquire)),
          allocations_(other.allocations_.load()) {
        if (other.roots_) {
            roots_ = std::make_unique<std::atomic<SparseNode*>[]>(root_slots());
            for (std::size_t i = 0; i < root_slots(); ++i) {
                roots_[i].store(clone(other.roots_[i].load(std::memory_order_relaxed)), std::memory_order_relaxed);
            }
        }
    }

    FractalHistogram(FractalHistogram&& other) noexcept
        : layout_(other.layout_), dense_last_(other.dense_last_), dense_(std::move(other.dense_)),
          roots_(std::move(other.roots_)), lock_(std::move(other.lock_)),
          materialized_(other.materialized_.load()), sparse_nodes_(other.sparse_nodes_.load()),
          allocations_(other.allocations_.load()) {
        other.sparse_nodes_ = 0;
        other.materialized_ = false;
    }

    FractalHistogram& operator=(FractalHistogram other) noexcept {
        swap(other);
        return *this;
    }

    ~FractalHistogram() { release_sparse(); }

    void swap(FractalHistogram& other) noexcept {
        std::swap(layout_, other.layout_);
        std::swap(dense_last_, other.dense_last_);
        dense_.swap(other.dense_);
        roots_.swap(other.roots_);
        lock_.swap(other.lock_);
        const bool m = materialized_.load();
        materialized_ = other.materialized_.load();
        other.materialized_ = m;
        const auto s = sparse_nodes_.load();
        sparse_nodes_ = other.sparse_nodes_.load();
        other.sparse_nodes_ = s;
        const auto a = allocations_.load();
        allocations_ = other.allocations_.load();
        other.allocations_ = a;
    }

    [[nodiscard]] const HistogramLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] unsigned depth() const noexcept { return layout_.trie_depth; }
    [[nodiscard]] unsigned dense_levels_end() const noexcept { return dense_last_; }

    [[nodiscard]] std::uint64_t total_count() const noexcept {
        return dense_[0].allocated() ? dense_[0].get(0) : 0;
    }

    // Current width of a dense level (the tapered width until promoted).
    [[nodiscard]] unsigned level_width(unsigned level) const {
        if (level > dense_last_) return 64;
        return dense_[level].allocated() ? dense_[level].width() : initial_width(level);
    }

    // Storage allocations made so far: dense levels, promotions, sparse nodes.
    [[nodiscard]] std::size_t allocation_count() const noexcept { return allocations_.load(); }
    [[nodiscard]] std::size_t sparse_node_count() const noexcept { return sparse_nodes_.load(); }

    // Path prefix of `key` at `level` (top `level` bits).
    [[nodiscard]] std::uint64_t prefix_of(std::uint64_t key, unsigned level) const noexcept {
        return level == 0 ? 0 : key >> (layout_.precision_bits - level);
    }

    // Add `increment` to every counter on the key's root-to-leaf path. Single writer.
    // on_touch(level, prefix) is called once per node visited.
    template <class OnTouch>
    void insert(std::uint64_t key, std::uint64_t increment, OnTouch&& on_touch) {
        check_key(key);
        materialize();
        for (unsigned l = 0; l <= dense_last_; ++l) {
            const std::uint64_t slot = prefix_of(key, l);
            on_touch(l, slot);
            while (!dense_[l].add(slot, increment)) promote(l, dense_[l].get(slot) + increment);
        }
        if (layout_.trie_depth > dense_last_) insert_sparse(key, increment, on_touch);
    }

    void insert(std::uint64_t key, std::uint64_t increment = 1) {
        insert(key, increment, [](unsigned, std::uint64_t) {});
    }

    // Thread-safe insert: counters are bumped with single-word atomic RMW. Width
    // promotion is the only step that excludes other inserters.
    void insert_concurrent(std::uint64_t key, std::uint64_t increment = 1) {
        check_key(key);
        if (!materialized_.load(std::memory_order_acquire)) {
            std::unique_lock guard(*lock_);
            materialize();
        }
        std::shared_lock shared(*lock_);
        for (unsigned l = 0; l <= dense_last_; ++l) {
            const std::uint64_t slot = prefix_of(key, l);
            while (!dense_[l].atomic_add(slot, increment)) {
                shared.unlock();
                {
                    std::unique_lock exclusive(*lock_);
                    const std::uint64_t needed = dense_[l].get(slot) + increment;
                    if (needed > dense_[l].max_value()) promote(l, needed);
                }
                shared.lock();
            }
        }
        auto no_touch = [](unsigned, std::uint64_t) {};
        if (layout_.trie_depth > dense_last_) insert_sparse(key, increment, no_touch);
    }

    // Counter of the node at (level, prefix); 0 when the node is not materialized.
    [[nodiscard]] std::uint64_t counter(unsigned level, std::uint64_t prefix) const {
        if (level > layout_.trie_depth) throw std::out_of_range("counter: level below trie depth");
        if (level <= dense_last_) return dense_[level].allocated() ? dense_[level].get(prefix) : 0;
        const SparseNode* node = find_sparse(level, prefix);
        return node ? node->counter.load(std::memory_order_relaxed) : 0;
    }

    // Sum of all counters on one level.
    [[nodiscard]] std::uint64_t level_total(unsigned level) const {
        std::uint64_t sum = 0;
        for_each_node([&](unsigned l, std::uint64_t, std::uint64_t c) {
            if (l == level) sum += c;
        });
        return sum;
    }

    // Key at 0-based ascending rank, or default_value when rank is out of range.
    // Order-statistic descent: go left while rank < left child count.
    [[nodiscard]] std::uint64_t get_item(std::uint64_t rank, std::uint64_t default_value) const {
        if (rank >= total_count()) return default_value;
        std::uint64_t prefix = 0;
        const SparseNode* node = nullptr;
        for (unsigned l = 0; l < layout_.trie_depth; ++l) {
            const unsigned child_level = l + 1;
            const SparseNode* left_node = nullptr;
            const SparseNode* right_node = nullptr;
            std::uint64_t left_count;
            if (child_level <= dense_last_) {
                left_count = dense_[child_level].get(prefix << 1);
            } else {
                if (child_level == dense_last_ + 1) {
                    left_node = roots_[prefix << 1].load(std::memory_order_acquire);
                    right_node = roots_[(prefix << 1) | 1].load(std::memory_order_acquire);
                } else {
                    left_node = node->child[0].load(std::memory_order_acquire);
                    right_node = node->child[1].load(std::memory_order_acquire);
                }
                left_count = left_node ? left_node->counter.load(std::memory_order_relaxed) : 0;
            }
            if (rank < left_count) {
                prefix <<= 1;
                node = left_node;
            } else {
                rank -= left_count;
                prefix = (prefix << 1) | 1;
                node = right_node;
            }
        }
        if (layout_.trie_depth == 0) return 0;
        return layout_.trie_depth == layout_.precision_bits
                   ? prefix
                   : prefix << (layout_.precision_bits - layout_.trie_depth);
    }

    // Number of inserted keys strictly less than `value` (at trie resolution).
    [[nodiscard]] std::uint64_t get_index(std::uint64_t value) const {
        check_key(value);
        std::uint64_t below = 0;
        if (total_count() == 0) return 0;
        const SparseNode* node = nullptr;
        for (unsigned l = 0; l < layout_.trie_depth; ++l) {
            const unsigned child_level = l + 1;
            const std::uint64_t prefix = prefix_of(value, l);
            const bool right = (prefix_of(value, child_level) & 1) != 0;
            if (child_level <= dense_last_) {
                if (right) below += dense_[child_level].get(prefix << 1);
                continue;
            }
            const SparseNode* left_node;
            const SparseNode* right_node;
            if (child_level == dense_last_ + 1) {
                left_node = roots_[prefix << 1].load(std::memory_order_acquire);
                right_node = roots_[(prefix << 1) | 1].load(std::memory_order_acquire);
            } else {
                left_node = node->child[0].load(std::memory_order_acquire);
                right_node = node->child[1].load(std::memory_order_acquire);
            }
            if (right && left_node) below += left_node->counter.load(std::memory_order_relaxed);
            node = right ? right_node : left_node;
            if (!node) break; // nothing materialized further down this path
        }
        return below;
    }

    // Resolve a node location. Dense levels are computed from (level, prefix);
    // sparse levels allocate the path down to the node if it is absent.
    NodeSlot child_slot(unsigned level, std::uint64_t prefix) {
        if (level > layout_.trie_depth) throw std::out_of_range("child_slot: level below trie depth");
        if (level < 64 && (prefix >> level) != 0) throw std::out_of_range("child_slot: prefix wider than level");
        materialize();
        if (level <= dense_last_) return NodeSlot{true, level, prefix, nullptr};
        std::atomic<SparseNode*>* link = &roots_[prefix >> (level - dense_last_ - 1)];
        SparseNode* node = ensure(*link);
        for (unsigned l = dense_last_ + 2; l <= level; ++l) {
            const unsigned bit = static_cast<unsigned>((prefix >> (level - l)) & 1);
            node = ensure(node->child[bit]);
        }
        return NodeSlot{false, level, prefix, node};
    }

    // Counter-wise sum with another histogram of the same layout.
    void merge(const FractalHistogram& other) { merge_impl(other, false); }
    void merge(FractalHistogram&& other) { merge_impl(other, true); }

    [[nodiscard]] std::uint64_t header_bytes() const noexcept {
        return sizeof(FractalHistogram) + dense_.capacity() * sizeof(counter_array);
    }

    // Bytes of counter storage plus sparse nodes plus the fixed header.
    [[nodiscard]] std::uint64_t footprint_bytes() const noexcept {
        std::uint64_t bytes = header_bytes();
        for (const auto& level : dense_) bytes += level.bytes();
        if (roots_) bytes += root_slots() * sizeof(std::atomic<SparseNode*>);
        bytes += sparse_nodes_.load() * sizeof(SparseNode);
        return bytes;
    }

    // Mean counter width in bits over all materialized dense counters.
    [[nodiscard]] double mean_counter_width() const noexcept {
        double bits = 0;
        double counters = 0;
        for (const auto& level : dense_) {
            if (!level.allocated()) continue;
            bits += static_cast<double>(level.size()) * level.width();
            counters += static_cast<double>(level.size());
        }
        return counters > 0 ? bits / counters : 0.0;
    }

    // Visit every materialized node with a nonzero counter, level by level in
    // ascending prefix order: fn(level, prefix, counter).
    template <class Fn>
    void for_each_node(Fn&& fn) const {
        for (unsigned l = 0; l <= dense_last_; ++l) {
            if (!dense_[l].allocated()) continue;
            for (std::uint64_t i = 0; i < dense_[l].size(); ++i) {
                if (const auto c = dense_[l].get(i)) fn(l, i, c);
            }
        }
        if (!roots_) return;
        for (unsigned l = dense_last_ + 1; l <= layout_.trie_depth; ++l) {
            for (std::size_t r = 0; r < root_slots(); ++r) {
                visit_level(roots_[r].load(std::memory_order_acquire), dense_last_ + 1, r, l, fn);
            }
        }
    }

    // One line per node: "<level> 0x<prefix> <counter>".
    void dump(std::ostream& os) const {
        for_each_node([&](unsigned l, std::uint64_t prefix, std::uint64_t c) {
            os << l << " 0x" << std::hex << prefix << std::dec << ' ' << c << '\n';
        });
    }

private:
    [[nodiscard]] unsigned initial_width(unsigned level) const noexcept {
        return counter_width(level, layout_.capacity_hint, layout_.min_counter_width);
    }

    [[nodiscard]] std::size_t root_slots() const noexcept { return std::size_t{2} << dense_last_; }

    void check_key(std::uint64_t key) const {
        if (layout_.precision_bits < 64 && (key >> layout_.precision_bits) != 0) {
            throw std::out_of_range("key wider than precision");
        }
    }

    void materialize() {
        if (materialized_.load(std::memory_order_acquire)) return;
        for (unsigned l = 0; l <= dense_last_; ++l) {
            dense_[l].reset(std::size_t{1} << l, initial_width(l));
            ++allocations_;
        }
        if (layout_.trie_depth > dense_last_) {
            roots_ = std::make_unique<std::atomic<SparseNode*>[]>(root_slots());
            ++allocations_;
        }
        materialized_.store(true, std::memory_order_release);
    }

    // Widen a level in steps until `needed` fits.
    void promote(unsigned level, std::uint64_t needed) {
        unsigned width = dense_[level].width();
        while (width < 64 && needed > low_mask(width)) width = std::min(64u, width + kPromotionStep);
        if (needed > low_mask(width)) throw std::overflow_error("counter exceeds 64 bits");
        dense_[level].repack(width);
        ++allocations_;
    }

    SparseNode* ensure(std::atomic<SparseNode*>& link) {
        SparseNode* cur = link.load(std::memory_order_acquire);
        if (cur) return cur;
        auto fresh = std::make_unique<SparseNode>();
        if (link.compare_exchange_strong(cur, fresh.get(), std::memory_order_acq_rel, std::memory_order_acquire)) {
            ++sparse_nodes_;
            ++allocations_;
            return fresh.release();
        }
        return cur; // another inserter published first
    }

    template <class OnTouch>
    void insert_sparse(std::uint64_t key, std::uint64_t increment, OnTouch& on_touch) {
        unsigned level = dense_last_ + 1;
        SparseNode* node = ensure(roots_[prefix_of(key, level)]);
        for (;;) {
            on_touch(level, prefix_of(key, level));
            node->counter.fetch_add(increment, std::memory_order_relaxed);
            if (level == layout_.trie_depth) break;
            ++level;
            node = ensure(node->child[prefix_of(key, level) & 1]);
        }
    }

    [[nodiscard]] const SparseNode* find_sparse(unsigned level, std::uint64_t prefix) const {
        if (!roots_) return nullptr;
        const SparseNode* node = roots_[prefix >> (level - dense_last_ - 1)].load(std::memory_order_acquire);
        for (unsigned l = dense_last_ + 2; node && l <= level; ++l) {
            node = node->child[(prefix >> (level - l)) & 1].load(std::memory_order_acquire);
        }
        return node;
    }

    template <class Fn>
    static void visit_level(const SparseNode* node, unsigned level, std::uint64_t prefix, unsigned target, Fn& fn) {
        if (!node) return;
        if (level == target) {
            if (const auto c = node->counter.load(std::memory_order_relaxed)) fn(level, prefix, c);
            return;
        }
        visit_level(node->child[0].load(std::memory_order_acquire), level + 1, prefix << 1, target, fn);
        visit_level(node->child[1].load(std::memory_order_acquire), level + 1, (prefix << 1) | 1, target, fn);
    }

    SparseNode* clone(const SparseNode* src) {
        if (!src) return nullptr;
        auto copy = std::make_unique<SparseNode>();
        copy->counter.store(src->counter.load(std::memory_order_relaxed), std::memory_order_relaxed);
        ++sparse_nodes_;
        for (int c = 0; c < 2; ++c) {
            copy->child[c].store(clone(src->child[c].load(std::memory_order_relaxed)), std::memory_order_relaxed);
        }
        return copy.release();
    }

    static std::size_t count_nodes(const SparseNode* node) {
        if (!node) return 0;
        return 1 + count_nodes(node->child[0].load(std::memory_order_relaxed)) +
               count_nodes(node->child[1].load(std::memory_order_relaxed));
    }

    static void destroy(SparseNode* node) {
        if (!node) return;
        destroy(node->child[0].load(std::memory_order_relaxed));
        destroy(node->child[1].load(std::memory_order_relaxed));
        delete node;
    }

    void release_sparse() noexcept {
        if (!roots_) return;
        for (std::size_t i = 0; i < root_slots(); ++i) destroy(roots_[i].exchange(nullptr));
        sparse_nodes_ = 0;
    }

    // Depth-first add of `src` into the subtree hanging off `link`. Absent subtrees
    // are adopted (stolen when `steal`, deep-copied otherwise).
    void merge_subtree(std::atomic<SparseNode*>& link, std::atomic<SparseNode*>& src_link, bool steal) {
        SparseNode* src = src_link.load(std::memory_order_relaxed);
        if (!src) return;
        SparseNode* dst = link.load(std::memory_order_relaxed);
        if (!dst) {
            if (steal) {
                link.store(src_link.exchange(nullptr), std::memory_order_relaxed);
                sparse_nodes_ += count_nodes(src);
            } else {
                link.store(clone(src), std::memory_order_relaxed);
            }
            return;
        }
        dst->counter.fetch_add(src->counter.load(std::memory_order_relaxed), std::memory_order_relaxed);
        merge_subtree(dst->child[0], src->child[0], steal);
        merge_subtree(dst->child[1], src->child[1], steal);
    }

    void merge_impl(const FractalHistogram& other_const, bool steal) {
        if (!(layout_ == other_const.layout_)) throw std::invalid_argument("merge: histogram layouts differ");
        if (&other_const == this) throw std::invalid_argument("merge: cannot merge a histogram into itself");
        if (!other_const.materialized_.load()) return;
        materialize();
        auto& other = const_cast<FractalHistogram&>(other_const);
        for (unsigned l = 0; l <= dense_last_; ++l) {
            const counter_array& src = other.dense_[l];
            for (std::uint64_t i = 0; i < src.size(); ++i) {
                const std::uint64_t add = src.get(i);
                if (add == 0) continue;
                while (!dense_[l].add(i, add)) promote(l, dense_[l].get(i) + add);
            }
        }
        if (other.roots_) {
            for (std::size_t i = 0; i < root_slots(); ++i) merge_subtree(roots_[i], other.roots_[i], steal);
            if (steal) other.sparse_nodes_ = 0;
        }
    }

    HistogramLayout layout_;
    unsigned dense_last_ = 0;
    std::vector<counter_array> dense_;
    std::unique_ptr<std::atomic<SparseNode*>[]> roots_;
    std::unique_ptr<std::shared_mutex> lock_;
    std::atomic<bool> materialized_{false};
    std::atomic<std::size_t> sparse_nodes_{0};
    std::atomic<std::size_t> allocations_{0};
};

} // namespace fractalsort
