#pragma once
// bits.hpp - bit helpers, dense bit-packed vectors and word-slotted counter arrays

#include <array>
#include <atomic>
#include <bit>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fractalsort {

// Mask with the low `width` bits set; width may be 64.
[[nodiscard]] constexpr std::uint64_t low_mask(unsigned width) noexcept {
    return width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
}

// ceil(log2(x)) with ceil_log2(0) == ceil_log2(1) == 0.
[[nodiscard]] constexpr unsigned ceil_log2(std::uint64_t x) noexcept {
    return x <= 1 ? 0u : static_cast<unsigned>(std::bit_width(x - 1));
}

namespace detail {

constexpr std::array<std::uint8_t, 256> make_reverse_table() {
    std::array<std::uint8_t, 256> table{};
    for (unsigned v = 0; v < 256; ++v) {
        unsigned r = 0;
        for (unsigned b = 0; b < 8; ++b) {
            if (v & (1u << b)) r |= 1u << (7 - b);
        }
        table[v] = static_cast<std::uint8_t>(r);
    }
    return table;
}

inline constexpr std::array<std::uint8_t, 256> kReverseByte = make_reverse_table();

} // namespace detail

// Reverse the low `width` bits of x (byte lookup table). Bits above width must be zero.
[[nodiscard]] constexpr std::uint64_t bit_reverse(std::uint64_t x, unsigned width) noexcept {
    assert(width <= 64);
    if (width == 0) return 0;
    std::uint64_t r = 0;
    for (unsigned i = 0; i < 8; ++i) {
        r = (r << 8) | detail::kReverseByte[(x >> (8 * i)) & 0xFF];
    }
    return r >> (64 - width);
}

// Fixed-width integers packed back to back; a value may straddle two words.
// Width 0 is allowed and stores nothing.
class packed_vector {
public:
    packed_vector() = default;
    packed_vector(std::size_t size, unsigned width)
        : size_(size), width_(width), words_(word_count(size, width), 0) {
        if (width > 64) throw std::invalid_argument("packed_vector: width > 64");
    }

    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] unsigned width() const noexcept { return width_; }
    [[nodiscard]] bool empty() const noexcept { return size_ == 0; }

    // Bytes actually holding payload bits (what a sequential scan moves).
    [[nodiscard]] std::uint64_t payload_bytes() const noexcept {
        return (static_cast<std::uint64_t>(size_) * width_ + 7) / 8;
    }
    [[nodiscard]] std::uint64_t bytes() const noexcept { return words_.size() * sizeof(std::uint64_t); }

    [[nodiscard]] std::uint64_t get(std::size_t i) const noexcept {
        assert(i < size_);
        if (width_ == 0) return 0;
        const std::size_t bit = i * width_;
        const std::size_t w = bit >> 6;
        const unsigned off = bit & 63;
        std::uint64_t r = words_[w] >> off;
        if (off + width_ > 64) r |= words_[w + 1] << (64 - off);
        return r & low_mask(width_);
    }

    void set(std::size_t i, std::uint64_t v) noexcept {
        assert(i < size_);
        assert((v & ~low_mask(width_)) == 0);
        if (width_ == 0) return;
        const std::size_t bit = i * width_;
        const std::size_t w = bit >> 6;
        const unsigned off = bit & 63;
        const std::uint64_t m = low_mask(width_);
        words_[w] = (words_[w] & ~(m << off)) | (v << off);
        if (off + width_ > 64) {
            const unsigned spill = off + width_ - 64;
            words_[w + 1] = (words_[w + 1] & ~low_mask(spill)) | (v >> (64 - off));
        }
    }

    // Thread-safe write into a slot that is still zero. Concurrent writers must target distinct slots.
    void atomic_fill(std::size_t i, std::uint64_t v) noexcept {
        assert(i < size_);
        if (width_ == 0 || v == 0) return;
        const std::size_t bit = i * width_;
        const std::size_t w = bit >> 6;
        const unsigned off = bit & 63;
        std::atomic_ref<std::uint64_t>(words_[w]).fetch_or(v << off, std::memory_order_relaxed);
        if (off + width_ > 64) {
            std::atomic_ref<std::uint64_t>(words_[w + 1])
                .fetch_or(v >> (64 - off), std::memory_order_relaxed);
        }
    }

private:
    static std::size_t word_count(std::size_t size, unsigned width) {
        // one spare word keeps the straddle read in get() in bounds
        return width == 0 ? 0 : (size * width + 63) / 64 + 1;
    }

    std::size_t size_ = 0;
    unsigned width_ = 0;
    std::vector<std::uint64_t> words_;
};

// Unsigned counters of a common width, floor(64 / width) per word, never straddling
// a word boundary. Increments report overflow instead of wrapping; atomic_add is a
// single-word CAS so concurrent increments need no lock.
class counter_array {
public:
    counter_array() = default;
    counter_array(std::size_t size, unsigned width) { reset(size, width); }

    void reset(std::size_t size, unsigned width) {
        if (width == 0 || width > 64) throw std::invalid_argument("counter_array: width must be 1..64");
        size_ = size;
        width_ = width;
        per_word_ = 64 / width;
        words_.assign((size + per_word_ - 1) / per_word_, 0);
    }

    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] unsigned width() const noexcept { return width_; }
    [[nodiscard]] bool allocated() const noexcept { return width_ != 0; }
    [[nodiscard]] std::uint64_t max_value() const noexcept { return low_mask(width_); }
    [[nodiscard]] std::uint64_t bytes() const noexcept { return words_.size() * sizeof(std::uint64_t); }

    [[nodiscard]] std::uint64_t get(std::size_t i) const noexcept {
        assert(i < size_);
        return (words_[i / per_word_] >> shift(i)) & low_mask(width_);
    }

    void set(std::size_t i, std::uint64_t v) noexcept {
        assert(i < size_ && v <= max_value());
        const unsigned s = shift(i);
        auto& word = words_[i / per_word_];
        word = (word & ~(low_mask(width_) << s)) | (v << s);
    }

    // Returns false (and leaves the counter untouched) if the sum would not fit.
    [[nodiscard]] bool add(std::size_t i, std::uint64_t delta) noexcept {
        const std::uint64_t cur = get(i);
        if (delta > max_value() - cur) return false;
        set(i, cur + delta);
        return true;
    }

    [[nodiscard]] bool atomic_add(std::size_t i, std::uint64_t delta) noexcept {
        const unsigned s = shift(i);
        std::atomic_ref<std::uint64_t> word(words_[i / per_word_]);
        std::uint64_t old = word.load(std::memory_order_relaxed);
        for (;;) {
            const std::uint64_t cur = (old >> s) & low_mask(width_);
            if (delta > max_value() - cur) return false;
            // no carry can leave the field: cur + delta <= max_value()
            if (word.compare_exchange_weak(old, old + (delta << s), std::memory_order_relaxed)) return true;
        }
    }

    // Re-encode every counter at a wider width.
    void repack(unsigned new_width) {
        assert(new_width >= width_);
        counter_array wider(size_, new_width);
        for (std::size_t i = 0; i < size_; ++i) wider.set(i, get(i));
        *this = std::move(wider);
    }

private:
    [[nodiscard]] unsigned shift(std::size_t i) const noexcept {
        return static_cast<unsigned>(i % per_word_) * width_;
    }

    std::size_t size_ = 0;
    unsigned width_ = 0;
    unsigned per_word_ = 1;
    std::vector<std::uint64_t> words_;
};

} // namespace fractalsort
