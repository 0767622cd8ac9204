#pragma once
// dataset.hpp - reproducible key generators and the binary key-file format.
//
// Key file: 16-byte header, then n little-endian keys of ceil(p/8) bytes each.
//     offset 0  char[4]  "FSK1"
//     offset 4  uint32   p (1..64)
//     offset 8  uint64   n

#include "fractalsort/bits.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fractalsort {

enum class Distribution { uniform, zipfian, gaussian, sorted, reverse, almost_sorted };

struct DatasetSpec {
    Distribution distribution = Distribution::uniform;
    double zipf_exponent = 1.2;
    double mean = 0.5;          // gaussian, fraction of the key range
    double stddev = 0.125;      // gaussian, fraction of the key range
    double swap_fraction = 0.01; // almost_sorted
    std::uint64_t n = 0;
    unsigned p = 32;
    std::uint64_t seed = 1;

    void validate() const {
        if (p < 1 || p > 64) throw std::invalid_argument("dataset: precision must be 1..64");
        if (distribution == Distribution::zipfian && !(zipf_exponent > 0.0)) {
            throw std::invalid_argument("dataset: zipf exponent must be positive");
        }
        if (distribution == Distribution::gaussian && !(stddev >= 0.0)) {
            throw std::invalid_argument("dataset: stddev must be >= 0");
        }
        if (distribution == Distribution::almost_sorted && !(swap_fraction >= 0.0 && swap_fraction <= 1.0)) {
            throw std::invalid_argument("dataset: swap fraction must be in [0, 1]");
        }
    }
};

inline constexpr std::array<Distribution, 6> kAllDistributions = {
    Distribution::uniform, Distribution::zipfian,  Distribution::gaussian,
    Distribution::sorted,  Distribution::reverse,  Distribution::almost_sorted};

[[nodiscard]] inline std::string distribution_name(Distribution d) {
    switch (d) {
    case Distribution::uniform: return "uniform";
    case Distribution::zipfian: return "zipfian";
    case Distribution::gaussian: return "gaussian";
    case Distribution::sorted: return "sorted";
    case Distribution::reverse: return "reverse";
    case Distribution::almost_sorted: return "almost_sorted";
    }
    return "unknown";
}

// "uniform", "zipfian[:s]", "gaussian[:mu[:sigma]]", "sorted", "reverse",
// "almost_sorted[:fraction]". Parameters land in `spec`.
inline void parse_distribution(std::string_view text, DatasetSpec& spec) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
        if (c == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    auto number = [&](std::size_t i) {
        try {
            std::size_t used = 0;
            const double v = std::stod(parts[i], &used);
            if (used != parts[i].size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw std::invalid_argument("distribution: bad parameter '" + parts[i] + "'");
        }
    };
    const std::string& name = parts[0];
    std::size_t max_params = 0;
    if (name == "uniform") {
        spec.distribution = Distribution::uniform;
    } else if (name == "zipfian" || name == "zipf") {
        spec.distribution = Distribution::zipfian;
        max_params = 1;
        if (parts.size() > 1) spec.zipf_exponent = number(1);
    } else if (name == "gaussian" || name == "normal") {
        spec.distribution = Distribution::gaussian;
        max_params = 2;
        if (parts.size() > 1) spec.mean = number(1);
        if (parts.size() > 2) spec.stddev = number(2);
    } else if (name == "sorted") {
        spec.distribution = Distribution::sorted;
    } else if (name == "reverse") {
        spec.distribution = Distribution::reverse;
    } else if (name == "almost_sorted") {
        spec.distribution = Distribution::almost_sorted;
        max_params = 1;
        if (parts.size() > 1) spec.swap_fraction = number(1);
    } else {
        throw std::invalid_argument("unknown distribution '" + name + "'");
    }
    if (parts.size() > max_params + 1) throw std::invalid_argument("distribution: too many parameters");
}

// Uniform double in [0, 1) from the top 53 bits.
[[nodiscard]] inline double unit_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Zipf ranks 1..N with P(k) ~ k^-s by rejection-inversion (Hormann and Derflinger),
// constant expected time for any N and any s > 0.
class ZipfSampler {
public:
    ZipfSampler(double elements, double exponent) : n_(elements), s_(exponent) {
        if (!(elements >= 1.0) || !(exponent > 0.0)) throw std::invalid_argument("ZipfSampler: bad parameters");
        h_integral_x1_ = h_integral(1.5) - 1.0;
        h_integral_n_ = h_integral(n_ + 0.5);
        threshold_ = 2.0 - h_integral_inverse(h_integral(2.5) - h(2.0));
    }

    [[nodiscard]] double operator()(std::mt19937_64& rng) const {
        for (;;) {
            const double u = h_integral_n_ + unit_double(rng) * (h_integral_x1_ - h_integral_n_);
            const double x = h_integral_inverse(u);
            double k = std::floor(x + 0.5);
            k = std::clamp(k, 1.0, n_);
            if (k - x <= threshold_ || u >= h_integral(k + 0.5) - h(k)) return k;
        }
    }

private:
    [[nodiscard]] double h(double x) const { return std::exp(-s_ * std::log(x)); }

    [[nodiscard]] double h_integral(double x) const {
        const double log_x = std::log(x);
        return helper2((1.0 - s_) * log_x) * log_x;
    }

    [[nodiscard]] double h_integral_inverse(double x) const {
        double t = x * (1.0 - s_);
        if (t < -1.0) t = -1.0;
        return std::exp(helper1(t) * x);
    }

    // log1p(x) / x, stable near 0
    static double helper1(double x) {
        return std::abs(x) > 1e-8 ? std::log1p(x) / x : 1.0 - x * (0.5 - x * (1.0 / 3.0 - 0.25 * x));
    }

    // expm1(x) / x, stable near 0
    static double helper2(double x) {
        return std::abs(x) > 1e-8 ? std::expm1(x) / x : 1.0 + x * 0.5 * (1.0 + x * (1.0 / 3.0) * (1.0 + 0.25 * x));
    }

    double n_;
    double s_;
    double h_integral_x1_ = 0;
    double h_integral_n_ = 0;
    double threshold_ = 0;
};

// Deterministic for a given spec: mt19937_64 is fully specified, and every
// distribution step below is computed by hand rather than by std:: distributions.
template <std::unsigned_integral Key = std::uint64_t>
std::vector<Key> generate(const DatasetSpec& spec) {
    spec.validate();
    if (spec.p > 8 * sizeof(Key)) throw std::invalid_argument("dataset: precision wider than key type");
    std::mt19937_64 rng(spec.seed);
    std::vector<Key> keys(spec.n);
    const unsigned p = spec.p;
    const std::uint64_t max_key = low_mask(p);
    const double range = std::ldexp(1.0, static_cast<int>(p));
    auto uniform_key = [&] { return p == 64 ? rng() : rng() >> (64 - p); };

    switch (spec.distribution) {
    case Distribution::uniform:
    case Distribution::sorted:
    case Distribution::reverse:
    case Distribution::almost_sorted:
        for (auto& k : keys) k = static_cast<Key>(uniform_key());
        break;
    case Distribution::zipfian: {
        // rank r maps to key r - 1, so small keys are the hot ones
        const ZipfSampler zipf(std::min(range, 0x1.0p63), spec.zipf_exponent);
        for (auto& k : keys) k = static_cast<Key>(static_cast<std::uint64_t>(zipf(rng)) - 1);
        break;
    }
    case Distribution::gaussian: {
        constexpr double two_pi = 6.283185307179586476925286766559;
        for (auto& k : keys) {
            const double u1 = 1.0 - unit_double(rng); // (0, 1]
            const double u2 = unit_double(rng);
            const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
            const double v = std::floor((spec.mean + spec.stddev * z) * range);
            if (!(v > 0.0)) k = 0;
            else if (v >= range) k = static_cast<Key>(max_key);
            else k = static_cast<Key>(static_cast<std::uint64_t>(v));
        }
        break;
    }
    }

    if (spec.distribution == Distribution::sorted || spec.distribution == Distribution::almost_sorted) {
        std::sort(keys.begin(), keys.end());
    } else if (spec.distribution == Distribution::reverse) {
        std::sort(keys.begin(), keys.end(), std::greater<>{});
    }
    if (spec.distribution == Distribution::almost_sorted && spec.n > 1) {
        const auto swaps = static_cast<std::uint64_t>(std::llround(spec.swap_fraction * static_cast<double>(spec.n)));
        for (std::uint64_t s = 0; s < swaps; ++s) {
            const std::uint64_t i = rng() % spec.n;
            const std::uint64_t j = rng() % spec.n;
            std::swap(keys[i], keys[j]);
        }
    }
    return keys;
}

// ---------------------------------------------------------------------------
// Key files

class key_file_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::array<char, 4> kKeyFileMagic = {'F', 'S', 'K', '1'};
inline constexpr std::size_t kKeyFileHeaderBytes = 16;

struct KeyFileHeader {
    unsigned p = 0;
    std::uint64_t n = 0;
    [[nodiscard]] unsigned key_bytes() const noexcept { return (p + 7) / 8; }
};

namespace detail {

inline void put_le(char* dst, std::uint64_t v, unsigned bytes) {
    for (unsigned i = 0; i < bytes; ++i) dst[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

inline std::uint64_t get_le(const char* src, unsigned bytes) {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < bytes; ++i) v |= std::uint64_t{static_cast<unsigned char>(src[i])} << (8 * i);
    return v;
}

} // namespace detail

inline void write_key_header(std::ostream& os, const KeyFileHeader& h) {
    std::array<char, kKeyFileHeaderBytes> buf{};
    std::memcpy(buf.data(), kKeyFileMagic.data(), 4);
    detail::put_le(buf.data() + 4, h.p, 4);
    detail::put_le(buf.data() + 8, h.n, 8);
    os.write(buf.data(), buf.size());
}

inline KeyFileHeader read_key_header(std::istream& is) {
    std::array<char, kKeyFileHeaderBytes> buf{};
    is.read(buf.data(), buf.size());
    if (is.gcount() != static_cast<std::streamsize>(buf.size())) throw key_file_error("key file: truncated header");
    if (std::memcmp(buf.data(), kKeyFileMagic.data(), 4) != 0) throw key_file_error("key file: bad magic");
    KeyFileHeader h;
    const std::uint64_t p = detail::get_le(buf.data() + 4, 4);
    if (p < 1 || p > 64) throw key_file_error("key file: precision must be 1..64");
    h.p = static_cast<unsigned>(p);
    h.n = detail::get_le(buf.data() + 8, 8);
    return h;
}

template <std::unsigned_integral Key>
void write_keys(std::ostream& os, unsigned p, std::span<const Key> keys) {
    if (p < 1 || p > 64) throw std::invalid_argument("key file: precision must be 1..64");
    const KeyFileHeader h{p, keys.size()};
    write_key_header(os, h);
    const unsigned width = h.key_bytes();
    std::vector<char> buf(std::size_t{width} * 4096);
    for (std::size_t i = 0; i < keys.size();) {
        const std::size_t m = std::min<std::size_t>(4096, keys.size() - i);
        for (std::size_t j = 0; j < m; ++j) {
            const std::uint64_t k = keys[i + j];
            if (p < 64 && (k >> p) != 0) throw std::out_of_range("key file: key wider than precision");
            detail::put_le(buf.data() + j * width, k, width);
        }
        os.write(buf.data(), static_cast<std::streamsize>(m * width));
        i += m;
    }
    if (!os) throw key_file_error("key file: write failed");
}

template <std::unsigned_integral Key>
void write_key_file(const std::string& path, unsigned p, std::span<const Key> keys) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw key_file_error("cannot open '" + path + "' for writing");
    write_keys<Key>(os, p, keys);
    os.flush();
    if (!os) throw key_file_error("key file: write failed for '" + path + "'");
}

// Streams keys out of a key file in caller-sized batches.
template <std::unsigned_integral Key>
class FileKeySource {
public:
    explicit FileKeySource(const std::string& path) : is_(path, std::ios::binary) {
        if (!is_) throw key_file_error("cannot open '" + path + "'");
        header_ = read_key_header(is_);
        if (header_.p > 8 * sizeof(Key)) throw key_file_error("key file: precision wider than key type");
    }

    [[nodiscard]] const KeyFileHeader& header() const noexcept { return header_; }
    [[nodiscard]] std::uint64_t size() const noexcept { return header_.n; }

    std::size_t pull(std::span<Key> out) {
        const unsigned width = header_.key_bytes();
        const std::size_t m = static_cast<std::size_t>(std::min<std::uint64_t>(out.size(), header_.n - consumed_));
        buf_.resize(std::size_t{width} * std::min<std::size_t>(m, 4096));
        std::size_t done = 0;
        while (done < m) {
            const std::size_t chunk = std::min<std::size_t>(4096, m - done);
            is_.read(buf_.data(), static_cast<std::streamsize>(chunk * width));
            if (is_.gcount() != static_cast<std::streamsize>(chunk * width)) throw key_file_error("key file: truncated");
            for (std::size_t j = 0; j < chunk; ++j) {
                const std::uint64_t k = detail::get_le(buf_.data() + j * width, width);
                if (header_.p < 64 && (k >> header_.p) != 0) throw key_file_error("key file: key exceeds precision");
                out[done + j] = static_cast<Key>(k);
            }
            done += chunk;
        }
        consumed_ += m;
        return m;
    }

    // Whole-file read; rejects trailing bytes after the declared keys.
    std::vector<Key> read_all() {
        std::vector<Key> keys(static_cast<std::size_t>(header_.n - consumed_));
        pull(keys);
        if (is_.peek() != std::char_traits<char>::eof()) throw key_file_error("key file: trailing bytes");
        return keys;
    }

private:
    std::ifstream is_;
    KeyFileHeader header_;
    std::uint64_t consumed_ = 0;
    std::vector<char> buf_;
};

inline KeyFileHeader peek_key_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw key_file_error("cannot open '" + path + "'");
    return read_key_header(is);
}

template <std::unsigned_integral Key>
std::vector<Key> read_key_file(const std::string& path) {
    FileKeySource<Key> source(path);
    return source.read_all();
}

} // namespace fractalsort
