#pragma once
// metrics.hpp - software memory-traffic model, peak auxiliary memory tracking,
// bandwidth efficiency and unit throughput.

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fractalsort {

inline constexpr std::uint64_t kDefaultCacheBudget = std::uint64_t{8} << 20;

// Modeled DRAM traffic and tracked auxiliary allocations for one worker.
//
// Streaming arrays (inputs, entry stores, scratch buffers, outputs) are charged on
// every pass through record_read / record_write. Bounded structures that a sort keeps
// hot (histograms, per-bin temporaries) go through touch_read / touch_write, which
// only charge when the structure is larger than the cache budget.
class TrafficMeter {
public:
    explicit TrafficMeter(std::uint64_t cache_budget = kDefaultCacheBudget) : cache_budget_(cache_budget) {}

    void record_read(std::uint64_t bytes) noexcept { bytes_read_ += bytes; }
    void record_write(std::uint64_t bytes) noexcept { bytes_written_ += bytes; }

    void touch_read(std::uint64_t bytes, std::uint64_t structure_bytes) noexcept {
        if (structure_bytes > cache_budget_) bytes_read_ += bytes;
    }
    void touch_write(std::uint64_t bytes, std::uint64_t structure_bytes) noexcept {
        if (structure_bytes > cache_budget_) bytes_written_ += bytes;
    }

    void track_alloc(std::uint64_t bytes) noexcept {
        tracked_ += bytes;
        if (tracked_ > peak_) peak_ = tracked_;
    }

    void track_free(std::uint64_t bytes) {
        if (bytes > tracked_) throw std::logic_error("TrafficMeter: freeing more than is tracked");
        tracked_ -= bytes;
    }

    // Resize a tracked allocation in place (grows raise the peak, shrinks free).
    void track_resize(std::uint64_t old_bytes, std::uint64_t new_bytes) {
        if (new_bytes >= old_bytes) track_alloc(new_bytes - old_bytes);
        else track_free(old_bytes - new_bytes);
    }

    // Fold in meters of workers that ran concurrently on top of the current live set.
    void absorb_concurrent(const std::vector<TrafficMeter>& workers) noexcept {
        std::uint64_t peaks = 0;
        std::uint64_t live = 0;
        for (const auto& w : workers) {
            bytes_read_ += w.bytes_read_;
            bytes_written_ += w.bytes_written_;
            peaks += w.peak_;
            live += w.tracked_;
        }
        if (tracked_ + peaks > peak_) peak_ = tracked_ + peaks;
        tracked_ += live;
    }

    [[nodiscard]] std::uint64_t bytes_read() const noexcept { return bytes_read_; }
    [[nodiscard]] std::uint64_t bytes_written() const noexcept { return bytes_written_; }
    [[nodiscard]] std::uint64_t total_bytes() const noexcept { return bytes_read_ + bytes_written_; }
    [[nodiscard]] std::uint64_t peak_aux_bytes() const noexcept { return peak_; }
    [[nodiscard]] std::uint64_t tracked_bytes() const noexcept { return tracked_; }
    [[nodiscard]] std::uint64_t cache_budget() const noexcept { return cache_budget_; }

private:
    std::uint64_t cache_budget_;
    std::uint64_t bytes_read_ = 0;
    std::uint64_t bytes_written_ = 0;
    std::uint64_t tracked_ = 0;
    std::uint64_t peak_ = 0;
};

// RAII registration of an auxiliary buffer with an optional meter.
class TrackedBytes {
public:
    TrackedBytes() = default;
    TrackedBytes(TrafficMeter* meter, std::uint64_t bytes) : meter_(meter), bytes_(bytes) {
        if (meter_) meter_->track_alloc(bytes_);
    }
    TrackedBytes(const TrackedBytes&) = delete;
    TrackedBytes& operator=(const TrackedBytes&) = delete;
    TrackedBytes(TrackedBytes&& o) noexcept : meter_(o.meter_), bytes_(o.bytes_) { o.meter_ = nullptr; }
    TrackedBytes& operator=(TrackedBytes&& o) noexcept {
        if (this != &o) {
            release();
            meter_ = o.meter_;
            bytes_ = o.bytes_;
            o.meter_ = nullptr;
        }
        return *this;
    }
    ~TrackedBytes() { release(); }

    void resize(std::uint64_t bytes) {
        if (meter_) meter_->track_resize(bytes_, bytes);
        bytes_ = bytes;
    }
    [[nodiscard]] std::uint64_t bytes() const noexcept { return bytes_; }

private:
    void release() noexcept {
        if (meter_) meter_->track_free(bytes_);
        meter_ = nullptr;
    }

    TrafficMeter* meter_ = nullptr;
    std::uint64_t bytes_ = 0;
};

// Dimensionless ratio of useful throughput to total memory traffic.
[[nodiscard]] inline double bandwidth_efficiency(double useful_bytes_per_sec, double total_traffic_bytes_per_sec) {
    if (!(total_traffic_bytes_per_sec > 0.0)) {
        throw std::invalid_argument("bandwidth_efficiency: total traffic must be positive");
    }
    return useful_bytes_per_sec / total_traffic_bytes_per_sec;
}

// Bytes a sort must move no matter what: read n p-bit keys once, write them once.
[[nodiscard]] inline double essential_bytes(std::uint64_t n, unsigned precision_bits) noexcept {
    return 2.0 * static_cast<double>(n) * precision_bits / 8.0;
}

// Keys per second per core. An empty input sorts at zero throughput.
[[nodiscard]] inline double unit_throughput(double n, double latency_seconds, unsigned core_count) {
    if (n == 0.0) return 0.0;
    if (!(latency_seconds > 0.0)) throw std::invalid_argument("unit_throughput: latency must be positive");
    if (core_count == 0) throw std::invalid_argument("unit_throughput: core_count must be >= 1");
    return n / (latency_seconds * core_count);
}

struct RunReport {
    std::uint64_t n = 0;
    unsigned p = 0;
    std::uint64_t b = 1;
    std::string mode = "serial";
    std::string algorithm = "fractal";
    double latency_seconds = 0.0;
    std::uint64_t bytes_read = 0;
    std::uint64_t bytes_written = 0;
    std::uint64_t peak_aux_bytes = 0;
    double b_eff = 0.0;
    double unit_throughput_keys_per_sec = 0.0;

    static constexpr std::string_view csv_header =
        "n,p,b,mode,algorithm,latency_s,bytes_read,bytes_written,peak_aux_bytes,b_eff,unit_throughput";

    // Fill b_eff and unit throughput from the raw fields.
    void derive(unsigned cores) {
        const std::uint64_t total = bytes_read + bytes_written;
        b_eff = total > 0 ? bandwidth_efficiency(essential_bytes(n, p), static_cast<double>(total)) : 0.0;
        unit_throughput_keys_per_sec =
            latency_seconds > 0.0 ? unit_throughput(static_cast<double>(n), latency_seconds, cores) : 0.0;
    }

    [[nodiscard]] std::string to_csv() const {
        std::ostringstream os;
        os << n << ',' << p << ',' << b << ',' << mode << ',' << algorithm << ','
           << std::setprecision(9) << latency_seconds << ',' << bytes_read << ',' << bytes_written << ','
           << peak_aux_bytes << ',' << std::setprecision(6) << b_eff << ',' << std::setprecision(8)
           << unit_throughput_keys_per_sec;
        return os.str();
    }

    static RunReport from_csv(std::string_view line) {
        std::vector<std::string> cells;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                cells.push_back(cur);
                cur.clear();
            } else if (c != '\r' && c != '\n') {
                cur.push_back(c);
            }
        }
        cells.push_back(cur);
        if (cells.size() != 11) throw std::invalid_argument("RunReport: expected 11 CSV fields");
        RunReport r;
        try {
            r.n = std::stoull(cells[0]);
            r.p = static_cast<unsigned>(std::stoul(cells[1]));
            r.b = std::stoull(cells[2]);
            r.mode = cells[3];
            r.algorithm = cells[4];
            r.latency_seconds = std::stod(cells[5]);
            r.bytes_read = std::stoull(cells[6]);
            r.bytes_written = std::stoull(cells[7]);
            r.peak_aux_bytes = std::stoull(cells[8]);
            r.b_eff = std::stod(cells[9]);
            r.unit_throughput_keys_per_sec = std::stod(cells[10]);
        } catch (const std::logic_error&) {
            throw std::invalid_argument("RunReport: malformed CSV field");
        }
        return r;
    }
};

// Published competitor figures, reported as static rows rather than measurements.
struct ReferenceThroughput {
    std::string_view system;
    double n;
    double latency_seconds;
    unsigned cores;
    [[nodiscard]] double keys_per_sec_per_core() const { return unit_throughput(n, latency_seconds, cores); }
};

inline constexpr ReferenceThroughput kParadisReference{"paradis", 2147483648.0, 4.6, 32};
inline constexpr ReferenceThroughput kHistogramSortCpuReference{"histogram-sort-cpu-b14", 2147483648.0, 21.22, 4};

} // namespace fractalsort
