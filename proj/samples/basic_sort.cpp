// Sort a million 32-bit keys with the batched histogram sort and print the
// traffic and memory numbers next to an LSB radix sort of the same input.

#include "fractalsort/fractalsort.hpp"

#include <cstdio>

int main() {
    using namespace fractalsort;

    DatasetSpec spec;
    spec.n = 1u << 20;
    spec.p = 32;
    spec.seed = 2024;
    const auto keys = generate<std::uint32_t>(spec);

    BatchConfig config = choose_batch_params(spec.n, spec.p);
    TrafficMeter meter;
    PipelineStats stats;
    const auto sorted = fractal_sort<std::uint32_t>(keys, spec.p, config, &meter, &stats);

    TrafficMeter radix_meter;
    const auto radix = lsb_radix_sort<std::uint32_t>(keys, spec.p, 8, &radix_meter);
    if (sorted != radix.sorted_keys) {
        std::puts("mismatch");
        return 1;
    }

    const double ess = essential_bytes(spec.n, spec.p);
    std::printf("batches %zu, largest bin %llu keys, histogram %llu bytes\n", config.batch_count,
                static_cast<unsigned long long>(stats.max_bin),
                static_cast<unsigned long long>(stats.histogram_footprint));
    std::printf("fractal: traffic %llu B, b_eff %.3f, peak aux %llu B\n",
                static_cast<unsigned long long>(meter.total_bytes()), ess / meter.total_bytes(),
                static_cast<unsigned long long>(meter.peak_aux_bytes()));
    std::printf("radix:   traffic %llu B, b_eff %.3f, peak aux %llu B\n",
                static_cast<unsigned long long>(radix_meter.total_bytes()), ess / radix_meter.total_bytes(),
                static_cast<unsigned long long>(radix_meter.peak_aux_bytes()));

    // order statistics straight off a full-resolution histogram
    FractalHistogram hist(HistogramLayout::for_keys(spec.p, spec.n));
    for (auto k : keys) hist.insert(k);
    std::printf("median %llu (sorted[n/2] = %u), keys below 2^31: %llu\n",
                static_cast<unsigned long long>(hist.get_item(spec.n / 2, 0)), sorted[spec.n / 2],
                static_cast<unsigned long long>(hist.get_index(std::uint64_t{1} << 31)));
    return 0;
}
