// fractalsort: generate key files, sort them, verify results and run benchmark sweeps.
//
// exit codes: 0 ok / verified, 1 usage, 2 verification failed, 3 I/O

#include "fractalsort/fractalsort.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

using namespace fractalsort;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitMismatch = 2;
constexpr int kExitIo = 3;

struct SortOptions {
    std::string algo = "fractal";
    std::optional<std::size_t> batches;
    std::string mode = "serial";
    std::optional<unsigned> lb;
    unsigned workers = 0; // 0: hardware concurrency
    std::uint64_t cache_budget = kDefaultCacheBudget;
};

BatchConfig batch_config(const SortOptions& o, std::uint64_t n, unsigned p) {
    BatchConfig config = choose_batch_params(n, p, o.cache_budget);
    if (o.batches) config.batch_count = *o.batches;
    config.mode = o.mode == "parallel" ? BatchMode::parallel : BatchMode::serial;
    config.worker_limit = o.workers ? o.workers : std::max(1u, std::thread::hardware_concurrency());
    return config;
}

template <class Key>
std::vector<Key> run_algorithm(const std::vector<Key>& keys, unsigned p, const SortOptions& o, RunReport& report,
                               unsigned* cores_used = nullptr) {
    TrafficMeter meter(o.cache_budget);
    std::vector<Key> out;
    report.n = keys.size();
    report.p = p;
    report.algorithm = o.algo;
    report.mode = "serial";
    report.b = 1;
    unsigned cores = 1;
    const auto t0 = std::chrono::steady_clock::now();
    if (o.algo == "fractal") {
        const BatchConfig config = batch_config(o, keys.size(), p);
        PipelineStats stats;
        out = fractal_sort<Key>(keys, p, config, &meter, &stats, o.lb);
        report.b = config.batch_count;
        report.mode = to_string(config.mode);
        cores = stats.workers;
    } else if (o.algo == "radix") {
        out = std::move(lsb_radix_sort<Key>(keys, p, 8, &meter).sorted_keys);
    } else {
        out = oracle_sort<Key>(keys);
    }
    report.latency_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.bytes_read = meter.bytes_read();
    report.bytes_written = meter.bytes_written();
    report.peak_aux_bytes = meter.peak_aux_bytes();
    report.derive(cores);
    if (cores_used) *cores_used = cores;
    return out;
}

// Call fn.template operator()<Key>() with the narrowest key type holding p bits.
template <class Fn>
auto with_key_type(unsigned p, Fn&& fn) {
    const unsigned bytes = (p + 7) / 8;
    if (bytes <= 1) return fn.template operator()<std::uint8_t>();
    if (bytes <= 2) return fn.template operator()<std::uint16_t>();
    if (bytes <= 4) return fn.template operator()<std::uint32_t>();
    return fn.template operator()<std::uint64_t>();
}

void write_report(const std::string& path, const RunReport& r) {
    if (path.empty() || path == "-") {
        std::cout << RunReport::csv_header << '\n' << r.to_csv() << '\n';
        return;
    }
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream os(path, std::ios::app);
    if (!os) throw key_file_error("cannot open report '" + path + "'");
    if (fresh) os << RunReport::csv_header << '\n';
    os << r.to_csv() << '\n';
}

int cmd_gen(DatasetSpec spec, const std::string& dist, const std::string& out) {
    parse_distribution(dist, spec);
    spec.validate();
    with_key_type(spec.p, [&]<class Key>() {
        const auto keys = generate<Key>(spec);
        write_key_file<Key>(out, spec.p, keys);
        return 0;
    });
    return kExitOk;
}

int cmd_sort(const std::string& in, const std::string& out, const std::string& report_path, const SortOptions& o) {
    const KeyFileHeader header = peek_key_file(in);
    RunReport report;
    with_key_type(header.p, [&]<class Key>() {
        const auto keys = read_key_file<Key>(in);
        const auto sorted = run_algorithm<Key>(keys, header.p, o, report);
        write_key_file<Key>(out, header.p, sorted);
        return 0;
    });
    write_report(report_path, report);
    return kExitOk;
}

int cmd_verify(const std::string& in, const std::string& sorted_path) {
    const KeyFileHeader a = peek_key_file(in);
    const KeyFileHeader b = peek_key_file(sorted_path);
    if (a.p != b.p || a.n != b.n) {
        std::cerr << "verify: header mismatch (p " << a.p << " vs " << b.p << ", n " << a.n << " vs " << b.n << ")\n";
        return kExitMismatch;
    }
    const bool ok = with_key_type(a.p, [&]<class Key>() {
        return oracle_sort<Key>(read_key_file<Key>(in)) == read_key_file<Key>(sorted_path);
    });
    std::cerr << (ok ? "verified: output equals oracle sort\n" : "verify: output differs from oracle sort\n");
    return ok ? kExitOk : kExitMismatch;
}

struct BenchOptions {
    std::vector<std::uint64_t> n{std::uint64_t{1} << 16};
    std::vector<unsigned> p{32};
    std::vector<std::size_t> batches;
    std::vector<std::string> dists{"uniform"};
    std::vector<std::string> algos{"fractal", "radix"};
    unsigned trials = 3;
    std::uint64_t seed = 1;
    std::string out;
};

int cmd_bench(const BenchOptions& bo, SortOptions o) {
    std::ofstream file;
    if (!bo.out.empty() && bo.out != "-") {
        file.open(bo.out, std::ios::trunc);
        if (!file) throw key_file_error("cannot open '" + bo.out + "'");
    }
    std::ostream& os = file.is_open() ? static_cast<std::ostream&>(file) : std::cout;
    os << RunReport::csv_header << '\n';
    std::vector<std::optional<std::size_t>> bs;
    for (auto b : bo.batches) bs.emplace_back(b);
    if (bs.empty()) bs.emplace_back(std::nullopt);
    std::size_t failed = 0;
    for (const auto& dist : bo.dists) {
        for (const auto n : bo.n) {
            for (const auto p : bo.p) {
                DatasetSpec spec;
                spec.n = n;
                spec.p = p;
                spec.seed = bo.seed;
                try {
                    parse_distribution(dist, spec);
                    spec.validate();
                } catch (const std::exception& e) {
                    std::cerr << "bench: skipping " << dist << ": " << e.what() << '\n';
                    ++failed;
                    continue;
                }
                for (const auto& algo : bo.algos) {
                    for (const auto& b : bs) {
                        if (algo != "fractal" && b != bs.front()) continue; // b only matters for fractal
                        o.algo = algo;
                        o.batches = b;
                        try {
                            const RunReport row = with_key_type(p, [&]<class Key>() {
                                const auto keys = generate<Key>(spec);
                                RunReport r;
                                unsigned cores = 1;
                                double total = 0;
                                for (unsigned t = 0; t < bo.trials; ++t) {
                                    (void)run_algorithm<Key>(keys, p, o, r, &cores);
                                    total += r.latency_seconds;
                                }
                                r.latency_seconds = total / bo.trials;
                                r.derive(cores);
                                return r;
                            });
                            os << row.to_csv() << '\n';
                            std::cerr << "bench: " << dist << " n=" << n << " p=" << p << " " << algo << " b=" << row.b
                                      << " trials=" << bo.trials << '\n';
                        } catch (const std::exception& e) {
                            std::cerr << "bench: cell " << dist << " n=" << n << " p=" << p << " " << algo
                                      << " failed: " << e.what() << '\n';
                            ++failed;
                        }
                    }
                }
            }
        }
    }
    os.flush();
    if (failed) std::cerr << "bench: " << failed << " cell(s) failed\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compressed-histogram radix sort: key generation, sorting, verification, benchmarks"};
    app.require_subcommand(1);

    DatasetSpec gen_spec;
    std::string gen_dist = "uniform";
    std::string gen_out;
    auto* gen = app.add_subcommand("gen", "write a key file");
    gen->add_option("--n", gen_spec.n, "number of keys")->required();
    gen->add_option("--p", gen_spec.p, "key precision in bits")->check(CLI::Range(1u, 64u))->default_val(32);
    gen->add_option("--dist", gen_dist,
                    "uniform | zipfian[:s] | gaussian[:mu[:sigma]] | sorted | reverse | almost_sorted[:fraction]")
        ->default_val("uniform");
    gen->add_option("--seed", gen_spec.seed, "generator seed")->default_val(1);
    gen->add_option("--out", gen_out, "output key file")->required();

    SortOptions sort_opts;
    const auto algo_check = CLI::IsMember({"fractal", "radix", "oracle"});
    const auto mode_check = CLI::IsMember({"serial", "parallel"});
    std::string sort_in;
    std::string sort_out;
    std::string report_path;
    auto* sort = app.add_subcommand("sort", "sort a key file");
    sort->add_option("input", sort_in, "input key file")->required();
    sort->add_option("--out", sort_out, "sorted key file")->required();
    sort->add_option("--algo", sort_opts.algo, "fractal | radix | oracle")->check(algo_check)->default_val("fractal");
    sort->add_option("--batches", sort_opts.batches, "batch count (default: chosen from n, p and cache size)")
        ->check(CLI::PositiveNumber);
    sort->add_option("--mode", sort_opts.mode, "serial | parallel")->check(mode_check)->default_val("serial");
    sort->add_option("--lb", sort_opts.lb, "bin depth (bits sorted inside a bin)")->check(CLI::Range(0u, 64u));
    sort->add_option("--workers", sort_opts.workers, "parallel worker limit (default: hardware threads)");
    sort->add_option("--cache-budget", sort_opts.cache_budget, "modeled cache size in bytes")
        ->default_val(kDefaultCacheBudget);
    sort->add_option("--report", report_path, "append the run's CSV row here (default: stdout)");

    std::string verify_in;
    std::string verify_sorted;
    auto* verify = app.add_subcommand("verify", "check a sorted file against the oracle sort of its input");
    verify->add_option("input", verify_in, "original key file")->required();
    verify->add_option("sorted", verify_sorted, "sorted key file")->required();

    BenchOptions bench_opts;
    SortOptions bench_sort;
    auto* bench = app.add_subcommand("bench", "benchmark sweep, one CSV row per cell");
    bench->add_option("--n", bench_opts.n, "key counts")->delimiter(',');
    bench->add_option("--p", bench_opts.p, "precisions")->delimiter(',')->check(CLI::Range(1u, 64u));
    bench->add_option("--batches", bench_opts.batches, "batch counts for the fractal sort")
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    bench->add_option("--dist", bench_opts.dists, "distributions")->delimiter(',');
    bench->add_option("--algo", bench_opts.algos, "algorithms")->delimiter(',')->check(algo_check);
    bench->add_option("--mode", bench_sort.mode, "serial | parallel")->check(mode_check)->default_val("serial");
    bench->add_option("--lb", bench_sort.lb, "bin depth")->check(CLI::Range(0u, 64u));
    bench->add_option("--workers", bench_sort.workers, "parallel worker limit");
    bench->add_option("--cache-budget", bench_sort.cache_budget, "modeled cache size in bytes")
        ->default_val(kDefaultCacheBudget);
    bench->add_option("--trials", bench_opts.trials, "runs averaged per cell")->check(CLI::PositiveNumber)->default_val(3);
    bench->add_option("--seed", bench_opts.seed, "generator seed")->default_val(1);
    bench->add_option("--out", bench_opts.out, "CSV file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen) return cmd_gen(gen_spec, gen_dist, gen_out);
        if (*sort) return cmd_sort(sort_in, sort_out, report_path, sort_opts);
        if (*verify) return cmd_verify(verify_in, verify_sorted);
        if (*bench) return cmd_bench(bench_opts, bench_sort);
    } catch (const key_file_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
