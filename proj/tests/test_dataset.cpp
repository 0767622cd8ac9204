#include "fractalsort/dataset.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>

using namespace fractalsort;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("fractalsort_" + name)).string();
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

DatasetSpec spec_of(const std::string& dist, std::uint64_t n, unsigned p, std::uint64_t seed = 1) {
    DatasetSpec s;
    parse_distribution(dist, s);
    s.n = n;
    s.p = p;
    s.seed = seed;
    return s;
}

} // namespace

TEST(Dataset, ParseDistribution) {
    DatasetSpec s;
    parse_distribution("zipfian:1.5", s);
    EXPECT_EQ(s.distribution, Distribution::zipfian);
    EXPECT_DOUBLE_EQ(s.zipf_exponent, 1.5);
    parse_distribution("gaussian:0.25:0.01", s);
    EXPECT_EQ(s.distribution, Distribution::gaussian);
    EXPECT_DOUBLE_EQ(s.mean, 0.25);
    EXPECT_DOUBLE_EQ(s.stddev, 0.01);
    parse_distribution("almost_sorted:0.1", s);
    EXPECT_DOUBLE_EQ(s.swap_fraction, 0.1);
    EXPECT_THROW(parse_distribution("bogus", s), std::invalid_argument);
    EXPECT_THROW(parse_distribution("zipfian:abc", s), std::invalid_argument);
    EXPECT_THROW(parse_distribution("uniform:1", s), std::invalid_argument);
}

TEST(Dataset, KeysInRangeForAllDistributions) {
    for (auto d : kAllDistributions) {
        for (unsigned p : {1u, 8u, 13u, 32u, 64u}) {
            auto s = spec_of(distribution_name(d), 2000, p, 5);
            const auto keys = generate<std::uint64_t>(s);
            ASSERT_EQ(keys.size(), 2000u);
            if (p < 64) {
                for (auto k : keys) ASSERT_LT(k, std::uint64_t{1} << p) << distribution_name(d);
            }
        }
    }
}

TEST(Dataset, Deterministic) {
    for (auto d : kAllDistributions) {
        const auto s = spec_of(distribution_name(d), 500, 20, 9);
        EXPECT_EQ(generate<std::uint32_t>(s), generate<std::uint32_t>(s));
        auto other = s;
        other.seed = 10;
        EXPECT_NE(generate<std::uint32_t>(s), generate<std::uint32_t>(other));
    }
}

TEST(Dataset, OrderedVariants) {
    const auto sorted = generate<std::uint32_t>(spec_of("sorted", 1000, 16));
    EXPECT_TRUE(std::is_sorted(sorted.begin(), sorted.end()));
    const auto rev = generate<std::uint32_t>(spec_of("reverse", 1000, 16));
    EXPECT_TRUE(std::is_sorted(rev.rbegin(), rev.rend()));
    const auto almost = generate<std::uint32_t>(spec_of("almost_sorted:0.01", 1000, 16));
    EXPECT_FALSE(std::is_sorted(almost.begin(), almost.end()));
    std::size_t descents = 0;
    for (std::size_t i = 1; i < almost.size(); ++i) descents += almost[i] < almost[i - 1];
    EXPECT_LE(descents, 40u);
}

TEST(Dataset, ZipfIsHeavilySkewed) {
    const auto keys = generate<std::uint32_t>(spec_of("zipfian:1.2", 100000, 32));
    std::map<std::uint32_t, std::uint64_t> freq;
    for (auto k : keys) ++freq[k];
    std::uint64_t top = 0;
    for (const auto& [k, c] : freq) top = std::max(top, c);
    EXPECT_GE(static_cast<double>(top), 100.0 * 100000.0 / 4294967296.0);
    EXPECT_EQ(freq.begin()->first, 0u); // rank 1 maps to key 0
    EXPECT_GT(freq[0], 10000u);
}

TEST(Dataset, ZipfExponentOne) {
    const auto keys = generate<std::uint16_t>(spec_of("zipfian:1.0", 20000, 16));
    std::uint64_t zeros = std::count(keys.begin(), keys.end(), 0);
    std::uint64_t ones = std::count(keys.begin(), keys.end(), 1);
    EXPECT_GT(zeros, ones); // P(1)/P(2) = 2
    EXPECT_NEAR(static_cast<double>(zeros) / static_cast<double>(ones), 2.0, 0.3);
}

TEST(Dataset, GaussianCentred) {
    const auto keys = generate<std::uint32_t>(spec_of("gaussian:0.5:0.05", 20000, 16));
    double mean = 0;
    for (auto k : keys) mean += k;
    mean /= keys.size();
    EXPECT_NEAR(mean / 65536.0, 0.5, 0.01);
}

TEST(KeyFile, RoundTripAndFormat) {
    const auto path = temp_path("roundtrip.bin");
    const std::vector<std::uint32_t> keys{0x12345, 0, 0xFFFFF, 7};
    write_key_file<std::uint32_t>(path, 20, keys);
    const auto bytes = slurp(path);
    ASSERT_EQ(bytes.size(), 16u + 4 * 3);
    EXPECT_EQ(bytes.substr(0, 4), "FSK1");
    EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 20);
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 4);
    EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 0x45);
    EXPECT_EQ(static_cast<unsigned char>(bytes[17]), 0x23);
    EXPECT_EQ(static_cast<unsigned char>(bytes[18]), 0x01);
    EXPECT_EQ(read_key_file<std::uint32_t>(path), keys);
    EXPECT_EQ(peek_key_file(path).p, 20u);
    std::filesystem::remove(path);
}

TEST(KeyFile, GeneratedFilesIdentical) {
    const auto a = temp_path("gen_a.bin");
    const auto b = temp_path("gen_b.bin");
    const auto spec = spec_of("uniform", 10, 16);
    write_key_file<std::uint16_t>(a, 16, generate<std::uint16_t>(spec));
    write_key_file<std::uint16_t>(b, 16, generate<std::uint16_t>(spec));
    EXPECT_EQ(slurp(a), slurp(b));
    std::filesystem::remove(a);
    std::filesystem::remove(b);
}

TEST(KeyFile, StreamsInBatches) {
    const auto path = temp_path("stream.bin");
    const auto keys = generate<std::uint64_t>(spec_of("uniform", 10000, 64));
    write_key_file<std::uint64_t>(path, 64, keys);
    FileKeySource<std::uint64_t> src(path);
    std::vector<std::uint64_t> got;
    std::vector<std::uint64_t> buf(777);
    while (true) {
        const auto m = src.pull(buf);
        if (m == 0) break;
        got.insert(got.end(), buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(m));
    }
    EXPECT_EQ(got, keys);
    std::filesystem::remove(path);
}

TEST(KeyFile, Malformed) {
    const auto path = temp_path("bad.bin");
    {
        std::ofstream os(path, std::ios::binary);
        os << "FSK2xxxxxxxxxxxx";
    }
    EXPECT_THROW(read_key_file<std::uint32_t>(path), key_file_error);
    {
        std::ofstream os(path, std::ios::binary);
        os << "FSK1";
    }
    EXPECT_THROW(read_key_file<std::uint32_t>(path), key_file_error);
    const std::vector<std::uint16_t> keys{1, 2, 3};
    write_key_file<std::uint16_t>(path, 16, keys);
    std::filesystem::resize_file(path, 16 + 5);
    EXPECT_THROW(read_key_file<std::uint16_t>(path), key_file_error);
    write_key_file<std::uint16_t>(path, 16, keys);
    EXPECT_THROW(read_key_file<std::uint8_t>(path), key_file_error); // too narrow for p
    {
        std::ofstream os(path, std::ios::binary | std::ios::app);
        os << 'z';
    }
    EXPECT_THROW(read_key_file<std::uint16_t>(path), key_file_error);
    {
        std::ofstream os(path, std::ios::binary);
        write_key_header(os, KeyFileHeader{65, 0});
    }
    EXPECT_THROW(read_key_file<std::uint64_t>(path), key_file_error);
    EXPECT_THROW(read_key_file<std::uint32_t>(temp_path("missing.bin")), key_file_error);
    std::filesystem::remove(path);
}
