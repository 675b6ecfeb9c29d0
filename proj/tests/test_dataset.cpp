#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "ecrank/dataset.hpp"
#include "ecrank/errors.hpp"
#include "oracle.hpp"

using namespace ecrank;
namespace fs = std::filesystem;

namespace {

const std::string kFixtureCsv = std::string(ECRANK_TEST_DATA_DIR) + "/curves_cond100.csv";

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("ecrank_test_" + name);
}

DatasetSlice fixture_slice(std::uint64_t bound) {
    const auto parsed = parse_curve_csv(kFixtureCsv);
    DatasetSlice slice = filter_interval(parsed.records, 0, 1e9);
    const PrimeTable primes = primes_up_to(bound);
    slice.features = trace_vectors(slice.records, primes);
    return slice;
}

} // namespace

TEST_CASE("parse_curve_csv reads the fixture") {
    const ParseResult parsed = parse_curve_csv(kFixtureCsv);
    CHECK(parsed.records.size() == 33);
    CHECK(parsed.rejected_rank_rows == 0);
    const CurveRecord& first = parsed.records.front();
    CHECK(first.label == "11a1");
    CHECK(first.conductor == 11);
    CHECK(first.rank == 0);
    CHECK(first.a == std::array<std::int64_t, 5>{0, -1, 1, -10, -20});
}

TEST_CASE("parse_curve_csv header-only file gives empty list") {
    const fs::path path = temp_file("header_only.csv");
    std::ofstream(path) << "label,conductor,rank,a1,a2,a3,a4,a6\n";
    const ParseResult parsed = parse_curve_csv(path);
    CHECK(parsed.records.empty());
    fs::remove(path);
}

TEST_CASE("parse_curve_csv rejects bad ranks with a count, errors on bad rows") {
    const fs::path path = temp_file("bad_rows.csv");
    {
        std::ofstream out(path);
        out << "label,conductor,rank,a1,a2,a3,a4,a6\n";
        out << "11a1,11,0,0,-1,1,-10,-20\n";
        out << "weird,11,9,0,-1,1,-10,-20\n";
    }
    const ParseResult parsed = parse_curve_csv(path);
    CHECK(parsed.records.size() == 1);
    CHECK(parsed.rejected_rank_rows == 1);

    {
        std::ofstream out(path);
        out << "label,conductor,rank,a1,a2,a3,a4,a6\n";
        out << "11a1,eleven,0,0,-1,1,-10,-20\n";
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(parse_curve_csv(path)),
                         doctest::Contains("line 2"), DataError);
    fs::remove(path);
}

TEST_CASE("filter_interval") {
    const auto parsed = parse_curve_csv(kFixtureCsv);
    const DatasetSlice all = filter_interval(parsed.records, 0, 1e18);
    CHECK(all.size() == parsed.records.size());

    const DatasetSlice small = filter_interval(parsed.records, 11, 37);
    for (const CurveRecord& rec : small.records) {
        CHECK(rec.conductor >= 11);
        CHECK(rec.conductor <= 37);
    }
    CHECK(filter_interval(parsed.records, 5, 5).size() == 0);
    CHECK_THROWS_AS(static_cast<void>(filter_interval(parsed.records, 10, 5)),
                    std::invalid_argument);
}

TEST_CASE("split_train_test sizes, determinism, partition") {
    DatasetSlice slice = fixture_slice(30);
    const SplitSpec spec{0.8, 12345};

    const auto [train1, test1] = split_train_test(slice, spec);
    CHECK(train1.size() == 26); // round(0.8 * 33)
    CHECK(test1.size() == 7);

    const auto [train2, test2] = split_train_test(slice, spec);
    for (std::size_t i = 0; i < train1.size(); ++i) {
        CHECK(train1.records[i].label == train2.records[i].label);
    }

    // partition: every label appears exactly once across both halves
    std::map<std::string, int> seen;
    for (const auto& r : train1.records) {
        seen[r.label] += 1;
    }
    for (const auto& r : test1.records) {
        seen[r.label] += 1;
    }
    CHECK(seen.size() == slice.size());
    for (const auto& [label, count] : seen) {
        CHECK(count == 1);
    }

    // multiset of ranks preserved
    std::map<int, int> before, after;
    for (const auto& r : slice.records) {
        before[r.rank] += 1;
    }
    for (const auto& r : train1.records) {
        after[r.rank] += 1;
    }
    for (const auto& r : test1.records) {
        after[r.rank] += 1;
    }
    CHECK(before == after);

    // different seed gives a different shuffle (overwhelmingly)
    const auto [train3, test3] = split_train_test(slice, SplitSpec{0.8, 999});
    bool any_diff = false;
    for (std::size_t i = 0; i < train1.size(); ++i) {
        any_diff |= train1.records[i].label != train3.records[i].label;
    }
    CHECK(any_diff);
}

TEST_CASE("split sizes follow round(ratio * n)") {
    // n=10 at 0.8 -> (8, 2); the spec's 36838-curve case rounds to 29470
    CHECK(static_cast<std::size_t>(std::llround(0.8 * 10)) == 8);
    CHECK(static_cast<std::size_t>(std::llround(0.8 * 36838)) == 29470);
    DatasetSlice slice = fixture_slice(10);
    slice.records.resize(10);
    slice.features.resize(10);
    slice.labels.resize(10);
    const auto [train, test] = split_train_test(slice, SplitSpec{0.8, 1});
    CHECK(train.size() == 8);
    CHECK(test.size() == 2);
    CHECK_THROWS_AS(static_cast<void>(split_train_test(DatasetSlice{}, SplitSpec{0.8, 1})),
                    DataError);
}

TEST_CASE("cache round trip is the identity") {
    const DatasetSlice slice = fixture_slice(100);
    const PrimeTable primes = primes_up_to(100);
    const fs::path path = temp_file("roundtrip.apqv");
    cache_write(slice, primes, path);

    const CacheData loaded = cache_read(path);
    CHECK(loaded.primes.bound == 100);
    CHECK(loaded.primes.primes == primes.primes);
    REQUIRE(loaded.slice.size() == slice.size());
    for (std::size_t i = 0; i < slice.size(); ++i) {
        CHECK(loaded.slice.records[i].label == slice.records[i].label);
        CHECK(loaded.slice.records[i].conductor == slice.records[i].conductor);
        CHECK(loaded.slice.records[i].rank == slice.records[i].rank);
        CHECK(loaded.slice.records[i].a == slice.records[i].a);
        CHECK(loaded.slice.features[i].ap == slice.features[i].ap);
        CHECK(loaded.slice.features[i].normalized == slice.features[i].normalized);
    }
    CHECK(cache_kind(path) == "APQV");
    fs::remove(path);
}

TEST_CASE("cache rejects bad magic and wrong version") {
    const fs::path path = temp_file("badmagic.apqv");
    std::ofstream(path, std::ios::binary) << "NOPE and some trailing bytes";
    CHECK_THROWS_WITH_AS(static_cast<void>(cache_read(path)), doctest::Contains("magic"),
                         DataError);

    // valid file, then bump the version field (bytes 4..5)
    const DatasetSlice slice = fixture_slice(20);
    cache_write(slice, primes_up_to(20), path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4);
        const std::uint16_t v2 = 2;
        f.write(reinterpret_cast<const char*>(&v2), sizeof(v2));
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(cache_read(path)), doctest::Contains("version"),
                         DataError);
    fs::remove(path);
}

TEST_CASE("cache detects truncation") {
    const DatasetSlice slice = fixture_slice(50);
    const fs::path path = temp_file("trunc.apqv");
    cache_write(slice, primes_up_to(50), path);
    const auto size = fs::file_size(path);
    fs::resize_file(path, size - 7);
    CHECK_THROWS_WITH_AS(static_cast<void>(cache_read(path)), doctest::Contains("truncated"),
                         DataError);
    fs::remove(path);
}

TEST_CASE("sato-tate sampler moments and support") {
    const PrimeTable primes = primes_up_to(30); // width 10
    const SyntheticBatch batch = sample_sato_tate(100000, primes, 424242);
    REQUIRE(batch.values.size() == 1000000);
    double mean = 0.0, second = 0.0;
    for (const double t : batch.values) {
        CHECK(t >= -1.0);
        CHECK(t <= 1.0);
        mean += t;
        second += t * t;
    }
    mean /= static_cast<double>(batch.values.size());
    second /= static_cast<double>(batch.values.size());
    CHECK(std::abs(mean) < 0.002);
    CHECK(std::abs(second - 0.25) < 0.002);
}

TEST_CASE("sato-tate sampler KS distance to the semicircle CDF") {
    const PrimeTable primes = primes_up_to(10);
    const SyntheticBatch batch = sample_sato_tate(25000, primes, 7); // 1e5 entries
    const double d = oracle::ks_distance(batch.values, oracle::semicircle_cdf);
    CHECK(d < 0.01);
}

TEST_CASE("sato-tate regeneration is bit-exact; synth cache round trips") {
    const PrimeTable primes = primes_up_to(50);
    const SyntheticBatch a = sample_sato_tate(500, primes, 99);
    const SyntheticBatch b = sample_sato_tate(500, primes, 99);
    CHECK(a.values == b.values);

    const fs::path path = temp_file("batch.apqs");
    synth_write(a, primes, path);
    PrimeTable primes_out;
    const SyntheticBatch loaded = synth_read(path, &primes_out);
    CHECK(loaded.values == a.values);
    CHECK(loaded.seed == 99);
    CHECK(loaded.count == 500);
    CHECK(primes_out.primes == primes.primes);
    CHECK(cache_kind(path) == "APQS");
    fs::remove(path);
}

TEST_CASE("synth cache detects a payload/count mismatch") {
    const PrimeTable primes = primes_up_to(20);
    const SyntheticBatch batch = sample_sato_tate(50, primes, 1);
    const fs::path path = temp_file("cut.apqs");
    synth_write(batch, primes, path);
    fs::resize_file(path, fs::file_size(path) - 16);
    CHECK_THROWS_AS(static_cast<void>(synth_read(path)), DataError);
    fs::remove(path);
}

TEST_CASE("truncate_features keeps prefixes") {
    const DatasetSlice slice = fixture_slice(100);
    const PrimeTable primes = primes_up_to(100);
    const DatasetSlice cut = truncate_features(slice, 10, primes);
    REQUIRE(cut.features.front().ap.size() == 4);
    for (std::size_t i = 0; i < slice.size(); ++i) {
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(cut.features[i].ap[k] == slice.features[i].ap[k]);
        }
    }
    CHECK_THROWS_AS(static_cast<void>(truncate_features(slice, 1000, primes)), DataError);
}

TEST_CASE("file fingerprint is stable and content-sensitive") {
    const fs::path path = temp_file("fp.bin");
    std::ofstream(path, std::ios::binary) << "fingerprint me";
    const std::string f1 = file_fingerprint(path);
    const std::string f2 = file_fingerprint(path);
    CHECK(f1 == f2);
    std::ofstream(path, std::ios::binary) << "fingerprint ME";
    CHECK(file_fingerprint(path) != f1);
    fs::remove(path);
}
