#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "ecrank/curve.hpp"
#include "ecrank/numtheory.hpp"

namespace ecrank {

/// Conductor-interval slice of a dataset: records, aligned feature vectors,
/// aligned rank labels.
struct DatasetSlice {
    std::array<double, 2> interval{0.0, 0.0};
    std::vector<CurveRecord> records;
    std::vector<TraceVector> features;
    std::vector<int> labels;

    std::size_t size() const { return records.size(); }
};

struct SplitSpec {
    double ratio = 0.8;
    std::uint64_t seed = 0;
};

struct ParseResult {
    std::vector<CurveRecord> records;
    std::size_t rejected_rank_rows = 0;
};

/// Parse `label,conductor,rank,a1,a2,a3,a4,a6` CSV. Rows whose rank is
/// outside [0,4] are dropped and counted; any other malformed row throws
/// DataError with its line number.
ParseResult parse_curve_csv(const std::filesystem::path& path);

/// Records with A <= conductor <= B, in input order. Throws on A > B.
DatasetSlice filter_interval(std::span<const CurveRecord> records, double A, double B);

/// Seeded uniform shuffle, then prefix split with |train| = round(ratio * n).
std::pair<DatasetSlice, DatasetSlice> split_train_test(const DatasetSlice& slice,
                                                       const SplitSpec& spec);

/// Truncate every feature vector to the primes <= bound prefix.
/// Throws DataError if bound exceeds the slice's feature bound.
DatasetSlice truncate_features(const DatasetSlice& slice, std::uint64_t bound,
                               const PrimeTable& primes);

// --- binary cache ---------------------------------------------------------
//
// Curve cache, magic "APQV", version 1, little-endian:
//   magic[4] | u16 version | u64 bound | u32 pi(b) | pi(b) x u32 primes
//   | u64 curve_count | per curve:
//       u32 label_len | label bytes | u64 conductor | u8 rank
//       | 5 x i64 a-invariants | pi(b) x i16 a_p

void cache_write(const DatasetSlice& slice, const PrimeTable& primes,
                 const std::filesystem::path& path);

struct CacheData {
    PrimeTable primes;
    DatasetSlice slice;
};
CacheData cache_read(const std::filesystem::path& path);

// --- synthetic Sato-Tate sequences ----------------------------------------

/// count x pi(b) matrix of normalized coefficients drawn i.i.d. from the
/// semicircle density (2/pi) sqrt(1 - t^2) on [-1, 1], row-major.
struct SyntheticBatch {
    std::size_t count = 0;
    std::uint64_t bound = 0;
    std::size_t width = 0;
    std::uint64_t seed = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * width, width};
    }
};

SyntheticBatch sample_sato_tate(std::size_t count, const PrimeTable& primes,
                                std::uint64_t seed);

// Synthetic cache, magic "APQS", version 1, little-endian:
//   magic[4] | u16 version | u64 bound | u32 pi(b) | pi(b) x u32 primes
//   | u64 seed | u64 count | count * pi(b) x f64 values
void synth_write(const SyntheticBatch& batch, const PrimeTable& primes,
                 const std::filesystem::path& path);
SyntheticBatch synth_read(const std::filesystem::path& path, PrimeTable* primes_out = nullptr);

/// "APQV" or "APQS" from the file header.
std::string cache_kind(const std::filesystem::path& path);

/// FNV-1a 64 over the file bytes, as a hex string.
std::string file_fingerprint(const std::filesystem::path& path);

} // namespace ecrank
