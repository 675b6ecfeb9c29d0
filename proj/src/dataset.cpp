#include "ecrank/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>

#include "ecrank/errors.hpp"
#include "ecrank/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "cache I/O assumes a little-endian host");

namespace ecrank {

namespace {

std::int64_t parse_int(std::string_view field, std::size_t line_no, const char* what) {
    std::int64_t value = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw DataError("line " + std::to_string(line_no) + ": bad " + what + " field '"
                        + std::string(field) + "'");
    }
    return value;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

void attach_labels(DatasetSlice& slice) {
    slice.labels.resize(slice.records.size());
    for (std::size_t i = 0; i < slice.records.size(); ++i) {
        slice.labels[i] = slice.records[i].rank;
    }
}

template <typename T>
void write_le(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) {
        throw DataError(std::string("cache truncated while reading ") + what);
    }
    return value;
}

constexpr char kCurveMagic[4] = {'A', 'P', 'Q', 'V'};
constexpr char kSynthMagic[4] = {'A', 'P', 'Q', 'S'};
constexpr std::uint16_t kCacheVersion = 1;

PrimeTable read_prime_header(std::istream& in) {
    PrimeTable primes;
    primes.bound = read_le<std::uint64_t>(in, "bound");
    const auto count = read_le<std::uint32_t>(in, "prime count");
    if (count > (1u << 27) || static_cast<std::uint64_t>(count) > primes.bound) {
        throw DataError("cache corrupt: implausible prime count " + std::to_string(count));
    }
    primes.primes.resize(count);
    in.read(reinterpret_cast<char*>(primes.primes.data()),
            static_cast<std::streamsize>(count * sizeof(std::uint32_t)));
    if (!in) {
        throw DataError("cache truncated while reading prime list");
    }
    return primes;
}

void write_prime_header(std::ostream& out, const PrimeTable& primes) {
    write_le<std::uint64_t>(out, primes.bound);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(primes.count()));
    out.write(reinterpret_cast<const char*>(primes.primes.data()),
              static_cast<std::streamsize>(primes.count() * sizeof(std::uint32_t)));
}

void check_magic_version(std::istream& in, const char expected[4], const char* kind) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, expected, 4) != 0) {
        throw DataError(std::string("not a ") + kind + " cache (bad magic)");
    }
    const auto version = read_le<std::uint16_t>(in, "version");
    if (version != kCacheVersion) {
        throw DataError(std::string(kind) + " cache version " + std::to_string(version)
                        + " not supported (reader handles version "
                        + std::to_string(kCacheVersion) + ")");
    }
}

} // namespace

ParseResult parse_curve_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(path.string() + ": empty file (expected header)");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != "label,conductor,rank,a1,a2,a3,a4,a6") {
        throw DataError(path.string() + ": unexpected header '" + line + "'");
    }

    ParseResult result;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != 8) {
            throw DataError("line " + std::to_string(line_no) + ": expected 8 fields, got "
                            + std::to_string(fields.size()));
        }
        CurveRecord rec;
        rec.label = std::string(fields[0]);
        rec.conductor = parse_int(fields[1], line_no, "conductor");
        const std::int64_t rank = parse_int(fields[2], line_no, "rank");
        for (int i = 0; i < 5; ++i) {
            rec.a[i] = parse_int(fields[3 + i], line_no,
                                 i == 4 ? "a6" : ("a" + std::to_string(i + 1)).c_str());
        }
        if (rank < 0 || rank > 4) {
            ++result.rejected_rank_rows;
            continue;
        }
        rec.rank = static_cast<int>(rank);
        result.records.push_back(std::move(rec));
    }
    return result;
}

DatasetSlice filter_interval(std::span<const CurveRecord> records, double A, double B) {
    if (A > B) {
        throw std::invalid_argument("filter_interval: A > B");
    }
    DatasetSlice slice;
    slice.interval = {A, B};
    for (const CurveRecord& rec : records) {
        const double n = static_cast<double>(rec.conductor);
        if (n >= A && n <= B) {
            slice.records.push_back(rec);
        }
    }
    attach_labels(slice);
    return slice;
}

std::pair<DatasetSlice, DatasetSlice> split_train_test(const DatasetSlice& slice,
                                                       const SplitSpec& spec) {
    const std::size_t n = slice.size();
    if (n == 0) {
        throw DataError("split_train_test: empty slice");
    }
    if (!(spec.ratio > 0.0 && spec.ratio < 1.0)) {
        throw std::invalid_argument("split_train_test: ratio must be in (0,1)");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(spec.seed);
    shuffle(order, rng);

    const auto n_train = static_cast<std::size_t>(
        std::llround(spec.ratio * static_cast<double>(n)));

    const bool has_features = slice.features.size() == n;
    DatasetSlice train, test;
    train.interval = test.interval = slice.interval;
    for (std::size_t i = 0; i < n; ++i) {
        DatasetSlice& dst = i < n_train ? train : test;
        const std::size_t src = order[i];
        dst.records.push_back(slice.records[src]);
        if (has_features) {
            dst.features.push_back(slice.features[src]);
        }
    }
    attach_labels(train);
    attach_labels(test);
    return {std::move(train), std::move(test)};
}

DatasetSlice truncate_features(const DatasetSlice& slice, std::uint64_t bound,
                               const PrimeTable& primes) {
    if (slice.features.empty() && !slice.records.empty()) {
        throw DataError("truncate_features: slice has no features");
    }
    if (!slice.features.empty() && bound > slice.features.front().bound) {
        throw DataError("truncate_features: bound " + std::to_string(bound)
                        + " exceeds cached bound "
                        + std::to_string(slice.features.front().bound));
    }
    std::size_t keep = 0;
    while (keep < primes.count() && primes.primes[keep] <= bound) {
        ++keep;
    }
    DatasetSlice out = slice;
    for (TraceVector& tv : out.features) {
        tv.bound = bound;
        tv.ap.resize(keep);
        tv.normalized.resize(keep);
    }
    return out;
}

void cache_write(const DatasetSlice& slice, const PrimeTable& primes,
                 const std::filesystem::path& path) {
    if (slice.features.size() != slice.records.size()) {
        throw DataError("cache_write: features not computed for every record");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    out.write(kCurveMagic, 4);
    write_le<std::uint16_t>(out, kCacheVersion);
    write_prime_header(out, primes);
    write_le<std::uint64_t>(out, slice.records.size());
    for (std::size_t i = 0; i < slice.records.size(); ++i) {
        const CurveRecord& rec = slice.records[i];
        const TraceVector& tv = slice.features[i];
        if (tv.ap.size() != primes.count()) {
            throw DataError("cache_write: feature length mismatch for " + rec.label);
        }
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.label.size()));
        out.write(rec.label.data(), static_cast<std::streamsize>(rec.label.size()));
        write_le<std::uint64_t>(out, static_cast<std::uint64_t>(rec.conductor));
        write_le<std::uint8_t>(out, static_cast<std::uint8_t>(rec.rank));
        for (const std::int64_t a : rec.a) {
            write_le<std::int64_t>(out, a);
        }
        out.write(reinterpret_cast<const char*>(tv.ap.data()),
                  static_cast<std::streamsize>(tv.ap.size() * sizeof(std::int16_t)));
    }
    if (!out) {
        throw DataError("write failed for " + path.string());
    }
}

CacheData cache_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    check_magic_version(in, kCurveMagic, "curve");
    CacheData data;
    data.primes = read_prime_header(in);
    const auto n = read_le<std::uint64_t>(in, "curve count");
    data.slice.records.reserve(n);
    data.slice.features.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        CurveRecord rec;
        const auto label_len = read_le<std::uint32_t>(in, "label length");
        if (label_len > (1u << 20)) {
            throw DataError("cache corrupt: implausible label length "
                            + std::to_string(label_len));
        }
        rec.label.resize(label_len);
        in.read(rec.label.data(), label_len);
        if (!in) {
            throw DataError("cache truncated while reading label");
        }
        rec.conductor = static_cast<std::int64_t>(read_le<std::uint64_t>(in, "conductor"));
        rec.rank = read_le<std::uint8_t>(in, "rank");
        for (int k = 0; k < 5; ++k) {
            rec.a[k] = read_le<std::int64_t>(in, "a-invariant");
        }
        TraceVector tv;
        tv.curve_label = rec.label;
        tv.bound = data.primes.bound;
        tv.ap.resize(data.primes.count());
        in.read(reinterpret_cast<char*>(tv.ap.data()),
                static_cast<std::streamsize>(tv.ap.size() * sizeof(std::int16_t)));
        if (!in) {
            throw DataError("cache truncated while reading a_p array");
        }
        tv.normalized.resize(tv.ap.size());
        for (std::size_t k = 0; k < tv.ap.size(); ++k) {
            tv.normalized[k] = static_cast<double>(tv.ap[k])
                               / (2.0 * std::sqrt(static_cast<double>(data.primes.primes[k])));
        }
        data.slice.records.push_back(std::move(rec));
        data.slice.features.push_back(std::move(tv));
    }
    attach_labels(data.slice);
    double lo = 0.0, hi = 0.0;
    if (!data.slice.records.empty()) {
        lo = hi = static_cast<double>(data.slice.records.front().conductor);
        for (const CurveRecord& rec : data.slice.records) {
            lo = std::min(lo, static_cast<double>(rec.conductor));
            hi = std::max(hi, static_cast<double>(rec.conductor));
        }
    }
    data.slice.interval = {lo, hi};
    return data;
}

SyntheticBatch sample_sato_tate(std::size_t count, const PrimeTable& primes,
                                std::uint64_t seed) {
    if (count < 1) {
        throw std::invalid_argument("sample_sato_tate: count must be >= 1");
    }
    SyntheticBatch batch;
    batch.count = count;
    batch.bound = primes.bound;
    batch.width = primes.count();
    batch.seed = seed;
    batch.values.resize(count * batch.width);
    std::mt19937_64 rng(seed);
    // Rejection from the box [-1,1] x [0,1]: accept t when u < sqrt(1-t^2),
    // which reproduces the semicircle density. Acceptance rate pi/4.
    for (double& value : batch.values) {
        while (true) {
            const double t = 2.0 * uniform01(rng) - 1.0;
            const double u = uniform01(rng);
            if (u * u < 1.0 - t * t) {
                value = t;
                break;
            }
        }
    }
    return batch;
}

void synth_write(const SyntheticBatch& batch, const PrimeTable& primes,
                 const std::filesystem::path& path) {
    if (batch.width != primes.count()) {
        throw DataError("synth_write: batch width does not match prime table");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    out.write(kSynthMagic, 4);
    write_le<std::uint16_t>(out, kCacheVersion);
    write_prime_header(out, primes);
    write_le<std::uint64_t>(out, batch.seed);
    write_le<std::uint64_t>(out, batch.count);
    out.write(reinterpret_cast<const char*>(batch.values.data()),
              static_cast<std::streamsize>(batch.values.size() * sizeof(double)));
    if (!out) {
        throw DataError("write failed for " + path.string());
    }
}

SyntheticBatch synth_read(const std::filesystem::path& path, PrimeTable* primes_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    check_magic_version(in, kSynthMagic, "synthetic");
    PrimeTable primes = read_prime_header(in);
    SyntheticBatch batch;
    batch.bound = primes.bound;
    batch.width = primes.count();
    batch.seed = read_le<std::uint64_t>(in, "seed");
    batch.count = read_le<std::uint64_t>(in, "count");
    // cross-check the declared payload against what is actually on disk
    const auto payload_start = in.tellg();
    in.seekg(0, std::ios::end);
    const auto file_end = in.tellg();
    in.seekg(payload_start);
    const std::uint64_t remaining = static_cast<std::uint64_t>(file_end - payload_start);
    const std::uint64_t row_bytes = batch.width * sizeof(double);
    if (row_bytes != 0
        && (remaining % row_bytes != 0 || remaining / row_bytes != batch.count)) {
        throw DataError(path.string() + ": payload size does not match declared count "
                        + std::to_string(batch.count) + " (corrupt or truncated)");
    }
    batch.values.resize(batch.count * batch.width);
    in.read(reinterpret_cast<char*>(batch.values.data()),
            static_cast<std::streamsize>(batch.values.size() * sizeof(double)));
    if (!in) {
        throw DataError("cache truncated while reading synthetic values");
    }
    if (primes_out) {
        *primes_out = std::move(primes);
    }
    return batch;
}

std::string cache_kind(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    if (!in) {
        throw DataError(path.string() + ": too short to be a cache file");
    }
    if (std::memcmp(magic, kCurveMagic, 4) == 0) {
        return "APQV";
    }
    if (std::memcmp(magic, kSynthMagic, 4) == 0) {
        return "APQS";
    }
    throw DataError(path.string() + ": unknown cache magic");
}

std::string file_fingerprint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << h;
    return hex.str();
}

} // namespace ecrank
