#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecrank/dataset.hpp"
#include "ecrank/nn.hpp"
#include "ecrank/numtheory.hpp"
#include "ecrank/training.hpp"

namespace ecrank {

enum class SaliencyKind { averaged_abs, class_signed };

/// Saliency over primes p <= b: absolute scores averaged over the whole test
/// set, or signed per-predicted-class means. Normalization divides by the
/// max (absolute) entry, so the peak is exactly 1.
struct SaliencyCurve {
    SaliencyKind kind = SaliencyKind::averaged_abs;
    int class_v = -1; // class_signed only
    int epoch = 0;
    std::int64_t step = 0;
    std::vector<double> scores;
    std::vector<double> normalized;
};

struct MurmurationSeries {
    int group = 0;
    std::vector<double> x;       // prime, or window midpoint when binned
    std::vector<double> mean_ap; // unnormalized
    std::vector<std::size_t> count;
    std::size_t group_size = 0;
};

struct MestreNagaoWeights {
    std::uint64_t bound = 0;
    double prefactor = 0.0;           // 2 / log b
    std::vector<double> weights;      // log(p) / sqrt(p) per prime p <= b
};

/// w^v(x_E): gradient of the raw class-v score at the curve's feature vector.
std::vector<double> saliency_per_curve(const CnnModel& model,
                                       std::span<const double> features, int v);

/// w_p = mean over the test set of |w_p^{c(E)}(E)|, each curve contributing
/// its own predicted class; normalized to peak 1.
SaliencyCurve averaged_saliency(const CnnModel& model, const DatasetSlice& test_slice,
                                const EvalResult& eval_res);

/// W_p^v = signed mean of w_p^v over curves predicted v; normalized by
/// max |W^v|. Empty class -> nullopt (the "no curve predicted v" marker).
std::optional<SaliencyCurve> class_saliency(const CnnModel& model,
                                            const DatasetSlice& test_slice,
                                            const EvalResult& eval_res, int v);

MestreNagaoWeights mn_weights(std::uint64_t b, const PrimeTable& primes);

/// Mestre-Nagao sum (1/log b) * sum_{p<=b} (log p / p) a_p from the integer
/// traces. Requires b <= trace.bound.
double mn_sum(const TraceVector& trace, std::uint64_t b, const PrimeTable& primes);

/// Algebraically equal form (2/log b) * sum (log p / sqrt p) a~_p computed
/// from the normalized entries; kept separate as the cross-check route.
double mn_sum_normalized(const TraceVector& trace, std::uint64_t b,
                         const PrimeTable& primes);

/// Rows of unnormalized a_p for murmuration averaging: real curve features
/// use the integer traces, synthetic rows are scaled back by 2 sqrt p.
class ApMatrixView {
public:
    explicit ApMatrixView(std::span<const TraceVector> features);
    ApMatrixView(const SyntheticBatch& batch, const PrimeTable& primes);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double ap(std::size_t row, std::size_t col) const;

private:
    std::span<const TraceVector> features_;
    const SyntheticBatch* batch_ = nullptr;
    std::vector<double> two_sqrt_p_;
    std::size_t rows_ = 0, cols_ = 0;
};

/// Mean unnormalized a_p per prime (or per prime window of width bin_width)
/// within each predicted-class group. Empty groups are skipped; their ids
/// are reported in `empty_groups`.
struct MurmurationResult {
    std::vector<MurmurationSeries> series;
    std::vector<int> empty_groups;
};
MurmurationResult murmuration_average(const ApMatrixView& data,
                                      std::span<const int> groups, int num_groups,
                                      const PrimeTable& primes,
                                      std::optional<double> bin_width = std::nullopt);

/// Class-saliency grid across checkpoints (entry per epoch x nonempty class).
struct TimelineEntry {
    int epochs_completed = 0;
    std::int64_t global_step = 0;
    std::vector<SaliencyCurve> curves;  // nonempty classes only
    std::vector<int> empty_classes;
};
struct TimelineResult {
    std::vector<TimelineEntry> entries;
    std::vector<std::string> missing_checkpoints;
};
TimelineResult saliency_timeline(std::span<const std::filesystem::path> checkpoints,
                                 const DatasetSlice& test_slice);

} // namespace ecrank
