#include "ecrank/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ecrank/errors.hpp"

namespace ecrank {

std::vector<double> saliency_per_curve(const CnnModel& model,
                                       std::span<const double> features, int v) {
    return model.input_gradient(features, v);
}

namespace {

// Sum of per-curve gradient vectors over `members`, parallelized over fixed
// 256-member chunks whose partial sums are combined in chunk order. The
// reduction tree does not depend on the thread count, so results are
// bit-identical for any number of workers.
std::vector<double> sum_gradients(const CnnModel& model, const DatasetSlice& slice,
                                  const std::vector<std::size_t>& members,
                                  const std::vector<int>& class_of, bool take_abs) {
    const std::size_t width = slice.features.front().normalized.size();
    constexpr std::size_t kChunk = 256;
    const std::size_t n_chunks = (members.size() + kChunk - 1) / kChunk;
    std::vector<std::vector<double>> partials(n_chunks);
#pragma omp parallel for schedule(dynamic) if (members.size() > 32)
    for (std::size_t c = 0; c < n_chunks; ++c) {
        std::vector<double> acc(width, 0.0);
        const std::size_t hi = std::min(members.size(), (c + 1) * kChunk);
        for (std::size_t m = c * kChunk; m < hi; ++m) {
            const std::size_t i = members[m];
            const std::vector<double> w =
                model.input_gradient(slice.features[i].normalized, class_of[m]);
            if (take_abs) {
                for (std::size_t p = 0; p < width; ++p) {
                    acc[p] += std::abs(w[p]);
                }
            } else {
                for (std::size_t p = 0; p < width; ++p) {
                    acc[p] += w[p];
                }
            }
        }
        partials[c] = std::move(acc);
    }
    std::vector<double> total(width, 0.0);
    for (const std::vector<double>& acc : partials) {
        for (std::size_t p = 0; p < width; ++p) {
            total[p] += acc[p];
        }
    }
    return total;
}

void normalize_by_peak(SaliencyCurve& curve) {
    double peak = 0.0;
    for (const double s : curve.scores) {
        peak = std::max(peak, std::abs(s));
    }
    curve.normalized.resize(curve.scores.size());
    if (peak == 0.0) {
        std::fill(curve.normalized.begin(), curve.normalized.end(), 0.0);
        return;
    }
    for (std::size_t i = 0; i < curve.scores.size(); ++i) {
        curve.normalized[i] = curve.scores[i] / peak;
    }
}

} // namespace

SaliencyCurve averaged_saliency(const CnnModel& model, const DatasetSlice& test_slice,
                                const EvalResult& eval_res) {
    const std::size_t n = test_slice.size();
    if (n == 0) {
        throw DataError("averaged_saliency: empty test set");
    }
    SaliencyCurve curve;
    curve.kind = SaliencyKind::averaged_abs;
    // Sum over classes of sums over curves predicted that class; each curve
    // appears once, under its own predicted class.
    std::vector<std::size_t> members(n);
    std::iota(members.begin(), members.end(), std::size_t{0});
    curve.scores = sum_gradients(model, test_slice, members, eval_res.predicted, true);
    for (double& s : curve.scores) {
        s /= static_cast<double>(n);
    }
    normalize_by_peak(curve);
    return curve;
}

std::optional<SaliencyCurve> class_saliency(const CnnModel& model,
                                            const DatasetSlice& test_slice,
                                            const EvalResult& eval_res, int v) {
    if (v < 0 || v >= static_cast<int>(eval_res.partition.size())) {
        throw std::invalid_argument("class_saliency: class out of range");
    }
    const auto& members = eval_res.partition[v];
    if (members.empty()) {
        return std::nullopt; // no curve predicted v
    }
    SaliencyCurve curve;
    curve.kind = SaliencyKind::class_signed;
    curve.class_v = v;
    const std::vector<int> class_of(members.size(), v);
    curve.scores = sum_gradients(model, test_slice, members, class_of, false);
    for (double& s : curve.scores) {
        s /= static_cast<double>(members.size());
    }
    normalize_by_peak(curve);
    return curve;
}

MestreNagaoWeights mn_weights(std::uint64_t b, const PrimeTable& primes) {
    if (b < 2) {
        throw std::invalid_argument("mn_weights: bound must be >= 2");
    }
    MestreNagaoWeights w;
    w.bound = b;
    w.prefactor = 2.0 / std::log(static_cast<double>(b));
    for (const std::uint32_t p : primes.primes) {
        if (p > b) {
            break;
        }
        const double pd = static_cast<double>(p);
        w.weights.push_back(std::log(pd) / std::sqrt(pd));
    }
    return w;
}

double mn_sum(const TraceVector& trace, std::uint64_t b, const PrimeTable& primes) {
    if (b < 2) {
        throw std::invalid_argument("mn_sum: bound must be >= 2");
    }
    if (b > trace.bound) {
        throw std::invalid_argument("mn_sum: bound exceeds trace bound");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < primes.count() && i < trace.ap.size(); ++i) {
        const std::uint32_t p = primes.primes[i];
        if (p > b) {
            break;
        }
        const double pd = static_cast<double>(p);
        sum += std::log(pd) / pd * static_cast<double>(trace.ap[i]);
    }
    return sum / std::log(static_cast<double>(b));
}

double mn_sum_normalized(const TraceVector& trace, std::uint64_t b,
                         const PrimeTable& primes) {
    if (b < 2) {
        throw std::invalid_argument("mn_sum_normalized: bound must be >= 2");
    }
    if (b > trace.bound) {
        throw std::invalid_argument("mn_sum_normalized: bound exceeds trace bound");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < primes.count() && i < trace.normalized.size(); ++i) {
        const std::uint32_t p = primes.primes[i];
        if (p > b) {
            break;
        }
        const double pd = static_cast<double>(p);
        sum += std::log(pd) / std::sqrt(pd) * trace.normalized[i];
    }
    return 2.0 / std::log(static_cast<double>(b)) * sum;
}

ApMatrixView::ApMatrixView(std::span<const TraceVector> features) : features_(features) {
    rows_ = features.size();
    cols_ = features.empty() ? 0 : features.front().ap.size();
}

ApMatrixView::ApMatrixView(const SyntheticBatch& batch, const PrimeTable& primes)
    : batch_(&batch) {
    rows_ = batch.count;
    cols_ = batch.width;
    two_sqrt_p_.resize(primes.count());
    for (std::size_t i = 0; i < primes.count(); ++i) {
        two_sqrt_p_[i] = 2.0 * std::sqrt(static_cast<double>(primes.primes[i]));
    }
}

double ApMatrixView::ap(std::size_t row, std::size_t col) const {
    if (batch_) {
        return batch_->values[row * cols_ + col] * two_sqrt_p_[col];
    }
    return static_cast<double>(features_[row].ap[col]);
}

MurmurationResult murmuration_average(const ApMatrixView& data,
                                      std::span<const int> groups, int num_groups,
                                      const PrimeTable& primes,
                                      std::optional<double> bin_width) {
    if (groups.size() != data.rows()) {
        throw std::invalid_argument("murmuration_average: group list size mismatch");
    }
    MurmurationResult result;
    for (int v = 0; v < num_groups; ++v) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < groups.size(); ++i) {
            if (groups[i] == v) {
                members.push_back(i);
            }
        }
        if (members.empty()) {
            result.empty_groups.push_back(v);
            continue;
        }
        MurmurationSeries series;
        series.group = v;
        series.group_size = members.size();
        if (!bin_width) {
            for (std::size_t col = 0; col < data.cols(); ++col) {
                double sum = 0.0;
                for (const std::size_t i : members) {
                    sum += data.ap(i, col);
                }
                series.x.push_back(static_cast<double>(primes.primes[col]));
                series.mean_ap.push_back(sum / static_cast<double>(members.size()));
                series.count.push_back(members.size());
            }
        } else {
            const double w = *bin_width;
            if (!(w > 0.0)) {
                throw std::invalid_argument("murmuration_average: bin width must be > 0");
            }
            std::size_t col = 0;
            while (col < data.cols()) {
                const double bin_lo =
                    std::floor(static_cast<double>(primes.primes[col]) / w) * w;
                const double bin_hi = bin_lo + w;
                double sum = 0.0;
                std::size_t n_terms = 0;
                while (col < data.cols() && static_cast<double>(primes.primes[col]) < bin_hi) {
                    for (const std::size_t i : members) {
                        sum += data.ap(i, col);
                    }
                    n_terms += members.size();
                    ++col;
                }
                series.x.push_back(bin_lo + w / 2.0);
                series.mean_ap.push_back(sum / static_cast<double>(n_terms));
                series.count.push_back(n_terms);
            }
        }
        result.series.push_back(std::move(series));
    }
    return result;
}

TimelineResult saliency_timeline(std::span<const std::filesystem::path> checkpoints,
                                 const DatasetSlice& test_slice) {
    TimelineResult result;
    for (const std::filesystem::path& path : checkpoints) {
        if (!std::filesystem::exists(path)) {
            result.missing_checkpoints.push_back(path.string());
            continue;
        }
        Checkpoint ck = load_checkpoint(path);
        const EvalResult eval_res = evaluate(ck.model, test_slice);
        TimelineEntry entry;
        entry.epochs_completed = ck.epochs_completed;
        entry.global_step = ck.global_step;
        for (int v = 0; v < ck.model.config().num_classes; ++v) {
            auto curve = class_saliency(ck.model, test_slice, eval_res, v);
            if (curve) {
                curve->epoch = ck.epochs_completed;
                curve->step = ck.global_step;
                entry.curves.push_back(std::move(*curve));
            } else {
                entry.empty_classes.push_back(v);
            }
        }
        result.entries.push_back(std::move(entry));
    }
    return result;
}

} // namespace ecrank
