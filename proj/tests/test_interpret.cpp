#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "ecrank/errors.hpp"
#include "ecrank/interpret.hpp"
#include "ecrank/rng.hpp"
#include "oracle.hpp"

using namespace ecrank;
namespace fs = std::filesystem;

namespace {

DatasetSlice random_slice(int n, int width, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    DatasetSlice slice;
    for (int i = 0; i < n; ++i) {
        CurveRecord rec;
        rec.label = "r" + std::to_string(i);
        rec.conductor = 1;
        rec.rank = static_cast<int>(rng() % 5);
        slice.records.push_back(rec);
        TraceVector tv;
        tv.curve_label = rec.label;
        tv.bound = 100;
        tv.ap.resize(width, 0);
        tv.normalized.resize(width);
        for (double& v : tv.normalized) {
            v = 2.0 * uniform01(rng) - 1.0;
        }
        slice.features.push_back(std::move(tv));
        slice.labels.push_back(rec.rank);
    }
    return slice;
}

CnnModel random_model(int width, std::uint64_t seed) {
    ArchConfig cfg;
    cfg.input_length = width;
    cfg.conv_channels = {4, 4, 4};
    cfg.fc_widths = {8, 8};
    cfg.num_classes = 5;
    CnnModel model(cfg);
    model.init_params(seed);
    model.set_mode(Mode::eval);
    return model;
}

} // namespace

TEST_CASE("saliency_per_curve matches finite differences of S_v") {
    const int width = 25;
    const CnnModel model = random_model(width, 3);
    const DatasetSlice slice = random_slice(4, width, 5);
    for (int v = 0; v < 5; ++v) {
        const auto& x = slice.features[0].normalized;
        const std::vector<double> w = saliency_per_curve(model, x, v);
        REQUIRE(w.size() == static_cast<std::size_t>(width));
        for (int i = 0; i < width; ++i) {
            const double fd = oracle::central_diff(
                [&](const std::vector<double>& xv) {
                    return model.forward_scores(xv).scores[v];
                },
                x, static_cast<std::size_t>(i));
            CHECK(oracle::grad_match(w[i], fd));
        }
    }
}

TEST_CASE("averaged saliency: normalization peak is exactly 1") {
    const int width = 25;
    const CnnModel model = random_model(width, 11);
    const DatasetSlice slice = random_slice(30, width, 13);
    const EvalResult ev = evaluate(model, slice);
    const SaliencyCurve curve = averaged_saliency(model, slice, ev);
    REQUIRE(curve.scores.size() == static_cast<std::size_t>(width));
    double peak = 0.0;
    for (std::size_t i = 0; i < curve.normalized.size(); ++i) {
        CHECK(curve.scores[i] >= 0.0);
        CHECK(curve.normalized[i] >= 0.0);
        peak = std::max(peak, curve.normalized[i]);
    }
    CHECK(peak == 1.0);
}

TEST_CASE("averaged saliency equals the plain mean of |w^{c(E)}| over the test set") {
    const int width = 25;
    const CnnModel model = random_model(width, 17);
    const DatasetSlice slice = random_slice(12, width, 19);
    const EvalResult ev = evaluate(model, slice);
    const SaliencyCurve curve = averaged_saliency(model, slice, ev);
    // brute-force second pass, in test-set order
    std::vector<double> expect(width, 0.0);
    for (std::size_t i = 0; i < slice.size(); ++i) {
        const auto w =
            model.input_gradient(slice.features[i].normalized, ev.predicted[i]);
        for (int k = 0; k < width; ++k) {
            expect[k] += std::abs(w[k]);
        }
    }
    for (int k = 0; k < width; ++k) {
        expect[k] /= static_cast<double>(slice.size());
        CHECK(curve.scores[k] == doctest::Approx(expect[k]).epsilon(1e-12));
    }
}

TEST_CASE("averaged saliency is invariant under test-set reordering") {
    const int width = 25;
    const CnnModel model = random_model(width, 23);
    DatasetSlice slice = random_slice(15, width, 29);
    const EvalResult ev1 = evaluate(model, slice);
    const SaliencyCurve c1 = averaged_saliency(model, slice, ev1);

    DatasetSlice reversed;
    reversed.interval = slice.interval;
    for (std::size_t i = slice.size(); i-- > 0;) {
        reversed.records.push_back(slice.records[i]);
        reversed.features.push_back(slice.features[i]);
        reversed.labels.push_back(slice.labels[i]);
    }
    const EvalResult ev2 = evaluate(model, reversed);
    const SaliencyCurve c2 = averaged_saliency(model, reversed, ev2);
    for (int k = 0; k < width; ++k) {
        CHECK(c1.scores[k] == doctest::Approx(c2.scores[k]).epsilon(1e-12));
    }
}

TEST_CASE("single-curve test set degenerates to |w^{c(E)}|") {
    const int width = 25;
    const CnnModel model = random_model(width, 31);
    const DatasetSlice slice = random_slice(1, width, 37);
    const EvalResult ev = evaluate(model, slice);
    const SaliencyCurve curve = averaged_saliency(model, slice, ev);
    const auto w = model.input_gradient(slice.features[0].normalized, ev.predicted[0]);
    for (int k = 0; k < width; ++k) {
        CHECK(curve.scores[k] == doctest::Approx(std::abs(w[k])).epsilon(1e-12));
    }
}

TEST_CASE("class saliency: signed mean, peak |normalized| = 1, empty marker") {
    const int width = 25;
    const CnnModel model = random_model(width, 41);
    const DatasetSlice slice = random_slice(40, width, 43);
    const EvalResult ev = evaluate(model, slice);
    bool saw_nonempty = false, saw_empty = false;
    for (int v = 0; v < 5; ++v) {
        const auto curve = class_saliency(model, slice, ev, v);
        if (!curve) {
            CHECK(ev.partition[v].empty());
            saw_empty = true;
            continue;
        }
        saw_nonempty = true;
        double peak = 0.0;
        for (const double value : curve->normalized) {
            CHECK(value >= -1.0);
            CHECK(value <= 1.0);
            peak = std::max(peak, std::abs(value));
        }
        CHECK(peak == 1.0);
        // brute-force signed mean
        std::vector<double> expect(width, 0.0);
        for (const std::size_t i : ev.partition[v]) {
            const auto w = model.input_gradient(slice.features[i].normalized, v);
            for (int k = 0; k < width; ++k) {
                expect[k] += w[k];
            }
        }
        for (int k = 0; k < width; ++k) {
            expect[k] /= static_cast<double>(ev.partition[v].size());
            CHECK(curve->scores[k] == doctest::Approx(expect[k]).epsilon(1e-12));
        }
    }
    CHECK(saw_nonempty);
    (void)saw_empty; // not guaranteed for a random model, asserted via partition above
}

TEST_CASE("positive head rescaling changes neither predictions nor normalized curves") {
    const int width = 25;
    CnnModel model = random_model(width, 47);
    const DatasetSlice slice = random_slice(25, width, 53);
    const EvalResult ev1 = evaluate(model, slice);
    const SaliencyCurve avg1 = averaged_saliency(model, slice, ev1);
    std::vector<SaliencyCurve> cls1;
    for (int v = 0; v < 5; ++v) {
        const auto c = class_saliency(model, slice, ev1, v);
        if (c) {
            cls1.push_back(*c);
        }
    }

    const double alpha = 3.7;
    for (double& w : model.blocks()[10].value) { // fc3.weight
        w *= alpha;
    }
    for (double& b : model.blocks()[11].value) { // fc3.bias
        b *= alpha;
    }
    const EvalResult ev2 = evaluate(model, slice);
    CHECK(ev2.predicted == ev1.predicted);
    const SaliencyCurve avg2 = averaged_saliency(model, slice, ev2);
    for (int k = 0; k < width; ++k) {
        CHECK(std::abs(avg1.normalized[k] - avg2.normalized[k]) < 1e-12);
    }
    std::size_t idx = 0;
    for (int v = 0; v < 5; ++v) {
        const auto c = class_saliency(model, slice, ev2, v);
        if (!c) {
            continue;
        }
        REQUIRE(idx < cls1.size());
        for (int k = 0; k < width; ++k) {
            CHECK(std::abs(cls1[idx].normalized[k] - c->normalized[k]) < 1e-12);
        }
        ++idx;
    }
    CHECK(idx == cls1.size());
}

TEST_CASE("mn_weights values") {
    const PrimeTable primes = primes_up_to(100);
    const MestreNagaoWeights w = mn_weights(100, primes);
    CHECK(w.weights.size() == 25);
    CHECK(w.weights[0] == doctest::Approx(std::log(2.0) / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(w.prefactor == doctest::Approx(2.0 / std::log(100.0)).epsilon(1e-15));
    for (const double value : w.weights) {
        CHECK(value > 0.0);
    }
    CHECK_THROWS_AS(static_cast<void>(mn_weights(1, primes)), std::invalid_argument);
}

TEST_CASE("mn_sum small cases") {
    const PrimeTable primes = primes_up_to(3);
    TraceVector tv;
    tv.curve_label = "x";
    tv.bound = 3;
    tv.ap = {1, 0};
    tv.normalized = {1.0 / (2.0 * std::sqrt(2.0)), 0.0};
    const double expect = (std::log(2.0) / 2.0) / std::log(3.0);
    CHECK(mn_sum(tv, 3, primes) == doctest::Approx(expect).epsilon(1e-15));
    CHECK(mn_sum(tv, 3, primes) == doctest::Approx(0.31546).epsilon(1e-4));

    TraceVector zero = tv;
    zero.ap = {0, 0};
    zero.normalized = {0.0, 0.0};
    CHECK(mn_sum(zero, 3, primes) == 0.0);
}

TEST_CASE("mn_sum raw and normalized routes agree to 1e-12") {
    std::mt19937_64 rng(59);
    const PrimeTable primes = primes_up_to(10000);
    for (int trial = 0; trial < 100; ++trial) {
        TraceVector tv;
        tv.curve_label = "rand";
        tv.bound = 10000;
        tv.ap.resize(primes.count());
        tv.normalized.resize(primes.count());
        for (std::size_t i = 0; i < primes.count(); ++i) {
            const double bound = 2.0 * std::sqrt(static_cast<double>(primes.primes[i]));
            const auto max_ap = static_cast<std::int64_t>(std::floor(bound));
            const std::int64_t ap =
                static_cast<std::int64_t>(uniform_below(rng, 2 * max_ap + 1)) - max_ap;
            tv.ap[i] = static_cast<std::int16_t>(ap);
            tv.normalized[i] = static_cast<double>(ap) / bound;
        }
        const double raw = mn_sum(tv, 10000, primes);
        const double norm = mn_sum_normalized(tv, 10000, primes);
        CHECK(std::abs(raw - norm) < 1e-12);
    }
}

TEST_CASE("mn_sum on 11a1 at b=10000 equals direct summation") {
    const PrimeTable primes = primes_up_to(10000);
    const CurveRecord curve{"11a1", {0, -1, 1, -10, -20}, 11, 0};
    const TraceVector tv = trace_vector(curve, primes);
    double direct = 0.0;
    for (std::size_t i = 0; i < primes.count(); ++i) {
        const double p = primes.primes[i];
        direct += std::log(p) / p * static_cast<double>(tv.ap[i]);
    }
    direct /= std::log(10000.0);
    CHECK(mn_sum(tv, 10000, primes) == doctest::Approx(direct).epsilon(1e-15));
}

TEST_CASE("murmuration averages: degenerate and identical groups") {
    const PrimeTable primes = primes_up_to(30);
    const CurveRecord curve{"11a1", {0, -1, 1, -10, -20}, 11, 0};
    std::vector<TraceVector> features{trace_vector(curve, primes),
                                      trace_vector(curve, primes)};
    const ApMatrixView view(features);

    // one group with a single member reproduces the curve's a_p
    const std::vector<int> one_group{0, 1};
    const MurmurationResult res = murmuration_average(view, one_group, 2, primes);
    REQUIRE(res.series.size() == 2);
    for (std::size_t k = 0; k < features[0].ap.size(); ++k) {
        CHECK(res.series[0].mean_ap[k] == static_cast<double>(features[0].ap[k]));
        CHECK(res.series[0].mean_ap[k] == res.series[1].mean_ap[k]);
    }

    // empty group is skipped with a marker
    const std::vector<int> gap_groups{0, 0};
    const MurmurationResult gap = murmuration_average(view, gap_groups, 3, primes);
    CHECK(gap.series.size() == 1);
    CHECK(gap.empty_groups == std::vector<int>{1, 2});
}

TEST_CASE("murmuration binning averages within prime windows") {
    const PrimeTable primes = primes_up_to(30); // 2 3 5 7 | 11 13 17 19 | 23 29
    const CurveRecord curve{"11a1", {0, -1, 1, -10, -20}, 11, 0};
    std::vector<TraceVector> features{trace_vector(curve, primes)};
    const ApMatrixView view(features);
    const std::vector<int> groups{0};
    const MurmurationResult res = murmuration_average(view, groups, 1, primes, 10.0);
    REQUIRE(res.series.size() == 1);
    const MurmurationSeries& s = res.series[0];
    REQUIRE(s.x.size() == 3);
    CHECK(s.x[0] == 5.0);
    CHECK(s.x[1] == 15.0);
    CHECK(s.x[2] == 25.0);
    const auto& ap = features[0].ap;
    CHECK(s.mean_ap[0]
          == doctest::Approx((ap[0] + ap[1] + ap[2] + ap[3]) / 4.0).epsilon(1e-15));
    CHECK(s.mean_ap[1]
          == doctest::Approx((ap[4] + ap[5] + ap[6] + ap[7]) / 4.0).epsilon(1e-15));
    CHECK(s.mean_ap[2] == doctest::Approx((ap[8] + ap[9]) / 2.0).epsilon(1e-15));
}

TEST_CASE("synthetic rows unnormalize by 2 sqrt p") {
    const PrimeTable primes = primes_up_to(10);
    SyntheticBatch batch;
    batch.count = 1;
    batch.bound = 10;
    batch.width = 4;
    batch.seed = 0;
    batch.values = {0.5, -0.25, 1.0, 0.0};
    const ApMatrixView view(batch, primes);
    CHECK(view.ap(0, 0) == doctest::Approx(0.5 * 2 * std::sqrt(2.0)).epsilon(1e-15));
    CHECK(view.ap(0, 1) == doctest::Approx(-0.25 * 2 * std::sqrt(3.0)).epsilon(1e-15));
    CHECK(view.ap(0, 2) == doctest::Approx(2 * std::sqrt(5.0)).epsilon(1e-15));
    CHECK(view.ap(0, 3) == 0.0);
}

TEST_CASE("saliency timeline emits per-checkpoint grids and records gaps") {
    const int width = 25;
    const DatasetSlice slice = random_slice(20, width, 61);
    const fs::path dir = fs::temp_directory_path() / "ecrank_timeline";
    fs::create_directories(dir);

    std::vector<fs::path> paths;
    for (int e = 0; e < 2; ++e) {
        CnnModel model = random_model(width, 100 + e);
        const fs::path p = dir / ("ck" + std::to_string(e) + ".eckp");
        model.save_checkpoint(p, 1, e, 10 * e, nlohmann::json::object());
        paths.push_back(p);
    }
    paths.push_back(dir / "missing.eckp");

    const TimelineResult tl = saliency_timeline(paths, slice);
    CHECK(tl.entries.size() == 2);
    CHECK(tl.missing_checkpoints.size() == 1);
    for (const TimelineEntry& entry : tl.entries) {
        CHECK(entry.curves.size() + entry.empty_classes.size() == 5);
        for (const SaliencyCurve& curve : entry.curves) {
            double peak = 0.0;
            for (const double value : curve.normalized) {
                peak = std::max(peak, std::abs(value));
            }
            CHECK(peak == 1.0);
        }
    }
    fs::remove_all(dir);
}
