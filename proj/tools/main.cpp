// ecrank: end-to-end pipeline for rank prediction from Frobenius traces.
// Subcommands cover ingestion, trace tables, training, evaluation, saliency
// and murmuration reports, Mestre-Nagao sums, synthetic data, and the
// accuracy-vs-primes sweep. Exit codes: 0 ok, 2 usage, 3 data, 4 numeric.

#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecrank/curve.hpp"
#include "ecrank/dataset.hpp"
#include "ecrank/errors.hpp"
#include "ecrank/interpret.hpp"
#include "ecrank/nn.hpp"
#include "ecrank/numtheory.hpp"
#include "ecrank/rng.hpp"
#include "ecrank/svgplot.hpp"
#include "ecrank/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ecrank;

namespace {

// Files created by the running subcommand; removed unless committed, so a
// failed run leaves no partial outputs behind.
class OutputGuard {
public:
    ~OutputGuard() {
        if (committed_) {
            return;
        }
        std::error_code ec;
        for (auto it = files_.rbegin(); it != files_.rend(); ++it) {
            fs::remove(*it, ec);
        }
    }
    fs::path track(const fs::path& p) {
        files_.push_back(p);
        return p;
    }
    void commit() { committed_ = true; }

private:
    std::vector<fs::path> files_;
    bool committed_ = false;
};

// One writer per output directory, via an exclusively created lock file.
class DirLock {
public:
    explicit DirLock(const fs::path& dir) : lock_(dir / ".lock") {
        fs::create_directories(dir);
        const int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            throw DataError("output directory " + dir.string()
                            + " is locked by another writer (remove " + lock_.string()
                            + " if stale)");
        }
        ::close(fd);
    }
    ~DirLock() {
        std::error_code ec;
        fs::remove(lock_, ec);
    }

private:
    fs::path lock_;
};

// Bare filenames resolve against ECRANK_CACHE_DIR when it is set.
fs::path resolve_cache_path(const std::string& p) {
    const fs::path path(p);
    if (!path.has_parent_path()) {
        if (const char* dir = std::getenv("ECRANK_CACHE_DIR")) {
            return fs::path(dir) / path;
        }
    }
    return path;
}

void write_run_manifest(const fs::path& path, const std::string& subcommand,
                        const json& flags, const std::vector<fs::path>& inputs,
                        const std::vector<fs::path>& outputs, std::uint64_t seed,
                        OutputGuard& guard) {
    json inputs_json = json::array();
    for (const fs::path& in : inputs) {
        inputs_json.push_back(json{{"path", in.string()}, {"fingerprint", file_fingerprint(in)}});
    }
    json outputs_json = json::array();
    for (const fs::path& out : outputs) {
        outputs_json.push_back(out.string());
    }
    const json manifest{{"subcommand", subcommand},
                        {"flags", flags},
                        {"inputs", inputs_json},
                        {"outputs", outputs_json},
                        {"seed", seed}};
    std::ofstream out(guard.track(path), std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << manifest.dump(2) << '\n';
}

std::array<std::int64_t, 5> parse_curve_flag(const std::string& text) {
    std::array<std::int64_t, 5> a{};
    std::stringstream ss(text);
    std::string field;
    int i = 0;
    while (std::getline(ss, field, ',')) {
        if (i >= 5) {
            throw DataError("--curve expects exactly 5 comma-separated integers");
        }
        a[i++] = std::stoll(field);
    }
    if (i != 5) {
        throw DataError("--curve expects exactly 5 comma-separated integers");
    }
    return a;
}

std::pair<double, double> parse_interval_flag(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) {
        throw DataError("--interval expects A,B");
    }
    const double a = std::stod(text.substr(0, comma));
    const double b = std::stod(text.substr(comma + 1));
    return {a, b};
}

std::string fmtd(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t bound_for_length(const PrimeTable& primes, std::size_t length) {
    if (length == 0 || length > primes.count()) {
        throw DataError("requested feature length " + std::to_string(length)
                        + " incompatible with cache bound "
                        + std::to_string(primes.bound));
    }
    return primes.primes[length - 1];
}

DatasetSlice filter_with_features(const CacheData& cache, double A, double B) {
    DatasetSlice slice;
    slice.interval = {A, B};
    for (std::size_t i = 0; i < cache.slice.size(); ++i) {
        const double n = static_cast<double>(cache.slice.records[i].conductor);
        if (n >= A && n <= B) {
            slice.records.push_back(cache.slice.records[i]);
            slice.features.push_back(cache.slice.features[i]);
            slice.labels.push_back(cache.slice.records[i].rank);
        }
    }
    return slice;
}

// Reconstructs the test slice a model was trained against, from the
// provenance block the trainer stored in its checkpoints.
DatasetSlice test_slice_from_meta(const json& meta, const CacheData& cache,
                                  int input_length) {
    const double A = meta.at("interval").at(0).get<double>();
    const double B = meta.at("interval").at(1).get<double>();
    DatasetSlice slice = filter_with_features(cache, A, B);
    const std::uint64_t bound = bound_for_length(cache.primes, input_length);
    slice = truncate_features(slice, bound, cache.primes);
    auto [train_sl, test_sl] = split_train_test(
        slice, SplitSpec{meta.at("split_ratio").get<double>(),
                         meta.at("split_seed").get<std::uint64_t>()});
    (void)train_sl;
    return std::move(test_sl);
}

// --- subcommand implementations -------------------------------------------

int cmd_ingest(const std::string& csv, std::uint64_t bound, const std::string& out) {
    const fs::path csv_path(csv);
    const fs::path out_path = resolve_cache_path(out);
    OutputGuard guard;

    const ParseResult parsed = parse_curve_csv(csv_path);
    if (parsed.rejected_rank_rows > 0) {
        std::cout << "rejected " << parsed.rejected_rank_rows
                  << " rows with rank outside [0,4]\n";
    }
    if (parsed.records.empty()) {
        throw DataError(csv + ": no usable records");
    }
    for (const CurveRecord& rec : parsed.records) {
        validate_record(rec);
    }
    const PrimeTable primes = primes_up_to(bound);
    DatasetSlice slice = filter_interval(parsed.records, 0.0, 1e300);
    slice.features = trace_vectors(slice.records, primes);
    cache_write(slice, primes, guard.track(out_path));
    write_run_manifest(out_path.string() + ".run.json", "ingest",
                       json{{"csv", csv}, {"bound", bound}, {"out", out_path.string()}},
                       {csv_path}, {out_path}, 0, guard);
    guard.commit();
    std::cout << "ingested " << slice.size() << " curves, " << primes.count()
              << " primes (b=" << bound << ") -> " << out_path.string() << '\n';
    return 0;
}

int cmd_ap(const std::string& curve_flag, std::int64_t conductor, std::uint64_t bound) {
    CurveRecord rec;
    rec.label = "cli";
    rec.a = parse_curve_flag(curve_flag);
    rec.conductor = conductor;
    rec.rank = 0;
    validate_record(rec);
    const PrimeTable primes = primes_up_to(bound);
    const TraceVector tv = trace_vector(rec, primes);
    std::cout << "p,a_p,a_p_normalized,reduction\n";
    for (std::size_t i = 0; i < primes.count(); ++i) {
        const std::uint32_t p = primes.primes[i];
        const char* kind = "good";
        if (conductor % p == 0) {
            kind = tv.ap[i] == 0 ? "additive"
                                 : (tv.ap[i] == 1 ? "split" : "nonsplit");
        }
        std::cout << p << ',' << tv.ap[i] << ',' << fmtd(tv.normalized[i]) << ',' << kind
                  << '\n';
    }
    return 0;
}

int cmd_synth(std::size_t count, std::uint64_t bound, std::uint64_t seed,
              const std::string& out) {
    const fs::path out_path = resolve_cache_path(out);
    OutputGuard guard;
    const PrimeTable primes = primes_up_to(bound);
    const SyntheticBatch batch = sample_sato_tate(count, primes, seed);
    synth_write(batch, primes, guard.track(out_path));
    write_run_manifest(out_path.string() + ".run.json", "synth",
                       json{{"count", count},
                            {"bound", bound},
                            {"seed", seed},
                            {"out", out_path.string()}},
                       {}, {out_path}, seed, guard);
    guard.commit();
    std::cout << "wrote " << count << " sequences of width " << primes.count() << " -> "
              << out_path.string() << '\n';
    return 0;
}

struct TrainFlags {
    std::string cache;
    std::string interval = "0,1e300";
    int epochs = 100;
    std::uint64_t seed = 1;
    int classes = 5;
    std::string out;
    int batch = 3000;
    double lr = 1e-3;
    int steps = 10;
    double ratio = 0.8;
    std::uint64_t bound = 0; // 0 = use cache bound
};

int cmd_train(const TrainFlags& f) {
    const fs::path cache_path = resolve_cache_path(f.cache);
    const fs::path out_dir(f.out);
    DirLock lock(out_dir);
    OutputGuard guard;

    const CacheData cache = cache_read(cache_path);
    const auto [A, B] = parse_interval_flag(f.interval);
    DatasetSlice slice = filter_with_features(cache, A, B);
    if (slice.size() == 0) {
        throw DataError("no curves with conductor in [" + std::to_string(A) + ","
                        + std::to_string(B) + "]");
    }
    const std::uint64_t bound = f.bound == 0 ? cache.primes.bound : f.bound;
    slice = truncate_features(slice, bound, cache.primes);

    TrainConfig cfg;
    cfg.batch_size = f.batch;
    cfg.learning_rate = f.lr;
    cfg.steps_per_epoch = f.steps;
    cfg.epochs = f.epochs;
    cfg.seed = f.seed;
    cfg.bound = bound;
    cfg.num_classes = f.classes;

    const std::uint64_t split_seed = derive_seed(f.seed, "split");
    const auto [train_sl, test_sl] = split_train_test(slice, SplitSpec{f.ratio, split_seed});
    std::cout << "training on " << train_sl.size() << " curves, testing on "
              << test_sl.size() << " (features: " << train_sl.features.front().ap.size()
              << " primes)\n";

    const json dataset_info{{"cache", cache_path.string()},
                            {"fingerprint", file_fingerprint(cache_path)},
                            {"interval", json::array({A, B})},
                            {"split_ratio", f.ratio},
                            {"split_seed", split_seed},
                            {"bound", bound}};

    for (int e = 0; e <= f.epochs; ++e) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "checkpoint_ep%04d.eckp", e);
        guard.track(out_dir / buf);
    }
    guard.track(out_dir / "manifest.json");
    guard.track(out_dir / "metrics.csv");

    TrainResult result;
    try {
        result = train(cfg, train_sl, test_sl, out_dir, dataset_info);
    } catch (const TrainAbort& abort) {
        // keep the manifest-up-to-failure, drop other partial outputs
        abort.partial.write(out_dir / "manifest_partial.json");
        std::cerr << "error: " << abort.what() << " (partial manifest in "
                  << (out_dir / "manifest_partial.json").string() << ")\n";
        return 4;
    }

    for (const EpochRecord& e : result.manifest.epochs) {
        std::cout << "epoch " << e.epoch << ": loss " << e.mean_loss << ", test accuracy "
                  << e.test_accuracy << '\n';
    }

    LinePlot plot;
    plot.title = "test accuracy by epoch";
    plot.x_label = "epoch";
    plot.y_label = "accuracy";
    PlotSeries series;
    series.label = "test accuracy";
    series.color = class_color(0);
    for (const EpochRecord& e : result.manifest.epochs) {
        series.x.push_back(e.epoch);
        series.y.push_back(e.test_accuracy);
    }
    plot.series.push_back(std::move(series));
    plot.write(guard.track(out_dir / "accuracy_vs_epoch.svg").string());

    write_run_manifest(out_dir / "run.json", "train",
                       json{{"cache", cache_path.string()},
                            {"interval", f.interval},
                            {"epochs", f.epochs},
                            {"seed", f.seed},
                            {"classes", f.classes},
                            {"batch", f.batch},
                            {"lr", f.lr},
                            {"steps", f.steps},
                            {"ratio", f.ratio},
                            {"bound", bound},
                            {"out", out_dir.string()}},
                       {cache_path}, {out_dir / "manifest.json"}, f.seed, guard);
    guard.commit();
    double best = 0.0;
    for (const EpochRecord& e : result.manifest.epochs) {
        best = std::max(best, e.test_accuracy);
    }
    std::cout << "best observed accuracy: " << best << "\nrun written to "
              << out_dir.string() << '\n';
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& cache_flag) {
    const Checkpoint ck = load_checkpoint(resolve_cache_path(model_path));
    const json meta = json::parse(ck.meta_json);
    const fs::path cache_path = cache_flag.empty()
                                    ? fs::path(meta.at("cache").get<std::string>())
                                    : resolve_cache_path(cache_flag);
    const CacheData cache = cache_read(cache_path);
    const DatasetSlice test_sl =
        test_slice_from_meta(meta, cache, ck.model.config().input_length);
    const EvalResult res = evaluate(ck.model, test_sl);
    std::cout << "test curves: " << test_sl.size() << "\naccuracy: " << fmtd(res.accuracy)
              << "\nconfusion matrix (rows = true rank, cols = predicted):\n";
    for (const auto& row : res.confusion) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            std::cout << (j ? "," : "") << row[j];
        }
        std::cout << '\n';
    }
    return 0;
}

int cmd_mn(const std::string& cache_flag, std::uint64_t bound) {
    const CacheData cache = cache_read(resolve_cache_path(cache_flag));
    const std::uint64_t b = bound == 0 ? cache.primes.bound : bound;
    std::cout << "label,conductor,rank,mn_sum\n";
    for (std::size_t i = 0; i < cache.slice.size(); ++i) {
        const CurveRecord& rec = cache.slice.records[i];
        const double value = mn_sum(cache.slice.features[i], b, cache.primes);
        std::cout << rec.label << ',' << rec.conductor << ',' << rec.rank << ','
                  << fmtd(value) << '\n';
    }
    return 0;
}

int cmd_saliency(const std::string& run_dir_flag, const std::string& out_flag) {
    const fs::path run_dir(run_dir_flag);
    const fs::path out_dir(out_flag);
    const RunManifest manifest = RunManifest::read(run_dir / "manifest.json");
    DirLock lock(out_dir);
    OutputGuard guard;

    const fs::path cache_path(manifest.dataset_info.at("cache").get<std::string>());
    const CacheData cache = cache_read(cache_path);
    const DatasetSlice test_sl = test_slice_from_meta(
        manifest.dataset_info, cache, manifest.config.arch.input_length);

    std::vector<fs::path> checkpoint_paths;
    for (const CheckpointRef& ref : manifest.checkpoints) {
        checkpoint_paths.push_back(run_dir / ref.path);
    }
    const TimelineResult timeline = saliency_timeline(checkpoint_paths, test_sl);
    for (const std::string& missing : timeline.missing_checkpoints) {
        std::cerr << "warning: missing checkpoint " << missing << '\n';
    }

    // primes actually used by the model
    const std::size_t width = static_cast<std::size_t>(manifest.config.arch.input_length);
    std::vector<double> prime_x(width);
    for (std::size_t i = 0; i < width; ++i) {
        prime_x[i] = static_cast<double>(cache.primes.primes[i]);
    }

    // timeline CSV + one SVG panel per epoch
    std::ofstream csv(guard.track(out_dir / "saliency_timeline.csv"), std::ios::trunc);
    csv << "epoch,step,class,p,W,W_tilde\n";
    json index = json::array();
    for (const TimelineEntry& entry : timeline.entries) {
        LinePlot panel;
        panel.title = "epoch " + std::to_string(entry.epochs_completed);
        panel.x_label = "p";
        panel.y_label = "normalized class saliency";
        for (const SaliencyCurve& curve : entry.curves) {
            for (std::size_t i = 0; i < width; ++i) {
                csv << entry.epochs_completed << ',' << entry.global_step << ','
                    << curve.class_v << ',' << prime_x[i] << ',' << fmtd(curve.scores[i])
                    << ',' << fmtd(curve.normalized[i]) << '\n';
            }
            PlotSeries series;
            series.label = "rank " + std::to_string(curve.class_v);
            series.color = class_color(curve.class_v);
            series.x = prime_x;
            series.y = curve.normalized;
            series.points_only = width > 256;
            panel.series.push_back(std::move(series));
        }
        char name[48];
        std::snprintf(name, sizeof(name), "saliency_ep%04d.svg", entry.epochs_completed);
        panel.write(guard.track(out_dir / name).string());
        index.push_back(json{{"epoch", entry.epochs_completed},
                             {"step", entry.global_step},
                             {"panel", name},
                             {"classes", entry.curves.size()},
                             {"empty_classes", entry.empty_classes}});
    }
    csv.close();
    {
        std::ofstream idx(guard.track(out_dir / "index.json"), std::ios::trunc);
        idx << index.dump(2) << '\n';
    }

    // averaged comparison at the final checkpoint
    const fs::path last = run_dir / manifest.checkpoints.back().path;
    if (fs::exists(last)) {
        const Checkpoint ck = load_checkpoint(last);
        const EvalResult ev = evaluate(ck.model, test_sl);
        const SaliencyCurve avg = averaged_saliency(ck.model, test_sl, ev);
        const std::uint64_t bound =
            bound_for_length(cache.primes, manifest.config.arch.input_length);
        const MestreNagaoWeights mn = mn_weights(bound, cache.primes);

        std::ofstream avg_csv(guard.track(out_dir / "saliency_averaged.csv"),
                              std::ios::trunc);
        avg_csv << "epoch,step,p,w,w_tilde,mn_weight\n";
        for (std::size_t i = 0; i < width; ++i) {
            avg_csv << ck.epochs_completed << ',' << ck.global_step << ',' << prime_x[i]
                    << ',' << fmtd(avg.scores[i]) << ',' << fmtd(avg.normalized[i]) << ','
                    << fmtd(mn.weights[i]) << '\n';
        }

        double mn_peak = 0.0;
        for (const double w : mn.weights) {
            mn_peak = std::max(mn_peak, w);
        }
        LinePlot raw;
        raw.title = "saliency vs Mestre-Nagao weighting";
        raw.x_label = "p";
        raw.y_label = "w_p";
        raw.series.push_back(PlotSeries{"w_p", class_color(0), prime_x, avg.scores,
                                        width > 256});
        raw.series.push_back(PlotSeries{"log(p)/sqrt(p)", class_color(1), prime_x,
                                        mn.weights, false});
        raw.write(guard.track(out_dir / "saliency_comparison.svg").string());

        LinePlot norm;
        norm.title = "normalized saliency vs Mestre-Nagao weighting";
        norm.x_label = "p";
        norm.y_label = "w~_p";
        std::vector<double> mn_scaled(mn.weights);
        for (double& w : mn_scaled) {
            w /= mn_peak;
        }
        norm.series.push_back(PlotSeries{"w~_p", class_color(0), prime_x, avg.normalized,
                                         width > 256});
        norm.series.push_back(PlotSeries{"log(p)/sqrt(p), peak 1", class_color(1), prime_x,
                                         mn_scaled, false});
        norm.write(guard.track(out_dir / "saliency_comparison_normalized.svg").string());
    }

    write_run_manifest(out_dir / "run.json", "saliency",
                       json{{"run", run_dir.string()}, {"out", out_dir.string()}},
                       {run_dir / "manifest.json", cache_path}, {out_dir / "index.json"},
                       manifest.config.seed, guard);
    guard.commit();
    std::cout << "saliency grid for " << timeline.entries.size() << " checkpoints -> "
              << out_dir.string() << '\n';
    return 0;
}

int cmd_murmur(const std::string& model_path, const std::string& input_flag,
               double bin_width, const std::string& out_flag) {
    const fs::path input = resolve_cache_path(input_flag);
    const fs::path out_dir(out_flag);
    const Checkpoint ck = load_checkpoint(resolve_cache_path(model_path));
    const int width = ck.model.config().input_length;
    const int classes = ck.model.config().num_classes;
    DirLock lock(out_dir);
    OutputGuard guard;

    const std::string kind = cache_kind(input);
    PrimeTable primes;
    std::vector<int> groups;
    std::optional<ApMatrixView> view;
    DatasetSlice slice;          // keeps curve features alive
    SyntheticBatch batch;        // keeps synthetic rows alive
    if (kind == "APQV") {
        CacheData cache = cache_read(input);
        primes = std::move(cache.primes);
        const std::uint64_t bound = bound_for_length(primes, width);
        slice = truncate_features(cache.slice, bound, primes);
        groups.resize(slice.size());
#pragma omp parallel if (slice.size() > 64)
        {
            Workspace ws;
#pragma omp for schedule(static)
            for (std::size_t i = 0; i < slice.size(); ++i) {
                groups[i] =
                    ck.model.forward_scores(slice.features[i].normalized, ws).predicted;
            }
        }
        view.emplace(slice.features);
    } else {
        batch = synth_read(input, &primes);
        if (static_cast<int>(batch.width) < width) {
            throw DataError("synthetic batch width " + std::to_string(batch.width)
                            + " incompatible with model input length "
                            + std::to_string(width));
        }
        if (static_cast<int>(batch.width) > width) {
            // keep only the prefix the model consumes
            SyntheticBatch cut;
            cut.count = batch.count;
            cut.bound = bound_for_length(primes, width);
            cut.width = width;
            cut.seed = batch.seed;
            cut.values.resize(cut.count * cut.width);
            for (std::size_t r = 0; r < batch.count; ++r) {
                for (int c = 0; c < width; ++c) {
                    cut.values[r * width + c] = batch.values[r * batch.width + c];
                }
            }
            batch = std::move(cut);
        }
        groups.resize(batch.count);
#pragma omp parallel if (batch.count > 64)
        {
            Workspace ws;
#pragma omp for schedule(static)
            for (std::size_t i = 0; i < batch.count; ++i) {
                groups[i] = ck.model.forward_scores(batch.row(i), ws).predicted;
            }
        }
        view.emplace(batch, primes);
    }

    PrimeTable used = primes;
    used.primes.resize(width);
    used.bound = used.primes.back();
    const auto bins = bin_width > 0 ? std::optional<double>(bin_width) : std::nullopt;
    const MurmurationResult res = murmuration_average(*view, groups, classes, used, bins);

    std::ofstream csv(guard.track(out_dir / "murmuration.csv"), std::ios::trunc);
    csv << "group,p,mean_ap,count\n";
    LinePlot plot;
    plot.title = bin_width > 0 ? "mean a_p by predicted rank (binned)"
                               : "mean a_p by predicted rank";
    plot.x_label = "p";
    plot.y_label = "mean a_p";
    for (const MurmurationSeries& s : res.series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            csv << s.group << ',' << s.x[i] << ',' << fmtd(s.mean_ap[i]) << ',' << s.count[i]
                << '\n';
        }
        PlotSeries series;
        series.label = "rank " + std::to_string(s.group) + " (n=" + std::to_string(s.group_size)
                       + ")";
        series.color = class_color(s.group);
        series.x = s.x;
        series.y = s.mean_ap;
        series.points_only = !bins && s.x.size() > 256;
        plot.series.push_back(std::move(series));
        std::cout << "group " << s.group << ": " << s.group_size << " rows\n";
    }
    for (const int v : res.empty_groups) {
        std::cout << "group " << v << ": empty (no row predicted)\n";
    }
    csv.close();
    plot.write(guard.track(out_dir / "murmuration.svg").string());

    write_run_manifest(out_dir / "run.json", "murmur",
                       json{{"model", model_path},
                            {"input", input.string()},
                            {"bin", bin_width},
                            {"out", out_dir.string()}},
                       {input}, {out_dir / "murmuration.csv"}, ck.seed, guard);
    guard.commit();
    return 0;
}

int cmd_sweep(const std::string& cache_flag, const std::string& bounds_flag,
              const std::string& out_flag, const std::string& interval, int epochs,
              std::uint64_t seed, int classes, int batch, int steps, double lr) {
    const fs::path cache_path = resolve_cache_path(cache_flag);
    const fs::path out_path(out_flag);
    OutputGuard guard;

    std::vector<std::uint64_t> bounds;
    {
        std::stringstream ss(bounds_flag);
        std::string field;
        while (std::getline(ss, field, ',')) {
            bounds.push_back(std::stoull(field));
        }
    }
    if (bounds.empty()) {
        throw DataError("--bounds expects a comma-separated list");
    }

    const CacheData cache = cache_read(cache_path);
    const auto [A, B] = parse_interval_flag(interval);
    const DatasetSlice slice = filter_with_features(cache, A, B);
    if (slice.size() == 0) {
        throw DataError("no curves with conductor in the requested interval");
    }

    TrainConfig cfg;
    cfg.batch_size = batch;
    cfg.learning_rate = lr;
    cfg.steps_per_epoch = steps;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.num_classes = classes;

    const std::vector<SweepRow> rows = sweep_primes(cfg, slice, bounds, cache.primes);

    std::ofstream csv(guard.track(out_path), std::ios::trunc);
    csv << "b,pi_b,best_accuracy\n";
    std::vector<double> xs, ys;
    for (const SweepRow& row : rows) {
        csv << row.bound << ',' << row.prime_count << ',' << fmtd(row.best_accuracy) << '\n';
        std::cout << "b=" << row.bound << " pi(b)=" << row.prime_count
                  << " best accuracy=" << row.best_accuracy << '\n';
        xs.push_back(static_cast<double>(row.prime_count));
        ys.push_back(row.best_accuracy);
    }
    csv.close();

    for (const bool log_x : {false, true}) {
        LinePlot plot;
        plot.title = "best test accuracy vs number of primes";
        plot.x_label = log_x ? "pi(b), log scale" : "pi(b)";
        plot.y_label = "accuracy";
        plot.log_x = log_x;
        plot.series.push_back(PlotSeries{"accuracy", class_color(0), xs, ys, false});
        const fs::path svg = out_path.parent_path()
                             / (out_path.stem().string()
                                + (log_x ? "_log.svg" : ".svg"));
        plot.write(guard.track(svg).string());
    }

    write_run_manifest(out_path.string() + ".run.json", "sweep",
                       json{{"cache", cache_path.string()},
                            {"bounds", bounds},
                            {"interval", interval},
                            {"epochs", epochs},
                            {"seed", seed},
                            {"out", out_path.string()}},
                       {cache_path}, {out_path}, seed, guard);
    guard.commit();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rank prediction from Frobenius traces: data, training, interpretation"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse a curve CSV and cache trace vectors");
    std::string in_csv, in_out;
    std::uint64_t in_bound = 10000;
    ingest->add_option("--csv", in_csv, "input CSV (label,conductor,rank,a1..a6)")
        ->required();
    ingest->add_option("--bound", in_bound, "prime bound b");
    ingest->add_option("--out", in_out, "output cache path")->required();

    // ap
    auto* ap = app.add_subcommand("ap", "print the a_p table of one curve");
    std::string ap_curve;
    std::int64_t ap_conductor = 0;
    std::uint64_t ap_bound = 100;
    ap->add_option("--curve", ap_curve, "a1,a2,a3,a4,a6")->required();
    ap->add_option("--conductor", ap_conductor, "conductor N")->required();
    ap->add_option("--bound", ap_bound, "prime bound b");

    // train
    auto* tr = app.add_subcommand("train", "train the CNN on a cached dataset");
    TrainFlags tf;
    tr->add_option("--cache", tf.cache, "curve cache")->required();
    tr->add_option("--interval", tf.interval, "conductor interval A,B");
    tr->add_option("--epochs", tf.epochs, "training epochs");
    tr->add_option("--seed", tf.seed, "master seed");
    tr->add_option("--classes", tf.classes, "output classes (4 or 5)")
        ->check(CLI::IsMember({4, 5}));
    tr->add_option("--out", tf.out, "run output directory")->required();
    tr->add_option("--batch", tf.batch, "batch size");
    tr->add_option("--lr", tf.lr, "learning rate");
    tr->add_option("--steps", tf.steps, "steps per epoch");
    tr->add_option("--ratio", tf.ratio, "train fraction");
    tr->add_option("--bound", tf.bound, "feature prime bound (default: cache bound)");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on its test split");
    std::string ev_model, ev_cache;
    ev->add_option("--model", ev_model, "checkpoint file")->required();
    ev->add_option("--cache", ev_cache, "curve cache (default: recorded in checkpoint)");

    // saliency
    auto* sal = app.add_subcommand("saliency", "saliency timeline and comparisons for a run");
    std::string sal_run, sal_out;
    sal->add_option("--run", sal_run, "training run directory")->required();
    sal->add_option("--out", sal_out, "output directory")->required();

    // mn
    auto* mn = app.add_subcommand("mn", "Mestre-Nagao sums per cached curve");
    std::string mn_cache;
    std::uint64_t mn_bound = 0;
    mn->add_option("--cache", mn_cache, "curve cache")->required();
    mn->add_option("--bound", mn_bound, "sum bound (default: cache bound)");

    // murmur
    auto* mur = app.add_subcommand("murmur", "murmuration averages grouped by predicted rank");
    std::string mur_model, mur_input, mur_out;
    double mur_bin = 0.0;
    mur->add_option("--model", mur_model, "checkpoint file")->required();
    mur->add_option("--input", mur_input, "curve cache or synthetic cache")->required();
    mur->add_option("--bin", mur_bin, "prime window width (0 = per prime)");
    mur->add_option("--out", mur_out, "output directory")->required();

    // synth
    auto* sy = app.add_subcommand("synth", "sample synthetic Sato-Tate sequences");
    std::size_t sy_count = 0;
    std::uint64_t sy_bound = 10000, sy_seed = 1;
    std::string sy_out;
    sy->add_option("--count", sy_count, "number of sequences")->required();
    sy->add_option("--bound", sy_bound, "prime bound b");
    sy->add_option("--seed", sy_seed, "sampler seed");
    sy->add_option("--out", sy_out, "output cache path")->required();

    // sweep
    auto* sw = app.add_subcommand("sweep", "accuracy vs number of primes");
    std::string sw_cache, sw_bounds, sw_out, sw_interval = "0,1e300";
    int sw_epochs = 20, sw_classes = 5, sw_batch = 3000, sw_steps = 10;
    double sw_lr = 1e-3;
    std::uint64_t sw_seed = 1;
    sw->add_option("--cache", sw_cache, "curve cache")->required();
    sw->add_option("--bounds", sw_bounds, "comma-separated prime bounds")->required();
    sw->add_option("--out", sw_out, "output CSV path")->required();
    sw->add_option("--interval", sw_interval, "conductor interval A,B");
    sw->add_option("--epochs", sw_epochs, "epochs per bound");
    sw->add_option("--seed", sw_seed, "master seed");
    sw->add_option("--classes", sw_classes, "output classes");
    sw->add_option("--batch", sw_batch, "batch size");
    sw->add_option("--steps", sw_steps, "steps per epoch");
    sw->add_option("--lr", sw_lr, "learning rate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*ingest) {
            return cmd_ingest(in_csv, in_bound, in_out);
        }
        if (*ap) {
            return cmd_ap(ap_curve, ap_conductor, ap_bound);
        }
        if (*tr) {
            return cmd_train(tf);
        }
        if (*ev) {
            return cmd_eval(ev_model, ev_cache);
        }
        if (*sal) {
            return cmd_saliency(sal_run, sal_out);
        }
        if (*mn) {
            return cmd_mn(mn_cache, mn_bound);
        }
        if (*mur) {
            return cmd_murmur(mur_model, mur_input, mur_bin, mur_out);
        }
        if (*sy) {
            return cmd_synth(sy_count, sy_bound, sy_seed, sy_out);
        }
        if (*sw) {
            return cmd_sweep(sw_cache, sw_bounds, sw_out, sw_interval, sw_epochs, sw_seed,
                             sw_classes, sw_batch, sw_steps, sw_lr);
        }
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
