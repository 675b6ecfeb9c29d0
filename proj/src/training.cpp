#include "ecrank/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ecrank/errors.hpp"
#include "ecrank/rng.hpp"

namespace ecrank {

using json = nlohmann::json;

json TrainConfig::to_json() const {
    return json{{"batch_size", batch_size},
                {"learning_rate", learning_rate},
                {"steps_per_epoch", steps_per_epoch},
                {"epochs", epochs},
                {"seed", seed},
                {"bound", bound},
                {"num_classes", num_classes},
                {"input_length", arch.input_length},
                {"conv_channels", arch.conv_channels},
                {"fc_widths", arch.fc_widths},
                {"dropout_rate", arch.dropout_rate}};
}

json RunManifest::to_json() const {
    json epochs_json = json::array();
    for (const EpochRecord& e : epochs) {
        epochs_json.push_back(json{{"epoch", e.epoch},
                                   {"step_losses", e.step_losses},
                                   {"mean_loss", e.mean_loss},
                                   {"test_accuracy", e.test_accuracy},
                                   {"pred_counts", e.pred_counts},
                                   {"checkpoint", e.checkpoint}});
    }
    json ckpts = json::array();
    for (const CheckpointRef& c : checkpoints) {
        ckpts.push_back(json{{"epochs_completed", c.epochs_completed},
                             {"global_step", c.global_step},
                             {"path", c.path}});
    }
    return json{{"config", config.to_json()},
                {"dataset", dataset_info},
                {"epochs", epochs_json},
                {"checkpoints", ckpts}};
}

void RunManifest::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    out << to_json().dump(2) << '\n';
}

RunManifest RunManifest::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": bad manifest JSON: " + e.what());
    }
    RunManifest m;
    const json& cfg = j.at("config");
    m.config.batch_size = cfg.at("batch_size").get<int>();
    m.config.learning_rate = cfg.at("learning_rate").get<double>();
    m.config.steps_per_epoch = cfg.at("steps_per_epoch").get<int>();
    m.config.epochs = cfg.at("epochs").get<int>();
    m.config.seed = cfg.at("seed").get<std::uint64_t>();
    m.config.bound = cfg.at("bound").get<std::uint64_t>();
    m.config.num_classes = cfg.at("num_classes").get<int>();
    m.config.arch.input_length = cfg.at("input_length").get<int>();
    m.config.arch.conv_channels = cfg.at("conv_channels").get<std::array<int, 3>>();
    m.config.arch.fc_widths = cfg.at("fc_widths").get<std::array<int, 2>>();
    m.config.arch.dropout_rate = cfg.at("dropout_rate").get<double>();
    m.config.arch.num_classes = m.config.num_classes;
    m.dataset_info = j.at("dataset");
    for (const json& e : j.at("epochs")) {
        EpochRecord rec;
        rec.epoch = e.at("epoch").get<int>();
        rec.step_losses = e.at("step_losses").get<std::vector<double>>();
        rec.mean_loss = e.at("mean_loss").get<double>();
        rec.test_accuracy = e.at("test_accuracy").get<double>();
        rec.pred_counts = e.at("pred_counts").get<std::vector<int>>();
        rec.checkpoint = e.at("checkpoint").get<std::string>();
        m.epochs.push_back(std::move(rec));
    }
    for (const json& c : j.at("checkpoints")) {
        m.checkpoints.push_back(CheckpointRef{c.at("epochs_completed").get<int>(),
                                              c.at("global_step").get<std::int64_t>(),
                                              c.at("path").get<std::string>()});
    }
    return m;
}

void RunManifest::write_metrics_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    out << "epoch,step,loss,accuracy,pred_count_0,pred_count_1,pred_count_2,"
           "pred_count_3,pred_count_4\n";
    char buf[64];
    for (const EpochRecord& e : epochs) {
        out << e.epoch << ',' << e.epoch * config.steps_per_epoch << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", e.mean_loss);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", e.test_accuracy);
        out << buf;
        for (int v = 0; v < 5; ++v) {
            out << ',' << (v < static_cast<int>(e.pred_counts.size()) ? e.pred_counts[v] : 0);
        }
        out << '\n';
    }
}

EvalResult evaluate(const CnnModel& model, const DatasetSlice& slice) {
    if (slice.size() == 0) {
        throw DataError("evaluate: empty slice");
    }
    if (model.mode() != Mode::eval) {
        throw std::invalid_argument("evaluate: model must be frozen in eval mode");
    }
    const int k = model.config().num_classes;
    EvalResult res;
    res.confusion.assign(k, std::vector<int>(k, 0));
    res.predicted.resize(slice.size());
    res.partition.assign(k, {});

    std::size_t correct = 0;
#pragma omp parallel if (slice.size() > 64)
    {
        Workspace ws;
#pragma omp for schedule(static) reduction(+ : correct)
        for (std::size_t i = 0; i < slice.size(); ++i) {
            const ScoreVector sv = model.forward_scores(slice.features[i].normalized, ws);
            res.predicted[i] = sv.predicted;
            if (sv.predicted == slice.labels[i]) {
                ++correct;
            }
        }
    }
    for (std::size_t i = 0; i < slice.size(); ++i) {
        const int label = slice.labels[i];
        if (label < 0 || label >= k) {
            throw DataError("evaluate: label " + std::to_string(label) + " out of range");
        }
        res.confusion[label][res.predicted[i]] += 1;
        res.partition[res.predicted[i]].push_back(i);
    }
    res.accuracy = static_cast<double>(correct) / static_cast<double>(slice.size());
    return res;
}

namespace {

void check_slice(const DatasetSlice& slice, const char* name, int num_classes,
                 std::size_t input_length) {
    if (slice.size() == 0) {
        throw DataError(std::string("train: empty ") + name + " slice");
    }
    if (slice.features.size() != slice.size()) {
        throw DataError(std::string("train: ") + name + " slice lacks features");
    }
    for (std::size_t i = 0; i < slice.size(); ++i) {
        if (slice.labels[i] < 0 || slice.labels[i] >= num_classes) {
            throw DataError(std::string("train: ") + name + " label "
                            + std::to_string(slice.labels[i]) + " out of range [0,"
                            + std::to_string(num_classes) + ")");
        }
        if (slice.features[i].normalized.size() != input_length) {
            throw DataError(std::string("train: ") + name + " feature length mismatch at "
                            + slice.features[i].curve_label);
        }
    }
}

std::string checkpoint_name(int epochs_completed) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "checkpoint_ep%04d.eckp", epochs_completed);
    return buf;
}

} // namespace

TrainResult train(const TrainConfig& config, const DatasetSlice& train_slice,
                  const DatasetSlice& test_slice,
                  const std::optional<std::filesystem::path>& out_dir,
                  const json& dataset_info) {
    if (config.batch_size < 1 || config.steps_per_epoch < 1 || config.epochs < 1) {
        throw std::invalid_argument("train: batch_size, steps_per_epoch, epochs must be >= 1");
    }
    const std::size_t input_length = train_slice.features.empty()
                                         ? 0
                                         : train_slice.features.front().normalized.size();
    check_slice(train_slice, "train", config.num_classes, input_length);
    check_slice(test_slice, "test", config.num_classes, input_length);

    ArchConfig arch = config.arch;
    arch.input_length = static_cast<int>(input_length);
    arch.num_classes = config.num_classes;

    CnnModel model(arch);
    model.init_params(derive_seed(config.seed, "init"));

    std::mt19937_64 shuffle_rng(derive_seed(config.seed, "shuffle"));
    std::mt19937_64 dropout_rng(derive_seed(config.seed, "dropout"));

    RunManifest manifest;
    manifest.config = config;
    manifest.config.arch = arch;
    manifest.dataset_info = dataset_info;

    const auto save = [&](int epochs_completed) {
        if (!out_dir) {
            return std::string{};
        }
        const std::string name = checkpoint_name(epochs_completed);
        json meta = dataset_info;
        meta["train_size"] = train_slice.size();
        meta["test_size"] = test_slice.size();
        model.save_checkpoint(*out_dir / name, config.seed, epochs_completed,
                              static_cast<std::int64_t>(epochs_completed)
                                  * config.steps_per_epoch,
                              meta);
        manifest.checkpoints.push_back(
            CheckpointRef{epochs_completed,
                          static_cast<std::int64_t>(epochs_completed) * config.steps_per_epoch,
                          name});
        return name;
    };

    save(0); // initial state = "step 0 of epoch 1"

    const std::size_t n = train_slice.size();
    std::vector<std::size_t> deck(n);
    std::iota(deck.begin(), deck.end(), std::size_t{0});
    shuffle(deck, shuffle_rng);
    std::size_t cursor = 0;

    Workspace ws;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        model.set_mode(Mode::train);
        for (int step = 0; step < config.steps_per_epoch; ++step) {
            if (cursor >= n) {
                shuffle(deck, shuffle_rng);
                cursor = 0;
            }
            const std::size_t take = std::min<std::size_t>(config.batch_size, n - cursor);
            model.zero_grad();
            double loss_sum = 0.0;
            const double inv_take = 1.0 / static_cast<double>(take);
            for (std::size_t b = 0; b < take; ++b) {
                const std::size_t idx = deck[cursor + b];
                model.forward_scores(train_slice.features[idx].normalized, ws, &dropout_rng);
                CrossEntropy ce =
                    softmax_cross_entropy(ws.fc_out[2], train_slice.labels[idx]);
                loss_sum += ce.loss;
                for (double& g : ce.grad) {
                    g *= inv_take;
                }
                model.backward(ce.grad, ws);
            }
            cursor += take;
            const double loss = loss_sum * inv_take;
            if (!std::isfinite(loss)) {
                manifest.epochs.push_back(rec);
                throw TrainAbort("train: non-finite loss at epoch " + std::to_string(epoch)
                                     + " step " + std::to_string(step),
                                 manifest);
            }
            try {
                model.adam_step(config.learning_rate);
            } catch (const NumericError& e) {
                manifest.epochs.push_back(rec);
                throw TrainAbort(std::string("train: ") + e.what() + " at epoch "
                                     + std::to_string(epoch),
                                 manifest);
            }
            rec.step_losses.push_back(loss);
        }
        rec.mean_loss = std::accumulate(rec.step_losses.begin(), rec.step_losses.end(), 0.0)
                        / static_cast<double>(rec.step_losses.size());

        model.set_mode(Mode::eval);
        const EvalResult eval_res = evaluate(model, test_slice);
        rec.test_accuracy = eval_res.accuracy;
        rec.pred_counts.resize(config.num_classes);
        for (int v = 0; v < config.num_classes; ++v) {
            rec.pred_counts[v] = static_cast<int>(eval_res.partition[v].size());
        }
        rec.checkpoint = save(epoch);
        manifest.epochs.push_back(std::move(rec));
    }

    model.set_mode(Mode::eval);
    if (out_dir) {
        manifest.write(*out_dir / "manifest.json");
        manifest.write_metrics_csv(*out_dir / "metrics.csv");
    }
    return TrainResult{std::move(model), std::move(manifest)};
}

std::vector<SweepRow> sweep_primes(const TrainConfig& config, const DatasetSlice& slice,
                                   std::span<const std::uint64_t> bounds,
                                   const PrimeTable& primes) {
    if (slice.features.empty()) {
        throw DataError("sweep_primes: slice has no features");
    }
    const std::uint64_t cached_bound = slice.features.front().bound;
    for (const std::uint64_t b : bounds) {
        if (b > cached_bound) {
            throw DataError("sweep_primes: bound " + std::to_string(b)
                            + " exceeds cached bound " + std::to_string(cached_bound));
        }
    }
    // One split for the whole sweep, so accuracies are comparable across b.
    const auto [train_full, test_full] =
        split_train_test(slice, SplitSpec{0.8, derive_seed(config.seed, "split")});
    std::vector<SweepRow> rows;
    for (const std::uint64_t b : bounds) {
        const DatasetSlice train_sl = truncate_features(train_full, b, primes);
        const DatasetSlice test_sl = truncate_features(test_full, b, primes);
        TrainConfig cfg = config;
        cfg.bound = b;
        cfg.seed = derive_seed(config.seed, "sweep:" + std::to_string(b));
        const TrainResult result = train(cfg, train_sl, test_sl);
        double best = 0.0;
        for (const EpochRecord& e : result.manifest.epochs) {
            best = std::max(best, e.test_accuracy);
        }
        rows.push_back(SweepRow{b, train_sl.features.front().ap.size(), best});
    }
    return rows;
}

} // namespace ecrank
