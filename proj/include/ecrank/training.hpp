#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecrank/dataset.hpp"
#include "ecrank/errors.hpp"
#include "ecrank/nn.hpp"

namespace ecrank {

struct TrainConfig {
    int batch_size = 3000;
    double learning_rate = 1e-3;
    int steps_per_epoch = 10;
    int epochs = 100;
    std::uint64_t seed = 0;
    std::uint64_t bound = 10000; // feature bound b; input length is pi(b)
    int num_classes = 5;
    ArchConfig arch; // input_length is overwritten from the data

    nlohmann::json to_json() const;
};

struct EpochRecord {
    int epoch = 0;
    std::vector<double> step_losses;
    double mean_loss = 0.0;
    double test_accuracy = 0.0;
    std::vector<int> pred_counts; // size num_classes
    std::string checkpoint;       // end-of-epoch model state
};

struct CheckpointRef {
    int epochs_completed = 0;
    std::int64_t global_step = 0;
    std::string path;
};

/// Everything needed to reproduce and audit a run.
struct RunManifest {
    TrainConfig config;
    nlohmann::json dataset_info; // cache path, fingerprint, interval, split
    std::vector<EpochRecord> epochs;
    std::vector<CheckpointRef> checkpoints;

    nlohmann::json to_json() const;
    void write(const std::filesystem::path& path) const;
    static RunManifest read(const std::filesystem::path& path);

    /// One row per epoch: epoch,step,loss,accuracy,pred_count_0..4.
    void write_metrics_csv(const std::filesystem::path& path) const;
};

struct EvalResult {
    double accuracy = 0.0;
    std::vector<std::vector<int>> confusion;   // [true][predicted]
    std::vector<int> predicted;                // per test index
    std::vector<std::vector<std::size_t>> partition; // indices per predicted class
};

/// Frozen-model evaluation over a slice. Throws DataError on an empty slice.
EvalResult evaluate(const CnnModel& model, const DatasetSlice& slice);

struct TrainResult {
    CnnModel model;
    RunManifest manifest;
};

/// Aborted training, carrying the manifest accumulated so far.
struct TrainAbort : NumericError {
    TrainAbort(const std::string& what, RunManifest manifest)
        : NumericError(what), partial(std::move(manifest)) {}
    RunManifest partial;
};

/// Seeded training loop: per epoch, reshuffle-backed batching with
/// steps_per_epoch Adam steps, then a test evaluation. Checkpoints are
/// written per epoch boundary (states after 0..epochs epochs) when out_dir
/// is given. Deterministic per (config, data).
TrainResult train(const TrainConfig& config, const DatasetSlice& train_slice,
                  const DatasetSlice& test_slice,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                  const nlohmann::json& dataset_info = nlohmann::json::object());

struct SweepRow {
    std::uint64_t bound = 0;
    std::size_t prime_count = 0;
    double best_accuracy = 0.0;
};

/// Trains one model per bound on prefix-truncated features and reports the
/// best observed test accuracy per bound. The slice is split once; per-bound
/// runs use seeds derived from the master seed.
std::vector<SweepRow> sweep_primes(const TrainConfig& config, const DatasetSlice& slice,
                                   std::span<const std::uint64_t> bounds,
                                   const PrimeTable& primes);

} // namespace ecrank
