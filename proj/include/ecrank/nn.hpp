#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace ecrank {

/// Fixed-depth 1D CNN: three conv(K=3,P=1) + ReLU + maxpool(2,2,P=1) blocks,
/// flatten, dropout, two hidden linear layers, linear class head.
struct ArchConfig {
    int input_length = 1229;
    std::array<int, 3> conv_channels{16, 32, 64};
    int conv_kernel = 3;
    int conv_padding = 1;
    int pool_kernel = 2;
    int pool_stride = 2;
    int pool_padding = 1;
    double dropout_rate = 0.5;
    std::array<int, 2> fc_widths{128, 128};
    int num_classes = 5;

    int conv_out_length(int in_length) const;
    int pool_out_length(int in_length) const;
    /// Lengths along the conv stack: input, pool1, pool2, pool3.
    std::array<int, 4> stage_lengths() const;
    int flatten_width() const;
};

struct LayerInfo {
    std::string name;        // "Conv1D", "MaxPool1D", "Flatten & Dropout", "Linear"
    int out_channels = 0;    // 0 when not applicable
    int out_length = 0;      // flattened width for Flatten/Linear rows
    std::int64_t params = 0; // 0 for parameter-free layers
};

struct ParamCount {
    std::int64_t total = 0;
    std::vector<LayerInfo> layers;
};

/// Closed-form per-layer parameter counts and output shapes.
ParamCount param_count(const ArchConfig& cfg);

/// Raw class scores with their softmax probabilities and argmax class.
/// Ties break to the lowest class index.
struct ScoreVector {
    std::vector<double> scores;
    std::vector<double> probabilities;
    int predicted = 0;
};

enum class Mode { train, eval };

/// One named parameter array plus its gradient and Adam moments.
struct ParamBlock {
    std::string name;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<double> m;
    std::vector<double> v;

    void resize(std::size_t n);
};

/// Scratch buffers for one forward/backward pass. Reused across samples.
struct Workspace {
    std::vector<double> input;
    std::array<std::vector<double>, 3> conv_out;
    std::array<std::vector<double>, 3> relu_out;
    std::array<std::vector<double>, 3> pool_out;
    std::array<std::vector<int>, 3> pool_arg;
    std::vector<double> dropped;
    std::vector<std::uint8_t> drop_mask;
    std::array<std::vector<double>, 3> fc_out;
    // backward scratch
    std::vector<double> d_a, d_b;
};

class CnnModel {
public:
    CnnModel() = default;
    explicit CnnModel(const ArchConfig& cfg);

    /// Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init, weights and
    /// biases alike, blocks filled in declared order.
    void init_params(std::uint64_t seed);

    const ArchConfig& config() const { return cfg_; }
    Mode mode() const { return mode_; }
    void set_mode(Mode m) { mode_ = m; }

    std::vector<ParamBlock>& blocks() { return blocks_; }
    const std::vector<ParamBlock>& blocks() const { return blocks_; }
    std::int64_t step_count() const { return step_; }

    /// Forward pass through the full stack. Dropout fires only in train
    /// mode and consumes `dropout_rng`; eval mode is deterministic.
    ScoreVector forward_scores(std::span<const double> x, Workspace& ws,
                               std::mt19937_64* dropout_rng = nullptr) const;
    ScoreVector forward_scores(std::span<const double> x) const;

    /// Backward from d(loss)/d(scores). Accumulates parameter gradients
    /// (unless skipped) and returns d(loss)/d(input) in ws.d_a.
    /// Must be called with the Workspace of the matching forward pass.
    std::span<const double> backward(std::span<const double> dscores, Workspace& ws,
                                     bool accumulate_param_grads = true);

    /// Exact gradient of the raw score S_v with respect to every input
    /// coordinate, in eval mode. Length = input_length.
    std::vector<double> input_gradient(std::span<const double> x, int v) const;

    void zero_grad();

    /// Standard Adam update from the accumulated gradients.
    /// Throws NumericError on non-finite gradients.
    void adam_step(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8);

    /// Checkpoint: magic ECKP, version, JSON header (arch, seed, epoch,
    /// step, caller metadata), then each block's doubles little-endian in
    /// declared order.
    void save_checkpoint(const std::filesystem::path& path, std::uint64_t seed,
                         int epochs_completed, std::int64_t global_step,
                         const nlohmann::json& meta) const;

private:
    ArchConfig cfg_;
    std::vector<ParamBlock> blocks_; // conv{1..3} w,b then fc{1..3} w,b
    Mode mode_ = Mode::train;
    std::int64_t step_ = 0;
};

/// A model restored from disk, with the run context it was saved under.
struct Checkpoint {
    CnnModel model;
    std::uint64_t seed = 0;
    int epochs_completed = 0;
    std::int64_t global_step = 0;
    std::string meta_json; // caller metadata, serialized
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// loss = -log softmax(scores)[label], log-sum-exp stabilized;
/// grad = softmax(scores) - onehot(label).
struct CrossEntropy {
    double loss = 0.0;
    std::vector<double> grad;
};
CrossEntropy softmax_cross_entropy(std::span<const double> scores, int label);

// Standalone layer kernels, exposed for direct testing. All operate on
// channel-major flat buffers (channel c, position i) -> c * length + i.
void conv1d_forward(std::span<const double> in, int c_in, int length,
                    std::span<const double> weight, std::span<const double> bias,
                    int c_out, int kernel, int padding, std::span<double> out);
void conv1d_backward(std::span<const double> in, int c_in, int length,
                     std::span<const double> weight, int c_out, int kernel, int padding,
                     std::span<const double> d_out, std::span<double> d_in,
                     std::span<double> d_weight, std::span<double> d_bias);
void maxpool1d_forward(std::span<const double> in, int channels, int length, int kernel,
                       int stride, int padding, std::span<double> out,
                       std::span<int> argmax);
void maxpool1d_backward(std::span<const double> d_out, int channels, int out_length,
                        std::span<const int> argmax, std::span<double> d_in);
void linear_forward(std::span<const double> in, int in_dim,
                    std::span<const double> weight, std::span<const double> bias,
                    int out_dim, std::span<double> out);
void linear_backward(std::span<const double> in, int in_dim,
                     std::span<const double> weight, int out_dim,
                     std::span<const double> d_out, std::span<double> d_in,
                     std::span<double> d_weight, std::span<double> d_bias);

} // namespace ecrank
