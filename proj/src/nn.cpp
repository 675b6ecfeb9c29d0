#include "ecrank/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "ecrank/errors.hpp"
#include "ecrank/rng.hpp"

namespace ecrank {

using json = nlohmann::json;

// --- shapes ----------------------------------------------------------------

int ArchConfig::conv_out_length(int in_length) const {
    return in_length + 2 * conv_padding - conv_kernel + 1;
}

int ArchConfig::pool_out_length(int in_length) const {
    return (in_length + 2 * pool_padding - pool_kernel) / pool_stride + 1;
}

std::array<int, 4> ArchConfig::stage_lengths() const {
    std::array<int, 4> lengths{};
    lengths[0] = input_length;
    int len = input_length;
    for (int i = 0; i < 3; ++i) {
        len = conv_out_length(len);
        if (len <= 0) {
            throw std::invalid_argument("ArchConfig: conv output length <= 0");
        }
        len = pool_out_length(len);
        lengths[i + 1] = len;
    }
    return lengths;
}

int ArchConfig::flatten_width() const {
    return conv_channels[2] * stage_lengths()[3];
}

ParamCount param_count(const ArchConfig& cfg) {
    ParamCount pc;
    const auto lengths = cfg.stage_lengths();
    int in_ch = 1;
    for (int i = 0; i < 3; ++i) {
        const int out_ch = cfg.conv_channels[i];
        const std::int64_t n =
            static_cast<std::int64_t>(out_ch) * in_ch * cfg.conv_kernel + out_ch;
        pc.layers.push_back({"Conv1D", out_ch, cfg.conv_out_length(lengths[i]), n});
        pc.layers.push_back({"MaxPool1D", out_ch, lengths[i + 1], 0});
        in_ch = out_ch;
    }
    const int flat = cfg.flatten_width();
    pc.layers.push_back({"Flatten & Dropout", 0, flat, 0});
    int in_dim = flat;
    for (int i = 0; i < 2; ++i) {
        const int out_dim = cfg.fc_widths[i];
        const std::int64_t n = static_cast<std::int64_t>(out_dim) * in_dim + out_dim;
        pc.layers.push_back({"Linear", 0, out_dim, n});
        in_dim = out_dim;
    }
    const std::int64_t head =
        static_cast<std::int64_t>(cfg.num_classes) * in_dim + cfg.num_classes;
    pc.layers.push_back({"Linear", 0, cfg.num_classes, head});
    for (const LayerInfo& layer : pc.layers) {
        pc.total += layer.params;
    }
    return pc;
}

// --- layer kernels ----------------------------------------------------------

void conv1d_forward(std::span<const double> in, int c_in, int length,
                    std::span<const double> weight, std::span<const double> bias,
                    int c_out, int kernel, int padding, std::span<double> out) {
    const int out_len = length + 2 * padding - kernel + 1;
    if (static_cast<int>(in.size()) != c_in * length
        || static_cast<int>(weight.size()) != c_out * c_in * kernel
        || static_cast<int>(bias.size()) != c_out
        || static_cast<int>(out.size()) != c_out * out_len || out_len <= 0) {
        throw std::invalid_argument("conv1d_forward: shape mismatch");
    }
#pragma omp parallel for schedule(static) if (c_out * out_len > 4096)
    for (int o = 0; o < c_out; ++o) {
        for (int i = 0; i < out_len; ++i) {
            double acc = bias[o];
            for (int c = 0; c < c_in; ++c) {
                const double* w = &weight[(o * c_in + c) * kernel];
                const double* x = &in[c * length];
                for (int k = 0; k < kernel; ++k) {
                    const int j = i + k - padding;
                    if (j >= 0 && j < length) {
                        acc += w[k] * x[j];
                    }
                }
            }
            out[o * out_len + i] = acc;
        }
    }
}

void conv1d_backward(std::span<const double> in, int c_in, int length,
                     std::span<const double> weight, int c_out, int kernel, int padding,
                     std::span<const double> d_out, std::span<double> d_in,
                     std::span<double> d_weight, std::span<double> d_bias) {
    const int out_len = length + 2 * padding - kernel + 1;
    if (static_cast<int>(d_out.size()) != c_out * out_len
        || static_cast<int>(d_in.size()) != c_in * length) {
        throw std::invalid_argument("conv1d_backward: shape mismatch");
    }
    if (!d_weight.empty()) {
#pragma omp parallel for schedule(static) if (c_out > 4)
        for (int o = 0; o < c_out; ++o) {
            double acc_b = 0.0;
            for (int i = 0; i < out_len; ++i) {
                acc_b += d_out[o * out_len + i];
            }
            d_bias[o] += acc_b;
            for (int c = 0; c < c_in; ++c) {
                for (int k = 0; k < kernel; ++k) {
                    double acc = 0.0;
                    const double* x = &in[c * length];
                    for (int i = 0; i < out_len; ++i) {
                        const int j = i + k - padding;
                        if (j >= 0 && j < length) {
                            acc += d_out[o * out_len + i] * x[j];
                        }
                    }
                    d_weight[(o * c_in + c) * kernel + k] += acc;
                }
            }
        }
    }
#pragma omp parallel for schedule(static) if (c_in * length > 4096)
    for (int c = 0; c < c_in; ++c) {
        for (int j = 0; j < length; ++j) {
            double acc = 0.0;
            for (int o = 0; o < c_out; ++o) {
                for (int k = 0; k < kernel; ++k) {
                    const int i = j - k + padding;
                    if (i >= 0 && i < out_len) {
                        acc += weight[(o * c_in + c) * kernel + k] * d_out[o * out_len + i];
                    }
                }
            }
            d_in[c * length + j] = acc;
        }
    }
}

void maxpool1d_forward(std::span<const double> in, int channels, int length, int kernel,
                       int stride, int padding, std::span<double> out,
                       std::span<int> argmax) {
    if (length <= 0) {
        throw std::invalid_argument("maxpool1d_forward: empty input");
    }
    const int out_len = (length + 2 * padding - kernel) / stride + 1;
    if (static_cast<int>(in.size()) != channels * length
        || static_cast<int>(out.size()) != channels * out_len
        || static_cast<int>(argmax.size()) != channels * out_len) {
        throw std::invalid_argument("maxpool1d_forward: shape mismatch");
    }
    for (int c = 0; c < channels; ++c) {
        for (int i = 0; i < out_len; ++i) {
            // Padding positions hold -inf and are never selected.
            double best = -std::numeric_limits<double>::infinity();
            int best_j = -1;
            for (int k = 0; k < kernel; ++k) {
                const int j = i * stride + k - padding;
                if (j < 0 || j >= length) {
                    continue;
                }
                const double v = in[c * length + j];
                if (v > best) { // strict: ties keep the earliest index
                    best = v;
                    best_j = j;
                }
            }
            out[c * out_len + i] = best;
            argmax[c * out_len + i] = best_j;
        }
    }
}

void maxpool1d_backward(std::span<const double> d_out, int channels, int out_length,
                        std::span<const int> argmax, std::span<double> d_in) {
    std::fill(d_in.begin(), d_in.end(), 0.0);
    const int in_length = static_cast<int>(d_in.size()) / channels;
    for (int c = 0; c < channels; ++c) {
        for (int i = 0; i < out_length; ++i) {
            const int j = argmax[c * out_length + i];
            if (j >= 0) {
                d_in[c * in_length + j] += d_out[c * out_length + i];
            }
        }
    }
}

void linear_forward(std::span<const double> in, int in_dim,
                    std::span<const double> weight, std::span<const double> bias,
                    int out_dim, std::span<double> out) {
    if (static_cast<int>(in.size()) != in_dim
        || static_cast<int>(weight.size()) != out_dim * in_dim
        || static_cast<int>(out.size()) != out_dim) {
        throw std::invalid_argument("linear_forward: shape mismatch");
    }
#pragma omp parallel for schedule(static) if (out_dim * in_dim > 16384)
    for (int o = 0; o < out_dim; ++o) {
        const double* w = &weight[o * in_dim];
        double acc = bias[o];
        for (int i = 0; i < in_dim; ++i) {
            acc += w[i] * in[i];
        }
        out[o] = acc;
    }
}

void linear_backward(std::span<const double> in, int in_dim,
                     std::span<const double> weight, int out_dim,
                     std::span<const double> d_out, std::span<double> d_in,
                     std::span<double> d_weight, std::span<double> d_bias) {
    if (static_cast<int>(d_out.size()) != out_dim
        || static_cast<int>(d_in.size()) != in_dim) {
        throw std::invalid_argument("linear_backward: shape mismatch");
    }
    if (!d_weight.empty()) {
#pragma omp parallel for schedule(static) if (out_dim * in_dim > 16384)
        for (int o = 0; o < out_dim; ++o) {
            const double g = d_out[o];
            double* dw = &d_weight[o * in_dim];
            for (int i = 0; i < in_dim; ++i) {
                dw[i] += g * in[i];
            }
            d_bias[o] += g;
        }
    }
#pragma omp parallel for schedule(static) if (out_dim * in_dim > 16384)
    for (int i = 0; i < in_dim; ++i) {
        double acc = 0.0;
        for (int o = 0; o < out_dim; ++o) {
            acc += weight[o * in_dim + i] * d_out[o];
        }
        d_in[i] = acc;
    }
}

CrossEntropy softmax_cross_entropy(std::span<const double> scores, int label) {
    const int n = static_cast<int>(scores.size());
    if (label < 0 || label >= n) {
        throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label)
                                    + " out of range for " + std::to_string(n) + " classes");
    }
    const double m = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (const double s : scores) {
        sum += std::exp(s - m);
    }
    const double lse = m + std::log(sum);
    CrossEntropy ce;
    ce.loss = lse - scores[label];
    ce.grad.resize(n);
    for (int i = 0; i < n; ++i) {
        ce.grad[i] = std::exp(scores[i] - lse) - (i == label ? 1.0 : 0.0);
    }
    return ce;
}

// --- model -------------------------------------------------------------------

void ParamBlock::resize(std::size_t n) {
    value.assign(n, 0.0);
    grad.assign(n, 0.0);
    m.assign(n, 0.0);
    v.assign(n, 0.0);
}

CnnModel::CnnModel(const ArchConfig& cfg) : cfg_(cfg) {
    (void)cfg_.stage_lengths(); // validates shapes
    blocks_.resize(12);
    int in_ch = 1;
    for (int i = 0; i < 3; ++i) {
        const int out_ch = cfg_.conv_channels[i];
        blocks_[2 * i].name = "conv" + std::to_string(i + 1) + ".weight";
        blocks_[2 * i].resize(static_cast<std::size_t>(out_ch) * in_ch * cfg_.conv_kernel);
        blocks_[2 * i + 1].name = "conv" + std::to_string(i + 1) + ".bias";
        blocks_[2 * i + 1].resize(static_cast<std::size_t>(out_ch));
        in_ch = out_ch;
    }
    int in_dim = cfg_.flatten_width();
    const std::array<int, 3> fc_out{cfg_.fc_widths[0], cfg_.fc_widths[1], cfg_.num_classes};
    for (int i = 0; i < 3; ++i) {
        blocks_[6 + 2 * i].name = "fc" + std::to_string(i + 1) + ".weight";
        blocks_[6 + 2 * i].resize(static_cast<std::size_t>(fc_out[i]) * in_dim);
        blocks_[6 + 2 * i + 1].name = "fc" + std::to_string(i + 1) + ".bias";
        blocks_[6 + 2 * i + 1].resize(static_cast<std::size_t>(fc_out[i]));
        in_dim = fc_out[i];
    }
}

void CnnModel::init_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    int in_ch = 1;
    std::array<int, 6> fan_in{};
    for (int i = 0; i < 3; ++i) {
        fan_in[i] = in_ch * cfg_.conv_kernel;
        in_ch = cfg_.conv_channels[i];
    }
    fan_in[3] = cfg_.flatten_width();
    fan_in[4] = cfg_.fc_widths[0];
    fan_in[5] = cfg_.fc_widths[1];
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in[b / 2]));
        for (double& w : blocks_[b].value) {
            w = (2.0 * uniform01(rng) - 1.0) * bound;
        }
    }
    step_ = 0;
}

namespace {

void ensure(std::vector<double>& buf, std::size_t n) {
    buf.resize(n);
}

} // namespace

ScoreVector CnnModel::forward_scores(std::span<const double> x, Workspace& ws,
                                     std::mt19937_64* dropout_rng) const {
    if (static_cast<int>(x.size()) != cfg_.input_length) {
        throw std::invalid_argument("forward_scores: input length "
                                    + std::to_string(x.size()) + " != configured "
                                    + std::to_string(cfg_.input_length));
    }
    const auto lengths = cfg_.stage_lengths();
    ws.input.assign(x.begin(), x.end());

    const double* cur = ws.input.data();
    int cur_ch = 1;
    int cur_len = cfg_.input_length;
    for (int i = 0; i < 3; ++i) {
        const int out_ch = cfg_.conv_channels[i];
        const int conv_len = cfg_.conv_out_length(cur_len);
        ensure(ws.conv_out[i], static_cast<std::size_t>(out_ch) * conv_len);
        conv1d_forward({cur, static_cast<std::size_t>(cur_ch) * cur_len}, cur_ch, cur_len,
                       blocks_[2 * i].value, blocks_[2 * i + 1].value, out_ch,
                       cfg_.conv_kernel, cfg_.conv_padding, ws.conv_out[i]);
        ensure(ws.relu_out[i], ws.conv_out[i].size());
        for (std::size_t j = 0; j < ws.conv_out[i].size(); ++j) {
            ws.relu_out[i][j] = ws.conv_out[i][j] > 0.0 ? ws.conv_out[i][j] : 0.0;
        }
        const int pool_len = cfg_.pool_out_length(conv_len);
        ensure(ws.pool_out[i], static_cast<std::size_t>(out_ch) * pool_len);
        ws.pool_arg[i].resize(static_cast<std::size_t>(out_ch) * pool_len);
        maxpool1d_forward(ws.relu_out[i], out_ch, conv_len, cfg_.pool_kernel,
                          cfg_.pool_stride, cfg_.pool_padding, ws.pool_out[i],
                          ws.pool_arg[i]);
        cur = ws.pool_out[i].data();
        cur_ch = out_ch;
        cur_len = pool_len;
        if (cur_len != lengths[i + 1]) {
            throw std::logic_error("forward_scores: stage length mismatch");
        }
    }

    // flatten is a no-op on the channel-major buffer; dropout follows
    const int flat = cfg_.flatten_width();
    ensure(ws.dropped, static_cast<std::size_t>(flat));
    ws.drop_mask.assign(static_cast<std::size_t>(flat), 1);
    const bool drop = mode_ == Mode::train && cfg_.dropout_rate > 0.0;
    if (drop) {
        if (dropout_rng == nullptr) {
            throw std::invalid_argument("forward_scores: train-mode dropout needs an rng");
        }
        const double keep = 1.0 - cfg_.dropout_rate;
        for (int j = 0; j < flat; ++j) {
            if (uniform01(*dropout_rng) < cfg_.dropout_rate) {
                ws.drop_mask[j] = 0;
                ws.dropped[j] = 0.0;
            } else {
                ws.dropped[j] = cur[j] / keep;
            }
        }
    } else {
        std::copy(cur, cur + flat, ws.dropped.begin());
    }

    const double* fc_in = ws.dropped.data();
    int in_dim = flat;
    const std::array<int, 3> fc_out_dim{cfg_.fc_widths[0], cfg_.fc_widths[1],
                                        cfg_.num_classes};
    for (int i = 0; i < 3; ++i) {
        ensure(ws.fc_out[i], static_cast<std::size_t>(fc_out_dim[i]));
        linear_forward({fc_in, static_cast<std::size_t>(in_dim)}, in_dim,
                       blocks_[6 + 2 * i].value, blocks_[6 + 2 * i + 1].value,
                       fc_out_dim[i], ws.fc_out[i]);
        fc_in = ws.fc_out[i].data();
        in_dim = fc_out_dim[i];
    }

    ScoreVector sv;
    sv.scores = ws.fc_out[2];
    const double m = *std::max_element(sv.scores.begin(), sv.scores.end());
    double sum = 0.0;
    for (const double s : sv.scores) {
        sum += std::exp(s - m);
    }
    sv.probabilities.resize(sv.scores.size());
    for (std::size_t i = 0; i < sv.scores.size(); ++i) {
        sv.probabilities[i] = std::exp(sv.scores[i] - m) / sum;
    }
    sv.predicted = 0;
    for (std::size_t i = 1; i < sv.scores.size(); ++i) {
        if (sv.scores[i] > sv.scores[sv.predicted]) {
            sv.predicted = static_cast<int>(i);
        }
    }
    return sv;
}

ScoreVector CnnModel::forward_scores(std::span<const double> x) const {
    Workspace ws;
    return forward_scores(x, ws, nullptr);
}

std::span<const double> CnnModel::backward(std::span<const double> dscores, Workspace& ws,
                                           bool accumulate_param_grads) {
    if (static_cast<int>(dscores.size()) != cfg_.num_classes) {
        throw std::invalid_argument("backward: dscores size != num_classes");
    }
    const auto lengths = cfg_.stage_lengths();
    const int flat = cfg_.flatten_width();

    // fc stack, in reverse
    ws.d_a.assign(dscores.begin(), dscores.end());
    const std::array<int, 3> fc_out_dim{cfg_.fc_widths[0], cfg_.fc_widths[1],
                                        cfg_.num_classes};
    for (int i = 2; i >= 0; --i) {
        const int in_dim = i == 0 ? flat : fc_out_dim[i - 1];
        const double* fc_in = i == 0 ? ws.dropped.data() : ws.fc_out[i - 1].data();
        ws.d_b.assign(static_cast<std::size_t>(in_dim), 0.0);
        std::span<double> dw, db;
        if (accumulate_param_grads) {
            dw = blocks_[6 + 2 * i].grad;
            db = blocks_[6 + 2 * i + 1].grad;
        }
        linear_backward({fc_in, static_cast<std::size_t>(in_dim)}, in_dim,
                        blocks_[6 + 2 * i].value, fc_out_dim[i], ws.d_a, ws.d_b, dw, db);
        std::swap(ws.d_a, ws.d_b);
    }

    // dropout backward: same mask and 1/(1-D) scaling
    const bool dropped = mode_ == Mode::train && cfg_.dropout_rate > 0.0;
    if (dropped) {
        const double keep = 1.0 - cfg_.dropout_rate;
        for (int j = 0; j < flat; ++j) {
            ws.d_a[j] = ws.drop_mask[j] ? ws.d_a[j] / keep : 0.0;
        }
    }

    // conv stack, in reverse
    for (int i = 2; i >= 0; --i) {
        const int out_ch = cfg_.conv_channels[i];
        const int in_ch = i == 0 ? 1 : cfg_.conv_channels[i - 1];
        const int in_len = lengths[i];
        const int conv_len = cfg_.conv_out_length(in_len);
        const int pool_len = lengths[i + 1];

        // pool backward into conv_len positions
        ws.d_b.assign(static_cast<std::size_t>(out_ch) * conv_len, 0.0);
        maxpool1d_backward({ws.d_a.data(), static_cast<std::size_t>(out_ch) * pool_len},
                           out_ch, pool_len, ws.pool_arg[i], ws.d_b);
        // relu backward (subgradient 0 at 0)
        for (std::size_t j = 0; j < ws.d_b.size(); ++j) {
            if (ws.conv_out[i][j] <= 0.0) {
                ws.d_b[j] = 0.0;
            }
        }
        const double* conv_in = i == 0 ? ws.input.data() : ws.pool_out[i - 1].data();
        ws.d_a.assign(static_cast<std::size_t>(in_ch) * in_len, 0.0);
        std::span<double> dw, db;
        if (accumulate_param_grads) {
            dw = blocks_[2 * i].grad;
            db = blocks_[2 * i + 1].grad;
        }
        conv1d_backward({conv_in, static_cast<std::size_t>(in_ch) * in_len}, in_ch, in_len,
                        blocks_[2 * i].value, out_ch, cfg_.conv_kernel, cfg_.conv_padding,
                        ws.d_b, ws.d_a, dw, db);
    }
    return ws.d_a;
}

std::vector<double> CnnModel::input_gradient(std::span<const double> x, int v) const {
    if (v < 0 || v >= cfg_.num_classes) {
        throw std::invalid_argument("input_gradient: class " + std::to_string(v)
                                    + " out of range");
    }
    if (mode_ != Mode::eval) {
        throw std::invalid_argument("input_gradient: model must be in eval mode");
    }
    Workspace ws;
    forward_scores(x, ws, nullptr);
    std::vector<double> dscores(cfg_.num_classes, 0.0);
    dscores[v] = 1.0;
    // Gradient of the raw score S_v, not of the softmax output. With
    // param-grad accumulation off, backward touches only the workspace,
    // so concurrent calls on a frozen model are safe.
    const auto dx = const_cast<CnnModel&>(*this).backward(dscores, ws,
                                                          /*accumulate_param_grads=*/false);
    return {dx.begin(), dx.end()};
}

void CnnModel::zero_grad() {
    for (ParamBlock& b : blocks_) {
        std::fill(b.grad.begin(), b.grad.end(), 0.0);
    }
}

void CnnModel::adam_step(double lr, double beta1, double beta2, double eps) {
    for (const ParamBlock& b : blocks_) {
        for (const double g : b.grad) {
            if (!std::isfinite(g)) {
                throw NumericError("adam_step: non-finite gradient in " + b.name);
            }
        }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
    for (ParamBlock& b : blocks_) {
        for (std::size_t i = 0; i < b.value.size(); ++i) {
            const double g = b.grad[i];
            b.m[i] = beta1 * b.m[i] + (1.0 - beta1) * g;
            b.v[i] = beta2 * b.v[i] + (1.0 - beta2) * g * g;
            const double mhat = b.m[i] / bc1;
            const double vhat = b.v[i] / bc2;
            b.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

// --- checkpoints -------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'E', 'C', 'K', 'P'};
constexpr std::uint16_t kCheckpointVersion = 1;

json arch_to_json(const ArchConfig& cfg) {
    return json{{"input_length", cfg.input_length},
                {"conv_channels", cfg.conv_channels},
                {"conv_kernel", cfg.conv_kernel},
                {"conv_padding", cfg.conv_padding},
                {"pool_kernel", cfg.pool_kernel},
                {"pool_stride", cfg.pool_stride},
                {"pool_padding", cfg.pool_padding},
                {"dropout_rate", cfg.dropout_rate},
                {"fc_widths", cfg.fc_widths},
                {"num_classes", cfg.num_classes}};
}

ArchConfig arch_from_json(const json& j) {
    ArchConfig cfg;
    cfg.input_length = j.at("input_length").get<int>();
    cfg.conv_channels = j.at("conv_channels").get<std::array<int, 3>>();
    cfg.conv_kernel = j.at("conv_kernel").get<int>();
    cfg.conv_padding = j.at("conv_padding").get<int>();
    cfg.pool_kernel = j.at("pool_kernel").get<int>();
    cfg.pool_stride = j.at("pool_stride").get<int>();
    cfg.pool_padding = j.at("pool_padding").get<int>();
    cfg.dropout_rate = j.at("dropout_rate").get<double>();
    cfg.fc_widths = j.at("fc_widths").get<std::array<int, 2>>();
    cfg.num_classes = j.at("num_classes").get<int>();
    return cfg;
}

} // namespace

void CnnModel::save_checkpoint(const std::filesystem::path& path, std::uint64_t seed,
                               int epochs_completed, std::int64_t global_step,
                               const json& meta) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    json header{{"arch", arch_to_json(cfg_)},
                {"seed", seed},
                {"epochs_completed", epochs_completed},
                {"global_step", global_step},
                {"meta", meta}};
    const std::string header_str = header.dump();
    out.write(kCheckpointMagic, 4);
    const std::uint16_t version = kCheckpointVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const auto len = static_cast<std::uint32_t>(header_str.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const ParamBlock& b : blocks_) {
        const auto n = static_cast<std::uint64_t>(b.value.size());
        out.write(reinterpret_cast<const char*>(&n), sizeof(n));
        out.write(reinterpret_cast<const char*>(b.value.data()),
                  static_cast<std::streamsize>(b.value.size() * sizeof(double)));
    }
    if (!out) {
        throw DataError("write failed for " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw DataError(path.string() + ": not a checkpoint file (bad magic)");
    }
    std::uint16_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kCheckpointVersion) {
        throw DataError(path.string() + ": unsupported checkpoint version "
                        + std::to_string(version));
    }
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header_str(len, '\0');
    in.read(header_str.data(), len);
    if (!in) {
        throw DataError(path.string() + ": truncated checkpoint header");
    }
    json header;
    try {
        header = json::parse(header_str);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": bad checkpoint header: " + e.what());
    }

    Checkpoint ck;
    ck.model = CnnModel(arch_from_json(header.at("arch")));
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.epochs_completed = header.at("epochs_completed").get<int>();
    ck.global_step = header.at("global_step").get<std::int64_t>();
    ck.meta_json = header.at("meta").dump();
    for (ParamBlock& b : ck.model.blocks()) {
        std::uint64_t n = 0;
        in.read(reinterpret_cast<char*>(&n), sizeof(n));
        if (!in || n != b.value.size()) {
            throw DataError(path.string() + ": parameter block " + b.name
                            + " has unexpected size");
        }
        in.read(reinterpret_cast<char*>(b.value.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!in) {
            throw DataError(path.string() + ": truncated parameter block " + b.name);
        }
    }
    ck.model.set_mode(Mode::eval);
    return ck;
}

} // namespace ecrank
