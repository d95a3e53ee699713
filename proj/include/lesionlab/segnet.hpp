#ifndef LESIONLAB_SEGNET_HPP
#define LESIONLAB_SEGNET_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lesionlab/autograd.hpp"
#include "lesionlab/censor.hpp"
#include "lesionlab/detect.hpp"
#include "lesionlab/errors.hpp"
#include "lesionlab/losses.hpp"
#include "lesionlab/metrics.hpp"
#include "lesionlab/phantom.hpp"
#include "lesionlab/rng.hpp"
#include "lesionlab/volume.hpp"

// 2.5D convolutional segmenter: a window of adjacent z-slices across all
// channels, stacked channel-wise, predicts the center slice. Training is
// per-frame SGD with step lr decay and validation-based model selection;
// the validation annotations carry the same censoring as training.

namespace lesionlab {

struct ModelConfig {
    struct ConvLayer {
        int filters = 0;
        int kernel = 0;
    };

    int context_slices = 5;
    int channels_per_slice = 4;
    std::vector<ConvLayer> layers = {{16, 3}, {16, 3}, {2, 1}};
    // Initial lesion probability emitted by the untrained net. 0 disables the
    // prior (all-zero biases, p = 0.5). A small value starts predictions at
    // the class prior, the usual remedy for extreme foreground imbalance.
    double output_bias_prior = 0.0;

    int input_channels() const { return context_slices * channels_per_slice; }

    void validate() const {
        if (context_slices < 1 || context_slices % 2 == 0)
            throw ConfigError("model: context_slices must be odd and positive");
        if (channels_per_slice < 1)
            throw ConfigError("model: channels_per_slice must be positive");
        if (layers.empty()) throw ConfigError("model: needs at least one conv layer");
        for (const auto& l : layers) {
            if (l.filters < 1 || l.kernel < 1 || l.kernel % 2 == 0)
                throw ConfigError("model: conv layers need positive filters and odd kernels");
        }
        if (layers.back().filters != 2)
            throw ConfigError("model: final layer must emit 2 class channels, got " +
                              std::to_string(layers.back().filters));
        if (output_bias_prior < 0.0 || output_bias_prior >= 1.0)
            throw ConfigError("model: output_bias_prior must lie in [0, 1)");
    }
};

enum class SelectionMetric { val_loss, val_map };

inline const char* selection_metric_name(SelectionMetric m) {
    return m == SelectionMetric::val_loss ? "val_loss" : "val_map";
}

inline SelectionMetric selection_metric_from(const std::string& s) {
    if (s == "val_loss") return SelectionMetric::val_loss;
    if (s == "val_map") return SelectionMetric::val_map;
    throw ConfigError("unknown selection metric '" + s + "'");
}

struct TrainConfig {
    int epochs = 10;
    int batch_size = 1;  // frames per optimizer step
    double lr = 0.05;
    double l2 = 1e-4;
    double lr_decay_gamma = 0.5;  // multiply lr by gamma every lr_decay_every epochs
    int lr_decay_every = 3;
    double momentum = 0.0;
    int frames_per_epoch = 0;  // 0 = every frame once; >0 truncates the schedule
    // Epochs trained with the feedback term disabled (beta forced to 0) before
    // bootstrap-style losses switch it on; predictions must carry signal before
    // they can serve as targets. No effect on ce / class_weighted.
    int bootstrap_warmup = 0;
    // Positive-class weight used during those warm-up epochs (0 = keep the
    // loss's own alpha). A boosted weight gives a high-recall warm start, so
    // the feedback term inherits predictions that still cover the lesions.
    double warmup_alpha = 0.0;
    std::uint64_t seed = 0;
    SelectionMetric selection = SelectionMetric::val_loss;

    void validate() const {
        if (epochs < 1) throw ConfigError("train: epochs must be positive");
        if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
        if (lr <= 0.0) throw ConfigError("train: lr must be positive");
        if (l2 < 0.0) throw ConfigError("train: l2 must be non-negative");
        if (lr_decay_gamma <= 0.0 || lr_decay_gamma > 1.0)
            throw ConfigError("train: lr_decay_gamma must lie in (0,1]");
        if (lr_decay_every < 1) throw ConfigError("train: lr_decay_every must be positive");
        if (momentum < 0.0 || momentum >= 1.0)
            throw ConfigError("train: momentum must lie in [0,1)");
        if (frames_per_epoch < 0)
            throw ConfigError("train: frames_per_epoch must be non-negative");
        if (bootstrap_warmup < 0)
            throw ConfigError("train: bootstrap_warmup must be non-negative");
        if (warmup_alpha < 0.0)
            throw ConfigError("train: warmup_alpha must be non-negative");
    }
};

struct EpochStats {
    double train_loss = 0.0;
    double val_metric = 0.0;
    double lr = 0.0;
};

template <typename T>
struct TrainedModel {
    ModelConfig model;
    TrainConfig train_cfg;
    std::vector<grad::Tensor<T>> params;  // kernel, bias per layer, in order
    std::vector<EpochStats> history;
    int selected_epoch = 0;
};

// Frame input [1, context*C, ny, nx]: slice-major blocks, block s holding
// all channels of slice z - context/2 + s; out-of-range slices are zero.
template <typename T = float>
grad::Tensor<T> stack_frame(const Volume4& vol, int z, int context) {
    if (context < 1 || context % 2 == 0)
        throw ConfigError("stack_frame: context must be odd and positive");
    if (z < 0 || z >= vol.dims.nz)
        throw ConfigError("stack_frame: slice index " + std::to_string(z) +
                          " outside [0," + std::to_string(vol.dims.nz) + ")");
    const int C = vol.channels;
    const std::size_t plane = static_cast<std::size_t>(vol.dims.ny) * vol.dims.nx;
    grad::Tensor<T> out = grad::Tensor<T>::zeros({1, context * C, vol.dims.ny, vol.dims.nx});
    for (int s = 0; s < context; ++s) {
        const int zs = z - context / 2 + s;
        if (zs < 0 || zs >= vol.dims.nz) continue;
        for (int c = 0; c < C; ++c) {
            const float* src = vol.plane(c, zs);
            T* dst = out.data.data() + (static_cast<std::size_t>(s) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<T>(src[i]);
        }
    }
    return out;
}

template <typename T = float>
grad::Tensor<T> mask_slice(const Vol3<std::uint8_t>& mask, int z) {
    grad::Tensor<T> out = grad::Tensor<T>::zeros({1, mask.dims.ny, mask.dims.nx});
    const std::size_t plane = static_cast<std::size_t>(mask.dims.ny) * mask.dims.nx;
    const std::uint8_t* src = mask.data.data() + static_cast<std::size_t>(z) * plane;
    for (std::size_t i = 0; i < plane; ++i) out.data[i] = static_cast<T>(src[i]);
    return out;
}

// He-style initialization: kernels ~ N(0, sqrt(2/fan_in)), biases zero. With
// output_bias_prior set, the final lesion-channel bias is logit(prior) so the
// untrained softmax emits that probability.
template <typename T>
std::vector<grad::Tensor<T>> init_params(const ModelConfig& mc, std::uint64_t seed) {
    mc.validate();
    std::vector<grad::Tensor<T>> params;
    int c_in = mc.input_channels();
    for (std::size_t li = 0; li < mc.layers.size(); ++li) {
        const auto& layer = mc.layers[li];
        rng::Stream rs(rng::derive_stream(seed, {rng::fnv1a64("init"), (std::uint64_t)li}));
        const double stddev = std::sqrt(2.0 / (c_in * layer.kernel * layer.kernel));
        grad::Tensor<T> k =
            grad::Tensor<T>::zeros({layer.filters, c_in, layer.kernel, layer.kernel});
        for (auto& v : k.data) v = static_cast<T>(rs.normal(0.0, stddev));
        params.push_back(std::move(k));
        grad::Tensor<T> b = grad::Tensor<T>::zeros({layer.filters});
        if (li + 1 == mc.layers.size() && mc.output_bias_prior > 0.0)
            b.data[1] = static_cast<T>(
                std::log(mc.output_bias_prior / (1.0 - mc.output_bias_prior)));
        params.push_back(std::move(b));
        c_in = layer.filters;
    }
    return params;
}

// Conv stack with relu between layers and a softmax head.
template <typename T>
grad::Var<T> forward_probs(grad::Tape<T>& tape, grad::Var<T> input,
                           const std::vector<grad::Var<T>>& params) {
    grad::Var<T> x = input;
    const std::size_t n_layers = params.size() / 2;
    for (std::size_t li = 0; li < n_layers; ++li) {
        x = conv2d(x, params[2 * li], params[2 * li + 1]);
        if (li + 1 < n_layers) x = relu(x);
    }
    return softmax_channels(x);
}

// Per-epoch frame order: every (case, z) pair exactly once, shuffled by a
// stream keyed on (seed, epoch).
inline std::vector<std::pair<int, int>> make_frame_schedule(const std::vector<int>& z_counts,
                                                            std::uint64_t seed, int epoch) {
    std::vector<std::pair<int, int>> frames;
    for (std::size_t c = 0; c < z_counts.size(); ++c)
        for (int z = 0; z < z_counts[c]; ++z) frames.emplace_back(static_cast<int>(c), z);
    rng::Stream rs(rng::derive_stream(seed, {rng::fnv1a64("frames"), (std::uint64_t)epoch}));
    rs.shuffle(frames);
    return frames;
}

namespace detail {

// Plain (tape-free) forward pass for inference; returns the lesion-channel
// probability plane.
template <typename T>
void infer_frame(const grad::Tensor<T>& frame, const std::vector<grad::Tensor<T>>& params,
                 std::vector<std::vector<T>>& scratch, float* out_plane) {
    const int h = frame.shape[2], w = frame.shape[3];
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t n_layers = params.size() / 2;
    scratch.resize(n_layers);

    const T* cur = frame.data.data();
    int c_in = frame.shape[1];
    for (std::size_t li = 0; li < n_layers; ++li) {
        const auto& k = params[2 * li];
        const auto& b = params[2 * li + 1];
        const int f_out = k.shape[0], kk = k.shape[2];
        scratch[li].assign(static_cast<std::size_t>(f_out) * plane, T(0));
        grad::detail::conv2d_forward(cur, k.data.data(), b.data.data(), scratch[li].data(), 1,
                                     c_in, h, w, f_out, kk);
        if (li + 1 < n_layers) {
            for (auto& v : scratch[li]) v = std::max(v, T(0));
        }
        cur = scratch[li].data();
        c_in = f_out;
    }
    // Two-channel softmax, lesion channel second.
    const T* l0 = cur;
    const T* l1 = cur + plane;
    for (std::size_t i = 0; i < plane; ++i) {
        const T mx = std::max(l0[i], l1[i]);
        const T e0 = std::exp(l0[i] - mx), e1 = std::exp(l1[i] - mx);
        out_plane[i] = static_cast<float>(e1 / (e0 + e1));
    }
}

}  // namespace detail

template <typename T>
Vol3<float> predict_volume(const TrainedModel<T>& m, const Volume4& vol) {
    if (vol.channels != m.model.channels_per_slice)
        throw ConfigError("predict: volume has " + std::to_string(vol.channels) +
                          " channels, model expects " +
                          std::to_string(m.model.channels_per_slice));
    Vol3<float> prob(vol.dims);
    const std::size_t plane = static_cast<std::size_t>(vol.dims.ny) * vol.dims.nx;
    std::vector<std::vector<T>> scratch;
    for (int z = 0; z < vol.dims.nz; ++z) {
        auto frame = stack_frame<T>(vol, z, m.model.context_slices);
        detail::infer_frame(frame, m.params, scratch, prob.data.data() + z * plane);
    }
    return prob;
}

template <typename T>
double validation_metric(SelectionMetric kind, const std::vector<const Case*>& val_cases,
                         const std::vector<Vol3<std::uint8_t>>& val_masks,
                         const CensorPlan& plan, const std::vector<grad::Tensor<T>>& params,
                         const ModelConfig& mc, const LossSpec& loss_spec);

// Trains on the censored annotations and selects the epoch with the best
// validation metric (computed against the identically censored validation
// annotations). Deterministic given the config seeds.
template <typename T = float>
TrainedModel<T> train(const Dataset& ds, const CensorPlan& plan, const LossSpec& loss_spec,
                      const ModelConfig& mc, const TrainConfig& tc) {
    mc.validate();
    tc.validate();
    loss_spec.validate();
    if (mc.channels_per_slice != ds.spec.channels)
        throw ConfigError("train: model expects " + std::to_string(mc.channels_per_slice) +
                          " channels per slice, dataset has " +
                          std::to_string(ds.spec.channels));
    auto train_cases = ds.cases_in(Split::train);
    auto val_cases = ds.cases_in(Split::validation);
    if (train_cases.empty() || val_cases.empty())
        throw ConfigError("train: dataset needs nonempty train and validation splits");

    std::vector<Vol3<std::uint8_t>> train_masks, val_masks;
    for (const Case* c : train_cases) train_masks.push_back(apply_plan(*c, plan));
    for (const Case* c : val_cases) val_masks.push_back(apply_plan(*c, plan));

    TrainedModel<T> out;
    out.model = mc;
    out.train_cfg = tc;
    std::vector<grad::Tensor<T>> params = init_params<T>(mc, tc.seed);

    std::vector<int> z_counts;
    for (const Case* c : train_cases) z_counts.push_back(c->volume.dims.nz);

    grad::Sgd<T> opt;
    opt.l2 = static_cast<T>(tc.l2);
    opt.momentum = static_cast<T>(tc.momentum);

    std::vector<std::vector<T>> grad_sum(params.size());
    int best_epoch = -1;
    double best_metric = 0.0;
    std::vector<grad::Tensor<T>> best_params;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const double lr_e =
            tc.lr * std::pow(tc.lr_decay_gamma, epoch / tc.lr_decay_every);
        opt.lr = static_cast<T>(lr_e);

        LossSpec epoch_spec = loss_spec;
        if (epoch < tc.bootstrap_warmup && (loss_spec.kind == LossKind::bootstrap ||
                                            loss_spec.kind == LossKind::lopsided_bootstrap)) {
            epoch_spec.beta = 0.0;
            if (tc.warmup_alpha > 0.0) epoch_spec.alpha = tc.warmup_alpha;
        }

        auto schedule = make_frame_schedule(z_counts, tc.seed, epoch);
        if (tc.frames_per_epoch > 0 &&
            schedule.size() > static_cast<std::size_t>(tc.frames_per_epoch))
            schedule.resize(static_cast<std::size_t>(tc.frames_per_epoch));

        for (auto& g : grad_sum) g.clear();
        int in_batch = 0;
        double loss_acc = 0.0;

        auto flush = [&](int count) {
            if (count == 0) return;
            std::vector<grad::Tensor<T>*> ptrs;
            for (auto& p : params) ptrs.push_back(&p);
            if (count > 1) {
                const T inv = T(1) / static_cast<T>(count);
                for (auto& g : grad_sum)
                    for (auto& v : g) v *= inv;
            }
            opt.step(ptrs, grad_sum);
            for (auto& g : grad_sum) g.clear();
        };

        for (std::size_t fi = 0; fi < schedule.size(); ++fi) {
            const auto [ci, z] = schedule[fi];
            const Case& c = *train_cases[ci];

            grad::Tape<T> tape;
            std::vector<grad::Var<T>> vars;
            vars.reserve(params.size());
            for (const auto& p : params) vars.push_back(tape.param(p));
            auto input = tape.constant(stack_frame<T>(c.volume, z, mc.context_slices));
            auto probs = forward_probs(tape, input, vars);
            auto target = mask_slice<T>(train_masks[ci], z);
            auto loss = segmentation_loss(probs, target, epoch_spec);
            const double loss_val = static_cast<double>(tape.value(loss.id).data[0]);
            if (!std::isfinite(loss_val))
                throw ComputeError("train: loss diverged at epoch " + std::to_string(epoch) +
                                   ", frame " + std::to_string(fi));
            loss_acc += loss_val;
            tape.backward(loss.id);

            for (std::size_t pi = 0; pi < params.size(); ++pi) {
                const auto& g = tape.value(vars[pi].id).grad;
                if (grad_sum[pi].empty()) {
                    grad_sum[pi] = g;
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i) grad_sum[pi][i] += g[i];
                }
            }
            if (++in_batch == tc.batch_size) {
                flush(in_batch);
                in_batch = 0;
            }
        }
        flush(in_batch);

        EpochStats stats;
        stats.lr = lr_e;
        stats.train_loss =
            schedule.empty() ? 0.0 : loss_acc / static_cast<double>(schedule.size());
        stats.val_metric =
            validation_metric(tc.selection, val_cases, val_masks, plan, params, mc, loss_spec);
        if (!std::isfinite(stats.val_metric))
            throw ComputeError("train: validation metric diverged at epoch " +
                               std::to_string(epoch));
        out.history.push_back(stats);

        const bool better =
            best_epoch < 0 ||
            (tc.selection == SelectionMetric::val_loss ? stats.val_metric < best_metric
                                                       : stats.val_metric > best_metric);
        if (better) {
            best_epoch = epoch;
            best_metric = stats.val_metric;
            best_params = params;
        }
    }

    out.selected_epoch = best_epoch;
    out.params = std::move(best_params);
    return out;
}

template <typename T>
double validation_metric(SelectionMetric kind, const std::vector<const Case*>& val_cases,
                         const std::vector<Vol3<std::uint8_t>>& val_masks,
                         const CensorPlan& plan, const std::vector<grad::Tensor<T>>& params,
                         const ModelConfig& mc, const LossSpec& loss_spec) {
    if (kind == SelectionMetric::val_loss) {
        double acc = 0.0;
        std::size_t frames = 0;
        for (std::size_t vi = 0; vi < val_cases.size(); ++vi) {
            const Case& c = *val_cases[vi];
            for (int z = 0; z < c.volume.dims.nz; ++z) {
                grad::Tape<T> tape;
                std::vector<grad::Var<T>> vars;
                for (const auto& p : params) vars.push_back(tape.constant(p));
                auto input = tape.constant(stack_frame<T>(c.volume, z, mc.context_slices));
                auto probs = forward_probs(tape, input, vars);
                auto target = mask_slice<T>(val_masks[vi], z);
                auto loss = segmentation_loss(probs, target, loss_spec);
                acc += static_cast<double>(tape.value(loss.id).data[0]);
                ++frames;
            }
        }
        return frames ? acc / static_cast<double>(frames) : 0.0;
    }

    // val_map: lesion-wise mean average precision against the retained
    // (censored) validation annotations. Higher is better.
    std::vector<PooledDetection> pooled;
    int n_gt = 0;
    std::vector<std::vector<T>> scratch;
    const std::size_t n_layers = params.size() / 2;
    (void)n_layers;
    for (std::size_t vi = 0; vi < val_cases.size(); ++vi) {
        const Case& c = *val_cases[vi];
        Vol3<float> prob(c.volume.dims);
        const std::size_t plane =
            static_cast<std::size_t>(c.volume.dims.ny) * c.volume.dims.nx;
        for (int z = 0; z < c.volume.dims.nz; ++z) {
            auto frame = stack_frame<T>(c.volume, z, mc.context_slices);
            detail::infer_frame(frame, params, scratch, prob.data.data() + z * plane);
        }
        LesionSet retained = retained_lesions(c, plan);
        n_gt += static_cast<int>(retained.size());
        auto mask = binarize(prob);
        auto comps = connected_components_3d(mask, 26);
        auto dets = make_components(comps, prob, c.volume.spacing);
        auto res = match(dets, retained, c.volume.spacing);
        for (const auto& d : res.detections)
            pooled.push_back({d.comp.confidence, d.tp, c.id, d.matched_lesion});
    }
    if (n_gt == 0) return 0.0;
    return mean_average_precision(pr_curve(pooled, n_gt));
}

}  // namespace lesionlab

#endif  // LESIONLAB_SEGNET_HPP
