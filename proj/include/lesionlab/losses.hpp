#ifndef LESIONLAB_LOSSES_HPP
#define LESIONLAB_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lesionlab/autograd.hpp"
#include "lesionlab/errors.hpp"

// Per-voxel two-class segmentation losses over softmax probability maps.
// All four kinds share one kernel:
//
//     value = w * ((1-b)*ce + b*fb)
//
// with ce the cross-entropy against the label, fb the cross-entropy against
// the voxel's own argmax prediction (gradient-detached), and (w, b) chosen
// per kind. Identical arithmetic on the shared path makes the reduction
// identities (class_weighted at alpha=1 == ce, bootstrap at beta=0 == ce,
// lopsided at beta=0 == class_weighted) exact rather than approximate.

namespace lesionlab {

enum class LossKind { ce, class_weighted, bootstrap, lopsided_bootstrap };

inline const char* loss_kind_name(LossKind k) {
    switch (k) {
        case LossKind::ce: return "ce";
        case LossKind::class_weighted: return "class_weighted";
        case LossKind::bootstrap: return "bootstrap";
        case LossKind::lopsided_bootstrap: return "lopsided_bootstrap";
    }
    return "?";
}

inline LossKind loss_kind_from(const std::string& s) {
    if (s == "ce") return LossKind::ce;
    if (s == "class_weighted") return LossKind::class_weighted;
    if (s == "bootstrap") return LossKind::bootstrap;
    if (s == "lopsided_bootstrap") return LossKind::lopsided_bootstrap;
    throw ConfigError("unknown loss kind '" + s + "'");
}

struct LossSpec {
    LossKind kind = LossKind::ce;
    double alpha = 1.0;  // positive-voxel weight (class_weighted, lopsided)
    double beta = 0.0;   // feedback mixture weight (bootstrap, lopsided)

    void validate() const {
        if (alpha < 1.0)
            throw ConfigError("loss: alpha must be >= 1, got " + std::to_string(alpha));
        if (beta < 0.0 || beta > 1.0)
            throw ConfigError("loss: beta must lie in [0,1], got " + std::to_string(beta));
    }

    std::string label() const {
        std::string s = loss_kind_name(kind);
        if (kind == LossKind::class_weighted || kind == LossKind::lopsided_bootstrap)
            s += " a=" + std::to_string(alpha).substr(0, 4);
        if (kind == LossKind::bootstrap || kind == LossKind::lopsided_bootstrap)
            s += " b=" + std::to_string(beta).substr(0, 4);
        return s;
    }
};

namespace detail {

// Per-voxel weight and feedback mixture for one (kind, label) pair.
inline void loss_coeffs(const LossSpec& spec, bool positive, double& w, double& b) {
    switch (spec.kind) {
        case LossKind::ce:
            w = 1.0;
            b = 0.0;
            break;
        case LossKind::class_weighted:
            w = positive ? spec.alpha : 1.0;
            b = 0.0;
            break;
        case LossKind::bootstrap:
            w = 1.0;
            b = spec.beta;
            break;
        case LossKind::lopsided_bootstrap:
            w = positive ? spec.alpha : 1.0;
            b = positive ? 0.0 : spec.beta;
            break;
    }
}

template <typename T>
inline double neg_log_clamped(T p) {
    const double c = std::clamp(static_cast<double>(p), grad::kLogClampEps,
                                1.0 - grad::kLogClampEps);
    return -std::log(c);
}

template <typename T>
inline bool clamp_interior(T p) {
    return static_cast<double>(p) > grad::kLogClampEps &&
           static_cast<double>(p) < 1.0 - grad::kLogClampEps;
}

}  // namespace detail

// probs: [N,2,H,W] softmax output (channel 1 = lesion); target: [N,H,W]
// binary labels. Mean reduction over all N*H*W voxels. The argmax target of
// the feedback term is a constant: ties at p(lesion) == p(normal) resolve to
// the negative class and no gradient flows through the target choice.
template <typename T>
grad::Var<T> segmentation_loss(grad::Var<T> probs, const grad::Tensor<T>& target,
                               const LossSpec& spec) {
    spec.validate();
    grad::Tape<T>& tape = *probs.tape;
    const grad::Tensor<T>& tp = tape.value(probs.id);
    if (tp.shape.size() != 4 || tp.shape[1] != 2)
        throw ShapeError("segmentation_loss: probs must be [N,2,H,W], got " +
                         grad::shape_string(tp.shape));
    if (target.shape.size() != 3 || target.shape[0] != tp.shape[0] ||
        target.shape[1] != tp.shape[2] || target.shape[2] != tp.shape[3])
        throw ShapeError("segmentation_loss: target shape " + grad::shape_string(target.shape) +
                         " does not match probs " + grad::shape_string(tp.shape));

    const int n_batch = tp.shape[0];
    const std::size_t plane = static_cast<std::size_t>(tp.shape[2]) * tp.shape[3];
    const std::size_t n_vox = static_cast<std::size_t>(n_batch) * plane;

    double acc = 0.0;
    for (int n = 0; n < n_batch; ++n) {
        const T* p0 = tp.data.data() + static_cast<std::size_t>(n) * 2 * plane;
        const T* p1 = p0 + plane;
        const T* y = target.data.data() + static_cast<std::size_t>(n) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            const bool positive = y[i] != T(0);
            const bool argmax_lesion = p1[i] > p0[i];
            double w, b;
            detail::loss_coeffs(spec, positive, w, b);
            const double ce = detail::neg_log_clamped(positive ? p1[i] : p0[i]);
            const double fb = detail::neg_log_clamped(argmax_lesion ? p1[i] : p0[i]);
            acc += w * ((1.0 - b) * ce + b * fb);
        }
    }
    grad::Tensor<T> value = grad::Tensor<T>::scalar(
        static_cast<T>(acc / static_cast<double>(n_vox)));

    grad::Tensor<T> target_copy = target;
    return tape.emit(
        "segmentation_loss", {probs.id}, std::move(value),
        [p_id = probs.id, target = std::move(target_copy), spec, n_batch, plane,
         n_vox](grad::Tape<T>& t, int self) {
            grad::Tensor<T>& tp = t.value(p_id);
            if (!tp.requires_grad) return;
            tp.ensure_grad();
            const double g = static_cast<double>(t.value(self).grad[0]) /
                             static_cast<double>(n_vox);
            for (int n = 0; n < n_batch; ++n) {
                const std::size_t base = static_cast<std::size_t>(n) * 2 * plane;
                const T* p0 = tp.data.data() + base;
                const T* p1 = p0 + plane;
                T* g0 = tp.grad.data() + base;
                T* g1 = g0 + plane;
                const T* y = target.data.data() + static_cast<std::size_t>(n) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const bool positive = y[i] != T(0);
                    const bool argmax_lesion = p1[i] > p0[i];
                    double w, b;
                    detail::loss_coeffs(spec, positive, w, b);
                    const T& py = positive ? p1[i] : p0[i];
                    T& gy = positive ? g1[i] : g0[i];
                    if (detail::clamp_interior(py))
                        gy += static_cast<T>(-g * w * (1.0 - b) / static_cast<double>(py));
                    if (b != 0.0) {
                        const T& pm = argmax_lesion ? p1[i] : p0[i];
                        T& gm = argmax_lesion ? g1[i] : g0[i];
                        if (detail::clamp_interior(pm))
                            gm += static_cast<T>(-g * w * b / static_cast<double>(pm));
                    }
                }
            }
        });
}

inline std::vector<std::size_t> prob_histogram(const std::vector<double>& probs, int bins) {
    if (bins <= 0) throw ConfigError("prob_histogram: bins must be positive");
    std::vector<std::size_t> hist(static_cast<std::size_t>(bins), 0);
    for (double p : probs) {
        const double c = std::clamp(p, 0.0, 1.0);
        int b = static_cast<int>(c * bins);
        if (b >= bins) b = bins - 1;  // p == 1.0 belongs to the last bin
        ++hist[static_cast<std::size_t>(b)];
    }
    return hist;
}

// Shannon entropy (natural log) of a renormalized count histogram.
inline double histogram_entropy(const std::vector<std::size_t>& hist) {
    std::size_t total = 0;
    for (std::size_t count : hist) total += count;
    if (total == 0) throw ComputeError("histogram_entropy: empty histogram");
    double h = 0.0;
    for (std::size_t count : hist) {
        if (count == 0) continue;
        const double q = static_cast<double>(count) / static_cast<double>(total);
        h -= q * std::log(q);
    }
    return h;
}

// Shannon entropy (natural log) of the renormalized probability histogram.
inline double lesion_prob_entropy(const std::vector<double>& probs, int bins = 100) {
    if (probs.empty()) throw ComputeError("lesion_prob_entropy: empty voxel set");
    return histogram_entropy(prob_histogram(probs, bins));
}

}  // namespace lesionlab

#endif  // LESIONLAB_LOSSES_HPP
