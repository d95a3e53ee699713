#ifndef LESIONLAB_AUTOGRAD_HPP
#define LESIONLAB_AUTOGRAD_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lesionlab/tensor.hpp"

// Minimal reverse-mode autodiff over dense tensors: a tape of nodes in
// creation (= topological) order, each carrying its output tensor and a
// closure that scatters the output gradient onto its inputs. Just enough
// ops to train a small convolutional segmenter.

namespace lesionlab::grad {

inline constexpr double kLogClampEps = 1e-12;

template <typename T>
class Tape;

template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    Tensor<T>& tensor() const { return tape->value(id); }
    const std::vector<T>& data() const { return tape->value(id).data; }
    const std::vector<T>& grad() const { return tape->value(id).grad; }
};

template <typename T>
class Tape {
public:
    using BackFn = std::function<void(Tape&, int self)>;

    struct Node {
        Tensor<T> tensor;
        const char* op;
        std::vector<int> inputs;
        BackFn backward;
    };

    Var<T> leaf(Tensor<T> t) {
        nodes_.push_back(Node{std::move(t), "leaf", {}, nullptr});
        return {this, static_cast<int>(nodes_.size()) - 1};
    }

    Var<T> param(Tensor<T> t) {
        t.requires_grad = true;
        return leaf(std::move(t));
    }

    Var<T> constant(Tensor<T> t) {
        t.requires_grad = false;
        return leaf(std::move(t));
    }

    Var<T> emit(const char* op, std::vector<int> inputs, Tensor<T> value, BackFn back) {
        for (int in : inputs) {
            if (nodes_[in].tensor.requires_grad) {
                value.requires_grad = true;
                break;
            }
        }
        nodes_.push_back(Node{std::move(value), op, std::move(inputs), std::move(back)});
        return {this, static_cast<int>(nodes_.size()) - 1};
    }

    Tensor<T>& value(int id) { return nodes_[id].tensor; }
    const Tensor<T>& value(int id) const { return nodes_[id].tensor; }
    const Node& node(int id) const { return nodes_[id]; }
    std::size_t size() const { return nodes_.size(); }

    // Reverse sweep from a scalar loss. Overwrites all grads: on return,
    // every node off the path to the loss holds an all-zero gradient.
    void backward(int loss_id) {
        Node& loss = nodes_[loss_id];
        if (!loss.tensor.is_scalar()) {
            throw ShapeError("backward: loss must be scalar, got shape " +
                             shape_string(loss.tensor.shape));
        }
        for (Node& n : nodes_) n.tensor.zero_grad();
        loss.tensor.grad[0] = T(1);

        std::vector<char> reached(nodes_.size(), 0);
        reached[loss_id] = 1;
        for (int id = loss_id; id >= 0; --id) {
            if (!reached[id]) continue;
            Node& n = nodes_[id];
            for (int in : n.inputs) reached[in] = 1;
            if (n.backward && n.tensor.requires_grad) n.backward(*this, id);
        }
    }

private:
    std::vector<Node> nodes_;
};

namespace detail {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape == b.shape) return;
    if (a.shape.size() != b.shape.size()) {
        throw ShapeError(std::string(op) + ": rank mismatch " + shape_string(a.shape) +
                         " vs " + shape_string(b.shape));
    }
    for (std::size_t d = 0; d < a.shape.size(); ++d) {
        if (a.shape[d] != b.shape[d]) {
            throw ShapeError(std::string(op) + ": dimension " + std::to_string(d) +
                             " mismatch, " + std::to_string(a.shape[d]) + " vs " +
                             std::to_string(b.shape[d]));
        }
    }
}

}  // namespace detail

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& ta = tape.value(a.id);
    const Tensor<T>& tb = tape.value(b.id);
    detail::check_same_shape(ta, tb, "add");
    Tensor<T> out = Tensor<T>::zeros(ta.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = ta.data[i] + tb.data[i];
    return tape.emit("add", {a.id, b.id}, std::move(out),
                     [a_id = a.id, b_id = b.id](Tape<T>& t, int self) {
                         const std::vector<T>& g = t.value(self).grad;
                         Tensor<T>& ta = t.value(a_id);
                         Tensor<T>& tb = t.value(b_id);
                         if (ta.requires_grad) {
                             ta.ensure_grad();
                             for (std::size_t i = 0; i < g.size(); ++i) ta.grad[i] += g[i];
                         }
                         if (tb.requires_grad) {
                             tb.ensure_grad();
                             for (std::size_t i = 0; i < g.size(); ++i) tb.grad[i] += g[i];
                         }
                     });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& ta = tape.value(a.id);
    const Tensor<T>& tb = tape.value(b.id);
    detail::check_same_shape(ta, tb, "mul");
    Tensor<T> out = Tensor<T>::zeros(ta.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = ta.data[i] * tb.data[i];
    return tape.emit("mul", {a.id, b.id}, std::move(out),
                     [a_id = a.id, b_id = b.id](Tape<T>& t, int self) {
                         const std::vector<T>& g = t.value(self).grad;
                         Tensor<T>& ta = t.value(a_id);
                         Tensor<T>& tb = t.value(b_id);
                         if (ta.requires_grad) {
                             ta.ensure_grad();
                             for (std::size_t i = 0; i < g.size(); ++i)
                                 ta.grad[i] += g[i] * tb.data[i];
                         }
                         if (tb.requires_grad) {
                             tb.ensure_grad();
                             for (std::size_t i = 0; i < g.size(); ++i)
                                 tb.grad[i] += g[i] * ta.data[i];
                         }
                     });
}

template <typename T>
Var<T> scale(Var<T> a, T c) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& ta = tape.value(a.id);
    Tensor<T> out = Tensor<T>::zeros(ta.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = c * ta.data[i];
    return tape.emit("scale", {a.id}, std::move(out), [a_id = a.id, c](Tape<T>& t, int self) {
        const std::vector<T>& g = t.value(self).grad;
        Tensor<T>& ta = t.value(a_id);
        if (!ta.requires_grad) return;
        ta.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ta.grad[i] += c * g[i];
    });
}

// Natural log with the input clamped from below at eps; the clamped region
// has zero slope.
template <typename T>
Var<T> log_clamped(Var<T> a, T eps = T(kLogClampEps)) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& ta = tape.value(a.id);
    Tensor<T> out = Tensor<T>::zeros(ta.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = std::log(std::max(ta.data[i], eps));
    return tape.emit("log", {a.id}, std::move(out), [a_id = a.id, eps](Tape<T>& t, int self) {
        const std::vector<T>& g = t.value(self).grad;
        Tensor<T>& ta = t.value(a_id);
        if (!ta.requires_grad) return;
        ta.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (ta.data[i] > eps) ta.grad[i] += g[i] / ta.data[i];
        }
    });
}

template <typename T>
Var<T> relu(Var<T> a) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& ta = tape.value(a.id);
    Tensor<T> out = Tensor<T>::zeros(ta.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::max(ta.data[i], T(0));
    return tape.emit("relu", {a.id}, std::move(out), [a_id = a.id](Tape<T>& t, int self) {
        const std::vector<T>& g = t.value(self).grad;
        Tensor<T>& ta = t.value(a_id);
        if (!ta.requires_grad) return;
        ta.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (ta.data[i] > T(0)) ta.grad[i] += g[i];
        }
    });
}

// Softmax over the class axis of an [N,C,H,W] tensor.
template <typename T>
Var<T> softmax_channels(Var<T> a) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& ta = tape.value(a.id);
    if (ta.shape.size() != 4) {
        throw ShapeError("softmax_channels: expected rank-4 [N,C,H,W], got " +
                         shape_string(ta.shape));
    }
    const int n_batch = ta.shape[0], n_class = ta.shape[1];
    const std::size_t plane = static_cast<std::size_t>(ta.shape[2]) * ta.shape[3];
    Tensor<T> out = Tensor<T>::zeros(ta.shape);
    for (int n = 0; n < n_batch; ++n) {
        const std::size_t base = static_cast<std::size_t>(n) * n_class * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            T mx = ta.data[base + p];
            for (int c = 1; c < n_class; ++c)
                mx = std::max(mx, ta.data[base + c * plane + p]);
            T denom = T(0);
            for (int c = 0; c < n_class; ++c) {
                const T e = std::exp(ta.data[base + c * plane + p] - mx);
                out.data[base + c * plane + p] = e;
                denom += e;
            }
            for (int c = 0; c < n_class; ++c) out.data[base + c * plane + p] /= denom;
        }
    }
    return tape.emit("softmax_channels", {a.id}, std::move(out),
                     [a_id = a.id, n_batch, n_class, plane](Tape<T>& t, int self) {
                         const Tensor<T>& o = t.value(self);
                         const std::vector<T>& g = o.grad;
                         Tensor<T>& ta = t.value(a_id);
                         if (!ta.requires_grad) return;
                         ta.ensure_grad();
                         for (int n = 0; n < n_batch; ++n) {
                             const std::size_t base =
                                 static_cast<std::size_t>(n) * n_class * plane;
                             for (std::size_t p = 0; p < plane; ++p) {
                                 T dot = T(0);
                                 for (int c = 0; c < n_class; ++c) {
                                     const std::size_t i = base + c * plane + p;
                                     dot += g[i] * o.data[i];
                                 }
                                 for (int c = 0; c < n_class; ++c) {
                                     const std::size_t i = base + c * plane + p;
                                     ta.grad[i] += o.data[i] * (g[i] - dot);
                                 }
                             }
                         }
                     });
}

namespace detail {

// out[n,f,y,x] = bias[f] + sum_{c,ky,kx} in[n,c,y+ky-P,x+kx-P] * K[f,c,ky,kx]
// Zero padding, stride 1. The inner x loop is contiguous on both sides so it
// vectorizes.
template <typename T>
void conv2d_forward(const T* in, const T* kern, const T* bias, T* out, int n_batch, int c_in,
                    int h, int w, int f_out, int k) {
    const int pad = k / 2;
    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    for (int n = 0; n < n_batch; ++n) {
        const T* in_n = in + static_cast<std::size_t>(n) * c_in * in_plane;
        T* out_n = out + static_cast<std::size_t>(n) * f_out * in_plane;
        for (int f = 0; f < f_out; ++f) {
            T* out_f = out_n + static_cast<std::size_t>(f) * in_plane;
            std::fill(out_f, out_f + in_plane, bias[f]);
            for (int c = 0; c < c_in; ++c) {
                const T* in_c = in_n + static_cast<std::size_t>(c) * in_plane;
                const T* k_fc = kern + ((static_cast<std::size_t>(f) * c_in + c) * k) * k;
                for (int ky = 0; ky < k; ++ky) {
                    const int y_lo = std::max(0, pad - ky);
                    const int y_hi = std::min(h, h + pad - ky);
                    for (int kx = 0; kx < k; ++kx) {
                        const T wgt = k_fc[ky * k + kx];
                        if (wgt == T(0)) continue;
                        const int x_lo = std::max(0, pad - kx);
                        const int x_hi = std::min(w, w + pad - kx);
                        for (int y = y_lo; y < y_hi; ++y) {
                            const T* src = in_c + static_cast<std::size_t>(y + ky - pad) * w +
                                           (x_lo + kx - pad);
                            T* dst = out_f + static_cast<std::size_t>(y) * w + x_lo;
                            for (int x = 0; x < x_hi - x_lo; ++x) dst[x] += wgt * src[x];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_input(const T* gout, const T* kern, T* gin, int n_batch, int c_in, int h,
                           int w, int f_out, int k) {
    const int pad = k / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int n = 0; n < n_batch; ++n) {
        const T* g_n = gout + static_cast<std::size_t>(n) * f_out * plane;
        T* gi_n = gin + static_cast<std::size_t>(n) * c_in * plane;
        for (int c = 0; c < c_in; ++c) {
            T* gi_c = gi_n + static_cast<std::size_t>(c) * plane;
            for (int f = 0; f < f_out; ++f) {
                const T* g_f = g_n + static_cast<std::size_t>(f) * plane;
                const T* k_fc = kern + ((static_cast<std::size_t>(f) * c_in + c) * k) * k;
                for (int ky = 0; ky < k; ++ky) {
                    const int y_lo = std::max(0, pad - ky);
                    const int y_hi = std::min(h, h + pad - ky);
                    for (int kx = 0; kx < k; ++kx) {
                        const T wgt = k_fc[ky * k + kx];
                        if (wgt == T(0)) continue;
                        const int x_lo = std::max(0, pad - kx);
                        const int x_hi = std::min(w, w + pad - kx);
                        for (int y = y_lo; y < y_hi; ++y) {
                            T* dst = gi_c + static_cast<std::size_t>(y + ky - pad) * w +
                                     (x_lo + kx - pad);
                            const T* src = g_f + static_cast<std::size_t>(y) * w + x_lo;
                            for (int x = 0; x < x_hi - x_lo; ++x) dst[x] += wgt * src[x];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_kernel(const T* in, const T* gout, T* gkern, T* gbias, int n_batch,
                            int c_in, int h, int w, int f_out, int k) {
    const int pad = k / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int n = 0; n < n_batch; ++n) {
        const T* in_n = in + static_cast<std::size_t>(n) * c_in * plane;
        const T* g_n = gout + static_cast<std::size_t>(n) * f_out * plane;
        for (int f = 0; f < f_out; ++f) {
            const T* g_f = g_n + static_cast<std::size_t>(f) * plane;
            T bsum = T(0);
            for (std::size_t i = 0; i < plane; ++i) bsum += g_f[i];
            gbias[f] += bsum;
            for (int c = 0; c < c_in; ++c) {
                const T* in_c = in_n + static_cast<std::size_t>(c) * plane;
                T* gk_fc = gkern + ((static_cast<std::size_t>(f) * c_in + c) * k) * k;
                for (int ky = 0; ky < k; ++ky) {
                    const int y_lo = std::max(0, pad - ky);
                    const int y_hi = std::min(h, h + pad - ky);
                    for (int kx = 0; kx < k; ++kx) {
                        const int x_lo = std::max(0, pad - kx);
                        const int x_hi = std::min(w, w + pad - kx);
                        T acc = T(0);
                        for (int y = y_lo; y < y_hi; ++y) {
                            const T* src = in_c + static_cast<std::size_t>(y + ky - pad) * w +
                                           (x_lo + kx - pad);
                            const T* g_row = g_f + static_cast<std::size_t>(y) * w + x_lo;
                            for (int x = 0; x < x_hi - x_lo; ++x) acc += g_row[x] * src[x];
                        }
                        gk_fc[ky * k + kx] += acc;
                    }
                }
            }
        }
    }
}

}  // namespace detail

// Same-padded stride-1 convolution: input [N,C,H,W], kernel [F,C,k,k] with k
// odd, bias [F] -> output [N,F,H,W].
template <typename T>
Var<T> conv2d(Var<T> input, Var<T> kernel, Var<T> bias) {
    Tape<T>& tape = *input.tape;
    const Tensor<T>& tin = tape.value(input.id);
    const Tensor<T>& tk = tape.value(kernel.id);
    const Tensor<T>& tb = tape.value(bias.id);
    if (tin.shape.size() != 4)
        throw ShapeError("conv2d: input must be rank-4 [N,C,H,W], got " + shape_string(tin.shape));
    if (tk.shape.size() != 4)
        throw ShapeError("conv2d: kernel must be rank-4 [F,C,k,k], got " + shape_string(tk.shape));
    const int n_batch = tin.shape[0], c_in = tin.shape[1], h = tin.shape[2], w = tin.shape[3];
    const int f_out = tk.shape[0], k = tk.shape[2];
    if (tk.shape[1] != c_in)
        throw ShapeError("conv2d: kernel channel dimension " + std::to_string(tk.shape[1]) +
                         " does not match input channel dimension " + std::to_string(c_in));
    if (tk.shape[3] != k)
        throw ShapeError("conv2d: kernel must be square, got " + shape_string(tk.shape));
    if (k % 2 == 0) throw ShapeError("conv2d: kernel extent must be odd, got " + std::to_string(k));
    if (tb.shape.size() != 1 || tb.shape[0] != f_out)
        throw ShapeError("conv2d: bias dimension 0 must equal filter count " +
                         std::to_string(f_out) + ", got " + shape_string(tb.shape));

    Tensor<T> out = Tensor<T>::zeros({n_batch, f_out, h, w});
    detail::conv2d_forward(tin.data.data(), tk.data.data(), tb.data.data(), out.data.data(),
                           n_batch, c_in, h, w, f_out, k);
    return tape.emit(
        "conv2d", {input.id, kernel.id, bias.id}, std::move(out),
        [in_id = input.id, k_id = kernel.id, b_id = bias.id, n_batch, c_in, h, w, f_out,
         k](Tape<T>& t, int self) {
            const std::vector<T>& g = t.value(self).grad;
            Tensor<T>& tin = t.value(in_id);
            Tensor<T>& tk = t.value(k_id);
            Tensor<T>& tb = t.value(b_id);
            if (tk.requires_grad || tb.requires_grad) {
                tk.ensure_grad();
                tb.ensure_grad();
                detail::conv2d_backward_kernel(tin.data.data(), g.data(), tk.grad.data(),
                                               tb.grad.data(), n_batch, c_in, h, w, f_out, k);
            }
            if (tin.requires_grad) {
                tin.ensure_grad();
                detail::conv2d_backward_input(g.data(), tk.data.data(), tin.grad.data(), n_batch,
                                              c_in, h, w, f_out, k);
            }
        });
}

template <typename T>
Var<T> reduce_sum(Var<T> a) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& ta = tape.value(a.id);
    double acc = 0.0;
    for (T v : ta.data) acc += static_cast<double>(v);
    return tape.emit("reduce_sum", {a.id}, Tensor<T>::scalar(static_cast<T>(acc)),
                     [a_id = a.id](Tape<T>& t, int self) {
                         const T g = t.value(self).grad[0];
                         Tensor<T>& ta = t.value(a_id);
                         if (!ta.requires_grad) return;
                         ta.ensure_grad();
                         for (std::size_t i = 0; i < ta.grad.size(); ++i) ta.grad[i] += g;
                     });
}

template <typename T>
Var<T> reduce_mean(Var<T> a) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& ta = tape.value(a.id);
    const std::size_t n = ta.data.size();
    double acc = 0.0;
    for (T v : ta.data) acc += static_cast<double>(v);
    return tape.emit("reduce_mean", {a.id},
                     Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n))),
                     [a_id = a.id, n](Tape<T>& t, int self) {
                         const T g = t.value(self).grad[0] / static_cast<T>(n);
                         Tensor<T>& ta = t.value(a_id);
                         if (!ta.requires_grad) return;
                         ta.ensure_grad();
                         for (std::size_t i = 0; i < ta.grad.size(); ++i) ta.grad[i] += g;
                     });
}

// p <- p - lr * (g + l2 * p)
template <typename T>
void sgd_step(Tensor<T>& param, const std::vector<T>& grad, T lr, T l2) {
    if (grad.size() != param.data.size()) {
        throw ShapeError("sgd_step: gradient length " + std::to_string(grad.size()) +
                         " does not match parameter length " + std::to_string(param.data.size()));
    }
    for (std::size_t i = 0; i < param.data.size(); ++i)
        param.data[i] -= lr * (grad[i] + l2 * param.data[i]);
}

// SGD with L2 and optional momentum. With momentum == 0 the update equals
// the plain sgd_step above.
template <typename T>
struct Sgd {
    T lr;
    T l2 = T(0);
    T momentum = T(0);
    std::vector<std::vector<T>> velocity;

    void step(std::span<Tensor<T>* const> params, std::span<const std::vector<T>> grads) {
        if (params.size() != grads.size())
            throw ShapeError("sgd: parameter/gradient count mismatch");
        if (momentum == T(0)) {
            for (std::size_t i = 0; i < params.size(); ++i)
                sgd_step(*params[i], grads[i], lr, l2);
            return;
        }
        if (velocity.size() != params.size()) {
            velocity.clear();
            for (std::size_t i = 0; i < params.size(); ++i)
                velocity.emplace_back(params[i]->data.size(), T(0));
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor<T>& p = *params[i];
            const std::vector<T>& g = grads[i];
            std::vector<T>& v = velocity[i];
            for (std::size_t j = 0; j < p.data.size(); ++j) {
                v[j] = momentum * v[j] + (g[j] + l2 * p.data[j]);
                p.data[j] -= lr * v[j];
            }
        }
    }
};

}  // namespace lesionlab::grad

#endif  // LESIONLAB_AUTOGRAD_HPP
