#ifndef LESIONLAB_TENSOR_HPP
#define LESIONLAB_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace lesionlab {

// Thrown when tensor extents do not line up; the message names the
// offending dimension.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace grad {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor extent must be positive, got " + std::to_string(d));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

inline std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// Dense row-major tensor. `grad`, when in use, always mirrors `data`'s
// length; the autodiff tape allocates it lazily at backward time.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;
    bool requires_grad = false;
    std::vector<T> grad;

    Tensor() = default;
    Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel(shape)) {
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_string(shape));
        }
    }

    static Tensor zeros(Shape s) {
        const std::size_t n = numel(s);
        return Tensor(std::move(s), std::vector<T>(n, T(0)));
    }

    static Tensor full(Shape s, T value) {
        const std::size_t n = numel(s);
        return Tensor(std::move(s), std::vector<T>(n, value));
    }

    static Tensor scalar(T value) { return Tensor({1}, {value}); }

    std::size_t size() const { return data.size(); }
    bool is_scalar() const { return data.size() == 1; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
    void zero_grad() { grad.assign(data.size(), T(0)); }
};

}  // namespace grad
}  // namespace lesionlab

#endif  // LESIONLAB_TENSOR_HPP
