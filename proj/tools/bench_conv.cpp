// Rough throughput check for the conv stack on one training-shaped frame.
#include <chrono>
#include <cstdio>

#include "lesionlab/autograd.hpp"
#include "lesionlab/rng.hpp"

using namespace lesionlab;

int main() {
    const int h = 32, w = 32, c_in = 20, width = 16, k = 3;
    rng::Stream rs(7);

    grad::Tensor<float> in = grad::Tensor<float>::zeros({1, c_in, h, w});
    for (auto& v : in.data) v = static_cast<float>(rs.normal());

    auto make_kernel = [&](int f, int c, int kk) {
        grad::Tensor<float> t = grad::Tensor<float>::zeros({f, c, kk, kk});
        for (auto& v : t.data) v = static_cast<float>(rs.normal(0.0, 0.1));
        return t;
    };
    auto make_bias = [&](int f) {
        grad::Tensor<float> t = grad::Tensor<float>::zeros({f});
        return t;
    };

    grad::Tensor<float> k1 = make_kernel(width, c_in, k), b1 = make_bias(width);
    grad::Tensor<float> k2 = make_kernel(width, width, k), b2 = make_bias(width);
    grad::Tensor<float> k3 = make_kernel(2, width, 1), b3 = make_bias(2);

    const int iters = 200;
    double checksum = 0.0;
    auto t0 = std::chrono::steady_clock::now();
    for (int it = 0; it < iters; ++it) {
        grad::Tape<float> tape;
        auto x = tape.constant(in);
        auto vk1 = tape.param(k1), vb1 = tape.param(b1);
        auto vk2 = tape.param(k2), vb2 = tape.param(b2);
        auto vk3 = tape.param(k3), vb3 = tape.param(b3);
        auto h1 = relu(conv2d(x, vk1, vb1));
        auto h2 = relu(conv2d(h1, vk2, vb2));
        auto logits = conv2d(h2, vk3, vb3);
        auto p = softmax_channels(logits);
        auto loss = reduce_mean(log_clamped(p));
        tape.backward(loss.id);
        checksum += tape.value(loss.id).data[0] + tape.value(vk1.id).grad[0];
    }
    auto t1 = std::chrono::steady_clock::now();
    const double sec = std::chrono::duration<double>(t1 - t0).count();

    // forward+backward ~ 3x forward MACs
    const double macs_fwd = double(h) * w * k * k * (double(c_in) * width + double(width) * width) +
                            double(h) * w * (width * 2);
    const double flops = 2.0 * 3.0 * macs_fwd * iters;
    std::printf("frames/sec: %.1f   approx GFLOP/s: %.2f   checksum %.6f\n", iters / sec,
                flops / sec / 1e9, checksum);
    return 0;
}
