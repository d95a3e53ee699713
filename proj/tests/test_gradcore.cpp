#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "lesionlab/autograd.hpp"
#include "lesionlab/rng.hpp"

using namespace lesionlab;
using grad::Tensor;
using grad::Var;

namespace {

Tensor<double> random_tensor(grad::Shape shape, rng::Stream& rs, double lo = -1.0,
                             double hi = 1.0) {
    Tensor<double> t = Tensor<double>::zeros(std::move(shape));
    for (auto& v : t.data) v = rs.uniform(lo, hi);
    return t;
}

// Central finite differences against backward() for a scalar-valued graph.
// `build` must construct the graph on the given tape from the parameter
// tensors and return the loss node.
using GraphFn =
    std::function<Var<double>(grad::Tape<double>&, const std::vector<Tensor<double>>&)>;

void check_gradients(const GraphFn& build, std::vector<Tensor<double>> params,
                     double h = 1e-4, double tol = 1e-4) {
    grad::Tape<double> tape;
    {
        auto loss = build(tape, params);
        tape.backward(loss.id);
    }
    // Parameter vars are the first `params.size()` nodes by construction.
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const std::vector<double>& analytic = tape.value(static_cast<int>(pi)).grad;
        REQUIRE(analytic.size() == params[pi].data.size());
        for (std::size_t i = 0; i < params[pi].data.size(); ++i) {
            const double saved = params[pi].data[i];
            params[pi].data[i] = saved + h;
            grad::Tape<double> tp;
            const double fp = tp.value(build(tp, params).id).data[0];
            params[pi].data[i] = saved - h;
            grad::Tape<double> tm;
            const double fm = tm.value(build(tm, params).id).data[0];
            params[pi].data[i] = saved;
            const double fd = (fp - fm) / (2.0 * h);
            const double a = analytic[i];
            const double denom = std::max({std::abs(a), std::abs(fd), 1e-3});
            INFO("param " << pi << " element " << i << " analytic " << a << " fd " << fd);
            CHECK(std::abs(a - fd) / denom <= tol);
        }
    }
}

GraphFn params_as(const std::function<Var<double>(grad::Tape<double>&,
                                                  std::vector<Var<double>>&)>& fn) {
    return [fn](grad::Tape<double>& tape, const std::vector<Tensor<double>>& params) {
        std::vector<Var<double>> vars;
        vars.reserve(params.size());
        for (const auto& p : params) vars.push_back(tape.param(p));
        return fn(tape, vars);
    };
}

}  // namespace

TEST_CASE("conv2d: identity-like kernel scaling") {
    grad::Tape<double> tape;
    auto in = tape.constant(Tensor<double>::full({1, 1, 3, 3}, 1.0));
    auto k = tape.constant(Tensor<double>({1, 1, 1, 1}, {2.0}));
    auto b = tape.constant(Tensor<double>::zeros({1}));
    auto out = conv2d(in, k, b);
    for (double v : out.data()) CHECK(v == 2.0);
}

TEST_CASE("conv2d: zero kernel gives zero output") {
    rng::Stream rs(11);
    grad::Tape<double> tape;
    auto in = tape.constant(random_tensor({2, 3, 4, 5}, rs));
    auto k = tape.constant(Tensor<double>::zeros({2, 3, 3, 3}));
    auto b = tape.constant(Tensor<double>::zeros({2}));
    auto out = conv2d(in, k, b);
    for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("conv2d: matches naive six-loop oracle") {
    rng::Stream rs(12);
    Tensor<double> in = random_tensor({1, 2, 5, 5}, rs);
    Tensor<double> kern = random_tensor({3, 2, 3, 3}, rs);
    Tensor<double> bias = random_tensor({3}, rs);

    grad::Tape<double> tape;
    auto out = conv2d(tape.constant(in), tape.constant(kern), tape.constant(bias));

    // Independent direct convolution: out[f][y][x] = b[f] + sum over c,ky,kx.
    const int h = 5, w = 5, cin = 2, fout = 3, k = 3, pad = 1;
    for (int f = 0; f < fout; ++f) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = bias.data[f];
                for (int c = 0; c < cin; ++c) {
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            const int yy = y + ky - pad, xx = x + kx - pad;
                            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                            acc += in.data[(c * h + yy) * w + xx] *
                                   kern.data[((f * cin + c) * k + ky) * k + kx];
                        }
                    }
                }
                CHECK_THAT(out.data()[(f * h + y) * w + x],
                           Catch::Matchers::WithinAbs(acc, 1e-10));
            }
        }
    }
}

TEST_CASE("conv2d: shape errors name the offending dimension") {
    grad::Tape<double> tape;
    auto in = tape.constant(Tensor<double>::zeros({1, 3, 4, 4}));
    auto b = tape.constant(Tensor<double>::zeros({2}));
    SECTION("channel mismatch") {
        auto k = tape.constant(Tensor<double>::zeros({2, 2, 3, 3}));
        CHECK_THROWS_AS(conv2d(in, k, b), ShapeError);
        CHECK_THROWS_WITH(conv2d(in, k, b),
                          Catch::Matchers::ContainsSubstring("channel dimension"));
    }
    SECTION("even kernel") {
        auto k = tape.constant(Tensor<double>::zeros({2, 3, 2, 2}));
        CHECK_THROWS_AS(conv2d(in, k, b), ShapeError);
    }
    SECTION("bias mismatch") {
        auto k = tape.constant(Tensor<double>::zeros({3, 3, 3, 3}));
        CHECK_THROWS_AS(conv2d(in, k, b), ShapeError);
    }
}

TEST_CASE("softmax_channels: symmetry and normalization") {
    grad::Tape<double> tape;
    auto z = tape.constant(Tensor<double>::zeros({1, 2, 2, 2}));
    auto p = softmax_channels(z);
    for (double v : p.data()) CHECK(v == 0.5);

    rng::Stream rs(13);
    auto logits = tape.constant(random_tensor({2, 2, 3, 3}, rs, -12.0, 12.0));
    auto q = softmax_channels(logits);
    const auto& d = q.data();
    const std::size_t plane = 9;
    for (int n = 0; n < 2; ++n) {
        for (std::size_t i = 0; i < plane; ++i) {
            const double a = d[n * 2 * plane + i];
            const double b = d[n * 2 * plane + plane + i];
            CHECK_THAT(a + b, Catch::Matchers::WithinAbs(1.0, 1e-9));
            CHECK(a > 0.0);
            CHECK(a < 1.0);
        }
    }

    // At saturating logit gaps one side rounds to exactly 1.0 in double;
    // normalization must still hold and values stay within [0,1].
    auto extreme = tape.constant(Tensor<double>({1, 2, 1, 2}, {-300.0, 40.0, 300.0, -40.0}));
    auto qe = softmax_channels(extreme);
    for (int i = 0; i < 2; ++i) {
        const double a = qe.data()[i], b = qe.data()[2 + i];
        CHECK_THAT(a + b, Catch::Matchers::WithinAbs(1.0, 1e-9));
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
    }
}

TEST_CASE("relu: definition points") {
    grad::Tape<double> tape;
    auto x = tape.constant(Tensor<double>({2}, {-3.0, 3.0}));
    auto y = relu(x);
    CHECK(y.data()[0] == 0.0);
    CHECK(y.data()[1] == 3.0);
}

TEST_CASE("backward: sum gives ones, sum of squares gives 2x") {
    rng::Stream rs(14);
    Tensor<double> x = random_tensor({3, 4}, rs);
    {
        grad::Tape<double> tape;
        auto v = tape.param(x);
        auto loss = reduce_sum(v);
        tape.backward(loss.id);
        for (double g : v.grad()) CHECK(g == 1.0);
    }
    {
        grad::Tape<double> tape;
        auto v = tape.param(x);
        auto loss = reduce_sum(mul(v, v));
        tape.backward(loss.id);
        for (std::size_t i = 0; i < x.data.size(); ++i)
            CHECK_THAT(v.grad()[i], Catch::Matchers::WithinRel(2.0 * x.data[i], 1e-12));
    }
}

TEST_CASE("backward: rejects non-scalar loss") {
    grad::Tape<double> tape;
    auto v = tape.param(Tensor<double>::zeros({2, 2}));
    auto y = relu(v);
    CHECK_THROWS_AS(tape.backward(y.id), ShapeError);
}

TEST_CASE("backward: gradient accumulates across uses") {
    grad::Tape<double> tape;
    auto v = tape.param(Tensor<double>({2}, {1.0, 2.0}));
    auto loss = add(reduce_sum(v), reduce_sum(v));
    tape.backward(loss.id);
    for (double g : v.grad()) CHECK(g == 2.0);
}

TEST_CASE("backward: off-path gradients stay zero") {
    grad::Tape<double> tape;
    auto used = tape.param(Tensor<double>({2}, {1.0, 2.0}));
    auto unused = tape.param(Tensor<double>({2}, {3.0, 4.0}));
    auto dangling = relu(unused);  // never reaches the loss
    auto loss = reduce_sum(used);
    tape.backward(loss.id);
    for (double g : unused.grad()) CHECK(g == 0.0);
    for (double g : tape.value(dangling.id).grad) CHECK(g == 0.0);
}

TEST_CASE("finite differences: every op") {
    rng::Stream rs(15);
    SECTION("add, mul, scale") {
        check_gradients(params_as([](grad::Tape<double>&, std::vector<Var<double>>& v) {
                            return reduce_sum(scale(mul(add(v[0], v[1]), v[0]), 0.7));
                        }),
                        {random_tensor({2, 3}, rs), random_tensor({2, 3}, rs)});
    }
    SECTION("log_clamped on positive inputs") {
        check_gradients(params_as([](grad::Tape<double>&, std::vector<Var<double>>& v) {
                            return reduce_mean(log_clamped(v[0]));
                        }),
                        {random_tensor({3, 3}, rs, 0.1, 2.0)});
    }
    SECTION("relu away from the kink") {
        Tensor<double> x = random_tensor({4, 4}, rs);
        for (auto& v : x.data)
            if (std::abs(v) < 0.01) v = 0.05;
        check_gradients(params_as([](grad::Tape<double>&, std::vector<Var<double>>& v) {
                            return reduce_sum(mul(relu(v[0]), v[0]));
                        }),
                        {x});
    }
    SECTION("softmax_channels") {
        check_gradients(params_as([](grad::Tape<double>&, std::vector<Var<double>>& v) {
                            auto p = softmax_channels(v[0]);
                            return reduce_sum(mul(p, p));
                        }),
                        {random_tensor({1, 2, 3, 3}, rs, -2.0, 2.0)});
    }
    SECTION("conv2d w.r.t. input, kernel, bias") {
        check_gradients(params_as([](grad::Tape<double>&, std::vector<Var<double>>& v) {
                            return reduce_sum(mul(conv2d(v[0], v[1], v[2]),
                                                  conv2d(v[0], v[1], v[2])));
                        }),
                        {random_tensor({1, 2, 4, 4}, rs), random_tensor({2, 2, 3, 3}, rs),
                         random_tensor({2}, rs)});
    }
    SECTION("reduce_mean") {
        check_gradients(params_as([](grad::Tape<double>&, std::vector<Var<double>>& v) {
                            return reduce_mean(mul(v[0], v[0]));
                        }),
                        {random_tensor({5}, rs)});
    }
}

TEST_CASE("finite differences: three-layer conv net") {
    rng::Stream rs(16);
    std::vector<Tensor<double>> params = {
        random_tensor({3, 2, 3, 3}, rs, -0.5, 0.5), random_tensor({3}, rs, -0.1, 0.1),
        random_tensor({3, 3, 3, 3}, rs, -0.5, 0.5), random_tensor({3}, rs, -0.1, 0.1),
        random_tensor({2, 3, 1, 1}, rs, -0.5, 0.5), random_tensor({2}, rs, -0.1, 0.1)};
    Tensor<double> input = random_tensor({1, 2, 4, 4}, rs);
    check_gradients(
        [&input](grad::Tape<double>& tape, const std::vector<Tensor<double>>& p) {
            std::vector<Var<double>> v;
            for (const auto& t : p) v.push_back(tape.param(t));
            auto x = tape.constant(input);
            auto h1 = relu(conv2d(x, v[0], v[1]));
            auto h2 = relu(conv2d(h1, v[2], v[3]));
            auto probs = softmax_channels(conv2d(h2, v[4], v[5]));
            return reduce_mean(mul(probs, probs));
        },
        params);
}

TEST_CASE("sgd_step: hand examples") {
    Tensor<double> p = Tensor<double>::scalar(1.0);
    sgd_step(p, {0.0}, 0.1, 0.0);
    CHECK(p.data[0] == 1.0);

    p = Tensor<double>::scalar(1.0);
    sgd_step(p, {1.0}, 0.1, 0.0);
    CHECK_THAT(p.data[0], Catch::Matchers::WithinRel(0.9, 1e-15));

    p = Tensor<double>::scalar(2.0);
    sgd_step(p, {0.0}, 0.1, 0.5);
    CHECK_THAT(p.data[0], Catch::Matchers::WithinRel(1.9, 1e-15));

    CHECK_THROWS_AS(sgd_step(p, {0.0, 0.0}, 0.1, 0.0), ShapeError);
}

TEST_CASE("sgd: momentum zero equals the plain step") {
    rng::Stream rs(17);
    Tensor<double> p1 = random_tensor({7}, rs);
    Tensor<double> p2 = p1;
    std::vector<double> g(7);
    for (auto& v : g) v = rs.uniform(-1.0, 1.0);

    sgd_step(p1, g, 0.05, 0.01);
    grad::Sgd<double> opt{0.05, 0.01, 0.0, {}};
    std::vector<Tensor<double>*> params = {&p2};
    std::vector<std::vector<double>> grads = {g};
    opt.step(params, grads);
    for (int i = 0; i < 7; ++i) CHECK(p1.data[i] == p2.data[i]);
}

TEST_CASE("determinism: identical runs produce bit-identical values and gradients") {
    auto run = [] {
        rng::Stream rs(99);
        grad::Tape<double> tape;
        auto x = tape.constant(random_tensor({1, 2, 6, 6}, rs));
        auto k = tape.param(random_tensor({2, 2, 3, 3}, rs));
        auto b = tape.param(random_tensor({2}, rs));
        auto loss = reduce_mean(mul(relu(conv2d(x, k, b)), relu(conv2d(x, k, b))));
        tape.backward(loss.id);
        std::vector<double> out = {tape.value(loss.id).data[0]};
        out.insert(out.end(), tape.value(k.id).grad.begin(), tape.value(k.id).grad.end());
        return out;
    };
    CHECK(run() == run());
}
