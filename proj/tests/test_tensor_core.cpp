#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gdt/battery.hpp"
#include "gdt/gradcheck.hpp"
#include "gdt/layers.hpp"
#include "gdt/optim.hpp"
#include "oracles.hpp"

using namespace gdt;

TEST(Tensor, DimsAndDataMustAgree) {
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
    EXPECT_THROW(Tensor({2, 0}), ShapeError);
    Tensor t({2, 3, 4});
    EXPECT_EQ(t.size(), 24u);
    t.at(1, 2, 3) = 5.0;
    EXPECT_EQ(t[23], 5.0);
    EXPECT_THROW(t.reshaped({5, 5}), ShapeError);
}

TEST(Conv2d, ScalarProduct) {
    const Tensor y = conv2d(Tensor({1, 1, 1}, {2.0}), Tensor({1, 1, 1, 1}, {3.0}), Tensor({1}), 1, 0);
    ASSERT_EQ(y.size(), 1u);
    EXPECT_EQ(y[0], 6.0);
}

TEST(Conv2d, CenterOneKernelIsIdentity) {
    std::mt19937_64 rng(3);
    const Tensor x = oracle::random_tensor({6, 5, 2}, rng);
    Tensor k({3, 3, 2, 2});
    k[((1 * 3 + 1) * 2 + 0) * 2 + 0] = 1.0;
    k[((1 * 3 + 1) * 2 + 1) * 2 + 1] = 1.0;
    EXPECT_EQ(conv2d(x, k, Tensor({2}), 1, 1), x);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        std::mt19937_64 rng(s);
        const Tensor x = oracle::random_tensor({5, 5, 2}, rng);
        const Tensor k = oracle::random_tensor({3, 3, 2, 4}, rng);
        const Tensor b = oracle::random_tensor({4}, rng);
        EXPECT_LE(max_abs_diff(conv2d(x, k, b, 1, 0), oracle::conv2d(x, k, b, 1, 0)), 1e-12);
        EXPECT_LE(max_abs_diff(conv2d(x, k, b, 1, 1), oracle::conv2d(x, k, b, 1, 1)), 1e-12);
        EXPECT_LE(max_abs_diff(conv2d(x, k, b, 2, 0), oracle::conv2d(x, k, b, 2, 0)), 1e-12);
    }
}

TEST(Conv2d, OutputExtentAndShapeErrors) {
    const Tensor y = conv2d(Tensor({25, 25, 3}), Tensor({5, 5, 3, 8}), Tensor({8}), 2, 0);
    EXPECT_EQ(y.dims(), (Dims{11, 11, 8}));
    EXPECT_THROW(conv2d(Tensor({6, 6, 1}), Tensor({3, 3, 1, 1}), Tensor({1}), 2, 0), ShapeError);
    EXPECT_THROW(conv2d(Tensor({5, 5, 2}), Tensor({3, 3, 3, 1}), Tensor({1}), 1, 0), ShapeError);
    EXPECT_THROW(conv2d(Tensor({5, 5, 2}), Tensor({3, 3, 2, 2}), Tensor({1}), 1, 0), ShapeError);
}

TEST(Conv2d, BackwardAccumulates) {
    std::mt19937_64 rng(5);
    const Tensor x = oracle::random_tensor({5, 5, 2}, rng);
    const Tensor k = oracle::random_tensor({3, 3, 2, 2}, rng);
    const Tensor g = oracle::random_tensor({3, 3, 2}, rng);
    Tensor gi1(x.dims()), gk1(k.dims()), gb1({2});
    conv2d_backward(x, k, 1, 0, g, &gi1, &gk1, &gb1);
    Tensor gi2 = gi1, gk2 = gk1, gb2 = gb1;
    conv2d_backward(x, k, 1, 0, g, &gi2, &gk2, &gb2);
    for (std::size_t i = 0; i < gk1.size(); ++i) EXPECT_NEAR(gk2[i], 2 * gk1[i], 1e-12);
    for (std::size_t i = 0; i < gb1.size(); ++i) EXPECT_NEAR(gb2[i], 2 * gb1[i], 1e-12);
}

TEST(FullyConnected, IdentityAndBias) {
    const Tensor x = Tensor::vector({1.5, -2.0, 0.25});
    Tensor eye({3, 3});
    for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
    EXPECT_EQ(fully_connected(x, eye, Tensor({3})), x);
    const Tensor b = Tensor::vector({4.0, 5.0});
    EXPECT_EQ(fully_connected(x, Tensor({3, 2}), b), b);
    EXPECT_THROW(fully_connected(x, Tensor({4, 2}), b), ShapeError);
}

TEST(FullyConnected, MatchesDotProductLoop) {
    std::mt19937_64 rng(11);
    const Tensor x = oracle::random_tensor({6}, rng);
    const Tensor w = oracle::random_tensor({6, 3}, rng);
    const Tensor b = oracle::random_tensor({3}, rng);
    const Tensor y = fully_connected(x, w, b);
    for (std::size_t j = 0; j < 3; ++j) {
        double s = b[j];
        for (std::size_t i = 0; i < 6; ++i) s += x[i] * w[i * 3 + j];
        EXPECT_NEAR(y[j], s, 1e-14);
    }
}

TEST(Activation, SpotValues) {
    EXPECT_EQ(sigmoid(0.0), 0.5);
    EXPECT_EQ(activate(Tensor::vector({-3.7}), Activation::relu)[0], 0.0);
    const Tensor in = Tensor::vector({0.0, 0.0});
    const Tensor out = activate(in, Activation::sigmoid);
    const Tensor g = activate_backward(in, out, Tensor::vector({1.0, 1.0}), Activation::sigmoid);
    EXPECT_EQ(g[0], 0.25);
    EXPECT_EQ(g[1], 0.25);
    // relu subgradient at exactly zero is zero
    EXPECT_EQ(activate_backward(in, activate(in, Activation::relu), Tensor::vector({1.0, 1.0}), Activation::relu)[0], 0.0);
}

TEST(Activation, SigmoidStaysInsideOpenInterval) {
    for (double x : {-1e6, -800.0, -40.0, 0.0, 40.0, 800.0, 1e6}) {
        const double s = sigmoid(x);
        EXPECT_GT(s, 0.0) << x;
        EXPECT_LT(s, 1.0) << x;
    }
}

TEST(SoftmaxXent, ClosedForms) {
    EXPECT_NEAR(softmax_xent(Tensor::vector({0.0, 0.0}), 0).loss, std::log(2.0), 1e-15);
    EXPECT_LT(softmax_xent(Tensor::vector({50.0, -50.0}), 0).loss, 1e-9);
    const auto r = softmax_xent(Tensor::vector({1.0, 3.0}), 1);
    const double p1 = 1.0 / (1.0 + std::exp(-2.0));
    EXPECT_NEAR(r.grad_logits[1], p1 - 1.0, 1e-15);
    EXPECT_NEAR(r.grad_logits[0], 1.0 - p1, 1e-15);
    EXPECT_THROW(softmax_xent(Tensor::vector({1.0, 2.0, 3.0}), 0), ShapeError);
}

TEST(SoftmaxXent, ShiftInvariant) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-20, 20);
    for (int i = 0; i < 100; ++i) {
        const double a = u(rng), b = u(rng), c = u(rng);
        for (int label : {0, 1}) {
            EXPECT_NEAR(softmax_xent(Tensor::vector({a, b}), label).loss,
                        softmax_xent(Tensor::vector({a + c, b + c}), label).loss, 1e-12);
        }
    }
}

TEST(SoftmaxXent, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 20; ++i) {
        ParamGroup z("z", oracle::random_tensor({2}, rng, -4, 4));
        const int label = i % 2;
        const double err = grad_check(
            [&](ParamGroup& p) {
                const auto r = softmax_xent(p.value, label);
                accumulate(p.grad, r.grad_logits);
                return r.loss;
            },
            z, 1e-5);
        EXPECT_LT(err, 1e-6);
    }
}

TEST(Sgd, SpecExamples) {
    ParamGroup p("p", Tensor::vector({1.0}));
    p.grad[0] = 0.5;
    sgd_step(p, {1.0, 0.0, 0.0});
    EXPECT_EQ(p.value[0], 0.5);
    EXPECT_EQ(p.grad[0], 0.0);

    ParamGroup q("q", Tensor::vector({2.0}));
    sgd_step(q, {1.0, 0.0, 0.0005});
    EXPECT_DOUBLE_EQ(q.value[0], 1.999);

    ParamGroup r("r", Tensor::vector({0.0}));
    const double lr = 0.1, g = 2.0;
    r.grad[0] = g;
    sgd_step(r, {lr, 0.9, 0.0});
    const double after_first = r.value[0];
    r.grad[0] = g;
    sgd_step(r, {lr, 0.9, 0.0});
    EXPECT_NEAR(r.value[0] - after_first, -lr * g * 1.9, 1e-15);
}

TEST(Sgd, FrozenGroupIsBitwiseUnchanged) {
    std::mt19937_64 rng(8);
    ParamGroup p("p", oracle::random_tensor({4, 4}, rng));
    p.grad = oracle::random_tensor({4, 4}, rng);
    p.frozen = true;
    const Tensor before = p.value;
    sgd_step(p, {0.5, 0.9, 0.01});
    EXPECT_EQ(p.value, before);
    EXPECT_EQ(p.grad, Tensor({4, 4}));
}

TEST(GradCheck, LinearFunctionIsExact) {
    ParamGroup x("x", Tensor::vector({0.7}));
    const double err = grad_check(
        [](ParamGroup& p) {
            p.grad[0] += 3.0;
            return 3.0 * p.value[0];
        },
        x, 1e-5);
    EXPECT_LT(err, 1e-10);
}

TEST(GradCheck, RejectsBadEpsAndNonFiniteLoss) {
    ParamGroup x("x", Tensor::vector({0.7}));
    auto f = [](ParamGroup& p) { return p.value[0]; };
    EXPECT_THROW(grad_check(f, x, 1e-9), ValidationError);
    EXPECT_THROW(grad_check(f, x, 1e-2), ValidationError);
    EXPECT_THROW(grad_check([](ParamGroup&) { return std::nan(""); }, x, 1e-5), RuntimeFailure);
}

TEST(GradCheck, ConvComposedWithSum) {
    std::mt19937_64 rng(21);
    const Tensor x = oracle::random_tensor({5, 5, 2}, rng);
    ParamGroup k("k", oracle::random_tensor({3, 3, 2, 3}, rng));
    const Tensor b({3});
    const double err = grad_check(
        [&](ParamGroup& p) {
            const Tensor y = conv2d(x, p.value, b, 1, 1);
            conv2d_backward(x, p.value, 1, 1, Tensor(y.dims(), 1.0), nullptr, &p.grad, nullptr);
            double s = 0;
            for (double v : y.values()) s += v;
            return s;
        },
        k, 1e-5);
    EXPECT_LT(err, 1e-4);
}

TEST(GradCheck, SigmoidOfFullyConnected) {
    std::mt19937_64 rng(22);
    const Tensor x = oracle::random_tensor({6}, rng);
    ParamGroup w("w", oracle::random_tensor({6, 3}, rng));
    const Tensor b({3});
    const double err = grad_check(
        [&](ParamGroup& p) {
            const Tensor pre = fully_connected(x, p.value, b);
            const Tensor y = activate(pre, Activation::sigmoid);
            const Tensor gpre = activate_backward(pre, y, Tensor({3}, 1.0), Activation::sigmoid);
            fully_connected_backward(x, p.value, gpre, nullptr, &p.grad, nullptr);
            return y[0] + y[1] + y[2];
        },
        w, 1e-5);
    EXPECT_LT(err, 1e-4);
}

TEST(GradCheck, KinkCrossingCoordinatesAreSkipped) {
    ParamGroup x("x", Tensor::vector({1e-7, 0.5}));
    const auto rep = grad_check_report(
        [](ParamGroup& p) {
            const Tensor y = activate(p.value, Activation::relu);
            accumulate(p.grad, activate_backward(p.value, y, Tensor({2}, 1.0), Activation::relu));
            return LossEval{y[0] + y[1], relu_regime(0, p.value)};
        },
        x, 1e-5);
    EXPECT_EQ(rep.skipped, 1u);
    EXPECT_EQ(rep.checked, 1u);
    EXPECT_LT(rep.max_rel_error, 1e-10);
}

TEST(GradCheck, BatteryPassesOnFewSeeds) {
    BatteryOptions opt;
    opt.seeds = 3;
    const auto entries = run_gradient_battery(opt);
    EXPECT_GE(entries.size(), 12u);
    for (const auto& e : entries) {
        EXPECT_TRUE(e.passed) << e.name << " max rel error " << e.max_rel_error;
        EXPECT_GT(e.checked, 0u) << e.name;
    }
}

TEST(Init, UniformScaleAndDeterminism) {
    std::mt19937_64 a(5), b(5);
    const Tensor t = uniform_init({100, 10}, 25, a);
    EXPECT_EQ(t, uniform_init({100, 10}, 25, b));
    for (double v : t.values()) EXPECT_LE(std::abs(v), 0.2);
}
