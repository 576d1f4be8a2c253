#include <doctest.h>

#include <cmath>

#include "seganet/loss.hpp"
#include "seganet/tensor.hpp"

using namespace seganet;

namespace {

template <typename T>
Tensor<T> random_tensor(std::vector<int> dims, Rng& rng, bool requires_grad = true) {
    return Tensor<T>::randn(std::move(dims), rng, T(1), requires_grad);
}

// fixed projection weights turn any output into a scalar objective
template <typename T>
std::vector<T> projection(std::size_t n, Rng& rng) {
    std::vector<T> w(n);
    for (auto& v : w) v = static_cast<T>(rng.uniform(-1.0, 1.0));
    return w;
}

}  // namespace

TEST_CASE("conv2d identity kernel passes input through") {
    Rng rng(7);
    Tensor<float> x = random_tensor<float>({1, 1, 5, 5}, rng, false);
    Tensor<float> k({1, 1, 1, 1}, {1.f});
    Tensor<float> b({1}, {0.f});
    Tensor<float> y = conv2d(x, k, b, 1, 0);
    REQUIRE(y.dims() == x.dims());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("conv2d all-ones 3x3 input with 2x2 kernel gives 2x2 of 4") {
    Tensor<double> x = Tensor<double>::full({1, 1, 3, 3}, 1.0);
    Tensor<double> k = Tensor<double>::full({1, 1, 2, 2}, 1.0);
    Tensor<double> b({1}, {0.0});
    Tensor<double> y = conv2d(x, k, b, 1, 0);
    REQUIRE(y.dims() == std::vector<int>{1, 1, 2, 2});
    for (double v : y.values()) CHECK(v == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("conv2d stride-2 shape: 16x16 -> 8x8 with 3x3 kernel, padding 1") {
    Rng rng(3);
    Tensor<float> x = random_tensor<float>({2, 3, 16, 16}, rng, false);
    Tensor<float> k = random_tensor<float>({4, 3, 3, 3}, rng, false);
    Tensor<float> b = Tensor<float>::zeros({4});
    Tensor<float> y = conv2d(x, k, b, 2, 1);
    CHECK(y.dims() == std::vector<int>{2, 4, 8, 8});
}

TEST_CASE("conv2d stride 1 with padding (k-1)/2 preserves dims for odd k") {
    Rng rng(11);
    for (int k : {1, 3, 5}) {
        Tensor<float> x = random_tensor<float>({1, 2, 9, 7}, rng, false);
        Tensor<float> w = random_tensor<float>({3, 2, k, k}, rng, false);
        Tensor<float> b = Tensor<float>::zeros({3});
        Tensor<float> y = conv2d(x, w, b, 1, (k - 1) / 2);
        CHECK(y.dims() == std::vector<int>{1, 3, 9, 7});
    }
}

TEST_CASE("conv2d rejects channel mismatch and bad dims") {
    Tensor<float> x = Tensor<float>::zeros({1, 2, 4, 4});
    Tensor<float> k = Tensor<float>::zeros({1, 3, 3, 3});
    Tensor<float> b = Tensor<float>::zeros({1});
    CHECK_THROWS_AS(conv2d(x, k, b, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(conv2d(x, k, b, 3, 1), std::invalid_argument);
    CHECK_THROWS_AS((Tensor<float>({1, -1}, {})), std::invalid_argument);
}

TEST_CASE("conv2d gradient matches central differences") {
    Rng rng(17);
    Tensor<double> x = random_tensor<double>({1, 2, 4, 4}, rng);
    Tensor<double> k = random_tensor<double>({2, 2, 3, 3}, rng);
    Tensor<double> b = random_tensor<double>({2}, rng);
    std::vector<double> w = projection<double>(1 * 2 * 4 * 4, rng);
    auto f = [&](const std::vector<Tensor<double>>& in) {
        return weighted_sum(conv2d(in[0], in[1], in[2], 1, 1), w);
    };
    CHECK(grad_check<double>(f, {x, k, b}, 1e-5) <= 1e-6);
}

TEST_CASE("conv_transpose2d doubles spatial dims at stride 2") {
    Rng rng(5);
    Tensor<float> x = random_tensor<float>({1, 3, 8, 8}, rng, false);
    Tensor<float> k = random_tensor<float>({3, 2, 3, 3}, rng, false);
    Tensor<float> b = Tensor<float>::zeros({2});
    Tensor<float> y = conv_transpose2d(x, k, b, 2, 1);
    CHECK(y.dims() == std::vector<int>{1, 2, 16, 16});
}

TEST_CASE("conv_transpose2d broadcasts a 1x1 input through a 2x2 ones kernel") {
    const double v = 2.75;
    Tensor<double> x({1, 1, 1, 1}, {v});
    Tensor<double> k = Tensor<double>::full({1, 1, 2, 2}, 1.0);
    Tensor<double> b({1}, {0.0});
    Tensor<double> y = conv_transpose2d(x, k, b, 2, 0);
    REQUIRE(y.dims() == std::vector<int>{1, 1, 2, 2});
    for (double o : y.values()) CHECK(o == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("conv_transpose2d then conv2d restores spatial dims") {
    Rng rng(29);
    Tensor<float> x = random_tensor<float>({1, 2, 6, 6}, rng, false);
    Tensor<float> kt = random_tensor<float>({2, 2, 3, 3}, rng, false);
    Tensor<float> kc = random_tensor<float>({2, 2, 3, 3}, rng, false);
    Tensor<float> b = Tensor<float>::zeros({2});
    Tensor<float> up = conv_transpose2d(x, kt, b, 2, 1);
    Tensor<float> down = conv2d(up, kc, b, 2, 1);
    CHECK(down.dims() == x.dims());
}

TEST_CASE("conv_transpose2d gradient matches central differences") {
    Rng rng(23);
    Tensor<double> x = random_tensor<double>({1, 2, 3, 3}, rng);
    Tensor<double> k = random_tensor<double>({2, 2, 3, 3}, rng);
    Tensor<double> b = random_tensor<double>({2}, rng);
    std::vector<double> w = projection<double>(1 * 2 * 6 * 6, rng);
    auto f = [&](const std::vector<Tensor<double>>& in) {
        return weighted_sum(conv_transpose2d(in[0], in[1], in[2], 2, 1), w);
    };
    CHECK(grad_check<double>(f, {x, k, b}, 1e-5) <= 1e-6);
}

TEST_CASE("instance_norm zeroes a constant channel") {
    Tensor<float> x = Tensor<float>::full({1, 1, 4, 4}, 3.25f);
    Tensor<float> g({1}, {1.f});
    Tensor<float> b({1}, {0.f});
    Tensor<float> y = instance_norm(x, g, b, 1e-5f);
    for (float v : y.values()) CHECK(std::abs(v) < 1e-2f);
}

TEST_CASE("instance_norm standardizes a two-pixel channel to -1,+1") {
    Tensor<double> x({1, 1, 1, 2}, {1.0, 3.0});
    Tensor<double> g({1}, {1.0});
    Tensor<double> b({1}, {0.0});
    Tensor<double> y = instance_norm(x, g, b, 1e-12);
    CHECK(y.values()[0] == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(y.values()[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("instance_norm is independent across batch samples") {
    Rng rng(41);
    Tensor<float> a = random_tensor<float>({1, 2, 4, 4}, rng, false);
    Tensor<float> unrelated = random_tensor<float>({1, 2, 4, 4}, rng, false);
    std::vector<float> both = a.values();
    both.insert(both.end(), unrelated.values().begin(), unrelated.values().end());
    Tensor<float> stacked({2, 2, 4, 4}, std::move(both));

    Tensor<float> g = Tensor<float>::full({2}, 1.f);
    Tensor<float> b = Tensor<float>::zeros({2});
    Tensor<float> ya = instance_norm(a, g, b, 1e-5f);
    Tensor<float> yb = instance_norm(stacked, g, b, 1e-5f);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(ya.values()[i] == yb.values()[i]);
}

TEST_CASE("instance_norm output has zero mean and unit variance") {
    Rng rng(43);
    Tensor<double> x = random_tensor<double>({2, 3, 16, 16}, rng, false);
    Tensor<double> g = Tensor<double>::full({3}, 1.0);
    Tensor<double> b = Tensor<double>::zeros({3});
    Tensor<double> y = instance_norm(x, g, b, 1e-10);
    const std::size_t n = 16 * 16;
    for (int bc = 0; bc < 6; ++bc) {
        double mean = 0, var = 0;
        for (std::size_t i = 0; i < n; ++i) mean += y.values()[bc * n + i];
        mean /= n;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = y.values()[bc * n + i] - mean;
            var += d * d;
        }
        var /= n;
        CHECK(std::abs(mean) <= 1e-5);
        CHECK(std::abs(var - 1.0) <= 1e-3);
    }
}

TEST_CASE("instance_norm rejects single-pixel spatial dims") {
    Tensor<float> x = Tensor<float>::zeros({1, 1, 1, 1});
    Tensor<float> g({1}, {1.f});
    Tensor<float> b({1}, {0.f});
    CHECK_THROWS_AS(instance_norm(x, g, b, 1e-5f), std::invalid_argument);
}

TEST_CASE("instance_norm gradient matches central differences") {
    Rng rng(47);
    Tensor<double> x = random_tensor<double>({1, 2, 3, 3}, rng);
    Tensor<double> g = random_tensor<double>({2}, rng);
    Tensor<double> b = random_tensor<double>({2}, rng);
    std::vector<double> w = projection<double>(1 * 2 * 3 * 3, rng);
    auto f = [&](const std::vector<Tensor<double>>& in) {
        return weighted_sum(instance_norm(in[0], in[1], in[2], 1e-5), w);
    };
    CHECK(grad_check<double>(f, {x, g, b}, 1e-5) <= 1e-5);
}

TEST_CASE("prelu branches and slope gradient") {
    Tensor<double> x({1, 1, 1, 2}, {2.0, -2.0}, false);
    Tensor<double> slope({1}, {0.25}, true);
    Tensor<double> y = prelu(x, slope);
    CHECK(y.values()[0] == 2.0);
    CHECK(y.values()[1] == -0.5);

    // d(out_negative)/d(slope) = x = -2
    Tensor<double> obj = weighted_sum(y, {0.0, 1.0});
    obj.backward();
    CHECK(slope.grad()[0] == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("prelu gradient matches central differences away from the kink") {
    Rng rng(53);
    for (int seed = 0; seed < 5; ++seed) {
        Rng r(100 + seed);
        std::vector<double> xv(2 * 3 * 3);
        for (auto& v : xv) {
            v = r.normal();
            if (std::abs(v) < 1e-3) v += v >= 0 ? 0.1 : -0.1;  // avoid the kink
        }
        Tensor<double> x({1, 2, 3, 3}, std::move(xv), true);
        Tensor<double> slope({2}, {0.25, 0.4}, true);
        std::vector<double> w = projection<double>(x.size(), rng);
        auto f = [&](const std::vector<Tensor<double>>& in) {
            return weighted_sum(prelu(in[0], in[1]), w);
        };
        CHECK(grad_check<double>(f, {x, slope}, 1e-5) <= 1e-7);
    }
}

TEST_CASE("sigmoid fixed values and derivative") {
    Tensor<double> x({1, 1, 1, 3}, {0.0, 50.0, -50.0}, true);
    Tensor<double> y = sigmoid(x);
    CHECK(y.values()[0] == 0.5);
    CHECK(std::abs(y.values()[1] - 1.0) <= 1e-9);
    CHECK(y.values()[1] < 1.0);  // clamped strictly inside (0,1)
    CHECK(y.values()[2] > 0.0);

    Tensor<double> obj = weighted_sum(y, {1.0, 0.0, 0.0});
    obj.backward();
    CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("concat_channels stacks channels and slices back bit-exactly") {
    Rng rng(59);
    Tensor<float> a = random_tensor<float>({2, 1, 3, 3}, rng, false);
    Tensor<float> z = Tensor<float>::zeros({2, 1, 3, 3});
    Tensor<float> cat = concat_channels(a, z);
    REQUIRE(cat.dims() == std::vector<int>{2, 2, 3, 3});

    Tensor<float> back = slice_channels(cat, 0, 1);
    REQUIRE(back.dims() == a.dims());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(back.values()[i] == a.values()[i]);
}

TEST_CASE("concat_channels rejects spatial mismatch") {
    Tensor<float> a = Tensor<float>::zeros({1, 1, 3, 3});
    Tensor<float> b = Tensor<float>::zeros({1, 1, 4, 3});
    CHECK_THROWS_AS(concat_channels(a, b), std::invalid_argument);
}

TEST_CASE("concat_channels backward routes gradients unchanged") {
    Rng rng(61);
    Tensor<double> a = random_tensor<double>({1, 2, 2, 2}, rng);
    Tensor<double> b = random_tensor<double>({1, 1, 2, 2}, rng);
    std::vector<double> w = projection<double>(1 * 3 * 2 * 2, rng);
    auto f = [&](const std::vector<Tensor<double>>& in) {
        return weighted_sum(concat_channels(in[0], in[1]), w);
    };
    CHECK(grad_check<double>(f, {a, b}, 1e-5) <= 1e-6);

    // fresh leaves: gradients accumulate across graphs by design
    Tensor<double> a2(a.dims(), a.values(), true);
    Tensor<double> b2(b.dims(), b.values(), true);
    Tensor<double> obj = weighted_sum(concat_channels(a2, b2), w);
    obj.backward();
    for (std::size_t i = 0; i < a2.size(); ++i) CHECK(a2.grad()[i] == w[i]);
    for (std::size_t i = 0; i < b2.size(); ++i) CHECK(b2.grad()[i] == w[a2.size() + i]);
}

TEST_CASE("add basics and gradient") {
    Tensor<double> a({1, 1, 1, 2}, {1.0, 5.0}, true);
    Tensor<double> zero = Tensor<double>::zeros({1, 1, 1, 2});
    Tensor<double> same = add(a, zero);
    CHECK(same.values()[0] == 1.0);
    CHECK(same.values()[1] == 5.0);

    Tensor<double> b({1, 1, 1, 2}, {2.0, -1.0}, true);
    Tensor<double> sum = add(a, b);
    CHECK(sum.values()[0] == 3.0);

    Rng rng(67);
    std::vector<double> w = projection<double>(2, rng);
    auto f = [&](const std::vector<Tensor<double>>& in) {
        return weighted_sum(add(in[0], in[1]), w);
    };
    CHECK(grad_check<double>(f, {a, b}, 1e-5) <= 1e-6);
    CHECK_THROWS_AS(add(a, Tensor<double>::zeros({1, 1, 2, 1})), std::invalid_argument);
}

TEST_CASE("backward twice without a fresh forward is an error") {
    Tensor<double> x({1}, {2.0}, true);
    Tensor<double> y = weighted_sum(x, {3.0});
    y.backward();
    CHECK_THROWS_AS(y.backward(), std::logic_error);
}

TEST_CASE("shared inputs accumulate gradients from both uses") {
    Tensor<double> x({1, 1, 1, 2}, {1.0, 2.0}, true);
    Tensor<double> y = add(x, x);
    Tensor<double> obj = weighted_sum(y, {1.0, 1.0});
    obj.backward();
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 2.0);
}

TEST_CASE("forward is deterministic across runs") {
    auto run = [] {
        Rng rng(1234);
        Tensor<float> x = random_tensor<float>({1, 2, 8, 8}, rng, false);
        Tensor<float> k = random_tensor<float>({3, 2, 3, 3}, rng, false);
        Tensor<float> b = random_tensor<float>({3}, rng, false);
        Tensor<float> g = Tensor<float>::full({3}, 1.f);
        Tensor<float> bt = Tensor<float>::zeros({3});
        Tensor<float> y = instance_norm(conv2d(x, k, b, 2, 1), g, bt, 1e-5f);
        return y.values();
    };
    CHECK(run() == run());
}

TEST_CASE("pad_reflect2d and crop2d invert each other and backpropagate") {
    Rng rng(71);
    Tensor<double> x = random_tensor<double>({1, 1, 5, 6}, rng);
    Tensor<double> padded = pad_reflect2d(x, 2, 1, 0, 3);
    CHECK(padded.dims() == std::vector<int>{1, 1, 8, 9});
    Tensor<double> back = crop2d(padded, 2, 0, 5, 6);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(back.values()[i] == x.values()[i]);

    std::vector<double> w = projection<double>(8 * 9, rng);
    auto f = [&](const std::vector<Tensor<double>>& in) {
        return weighted_sum(pad_reflect2d(in[0], 2, 1, 0, 3), w);
    };
    CHECK(grad_check<double>(f, {x}, 1e-5) <= 1e-6);
}

TEST_CASE("dice_loss hand-computed value and bounds") {
    // target [1,1,0,0] against uniform 0.5 predictions: dice = 0.5
    Tensor<double> pred({1, 1, 1, 4}, {0.5, 0.5, 0.5, 0.5}, false);
    Tensor<double> target({1, 1, 1, 4}, {1.0, 1.0, 0.0, 0.0}, false);
    Tensor<double> loss = dice_loss(pred, target, 1e-9);
    CHECK(loss.item() == doctest::Approx(0.5).epsilon(1e-6));

    Tensor<double> perfect({1, 1, 1, 4}, {1.0, 1.0, 0.0, 0.0}, false);
    CHECK(dice_loss(perfect, target, 1e-5).item() <= 1e-4);

    Tensor<double> inverted({1, 1, 1, 4}, {0.0, 0.0, 1.0, 1.0}, false);
    CHECK(dice_loss(inverted, target, 1e-5).item() >= 1.0 - 1e-3);

    Tensor<double> bad({1, 1, 1, 4}, {0.5, 0.5, 0.5, 0.3}, false);
    CHECK_THROWS_AS(dice_loss(pred, bad, 1e-5), std::invalid_argument);
}

TEST_CASE("dice_loss stays within [0,1] up to the smooth term") {
    Rng rng(73);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> pv(16), gv(16);
        for (auto& v : pv) v = rng.uniform01();
        for (auto& v : gv) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
        Tensor<double> p({2, 1, 2, 4}, std::move(pv), false);
        Tensor<double> g({2, 1, 2, 4}, std::move(gv), false);
        const double l = dice_loss(p, g, 1e-5).item();
        CHECK(l >= 0.0);
        CHECK(l <= 1.0 + 1e-5);
    }
}

TEST_CASE("dice_loss gradient matches central differences") {
    Rng rng(79);
    std::vector<double> pv(18), gv(18);
    for (auto& v : pv) v = 0.1 + 0.8 * rng.uniform01();
    for (auto& v : gv) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    Tensor<double> p({2, 1, 3, 3}, std::move(pv), true);
    Tensor<double> g({2, 1, 3, 3}, std::move(gv), false);
    auto f = [&](const std::vector<Tensor<double>>& in) {
        return dice_loss(in[0], g, 1e-5);
    };
    CHECK(grad_check<double>(f, {p}, 1e-5) <= 1e-5);
    (void)rng;
}
