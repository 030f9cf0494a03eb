#include <cmath>
#include <vector>

#include "c2f/error.hpp"
#include "c2f/ops.hpp"
#include "c2f/rng.hpp"
#include "doctest.h"
#include "fd_oracle.hpp"

using namespace c2f;
using c2f::test::check_gradient;
using c2f::test::probe_loss;
using c2f::test::random_tensor;

namespace {

ConvParams random_conv(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t pad, Rng& rng) {
    ConvParams p = ConvParams::make(in, out, k, stride, pad);
    p.weight = random_tensor(p.weight.shape(), rng, -0.5, 0.5);
    p.bias = random_tensor(p.bias.shape(), rng, -0.5, 0.5);
    return p;
}

}  // namespace

TEST_CASE("tensor construction validates shapes") {
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
    Tensor t({2, 3}, 1.5f);
    CHECK(t.numel() == 6);
    CHECK(t.all_finite());
    t[4] = NAN;
    CHECK_THROWS_AS(t.require_finite("t"), NumericError);
}

TEST_CASE("conv2d forward examples") {
    SUBCASE("1x1 filter scales the input") {
        ConvParams p = ConvParams::make(1, 1, 1, 1, 0);
        p.weight[0] = 2.0f;
        Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
        Tensor y = conv2d_forward(x, p);
        CHECK(y == Tensor({1, 1, 2, 2}, {2, 4, 6, 8}));
    }
    SUBCASE("3x3 ones over ones sums to 9") {
        ConvParams p = ConvParams::make(1, 1, 3, 1, 0);
        p.weight.fill(1.0f);
        Tensor y = conv2d_forward(Tensor({1, 1, 3, 3}, 1.0f), p);
        CHECK(y.shape() == Shape{1, 1, 1, 1});
        CHECK(y[0] == 9.0f);
    }
    SUBCASE("first stage geometry: 128 -> 64 with 16 filters") {
        ConvParams p = ConvParams::make(3, 16, 3, 2, 1);
        Tensor y = conv2d_forward(Tensor({1, 3, 128, 128}, 0.25f), p);
        CHECK(y.shape() == Shape{1, 16, 64, 64});
    }
    SUBCASE("errors") {
        ConvParams p = ConvParams::make(2, 1, 3, 1, 0);
        CHECK_THROWS_AS(conv2d_forward(Tensor({1, 3, 4, 4}), p), ShapeError);
        CHECK_THROWS_AS(conv2d_forward(Tensor({1, 2, 2, 2}), p), ShapeError);
        Tensor bad({1, 2, 4, 4});
        bad[3] = INFINITY;
        CHECK_THROWS_AS(conv2d_forward(bad, p), NumericError);
    }
}

TEST_CASE("conv output extent obeys the floor formula") {
    ConvParams p;
    for (std::size_t h : {5u, 8u, 9u, 16u}) {
        for (std::size_t stride : {1u, 2u, 3u}) {
            for (std::size_t pad : {0u, 1u, 2u}) {
                ConvParams q = ConvParams::make(1, 2, 3, stride, pad);
                Tensor y = conv2d_forward(Tensor({1, 1, h, h + 1}, 1.0f), q);
                CHECK(y.dim(2) == (h + 2 * pad - 3) / stride + 1);
                CHECK(y.dim(3) == (h + 1 + 2 * pad - 3) / stride + 1);
            }
        }
    }
}

TEST_CASE("conv2d is linear in its input when bias is zero") {
    Rng rng(7);
    ConvParams p = random_conv(2, 3, 3, 2, 1, rng);
    p.bias.fill(0.0f);
    Tensor x = random_tensor({2, 2, 6, 6}, rng);
    Tensor scaled = x;
    const float alpha = -1.75f;
    for (auto& v : scaled.data()) v *= alpha;
    Tensor y = conv2d_forward(x, p);
    Tensor ys = conv2d_forward(scaled, p);
    for (std::size_t i = 0; i < y.numel(); ++i) CHECK(ys[i] == doctest::Approx(alpha * y[i]).epsilon(1e-5));
}

TEST_CASE("conv2d backward") {
    SUBCASE("zero upstream gradient") {
        Rng rng(1);
        ConvParams p = random_conv(2, 3, 3, 1, 1, rng);
        Tensor x = random_tensor({1, 2, 4, 4}, rng);
        ConvGrads g = conv2d_backward(x, p, Tensor({1, 3, 4, 4}));
        for (float v : g.input.data()) CHECK(v == 0.0f);
        for (float v : g.weight.data()) CHECK(v == 0.0f);
        for (float v : g.bias.data()) CHECK(v == 0.0f);
    }
    SUBCASE("hand chain rule on a 1x1 filter") {
        ConvParams p = ConvParams::make(1, 1, 1, 1, 0);
        p.weight[0] = 2.0f;
        ConvGrads g = conv2d_backward(Tensor({1, 1, 1, 1}, 3.0f), p, Tensor({1, 1, 1, 1}, 1.0f));
        CHECK(g.weight[0] == 3.0f);
        CHECK(g.input[0] == 2.0f);
        CHECK(g.bias[0] == 1.0f);
    }
    SUBCASE("finite differences, stride 2 pad 1") {
        Rng rng(42);
        ConvParams p = random_conv(2, 3, 3, 2, 1, rng);
        Tensor x = random_tensor({1, 2, 5, 5}, rng);
        Tensor r = random_tensor({1, 3, 3, 3}, rng);
        ConvGrads g = conv2d_backward(x, p, r);
        auto loss = [&] { return probe_loss(conv2d_forward(x, p), r); };
        CHECK(check_gradient(x, g.input, loss).max_rel <= 1e-3);
        CHECK(check_gradient(p.weight, g.weight, loss).max_rel <= 1e-3);
        CHECK(check_gradient(p.bias, g.bias, loss).max_rel <= 1e-3);
    }
    SUBCASE("grad_out shape mismatch") {
        ConvParams p = ConvParams::make(1, 1, 3, 1, 1);
        CHECK_THROWS_AS(conv2d_backward(Tensor({1, 1, 4, 4}), p, Tensor({1, 1, 3, 3})), ShapeError);
    }
}

TEST_CASE("batchnorm forward") {
    SUBCASE("normalizes [1,2,3]") {
        BatchNormParams p = BatchNormParams::make(1);
        Tensor y = batchnorm_forward(Tensor({1, 1, 1, 3}, {1, 2, 3}), p, true);
        // (x - 2) / sqrt(2/3 + 1e-5)
        CHECK(y[0] == doctest::Approx(-1.2247357).epsilon(1e-6));
        CHECK(y[1] == doctest::Approx(0.0));
        CHECK(y[2] == doctest::Approx(1.2247357).epsilon(1e-6));
        CHECK(p.running_mean[0] == doctest::Approx(0.2f));
        CHECK(p.running_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * (2.0 / 3.0)));
    }
    SUBCASE("constant channel maps to beta") {
        BatchNormParams p = BatchNormParams::make(2);
        p.beta[1] = 5.0f;
        Tensor y = batchnorm_forward(Tensor({2, 2, 2, 2}, 3.0f), p, true);
        for (std::size_t b = 0; b < 2; ++b) {
            for (std::size_t i = 0; i < 4; ++i) {
                CHECK(y[(b * 2 + 0) * 4 + i] == 0.0f);
                CHECK(y[(b * 2 + 1) * 4 + i] == 5.0f);
            }
        }
    }
    SUBCASE("training output has zero mean, unit variance") {
        Rng rng(3);
        BatchNormParams p = BatchNormParams::make(3);
        Tensor x = random_tensor({4, 3, 5, 5}, rng, -3.0, 7.0);
        Tensor y = batchnorm_forward(x, p, true);
        for (std::size_t c = 0; c < 3; ++c) {
            double sum = 0.0, sq = 0.0;
            for (std::size_t b = 0; b < 4; ++b) {
                for (std::size_t j = 0; j < 25; ++j) sum += y[(b * 3 + c) * 25 + j];
            }
            const double mean = sum / 100.0;
            for (std::size_t b = 0; b < 4; ++b) {
                for (std::size_t j = 0; j < 25; ++j) sq += std::pow(y[(b * 3 + c) * 25 + j] - mean, 2);
            }
            CHECK(std::abs(mean) <= 1e-5);
            CHECK(std::abs(sq / 100.0 - 1.0) <= 1e-3);
        }
    }
    SUBCASE("inference uses running statistics") {
        BatchNormParams p = BatchNormParams::make(1);
        p.running_mean[0] = 1.0f;
        p.running_var[0] = 4.0f;
        Tensor y = batchnorm_forward(Tensor({1, 1, 1, 2}, {1, 5}), std::as_const(p));
        CHECK(y[0] == 0.0f);
        CHECK(y[1] == doctest::Approx(4.0 / std::sqrt(4.0 + 1e-5)));
    }
    SUBCASE("channel mismatch") {
        BatchNormParams p = BatchNormParams::make(2);
        CHECK_THROWS_AS(batchnorm_forward(Tensor({1, 3, 2, 2}), p, true), ShapeError);
    }
}

TEST_CASE("batchnorm backward") {
    Rng rng(11);
    BatchNormParams p = BatchNormParams::make(2);
    p.gamma = random_tensor({2}, rng, 0.5, 1.5);
    p.beta = random_tensor({2}, rng);
    Tensor x = random_tensor({3, 2, 1, 2}, rng, -2.0, 2.0);

    SUBCASE("zero gradient") {
        BatchNormCache cache;
        batchnorm_forward(x, p, true, &cache);
        BatchNormGrads g = batchnorm_backward(x, p, Tensor(x.shape()), cache);
        for (float v : g.input.data()) CHECK(v == 0.0f);
        for (float v : g.gamma.data()) CHECK(v == 0.0f);
        for (float v : g.beta.data()) CHECK(v == 0.0f);
    }
    SUBCASE("beta gradient sums the upstream gradient") {
        BatchNormCache cache;
        batchnorm_forward(x, p, true, &cache);
        BatchNormGrads g = batchnorm_backward(x, p, Tensor(x.shape(), 1.0f), cache);
        CHECK(g.beta[0] == 6.0f);
        CHECK(g.beta[1] == 6.0f);
    }
    SUBCASE("finite differences") {
        BatchNormCache cache;
        Tensor r = random_tensor(x.shape(), rng);
        batchnorm_forward(x, p, true, &cache);
        BatchNormGrads g = batchnorm_backward(x, p, r, cache);
        auto loss = [&] {
            BatchNormParams scratch = p;
            return probe_loss(batchnorm_forward(x, scratch, true), r);
        };
        CHECK(check_gradient(x, g.input, loss).max_rel <= 1e-3);
        CHECK(check_gradient(p.gamma, g.gamma, loss).max_rel <= 1e-3);
        CHECK(check_gradient(p.beta, g.beta, loss).max_rel <= 1e-3);
    }
    SUBCASE("missing cache") {
        CHECK_THROWS_AS(batchnorm_backward(x, p, x, BatchNormCache{}), Error);
    }
}

TEST_CASE("silu") {
    Tensor x({3}, {0.0f, 1.0f, -2.0f});
    Tensor y = silu(x);
    CHECK(y[0] == 0.0f);
    CHECK(y[1] == doctest::Approx(0.7310585786).epsilon(1e-6));
    CHECK(y[2] == doctest::Approx(-2.0 / (1.0 + std::exp(2.0))).epsilon(1e-6));
    Tensor g = silu_backward(x, Tensor({3}, 1.0f));
    CHECK(g[0] == doctest::Approx(0.5));

    Rng rng(5);
    Tensor z = random_tensor({2, 3, 4, 4}, rng, -4.0, 4.0);
    Tensor r = random_tensor(z.shape(), rng);
    Tensor gz = silu_backward(z, r);
    auto loss = [&] { return probe_loss(silu(z), r); };
    CHECK(check_gradient(z, gz, loss).max_rel <= 1e-3);
}

TEST_CASE("global average pool") {
    Tensor x({1, 2, 2, 2}, {1, 2, 3, 4, 7, 7, 7, 7});
    Tensor y = global_avg_pool(x);
    CHECK(y.shape() == Shape{1, 2});
    CHECK(y[0] == 2.5f);
    CHECK(y[1] == 7.0f);
    Tensor g = global_avg_pool_backward(x.shape(), Tensor({1, 2}, {1.0f, 0.0f}));
    for (std::size_t i = 0; i < 4; ++i) CHECK(g[i] == 0.25f);
    for (std::size_t i = 4; i < 8; ++i) CHECK(g[i] == 0.0f);

    Rng rng(8);
    Tensor z = random_tensor({2, 3, 3, 5}, rng);
    Tensor r = random_tensor({2, 3}, rng);
    Tensor gz = global_avg_pool_backward(z.shape(), r);
    auto loss = [&] { return probe_loss(global_avg_pool(z), r); };
    CHECK(check_gradient(z, gz, loss).max_rel <= 1e-3);
}

TEST_CASE("concat and split channels") {
    Rng rng(9);
    Tensor a = random_tensor({1, 2, 4, 4}, rng);
    Tensor b = random_tensor({1, 3, 4, 4}, rng);
    Tensor parts[] = {a, b};
    Tensor c = concat_channels(parts);
    CHECK(c.shape() == Shape{1, 5, 4, 4});

    const std::size_t sizes[] = {2, 3};
    auto back = split_channels(c, sizes);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == a);
    CHECK(back[1] == b);

    Tensor wrong[] = {a, Tensor({1, 1, 3, 4})};
    CHECK_THROWS_AS(concat_channels(wrong), ShapeError);
    const std::size_t bad_sizes[] = {2, 2};
    CHECK_THROWS_AS(split_channels(c, bad_sizes), ShapeError);
}

TEST_CASE("split of concat is the identity on random batches") {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng.below(3), h = 1 + rng.below(5), w = 1 + rng.below(5);
        const std::size_t count = 1 + rng.below(4);
        std::vector<Tensor> xs;
        std::vector<std::size_t> sizes;
        for (std::size_t i = 0; i < count; ++i) {
            sizes.push_back(1 + rng.below(4));
            xs.push_back(random_tensor({n, sizes.back(), h, w}, rng, -1e6, 1e6));
        }
        CHECK(split_channels(concat_channels(xs), sizes) == xs);
    }
}

TEST_CASE("linear") {
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor x({1, 2}, {1, 2});
    CHECK(linear_forward(x, eye, Tensor({2})) == x);
    Tensor y = linear_forward(x, Tensor({1, 2}, {3, 4}), Tensor({1}, {1}));
    CHECK(y[0] == 12.0f);
    CHECK_THROWS_AS(linear_forward(x, Tensor({1, 3}), Tensor({1})), ShapeError);

    Rng rng(12);
    Tensor in = random_tensor({3, 5}, rng);
    Tensor w = random_tensor({4, 5}, rng);
    Tensor bias = random_tensor({4}, rng);
    Tensor r = random_tensor({3, 4}, rng);
    LinearGrads g = linear_backward(in, w, r);
    auto loss = [&] { return probe_loss(linear_forward(in, w, bias), r); };
    CHECK(check_gradient(in, g.input, loss).max_rel <= 1e-3);
    CHECK(check_gradient(w, g.weight, loss).max_rel <= 1e-3);
    CHECK(check_gradient(bias, g.bias, loss).max_rel <= 1e-3);
}

TEST_CASE("softmax cross-entropy") {
    const int zero[] = {0};
    const int one[] = {1};
    SUBCASE("uniform logits") {
        LossResult r = softmax_cross_entropy(Tensor({1, 2}, {0, 0}), one);
        CHECK(r.loss == doctest::Approx(0.693147).epsilon(1e-6));
        LossResult r0 = softmax_cross_entropy(Tensor({1, 2}, {0, 0}), zero);
        CHECK(r0.grad_logits[0] == doctest::Approx(-0.5));
        CHECK(r0.grad_logits[1] == doctest::Approx(0.5));
    }
    SUBCASE("confident correct prediction") {
        LossResult r = softmax_cross_entropy(Tensor({1, 2}, {10, -10}), zero);
        CHECK(r.loss == doctest::Approx(2.0611536e-9).epsilon(1e-6));
    }
    SUBCASE("label out of range") {
        const int bad[] = {2};
        CHECK_THROWS_AS(softmax_cross_entropy(Tensor({1, 2}), bad), Error);
    }
    SUBCASE("rows sum to one, loss non-negative, gradient matches finite differences") {
        Rng rng(13);
        Tensor logits = random_tensor({6, 3}, rng, -5.0, 5.0);
        std::vector<int> labels;
        for (int i = 0; i < 6; ++i) labels.push_back(static_cast<int>(rng.below(3)));
        Tensor s = softmax(logits);
        for (std::size_t b = 0; b < 6; ++b) CHECK(std::abs(s[b * 3] + s[b * 3 + 1] + s[b * 3 + 2] - 1.0) <= 1e-6);
        LossResult r = softmax_cross_entropy(logits, labels);
        CHECK(r.loss >= 0.0);
        auto loss = [&] { return softmax_cross_entropy(logits, labels).loss; };
        CHECK(c2f::test::check_gradient(logits, r.grad_logits, loss).max_rel <= 1e-3);
    }
}
