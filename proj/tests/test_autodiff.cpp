#include "burstcast/autodiff.hpp"
#include "burstcast/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "oracles.hpp"

using namespace burstcast;
using ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(ad::numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(v), true);
}

// Weighted sum so every output element gets a distinct adjoint.
Tensor probe(const Tensor& y) {
    std::vector<double> w(y.numel());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.7 * std::sin(1.0 + 1.3 * static_cast<double>(i));
    return ad::sum(ad::mul(y, Tensor::from(y.shape(), std::move(w))));
}

struct OpCase {
    std::string name;
    std::vector<ad::Shape> shapes;
    std::function<Tensor(const std::vector<Tensor>&)> f;
    double lo = -1.0;
    double hi = 1.0;
};

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("closed forms") {
    CHECK(ad::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
    CHECK(ad::softplus(Tensor::scalar(0.0)).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(ad::softplus(Tensor::scalar(800.0)).item() == 800.0);
    CHECK(ad::softplus(Tensor::scalar(-800.0)).item() >= 0.0);
    auto s = ad::softmax_last(Tensor::full({3, 7}, 2.5));
    for (double v : s.values()) CHECK(std::abs(v - 1.0 / 7.0) < 1e-12);
}

TEST_CASE("matmul matches the triple loop") {
    Rng rng(1);
    auto a = random_tensor({7, 5}, rng), b = random_tensor({5, 3}, rng);
    auto c = ad::matmul(a, b);
    auto ref = oracle::matmul(a.values(), b.values(), 7, 5, 3);
    CHECK(c.shape() == ad::Shape{7, 3});
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(c.values()[i] - ref[i]) < 1e-12);

    auto batched = ad::matmul(random_tensor({2, 4, 6, 5}, rng), b);
    CHECK(batched.shape() == ad::Shape{2, 4, 6, 3});
}

TEST_CASE("shape errors name both shapes") {
    Rng rng(2);
    auto a = random_tensor({2, 3}, rng), b = random_tensor({4, 5}, rng);
    CHECK_THROWS_WITH(ad::matmul(a, b), doctest::Contains("[2, 3]"));
    CHECK_THROWS_WITH(ad::add(a, b), doctest::Contains("[4, 5]"));
    // Only suffix broadcasting is allowed.
    CHECK_NOTHROW(ad::add(random_tensor({4, 2, 3}, rng), a));
    CHECK_THROWS(ad::add(a, random_tensor({4, 2, 3}, rng)));
    CHECK_THROWS(ad::add(random_tensor({2, 3}, rng), random_tensor({2, 1}, rng)));
}

TEST_CASE("backward of a sum of squares") {
    auto x = Tensor::from({2}, {3.0, -1.0}, true);
    ad::backward(ad::sum(ad::mul(x, x)));
    CHECK(x.grad()[0] == 6.0);
    CHECK(x.grad()[1] == -2.0);
}

TEST_CASE("backward preconditions") {
    auto x = Tensor::from({2}, {1.0, 2.0}, true);
    CHECK_THROWS(ad::backward(ad::mul(x, x)));
    auto loss = ad::sum(ad::mul(x, x));
    ad::backward(loss);
    CHECK_THROWS(ad::backward(loss));
}

TEST_CASE("gradients accumulate on shared leaves") {
    auto x = Tensor::from({1}, {2.0}, true);
    ad::backward(ad::sum(ad::add(ad::mul(x, x), ad::scale(x, 3.0))));
    CHECK(x.grad()[0] == 7.0);
}

TEST_CASE("no-grad guard records nothing") {
    auto x = Tensor::from({2}, {1.0, 2.0}, true);
    {
        ad::NoGradGuard g;
        auto y = ad::mul(x, x);
        CHECK_FALSE(y.requires_grad());
        CHECK(y.is_leaf());
    }
    CHECK(ad::grad_enabled());
}

TEST_CASE("softmax cross-entropy gradient rows sum to zero") {
    Rng rng(3);
    auto logits = random_tensor({5, 6}, rng, -3, 3);
    std::vector<double> onehot(30, 0.0);
    for (std::size_t r = 0; r < 5; ++r) onehot[r * 6 + rng.below(6)] = 1.0;
    auto loss = ad::scale(ad::sum(ad::mul(Tensor::from({5, 6}, onehot), ad::log(ad::softmax_last(logits)))), -1.0);
    ad::backward(loss);
    for (std::size_t r = 0; r < 5; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 6; ++c) s += logits.grad()[r * 6 + c];
        CHECK(std::abs(s) < 1e-10);
    }
}

TEST_CASE("grad check of the identity is exact") {
    Rng rng(4);
    auto rep = ad::grad_check([](const std::vector<Tensor>& in) { return probe(in[0]); }, {random_tensor({3, 4}, rng)});
    CHECK(rep.worst < 1e-9);
}

TEST_CASE("every op passes the finite-difference check") {
    std::vector<std::size_t> rows{0, 2, 2, 3};
    std::vector<OpCase> cases{
        {"matmul", {{3, 4}, {4, 5}}, [](auto& in) { return probe(ad::matmul(in[0], in[1])); }},
        {"matmul_batched_rhs2d", {{2, 3, 4}, {4, 2}}, [](auto& in) { return probe(ad::matmul(in[0], in[1])); }},
        {"matmul_batched", {{2, 3, 4}, {2, 4, 2}}, [](auto& in) { return probe(ad::matmul(in[0], in[1])); }},
        {"transpose", {{2, 3, 4}}, [](auto& in) { return probe(ad::transpose(in[0])); }},
        {"reshape", {{2, 6}}, [](auto& in) { return probe(ad::reshape(in[0], {3, 4})); }},
        {"add", {{2, 3}, {2, 3}}, [](auto& in) { return probe(ad::add(in[0], in[1])); }},
        {"add_broadcast", {{4, 2, 3}, {3}}, [](auto& in) { return probe(ad::add(in[0], in[1])); }},
        {"sub", {{2, 3}, {3}}, [](auto& in) { return probe(ad::sub(in[0], in[1])); }},
        {"mul", {{3, 4}, {3, 4}}, [](auto& in) { return probe(ad::mul(in[0], in[1])); }},
        {"mul_broadcast", {{2, 3, 4}, {3, 4}}, [](auto& in) { return probe(ad::mul(in[0], in[1])); }},
        {"scale", {{5}}, [](auto& in) { return probe(ad::scale(in[0], -2.5)); }},
        {"add_scalar", {{5}}, [](auto& in) { return probe(ad::add_scalar(in[0], 0.7)); }},
        {"exp", {{2, 3}}, [](auto& in) { return probe(ad::exp(in[0])); }},
        {"log", {{2, 3}}, [](auto& in) { return probe(ad::log(in[0])); }, 0.5, 2.0},
        {"sqrt", {{2, 3}}, [](auto& in) { return probe(ad::sqrt(in[0])); }, 0.5, 2.0},
        {"abs", {{2, 3}}, [](auto& in) { return probe(ad::abs(in[0])); }, 0.1, 1.0},
        {"relu", {{2, 3}}, [](auto& in) { return probe(ad::relu(in[0])); }, 0.1, 1.0},
        {"sigmoid", {{2, 3}}, [](auto& in) { return probe(ad::sigmoid(in[0])); }, -3.0, 3.0},
        {"softplus", {{2, 3}}, [](auto& in) { return probe(ad::softplus(in[0])); }, -3.0, 3.0},
        {"clamp", {{2, 3}}, [](auto& in) { return probe(ad::clamp(in[0], -0.5, 0.5)); }, -0.4, 0.4},
        {"sum", {{3, 2}}, [](auto& in) { return ad::sum(ad::mul(in[0], in[0])); }},
        {"mean", {{3, 2}}, [](auto& in) { return ad::mean(ad::mul(in[0], in[0])); }},
        {"max_last", {{3, 5}}, [](auto& in) { return probe(ad::max_last(in[0])); }},
        {"softmax_last", {{2, 3, 4}}, [](auto& in) { return probe(ad::softmax_last(in[0])); }, -2.0, 2.0},
        {"layer_norm_last", {{4, 8}}, [](auto& in) { return probe(ad::layer_norm_last(in[0])); }},
        {"concat_last", {{2, 3}, {2, 2}}, [](auto& in) { return probe(ad::concat_last({in[0], in[1]})); }},
        {"slice_last", {{2, 6}}, [](auto& in) { return probe(ad::slice_last(in[0], 1, 3)); }},
        {"gather_rows", {{2, 4, 3}}, [rows](auto& in) { return probe(ad::gather_rows(in[0], rows)); }},
        {"causal_mask_fill",
         {{2, 4, 4}},
         [](auto& in) { return probe(ad::softmax_last(ad::causal_mask_fill(in[0], -1e9))); }},
    };
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        Rng rng(seed);
        for (const auto& c : cases) {
            std::vector<Tensor> inputs;
            for (const auto& s : c.shapes) inputs.push_back(random_tensor(s, rng, c.lo, c.hi));
            auto rep = ad::grad_check(c.f, inputs);
            INFO(c.name << " seed " << seed);
            CHECK(rep.worst < 1e-4);
        }
    }
}

TEST_CASE("max ties send the gradient to the first maximum") {
    auto x = Tensor::from({1, 3}, {2.0, 2.0, 1.0}, true);
    ad::backward(ad::sum(ad::max_last(x)));
    CHECK(x.grad()[0] == 1.0);
    CHECK(x.grad()[1] == 0.0);
}

TEST_CASE("causal mask fills the upper triangle") {
    auto m = ad::causal_mask_fill(Tensor::zeros({3, 3}), -7.0);
    std::vector<double> want{0, -7, -7, 0, 0, -7, 0, 0, 0};
    CHECK(std::vector<double>(m.values().begin(), m.values().end()) == want);
}

TEST_CASE("forward and backward are deterministic") {
    auto run = [] {
        Rng rng(8);
        auto a = random_tensor({16, 32}, rng), b = random_tensor({32, 8}, rng);
        auto loss = ad::sum(ad::softmax_last(ad::matmul(a, b)));
        ad::backward(ad::mul(loss, loss));
        return std::vector<double>(a.grad().begin(), a.grad().end());
    };
    CHECK(run() == run());
}

TEST_CASE("Adam with a zero gradient leaves parameters alone") {
    auto p = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
    ad::Adam opt({{"p", p}}, {0.1, 0.9, 0.999, 1e-8});
    p.mutable_grad();
    opt.step();
    CHECK(std::vector<double>(p.values().begin(), p.values().end()) == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("first Adam step has magnitude lr") {
    auto p = Tensor::from({2}, {0.0, 0.0}, true);
    ad::Adam opt({{"p", p}}, {0.01, 0.9, 0.999, 1e-8});
    auto g = p.mutable_grad();
    g[0] = 3.0;
    g[1] = -0.2;
    opt.step();
    CHECK(std::abs(p.values()[0] + 0.01) < 1e-6);
    CHECK(std::abs(p.values()[1] - 0.01) < 1e-6);
}

TEST_CASE("Adam without gradients refuses to step") {
    auto p = Tensor::from({2}, {0.0, 0.0}, true);
    ad::Adam opt({{"p", p}}, {});
    CHECK_THROWS(opt.step());
}

TEST_CASE("Adam minimizes a quadratic bowl") {
    auto x = Tensor::from({3}, {2.0, -1.0, 0.5}, true);
    auto target = Tensor::from({3}, {0.3, 0.7, -1.1});
    auto weight = Tensor::from({3}, {1.0, 4.0, 0.5});
    ad::Adam opt({{"x", x}}, {0.01, 0.9, 0.999, 1e-8});
    for (int step = 0; step < 2000; ++step) {
        opt.zero_grad();
        auto d = ad::sub(x, target);
        ad::backward(ad::sum(ad::mul(weight, ad::mul(d, d))));
        opt.step();
    }
    double f = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        double d = x.values()[i] - target.values()[i];
        f += weight.values()[i] * d * d;
    }
    CHECK(f < 1e-6);
}

}  // TEST_SUITE
