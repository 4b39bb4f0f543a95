#include "burstcast/burst.hpp"
#include "burstcast/error.hpp"
#include "burstcast/rng.hpp"
#include "burstcast/traffic_gen.hpp"

#include <doctest.h>

#include <cmath>

#include "oracles.hpp"

using namespace burstcast;

namespace {

std::vector<double> normal_series(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal(0.0, 1.0);
    return x;
}

}  // namespace

TEST_SUITE("burst_detect") {

TEST_CASE("contrast score by hand") {
    std::vector<double> x{0, 0, 0, 1, 0, 0, 0};
    auto a = contrast_scores(x, 1);
    CHECK(a[3] == 1.0);
    CHECK(a[2] == -0.5);
    CHECK(a[0] == 0.0);
    CHECK(a[6] == 0.0);
    for (double v : contrast_scores(std::vector<double>(50, 3.25), 4)) CHECK(v == 0.0);
}

TEST_CASE("sliding sums equal direct evaluation") {
    auto x = normal_series(2000, 21);
    const std::size_t k = 128;
    auto a = contrast_scores(x, k);
    for (std::size_t j = k; j + k < x.size(); ++j) {
        double s = 0.0;
        for (std::size_t r = 1; r <= k; ++r) s += x[j - r] + x[j + r];
        CHECK(std::abs(a[j] - (x[j] - s / (2.0 * k))) < 1e-9);
    }
}

TEST_CASE("short series are rejected") {
    std::vector<double> x(8, 1.0);
    CHECK_THROWS_AS(contrast_scores(x, 4), DataError);
    CHECK_THROWS_AS(label_bursts(x, BurstConfig{4, 2.5}), DataError);
}

TEST_CASE("degenerate series carry no bursts") {
    auto l = label_bursts(std::vector<double>(600, 7.0), BurstConfig{});
    CHECK(l.count() == 0);
}

TEST_CASE("a planted spike is the only burst") {
    // Uniform noise never reaches 2.5 SDs, so nothing but the spike can qualify.
    for (int seed = 1; seed <= 100; ++seed) {
        Rng rng(1000 + seed);
        std::vector<double> x(400);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        x[200] = 10.0;
        auto l = label_bursts(x, BurstConfig{8, 2.5});
        CHECK(l.flags == oracle::burst_flags(x, 8, 2.5));
        REQUIRE(l.flags[200] == 1);
        CHECK(l.count() == 1);
    }
}

TEST_CASE("matches the brute-force definition") {
    Rng rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        std::size_t n = 300 + rng.below(1500);
        std::size_t k = std::vector<std::size_t>{4, 16, 64}[trial % 3];
        double h = trial % 2 ? 1.5 : 2.5;
        auto x = normal_series(n, 500 + trial);
        for (int s = 0; s < 5; ++s) x[rng.below(n)] += rng.uniform(2.0, 8.0);
        auto l = label_bursts(x, BurstConfig{k, h});
        REQUIRE(l.flags == oracle::burst_flags(x, k, h));
        for (std::size_t i = 0; i < n; ++i)
            if (l.flags[i]) CHECK((i >= k && i + k < n));
    }
}

TEST_CASE("flags are invariant under positive affine maps") {
    for (int trial = 0; trial < 10; ++trial) {
        auto x = normal_series(3000, 700 + trial);
        for (int s = 0; s < 10; ++s) x[100 + 290 * s] += 6.0;
        auto base = label_bursts(x, BurstConfig{16, 2.5});
        REQUIRE(base.count() > 0);
        for (auto [lambda, c] : {std::pair{2.0, 0.0}, std::pair{3.7, 100.0}, std::pair{0.01, -5.0}}) {
            std::vector<double> y(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = lambda * x[i] + c;
            auto l = label_bursts(y, BurstConfig{16, 2.5});
            CHECK(l.flags == base.flags);
            CHECK(l.stats.sigma_p == doctest::Approx(lambda * base.stats.sigma_p).epsilon(1e-9));
        }
    }
}

TEST_CASE("generator output has a small burst fraction") {
    GenConfig g;
    g.num_ticks = 20000;
    g.seed = 1;
    auto l = label_bursts(superpose(g), BurstConfig{});
    double frac = static_cast<double>(l.count()) / 20000.0;
    CHECK(frac > 0.0);
    CHECK(frac < 0.05);
}

TEST_CASE("distance examples") {
    using V = std::vector<std::uint32_t>;
    std::vector<std::uint8_t> a{1, 0, 0, 1, 0}, b{0, 0, 1}, c(6, 0);
    CHECK(burst_distance(a) == V{0, 1, 2, 0, 1});
    CHECK(burst_distance(b) == V{1, 2, 0});
    CHECK(burst_distance(c, 4) == V{1, 2, 3, 4, 4, 4});
}

TEST_CASE("distance properties") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::uint8_t> f(500);
        for (auto& v : f) v = rng.uniform() < 0.02;
        std::uint32_t cap = 1 + static_cast<std::uint32_t>(rng.below(200));
        auto d = burst_distance(f, cap);
        for (std::size_t t = 0; t < f.size(); ++t) {
            CHECK(d[t] <= cap);
            CHECK((d[t] == 0) == (f[t] == 1));
        }
    }
}

TEST_CASE("causal distance sees only confirmed bursts") {
    Rng rng(4);
    const std::size_t k = 10;
    std::vector<std::uint8_t> f(400);
    for (auto& v : f) v = rng.uniform() < 0.03;
    auto d = causal_burst_distance(f, k);
    for (std::size_t t = 0; t < f.size(); ++t) {
        long long last = -1;
        for (std::size_t i = 0; i + k <= t; ++i)
            if (f[i]) last = static_cast<long long>(i);
        CHECK(d[t] == static_cast<std::uint32_t>(static_cast<long long>(t) - last));
        CHECK(d[t] >= std::min<std::uint32_t>(k, static_cast<std::uint32_t>(t + 1)));
    }
    // Flags within the last k ticks are invisible.
    auto g = f;
    for (std::size_t i = 390; i < 400; ++i) g[i] = 1;
    auto e = causal_burst_distance(g, k);
    for (std::size_t t = 0; t < 400; ++t) CHECK(e[t] == d[t]);
}

TEST_CASE("log distance") {
    std::vector<std::uint32_t> d{0, 1, 10000};
    auto l = log_distance(d);
    CHECK(l[0] == 0.0);
    CHECK(l[1] == doctest::Approx(std::log(2.0)));
    CHECK(l[2] == doctest::Approx(std::log(10001.0)));
}

}  // TEST_SUITE
