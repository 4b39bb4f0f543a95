#include "burstcast/error.hpp"
#include "burstcast/informer.hpp"
#include "burstcast/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"

using namespace burstcast;
using ad::Tensor;

namespace {

Tensor randn(ad::Shape shape, Rng& rng) {
    std::vector<double> v(ad::numel(shape));
    for (auto& x : v) x = rng.normal(0.0, 1.0);
    return Tensor::from(std::move(shape), std::move(v));
}

std::vector<double> copy(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

ModelConfig toy() {
    ModelConfig c;
    c.d_model = 8;
    c.n_heads = 2;
    c.d_ff = 16;
    c.encoder_len = 16;
    c.label_len = 8;
    c.pred_len = 4;
    return c;
}

ModelInput random_input(const ModelConfig& c, std::size_t batch, Rng& rng) {
    auto dist = [&](std::size_t len) {
        std::vector<double> v(batch * len);
        for (auto& x : v) x = std::log1p(static_cast<double>(rng.below(300)));
        return Tensor::from({batch, len, 1}, std::move(v));
    };
    ModelInput in{randn({batch, c.encoder_len, 1}, rng), dist(c.encoder_len), randn({batch, c.decoder_len(), 1}, rng),
                  dist(c.decoder_len())};
    // Placeholder region is zero in both channels.
    auto dv = in.dec_values.mutable_values();
    auto dd = in.dec_log_dist.mutable_values();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = c.label_len; i < c.decoder_len(); ++i) dv[b * c.decoder_len() + i] = dd[b * c.decoder_len() + i] = 0.0;
    return in;
}

ModelOutput manual_output(double base, double prob, double delta, double combined) {
    return {Tensor::from({1, 1, 1}, {base}), Tensor::from({1, 1, 1}, {prob}), Tensor::from({1, 1, 1}, {delta}),
            Tensor::from({1, 1, 1}, {combined})};
}

std::vector<double> scores_of(const std::vector<double>& q, const std::vector<double>& k, std::size_t lq,
                              std::size_t lk, std::size_t d) {
    std::vector<double> s(lq * lk);
    for (std::size_t i = 0; i < lq; ++i)
        for (std::size_t j = 0; j < lk; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) acc += q[i * d + c] * k[j * d + c];
            s[i * lk + j] = acc / std::sqrt(static_cast<double>(d));
        }
    return s;
}

}  // namespace

TEST_SUITE("informer_burst") {

TEST_CASE("config validation and canonical form") {
    auto c = ModelConfig::desk();
    CHECK(c.d_model == 64);
    CHECK(c.n_heads == 4);
    CHECK(ModelConfig::paper().d_model == 512);
    CHECK(ModelConfig::parse(c.canonical()).digest() == c.digest());
    auto bad = c;
    bad.n_heads = 5;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("divisible"), DataError);
    bad = c;
    bad.label_len = 200;
    CHECK_THROWS_AS(bad.validate(), DataError);
    auto diff = config_diff(c, ModelConfig::paper());
    CHECK(std::find(diff.begin(), diff.end(), "d_model: 64 != 512") != diff.end());
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("active query count") {
    CHECK(active_query_count(5.0, 128) == 25);
    CHECK(active_query_count(5.0, 65) == 21);
    CHECK(active_query_count(5.0, 3) == 3);
    CHECK(active_query_count(0.01, 10) == 1);
}

TEST_CASE("full selection equals dense attention") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t lq = 2 + rng.below(20), d = 1 + rng.below(8);
        bool causal = trial % 2 == 0;
        std::size_t lk = causal ? lq : 2 + rng.below(20);
        auto q = randn({1, lq, d}, rng), k = randn({1, lk, d}, rng), v = randn({1, lk, d}, rng);
        auto got = probsparse_attention(q, k, v, lq, causal);
        auto ref = oracle::full_attention(q.values(), k.values(), v.values(), lq, lk, d, causal);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(got.values()[i] - ref[i]) < 1e-10);
    }
}

TEST_CASE("sparse attention matches the brute-force rule") {
    Rng rng(2);
    for (int trial = 0; trial < 40; ++trial) {
        std::size_t lq = trial == 0 ? 16 : 3 + rng.below(20), d = trial == 0 ? 8 : 1 + rng.below(8);
        std::size_t u = trial == 0 ? 4 : 1 + rng.below(lq);
        bool causal = trial % 2 == 1;
        std::size_t lk = causal ? lq : 2 + rng.below(20);
        auto q = randn({1, lq, d}, rng), k = randn({1, lk, d}, rng), v = randn({1, lk, d}, rng);
        auto ref = oracle::probsparse(q.values(), k.values(), v.values(), lq, lk, d, u, causal);
        auto s = scores_of(copy(q), copy(k), lq, lk, d);
        auto measure = sparsity_measure(s, lq, lk, causal);
        for (std::size_t i = 0; i < lq; ++i) CHECK(std::abs(measure[i] - ref.measure[i]) < 1e-12);
        CHECK(select_queries(measure, u, causal) == ref.selected);
        auto got = probsparse_attention(q, k, v, u, causal);
        for (std::size_t i = 0; i < ref.out.size(); ++i) CHECK(std::abs(got.values()[i] - ref.out[i]) < 1e-10);
    }
}

TEST_CASE("batched attention treats elements independently") {
    Rng rng(3);
    auto q = randn({3, 10, 4}, rng), k = randn({3, 10, 4}, rng), v = randn({3, 10, 4}, rng);
    auto got = probsparse_attention(q, k, v, 3, true);
    for (std::size_t b = 0; b < 3; ++b) {
        auto part = [&](const Tensor& t) {
            return std::vector<double>(t.values().begin() + b * 40, t.values().begin() + (b + 1) * 40);
        };
        auto ref = oracle::probsparse(part(q), part(k), part(v), 10, 10, 4, 3, true);
        for (std::size_t i = 0; i < 40; ++i) CHECK(std::abs(got.values()[b * 40 + i] - ref.out[i]) < 1e-10);
    }
}

TEST_CASE("symmetric inputs give a zero measure") {
    std::vector<double> q(6 * 4, 0.3), k(6 * 4, -0.7), v;
    for (int j = 0; j < 6; ++j)
        for (double x : {1.0, 2.0, 3.0, 4.0}) v.push_back(x);
    auto m = sparsity_measure(scores_of(q, k, 6, 6, 4), 6, 6, false);
    for (double x : m) CHECK(std::abs(x) < 1e-15);
    auto out = probsparse_attention(Tensor::from({1, 6, 4}, q), Tensor::from({1, 6, 4}, k), Tensor::from({1, 6, 4}, v),
                                    2, false);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t c = 0; c < 4; ++c) CHECK(out.values()[i * 4 + c] == doctest::Approx(c + 1.0).epsilon(1e-14));
}

TEST_CASE("selection grows with u") {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t lq = 5 + rng.below(30);
        std::vector<double> m(lq);
        for (auto& x : m) x = std::round(rng.uniform(0, 5));  // ties on purpose
        for (bool causal : {false, true}) {
            auto prev = select_queries(m, 1, causal);
            for (std::size_t u = 2; u <= lq; ++u) {
                auto cur = select_queries(m, u, causal);
                for (std::size_t i = 0; i < lq; ++i) CHECK(cur[i] >= prev[i]);
                prev = cur;
            }
            for (auto s : prev) CHECK(s == 1);
        }
    }
}

TEST_CASE("attention preconditions") {
    Rng rng(5);
    auto q = randn({1, 4, 2}, rng);
    CHECK_THROWS(probsparse_attention(q, q, q, 0, false));
    CHECK_THROWS(probsparse_attention(q, randn({1, 4, 3}, rng), randn({1, 4, 3}, rng), 2, false));
}

TEST_CASE("sampled sparsity stays within the visible keys") {
    Rng rng(6);
    std::size_t lq = 12, lk = 12;
    auto s = scores_of(copy(randn({12, 4}, rng)), copy(randn({12, 4}, rng)), lq, lk, 4);
    KeySampling ks{5, 99};
    auto a = sampled_sparsity_measure(s, lq, lk, true, ks, 0);
    auto b = sampled_sparsity_measure(s, lq, lk, true, ks, 0);
    CHECK(a == b);
    CHECK(a[0] == 0.0);  // row 0 sees only key 0
    for (double x : a) CHECK(x >= 0.0);
}

TEST_CASE("embedding contracts") {
    Rng rng(7);
    auto c = toy();
    BurstInformer model(c, 11);
    auto values = randn({2, 16, 1}, rng);
    auto d1 = randn({2, 16, 1}, rng), d2 = randn({2, 16, 1}, rng);
    auto e1 = model.embed(values, d1), e2 = model.embed(values, d2);
    CHECK(e1.shape() == ad::Shape{2, 16, 8});

    // Difference is exactly the projection of the distance difference.
    auto w = model.param("embed.burst.w").values();
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t t = 0; t < 16; ++t)
            for (std::size_t j = 0; j < 8; ++j) {
                double dd = d1.values()[b * 16 + t] - d2.values()[b * 16 + t];
                double got = e1.values()[(b * 16 + t) * 8 + j] - e2.values()[(b * 16 + t) * 8 + j];
                CHECK(std::abs(got - dd * w[j]) < 1e-12);
            }

    // Zero distance contributes the bias row.
    auto zero = model.embed(values, Tensor::zeros({2, 16, 1}));
    auto none_cfg = c;
    none_cfg.enable_burst_embed = false;
    BurstInformer plain(none_cfg, 11);
    plain.param("embed.value.w").mutable_values()[0] = model.param("embed.value.w").values()[0];
    for (std::size_t j = 0; j < 8; ++j) {
        plain.param("embed.value.w").mutable_values()[j] = model.param("embed.value.w").values()[j];
        plain.param("embed.value.b").mutable_values()[j] = model.param("embed.value.b").values()[j];
    }
    auto base = plain.embed(values, Tensor::zeros({2, 16, 1}));
    auto bias = model.param("embed.burst.b").values();
    for (std::size_t i = 0; i < zero.numel(); ++i) CHECK(std::abs(zero.values()[i] - base.values()[i] - bias[i % 8]) < 1e-12);

    // Disabled embedding ignores distances entirely.
    CHECK(copy(plain.embed(values, d1)) == copy(plain.embed(values, d2)));
}

TEST_CASE("positional encoding") {
    auto pe = positional_encoding(10, 8);
    CHECK(pe.shape() == ad::Shape{10, 8});
    CHECK(pe.values()[0] == 0.0);
    CHECK(pe.values()[1] == 1.0);
    CHECK(pe.values()[8] == doctest::Approx(std::sin(1.0)));
}

TEST_CASE("encoder with zeroed sublayers is a chain of layer norms") {
    ModelConfig c;
    c.d_model = 4;
    c.n_heads = 1;
    c.d_ff = 8;
    c.encoder_len = 2;
    c.label_len = 1;
    c.pred_len = 1;
    BurstInformer model(c, 1);
    for (auto& p : model.parameters())
        if (p.name.rfind("enc.", 0) == 0 && (p.name.find(".attn.") != std::string::npos || p.name.find(".ff") != std::string::npos))
            std::fill(p.tensor.mutable_values().begin(), p.tensor.mutable_values().end(), 0.0);
    std::vector<double> x{1.0, -2.0, 0.5, 3.0, 0.0, 0.25, -1.0, 2.0};
    auto out = model.encoder_forward(Tensor::from({1, 2, 4}, x));

    auto ln = [](std::vector<double> r) {
        double m = 0.0, v = 0.0;
        for (double e : r) m += e;
        m /= 4.0;
        for (double e : r) v += (e - m) * (e - m);
        v /= 4.0;
        for (auto& e : r) e = (e - m) / std::sqrt(v + 1e-5);
        return r;
    };
    for (std::size_t row = 0; row < 2; ++row) {
        std::vector<double> r(x.begin() + row * 4, x.begin() + row * 4 + 4);
        for (int n = 0; n < 2 * static_cast<int>(c.n_enc_layers); ++n) r = ln(r);
        for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(out.values()[row * 4 + j] - r[j]) < 1e-12);
    }
}

TEST_CASE("shapes, batch independence and the head invariant") {
    Rng rng(8);
    auto c = toy();
    BurstInformer model(c, 21);
    auto in = random_input(c, 3, rng);
    auto out = model.forward(in);
    for (const auto* t : {&out.base, &out.burst_prob, &out.delta, &out.combined}) CHECK(t->shape() == ad::Shape{3, 4, 1});
    for (std::size_t i = 0; i < out.combined.numel(); ++i) {
        double b = out.base.values()[i], p = out.burst_prob.values()[i], d = out.delta.values()[i];
        CHECK(out.combined.values()[i] == b + p * d);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        CHECK(d >= 0.0);
        CHECK(out.combined.values()[i] >= b);
    }
    CHECK(model.encoder_forward(model.embed(in.enc_values, in.enc_log_dist)).shape() == ad::Shape{3, 16, 8});

    // Reverse the batch and compare per sample.
    auto reverse = [](const Tensor& t) {
        auto n = t.shape()[0], per = t.numel() / n;
        std::vector<double> v(t.numel());
        for (std::size_t b = 0; b < n; ++b)
            std::copy_n(t.values().begin() + (n - 1 - b) * per, per, v.begin() + b * per);
        return Tensor::from(t.shape(), v);
    };
    ModelInput rin{reverse(in.enc_values), reverse(in.enc_log_dist), reverse(in.dec_values), reverse(in.dec_log_dist)};
    auto rout = model.forward(rin);
    auto back = reverse(rout.combined);
    for (std::size_t i = 0; i < back.numel(); ++i) CHECK(std::abs(back.values()[i] - out.combined.values()[i]) < 1e-12);

    CHECK(copy(model.forward(in).combined) == copy(out.combined));
}

TEST_CASE("pred_len 1 gives single-step outputs") {
    Rng rng(9);
    auto c = toy();
    c.pred_len = 1;
    BurstInformer model(c, 3);
    auto out = model.forward(random_input(c, 2, rng));
    CHECK(out.combined.shape() == ad::Shape{2, 1, 1});
}

TEST_CASE("decoder row i ignores later decoder inputs") {
    Rng rng(10);
    auto c = toy();
    BurstInformer model(c, 5);
    auto in = random_input(c, 1, rng);
    auto enc = model.encoder_forward(model.embed(in.enc_values, in.enc_log_dist));
    auto dec = model.embed(in.dec_values, in.dec_log_dist);
    auto ref = model.decoder_forward(dec, enc);
    CHECK(ref.shape() == ad::Shape{1, 4, 8});
    for (std::size_t row = c.label_len + 1; row < c.decoder_len(); ++row) {
        auto v = copy(dec);
        for (std::size_t j = 0; j < 8; ++j) v[row * 8 + j] += rng.normal(0.0, 3.0);
        auto got = model.decoder_forward(Tensor::from(dec.shape(), v), enc);
        for (std::size_t i = 0; i + c.label_len < row; ++i)
            for (std::size_t j = 0; j < 8; ++j) CHECK(got.values()[i * 8 + j] == ref.values()[i * 8 + j]);
        bool changed = false;
        for (std::size_t j = 0; j < 8; ++j) changed |= got.values()[(row - c.label_len) * 8 + j] != ref.values()[(row - c.label_len) * 8 + j];
        CHECK(changed);
    }
}

TEST_CASE("ablation switches are exact no-ops") {
    Rng rng(11);
    auto c = toy();
    c.enable_burst_embed = false;
    c.enable_burst_heads = false;
    BurstInformer model(c, 2);
    auto in = random_input(c, 2, rng);
    auto out = model.forward(in);
    CHECK(copy(out.combined) == copy(out.base));
    for (double v : out.burst_prob.values()) CHECK(v == 0.0);
    for (double v : out.delta.values()) CHECK(v == 0.0);
    auto other = in;
    other.enc_log_dist = randn({2, 16, 1}, rng);
    other.dec_log_dist = randn({2, 12, 1}, rng);
    CHECK(copy(model.forward(other).combined) == copy(out.combined));

    for (const auto& p : model.parameters()) {
        CHECK(p.name.rfind("head.prob", 0) != 0);
        CHECK(p.name.rfind("embed.burst", 0) != 0);
    }
}

TEST_CASE("heads at zero preactivation") {
    auto c = toy();
    BurstInformer model(c, 1);
    for (auto& p : model.parameters())
        if (p.name.rfind("head.", 0) == 0) std::fill(p.tensor.mutable_values().begin(), p.tensor.mutable_values().end(), 0.0);
    Rng rng(12);
    auto out = model.heads(randn({1, 4, 8}, rng));
    for (double p : out.burst_prob.values()) CHECK(p == 0.5);
    for (double d : out.delta.values()) CHECK(d == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    for (std::size_t i = 0; i < 4; ++i) CHECK(out.combined.values()[i] == doctest::Approx(0.5 * std::log(2.0)));
}

TEST_CASE("loss arithmetic") {
    auto c = toy();
    c.enable_burst_heads = false;
    auto burst = BatchTargets{Tensor::from({1, 1, 1}, {0.0}), Tensor::from({1, 1, 1}, {1.0})};
    auto calm = BatchTargets{Tensor::from({1, 1, 1}, {0.0}), Tensor::from({1, 1, 1}, {0.0})};
    auto out = manual_output(1.0, 0.0, 0.0, 1.0);
    CHECK(composite_loss(out, burst, c, 1.0).asym == doctest::Approx(6.0));
    CHECK(composite_loss(out, calm, c, 1.0).asym == doctest::Approx(1.0));
    CHECK(composite_loss(out, burst, c, 1.0).total.item() == doctest::Approx(6.0));
    c.enable_asym_loss = false;
    CHECK(composite_loss(out, burst, c, 1.0).asym == doctest::Approx(1.0));

    // base 0.5, saturated probability, delta 2.
    auto sat = manual_output(0.5, 1.0, 2.0, 0.5 + 1.0 * 2.0);
    CHECK(sat.combined.item() == 2.5);
}

TEST_CASE("full composite loss by hand") {
    auto c = toy();
    std::vector<double> base{0.2, -0.1, 0.4}, prob{0.9, 0.2, 0.6}, delta{0.5, 0.3, 1.0}, y{1.5, 0.0, 0.1}, yp{1, 0, 1};
    std::vector<double> comb(3);
    for (int i = 0; i < 3; ++i) comb[i] = base[i] + prob[i] * delta[i];
    ModelOutput out{Tensor::from({1, 3, 1}, base), Tensor::from({1, 3, 1}, prob), Tensor::from({1, 3, 1}, delta),
                    Tensor::from({1, 3, 1}, comb)};
    BatchTargets tgt{Tensor::from({1, 3, 1}, y), Tensor::from({1, 3, 1}, yp)};
    double asym = 0, bce = 0, mae = 0;
    for (int i = 0; i < 3; ++i) {
        asym += (1 + 5.0 * yp[i]) * (comb[i] - y[i]) * (comb[i] - y[i]);
        bce += 4.0 * yp[i] * -std::log(prob[i]) + (1 - yp[i]) * -std::log(1 - prob[i]);
        if (yp[i]) mae += std::abs(comb[i] - y[i]);
    }
    asym /= 3;
    bce /= 3;
    mae /= 2;
    auto l = composite_loss(out, tgt, c, 4.0);
    CHECK(l.asym == doctest::Approx(asym).epsilon(1e-14));
    CHECK(l.bce == doctest::Approx(bce).epsilon(1e-14));
    CHECK(l.mae == doctest::Approx(mae).epsilon(1e-14));
    CHECK(l.total.item() == doctest::Approx(0.33 * (asym + bce + mae)).epsilon(1e-14));

    // Without bursts the asymmetric term is plain MSE and the MAE term vanishes.
    BatchTargets calm{Tensor::from({1, 3, 1}, y), Tensor::zeros({1, 3, 1})};
    auto lc = composite_loss(out, calm, c, 4.0);
    double mse = 0;
    for (int i = 0; i < 3; ++i) mse += (comb[i] - y[i]) * (comb[i] - y[i]) / 3;
    CHECK(lc.asym == doctest::Approx(mse).epsilon(1e-14));
    CHECK(lc.mae == 0.0);

    // Saturated probabilities are clamped rather than producing infinities.
    ModelOutput sat{Tensor::from({1, 3, 1}, base), Tensor::from({1, 3, 1}, {0.0, 1.0, 0.0}), Tensor::from({1, 3, 1}, delta),
                    Tensor::from({1, 3, 1}, base)};
    CHECK(std::isfinite(composite_loss(sat, tgt, c, 4.0).total.item()));

    // Chunks with a shared normalizer add up to the whole.
    LossNormalizer norm{6.0, 4.0};
    auto half = composite_loss(out, tgt, c, 4.0, &norm);
    CHECK(half.total.item() * 2 == doctest::Approx(0.33 * (asym + bce + mae)).epsilon(1e-12));
}

TEST_CASE("end-to-end gradient check on a toy model") {
    for (bool heads : {true, false}) {
        auto c = toy();
        c.enable_burst_heads = heads;
        c.value_kernel = heads ? 3 : 1;
        BurstInformer model(c, 3);
        Rng rng(13);
        auto in = random_input(c, 2, rng);
        BatchTargets tgt{randn({2, 4, 1}, rng), Tensor::from({2, 4, 1}, {1, 0, 0, 0, 0, 1, 1, 0})};
        std::vector<Tensor> params;
        for (auto& p : model.parameters()) params.push_back(p.tensor);
        auto rep = ad::grad_check([&](const std::vector<Tensor>&) { return composite_loss(model.forward(in), tgt, c, 3.0).total; },
                                  params);
        INFO("heads " << heads);
        CHECK(rep.worst < 1e-3);
    }
}

TEST_CASE("initialization is seeded") {
    auto c = toy();
    BurstInformer a(c, 4), b(c, 4), d(c, 5);
    CHECK(copy(a.param("enc.0.attn.q.w")) == copy(b.param("enc.0.attn.q.w")));
    CHECK(copy(a.param("enc.0.attn.q.w")) != copy(d.param("enc.0.attn.q.w")));
    CHECK_THROWS_AS(a.param("nope"), std::out_of_range);
}

}  // TEST_SUITE
