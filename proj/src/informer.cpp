#include "burstcast/informer.hpp"

#include "burstcast/error.hpp"
#include "burstcast/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace burstcast {

using ad::Tensor;

// ModelConfig ----------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::pair<std::string, std::string>> config_fields(const ModelConfig& c) {
    auto b = [](bool v) { return std::string(v ? "1" : "0"); };
    return {
        {"d_model", std::to_string(c.d_model)},
        {"n_heads", std::to_string(c.n_heads)},
        {"n_enc_layers", std::to_string(c.n_enc_layers)},
        {"n_dec_layers", std::to_string(c.n_dec_layers)},
        {"d_ff", std::to_string(c.d_ff)},
        {"encoder_len", std::to_string(c.encoder_len)},
        {"label_len", std::to_string(c.label_len)},
        {"pred_len", std::to_string(c.pred_len)},
        {"sampling_factor", fmt_double(c.sampling_factor)},
        {"gamma", fmt_double(c.gamma)},
        {"enable_burst_embed", b(c.enable_burst_embed)},
        {"enable_burst_heads", b(c.enable_burst_heads)},
        {"enable_asym_loss", b(c.enable_asym_loss)},
        {"sampled_sparsity", b(c.sampled_sparsity)},
        {"value_kernel", std::to_string(c.value_kernel)},
    };
}

template <class T>
T parse_field(const std::string& key, const std::string& text) {
    T v{};
    if constexpr (std::is_same_v<T, double>) {
        std::size_t used = 0;
        try {
            v = std::stod(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != text.size() || text.empty()) throw DataError("bad model config value for " + key + ": " + text);
    } else {
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || ptr != text.data() + text.size())
            throw DataError("bad model config value for " + key + ": " + text);
    }
    return v;
}

}  // namespace

void ModelConfig::validate() const {
    if (d_model == 0 || n_heads == 0 || d_ff == 0) throw DataError("model dimensions must be positive");
    if (d_model % n_heads != 0)
        throw DataError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                        std::to_string(n_heads));
    if (n_enc_layers == 0 || n_dec_layers == 0) throw DataError("need at least one encoder and decoder layer");
    if (encoder_len == 0 || pred_len == 0) throw DataError("encoder_len and pred_len must be positive");
    if (label_len > encoder_len) throw DataError("label_len exceeds encoder_len");
    if (!(sampling_factor > 0.0)) throw DataError("sampling factor must be positive");
    if (!(gamma >= 0.0)) throw DataError("gamma must be non-negative");
    if (value_kernel != 1 && value_kernel != 3) throw DataError("value_kernel must be 1 or 3");
}

std::string ModelConfig::canonical() const {
    std::string out;
    for (const auto& [k, v] : config_fields(*this)) out += k + "=" + v + "\n";
    return out;
}

std::uint64_t ModelConfig::digest() const { return fnv1a64(canonical()); }

ModelConfig ModelConfig::parse(std::string_view canonical_text) {
    ModelConfig c;
    std::istringstream in{std::string(canonical_text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("bad model config line: " + line);
        auto key = line.substr(0, eq);
        auto val = line.substr(eq + 1);
        auto flag = [&] {
            if (val != "0" && val != "1") throw DataError("bad model config flag for " + key + ": " + val);
            return val == "1";
        };
        if (key == "d_model") c.d_model = parse_field<std::size_t>(key, val);
        else if (key == "n_heads") c.n_heads = parse_field<std::size_t>(key, val);
        else if (key == "n_enc_layers") c.n_enc_layers = parse_field<std::size_t>(key, val);
        else if (key == "n_dec_layers") c.n_dec_layers = parse_field<std::size_t>(key, val);
        else if (key == "d_ff") c.d_ff = parse_field<std::size_t>(key, val);
        else if (key == "encoder_len") c.encoder_len = parse_field<std::size_t>(key, val);
        else if (key == "label_len") c.label_len = parse_field<std::size_t>(key, val);
        else if (key == "pred_len") c.pred_len = parse_field<std::size_t>(key, val);
        else if (key == "sampling_factor") c.sampling_factor = parse_field<double>(key, val);
        else if (key == "gamma") c.gamma = parse_field<double>(key, val);
        else if (key == "enable_burst_embed") c.enable_burst_embed = flag();
        else if (key == "enable_burst_heads") c.enable_burst_heads = flag();
        else if (key == "enable_asym_loss") c.enable_asym_loss = flag();
        else if (key == "sampled_sparsity") c.sampled_sparsity = flag();
        else if (key == "value_kernel") c.value_kernel = parse_field<std::size_t>(key, val);
        else throw DataError("unknown model config key: " + key);
    }
    c.validate();
    return c;
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
    ModelConfig c;
    c.d_model = 512;
    c.n_heads = 8;
    c.d_ff = 2048;
    return c;
}

std::vector<std::string> config_diff(const ModelConfig& a, const ModelConfig& b) {
    auto fa = config_fields(a);
    auto fb = config_fields(b);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < fa.size(); ++i)
        if (fa[i].second != fb[i].second) out.push_back(fa[i].first + ": " + fa[i].second + " != " + fb[i].second);
    return out;
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ProbSparse attention -------------------------------------------------------

std::size_t active_query_count(double sampling_factor, std::size_t length) {
    if (length == 0) return 0;
    auto u = static_cast<long long>(std::ceil(sampling_factor * std::log(static_cast<double>(length))));
    return static_cast<std::size_t>(std::clamp<long long>(u, 1, static_cast<long long>(length)));
}

std::vector<double> sparsity_measure(std::span<const double> scores, std::size_t lq, std::size_t lk, bool causal) {
    std::vector<double> m(lq);
    for (std::size_t i = 0; i < lq; ++i) {
        const double* row = scores.data() + i * lk;
        std::size_t n = causal ? std::min(i + 1, lk) : lk;
        double mx = -std::numeric_limits<double>::infinity();
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            mx = std::max(mx, row[j]);
            s += row[j];
        }
        m[i] = mx - s / static_cast<double>(n);
    }
    return m;
}

std::vector<double> sampled_sparsity_measure(std::span<const double> scores, std::size_t lq, std::size_t lk,
                                             bool causal, const KeySampling& sampling, std::size_t batch_index) {
    std::vector<double> m(lq);
    for (std::size_t i = 0; i < lq; ++i) {
        const double* row = scores.data() + i * lk;
        std::size_t n = causal ? std::min(i + 1, lk) : lk;
        Rng rng(stream_seed(sampling.seed, batch_index * lq + i));
        double mx = -std::numeric_limits<double>::infinity();
        double s = 0.0;
        for (std::size_t t = 0; t < sampling.keys; ++t) {
            double v = row[rng.below(n)];
            mx = std::max(mx, v);
            s += v;
        }
        m[i] = mx - s / static_cast<double>(sampling.keys);
    }
    return m;
}

std::vector<std::uint8_t> select_queries(std::span<const double> measure, std::size_t u, bool causal) {
    const auto lq = measure.size();
    std::vector<std::uint8_t> active(lq, 0);
    if (u >= lq) {
        std::fill(active.begin(), active.end(), std::uint8_t{1});
        return active;
    }
    // j outranks i when its measure is larger, or equal with a lower index.
    auto outranks = [&](std::size_t j, std::size_t i) {
        return measure[j] > measure[i] || (measure[j] == measure[i] && j < i);
    };
    if (causal) {
        for (std::size_t i = 0; i < lq; ++i) {
            std::size_t rank = 0;
            for (std::size_t j = 0; j < i; ++j) rank += outranks(j, i) ? 1 : 0;
            active[i] = rank < u ? 1 : 0;
        }
        return active;
    }
    std::vector<std::size_t> order(lq);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(u), order.end(), outranks);
    for (std::size_t r = 0; r < u; ++r) active[order[r]] = 1;
    return active;
}

Tensor probsparse_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t u, bool causal,
                            const KeySampling* sampling) {
    if (q.dim() != 3 || k.dim() != 3 || v.dim() != 3)
        throw std::invalid_argument("probsparse_attention: expected [B, L, d] inputs, got " + ad::to_string(q.shape()) +
                                    ", " + ad::to_string(k.shape()) + ", " + ad::to_string(v.shape()));
    const auto batch = q.size(0);
    const auto lq = q.size(1);
    const auto dk = q.size(2);
    const auto lk = k.size(1);
    if (k.size(0) != batch || v.size(0) != batch || k.size(2) != dk || v.size(1) != lk)
        throw std::invalid_argument("probsparse_attention: shape mismatch between " + ad::to_string(q.shape()) +
                                    ", " + ad::to_string(k.shape()) + " and " + ad::to_string(v.shape()));
    if (u == 0) throw std::invalid_argument("probsparse_attention: u must be positive");
    const auto dv = v.size(2);

    auto scores = ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(static_cast<double>(dk)));

    std::vector<std::vector<std::uint8_t>> active(batch);
    bool all_active = true;
    for (std::size_t b = 0; b < batch; ++b) {
        auto s = scores.values().subspan(b * lq * lk, lq * lk);
        auto m = sampling ? sampled_sparsity_measure(s, lq, lk, causal, *sampling, b)
                          : sparsity_measure(s, lq, lk, causal);
        active[b] = select_queries(m, u, causal);
        all_active = all_active && std::all_of(active[b].begin(), active[b].end(), [](auto f) { return f != 0; });
    }

    auto masked = causal ? ad::causal_mask_fill(scores, -std::numeric_limits<double>::infinity()) : scores;
    auto attended = ad::matmul(ad::softmax_last(masked), v);
    if (all_active) return attended;

    // Fallback rows: (running) mean of V as a constant averaging matrix.
    std::vector<double> avg(batch * lq * lk, 0.0);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < lq; ++i) {
            std::size_t n = causal ? std::min(i + 1, lk) : lk;
            for (std::size_t j = 0; j < n; ++j) avg[(b * lq + i) * lk + j] = 1.0 / static_cast<double>(n);
        }
    auto fallback = ad::matmul(Tensor::from({batch, lq, lk}, std::move(avg)), v);

    std::vector<double> on(batch * lq * dv);
    std::vector<double> off(batch * lq * dv);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < lq; ++i)
            for (std::size_t j = 0; j < dv; ++j) {
                on[(b * lq + i) * dv + j] = active[b][i] ? 1.0 : 0.0;
                off[(b * lq + i) * dv + j] = active[b][i] ? 0.0 : 1.0;
            }
    return ad::add(ad::mul(attended, Tensor::from({batch, lq, dv}, std::move(on))),
                   ad::mul(fallback, Tensor::from({batch, lq, dv}, std::move(off))));
}

// Loss -----------------------------------------------------------------------

LossBreakdown composite_loss(const ModelOutput& out, const BatchTargets& tgt, const ModelConfig& cfg, double pos_weight,
                             const LossNormalizer* norm) {
    if (out.combined.shape() != tgt.y.shape() || tgt.y.shape() != tgt.burst.shape())
        throw std::invalid_argument("composite_loss: output " + ad::to_string(out.combined.shape()) +
                                    " and targets " + ad::to_string(tgt.y.shape()) + " differ");
    auto flags = tgt.burst.values();
    LossNormalizer n;
    if (norm) {
        n = *norm;
    } else {
        n.steps = static_cast<double>(flags.size());
        for (double f : flags) n.burst_steps += f;
    }
    const double gamma = cfg.enable_asym_loss ? cfg.gamma : 0.0;
    const auto shape = tgt.y.shape();

    std::vector<double> weight(flags.size());
    for (std::size_t i = 0; i < flags.size(); ++i) weight[i] = 1.0 + gamma * flags[i];
    auto diff = ad::sub(out.combined, tgt.y);
    auto asym = ad::scale(ad::sum(ad::mul(ad::mul(diff, diff), Tensor::from(shape, std::move(weight)))),
                          1.0 / n.steps);

    LossBreakdown res;
    res.asym = asym.item();
    if (!cfg.enable_burst_heads) {
        res.total = asym;
        return res;
    }

    std::vector<double> pos(flags.size());
    std::vector<double> neg(flags.size());
    for (std::size_t i = 0; i < flags.size(); ++i) {
        pos[i] = pos_weight * flags[i];
        neg[i] = 1.0 - flags[i];
    }
    auto p = ad::clamp(out.burst_prob, kProbClamp, 1.0 - kProbClamp);
    auto log_p = ad::log(p);
    auto log_q = ad::log(ad::add_scalar(ad::scale(p, -1.0), 1.0));
    auto bce = ad::scale(ad::sum(ad::add(ad::mul(log_p, Tensor::from(shape, std::move(pos))),
                                         ad::mul(log_q, Tensor::from(shape, std::move(neg))))),
                         -1.0 / n.steps);
    res.bce = bce.item();

    Tensor total = ad::add(asym, bce);
    if (n.burst_steps > 0.0) {
        auto mae = ad::scale(ad::sum(ad::mul(ad::abs(diff), tgt.burst)), 1.0 / n.burst_steps);
        res.mae = mae.item();
        total = ad::add(total, mae);
    }
    res.total = ad::scale(total, kLossTermWeight);
    return res;
}

// Model ----------------------------------------------------------------------

Tensor positional_encoding(std::size_t length, std::size_t d_model) {
    std::vector<double> pe(length * d_model);
    for (std::size_t pos = 0; pos < length; ++pos)
        for (std::size_t i = 0; i < d_model; i += 2) {
            double div = std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
            pe[pos * d_model + i] = std::sin(static_cast<double>(pos) / div);
            if (i + 1 < d_model) pe[pos * d_model + i + 1] = std::cos(static_cast<double>(pos) / div);
        }
    return Tensor::from({length, d_model}, std::move(pe));
}

BurstInformer::BurstInformer(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg), init_seed_(init_seed) {
    cfg_.validate();
    Rng rng(init_seed);
    const auto d = cfg_.d_model;
    // Creation order fixes both the init stream and the checkpoint order.
    value_embed_ = make_linear("embed.value", cfg_.value_kernel, d);
    if (cfg_.enable_burst_embed) burst_embed_ = make_linear("embed.burst", 1, d);
    for (std::size_t l = 0; l < cfg_.n_enc_layers; ++l) {
        auto p = "enc." + std::to_string(l);
        EncoderLayer layer;
        layer.attn = make_attention(p + ".attn");
        layer.norm1 = make_norm(p + ".norm1", d);
        layer.ff1 = make_linear(p + ".ff1", d, cfg_.d_ff);
        layer.ff2 = make_linear(p + ".ff2", cfg_.d_ff, d);
        layer.norm2 = make_norm(p + ".norm2", d);
        encoder_.push_back(std::move(layer));
    }
    for (std::size_t l = 0; l < cfg_.n_dec_layers; ++l) {
        auto p = "dec." + std::to_string(l);
        DecoderLayer layer;
        layer.self_attn = make_attention(p + ".self");
        layer.norm1 = make_norm(p + ".norm1", d);
        layer.cross_attn = make_attention(p + ".cross");
        layer.norm2 = make_norm(p + ".norm2", d);
        layer.ff1 = make_linear(p + ".ff1", d, cfg_.d_ff);
        layer.ff2 = make_linear(p + ".ff2", cfg_.d_ff, d);
        layer.norm3 = make_norm(p + ".norm3", d);
        decoder_.push_back(std::move(layer));
    }
    head_base_ = make_linear("head.base", d, 1);
    if (cfg_.enable_burst_heads) {
        head_prob_ = make_linear("head.prob", d, 1);
        head_delta_ = make_linear("head.delta", d, 1);
    }

    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every linear map and its bias.
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        if (!p.name.ends_with(".w")) continue;
        auto fan_in = p.tensor.size(0);
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : p.tensor.mutable_values()) v = rng.uniform(-bound, bound);
        auto& bias = params_[i + 1];
        for (auto& v : bias.tensor.mutable_values()) v = rng.uniform(-bound, bound);
    }
}

Tensor& BurstInformer::param(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return params_[it->second].tensor;
}

BurstInformer::Linear BurstInformer::make_linear(const std::string& name, std::size_t in, std::size_t out) {
    Linear l{Tensor::zeros({in, out}, true), Tensor::zeros({out}, true)};
    index_[name + ".w"] = params_.size();
    params_.push_back({name + ".w", l.w});
    index_[name + ".b"] = params_.size();
    params_.push_back({name + ".b", l.b});
    return l;
}

BurstInformer::Norm BurstInformer::make_norm(const std::string& name, std::size_t dim) {
    Norm n{Tensor::full({dim}, 1.0, true), Tensor::zeros({dim}, true)};
    index_[name + ".gain"] = params_.size();
    params_.push_back({name + ".gain", n.gain});
    index_[name + ".bias"] = params_.size();
    params_.push_back({name + ".bias", n.bias});
    return n;
}

BurstInformer::Attention BurstInformer::make_attention(const std::string& name) {
    const auto d = cfg_.d_model;
    Attention a;
    a.q = make_linear(name + ".q", d, d);
    a.k = make_linear(name + ".k", d, d);
    a.v = make_linear(name + ".v", d, d);
    a.o = make_linear(name + ".o", d, d);
    return a;
}

Tensor BurstInformer::apply(const Linear& l, const Tensor& x) const { return ad::add(ad::matmul(x, l.w), l.b); }

Tensor BurstInformer::apply(const Norm& n, const Tensor& x) const {
    return ad::add(ad::mul(ad::layer_norm_last(x), n.gain), n.bias);
}

Tensor BurstInformer::feed_forward(const Linear& ff1, const Linear& ff2, const Tensor& x) const {
    return apply(ff2, ad::relu(apply(ff1, x)));
}

Tensor BurstInformer::multi_head(const Attention& a, const Tensor& xq, const Tensor& xkv, bool causal, bool sparse,
                                 std::uint64_t call_tag) const {
    const auto d = cfg_.d_model;
    const auto heads = cfg_.n_heads;
    const auto dk = d / heads;
    auto q = apply(a.q, xq);
    auto k = apply(a.k, xkv);
    auto v = apply(a.v, xkv);
    const auto lq = xq.size(1);
    const auto lk = xkv.size(1);
    const auto u = sparse ? active_query_count(cfg_.sampling_factor, lq) : lq;
    KeySampling sampling;
    const KeySampling* sampling_ptr = nullptr;
    if (sparse && cfg_.sampled_sparsity) {
        sampling.keys = active_query_count(cfg_.sampling_factor, lk);
        sampling_ptr = &sampling;
    }
    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        sampling.seed = stream_seed(init_seed_, call_tag * 64 + h);
        outs.push_back(probsparse_attention(ad::slice_last(q, h * dk, dk), ad::slice_last(k, h * dk, dk),
                                            ad::slice_last(v, h * dk, dk), u, causal, sampling_ptr));
    }
    auto merged = heads == 1 ? outs[0] : ad::concat_last(outs);
    return apply(a.o, merged);
}

Tensor BurstInformer::embed(const Tensor& values, const Tensor& log_dist) const {
    if (values.dim() != 3 || values.size(2) != 1)
        throw std::invalid_argument("embed: values must be [B, L, 1], got " + ad::to_string(values.shape()));
    if (log_dist.shape() != values.shape())
        throw std::invalid_argument("embed: burst distances " + ad::to_string(log_dist.shape()) +
                                    " do not match values " + ad::to_string(values.shape()));
    const auto batch = values.size(0);
    const auto len = values.size(1);
    Tensor value_in = values;
    if (cfg_.value_kernel == 3) {
        // Causal taps (x_t, x_{t-1}, x_{t-2}), zero padded.
        std::vector<double> taps(batch * len * 3, 0.0);
        auto x = values.values();
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t t = 0; t < len; ++t)
                for (std::size_t lag = 0; lag < 3; ++lag)
                    if (t >= lag) taps[(b * len + t) * 3 + lag] = x[b * len + t - lag];
        value_in = Tensor::from({batch, len, 3}, std::move(taps));
    }
    auto out = ad::add(apply(value_embed_, value_in), positional_encoding(len, cfg_.d_model));
    if (cfg_.enable_burst_embed) out = ad::add(out, apply(burst_embed_, log_dist));
    return out;
}

Tensor BurstInformer::encoder_forward(const Tensor& x) const {
    if (x.dim() != 3 || x.size(2) != cfg_.d_model)
        throw std::invalid_argument("encoder_forward: expected [B, L, " + std::to_string(cfg_.d_model) + "], got " +
                                    ad::to_string(x.shape()));
    Tensor h = x;
    for (std::size_t l = 0; l < encoder_.size(); ++l) {
        const auto& layer = encoder_[l];
        h = apply(layer.norm1, ad::add(h, multi_head(layer.attn, h, h, false, true, 100 + l)));
        h = apply(layer.norm2, ad::add(h, feed_forward(layer.ff1, layer.ff2, h)));
    }
    return h;
}

Tensor BurstInformer::decoder_forward(const Tensor& dec_in, const Tensor& enc_out) const {
    const auto len = cfg_.decoder_len();
    if (dec_in.dim() != 3 || dec_in.size(1) != len || dec_in.size(2) != cfg_.d_model)
        throw std::invalid_argument("decoder_forward: expected [B, " + std::to_string(len) + ", " +
                                    std::to_string(cfg_.d_model) + "], got " + ad::to_string(dec_in.shape()));
    if (enc_out.dim() != 3 || enc_out.size(0) != dec_in.size(0) || enc_out.size(2) != cfg_.d_model)
        throw std::invalid_argument("decoder_forward: encoder output " + ad::to_string(enc_out.shape()) +
                                    " does not match decoder input " + ad::to_string(dec_in.shape()));
    Tensor h = dec_in;
    for (std::size_t l = 0; l < decoder_.size(); ++l) {
        const auto& layer = decoder_[l];
        h = apply(layer.norm1, ad::add(h, multi_head(layer.self_attn, h, h, true, true, 200 + l)));
        h = apply(layer.norm2, ad::add(h, multi_head(layer.cross_attn, h, enc_out, false, false, 300 + l)));
        h = apply(layer.norm3, ad::add(h, feed_forward(layer.ff1, layer.ff2, h)));
    }
    std::vector<std::size_t> rows(cfg_.pred_len);
    std::iota(rows.begin(), rows.end(), cfg_.label_len);
    return ad::gather_rows(h, rows);
}

ModelOutput BurstInformer::heads(const Tensor& features) const {
    ModelOutput out;
    out.base = apply(head_base_, features);
    if (!cfg_.enable_burst_heads) {
        out.burst_prob = Tensor::zeros(out.base.shape());
        out.delta = Tensor::zeros(out.base.shape());
        out.combined = out.base;
        return out;
    }
    out.burst_prob = ad::sigmoid(apply(head_prob_, features));
    out.delta = ad::softplus(apply(head_delta_, features));
    out.combined = ad::add(out.base, ad::mul(out.burst_prob, out.delta));
    return out;
}

ModelOutput BurstInformer::forward(const ModelInput& in) const {
    if (in.enc_values.dim() != 3 || in.enc_values.size(1) != cfg_.encoder_len)
        throw std::invalid_argument("forward: encoder input must be [B, " + std::to_string(cfg_.encoder_len) +
                                    ", 1], got " + ad::to_string(in.enc_values.shape()));
    auto enc = encoder_forward(embed(in.enc_values, in.enc_log_dist));
    auto dec = decoder_forward(embed(in.dec_values, in.dec_log_dist), enc);
    return heads(dec);
}

}  // namespace burstcast
