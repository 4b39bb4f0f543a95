#pragma once

#include "burstcast/autodiff.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace burstcast {

/// Hyperparameters of the burst-aware encoder/decoder forecaster.
///
/// The three `enable_*` switches select the ablation variants. With all of
/// them off the model is a plain generative-decoder ProbSparse transformer.
struct ModelConfig {
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t n_enc_layers = 2;
    std::size_t n_dec_layers = 1;
    std::size_t d_ff = 256;
    std::size_t encoder_len = 128;
    std::size_t label_len = 64;
    std::size_t pred_len = 1;
    double sampling_factor = 5.0;  ///< c in u = ceil(c ln L)
    double gamma = 5.0;            ///< asymmetric burst penalty
    bool enable_burst_embed = true;
    bool enable_burst_heads = true;
    bool enable_asym_loss = true;
    /// Estimate the sparsity measure on ceil(c ln L_K) sampled keys instead
    /// of all keys.
    bool sampled_sparsity = false;
    /// 1: per-step linear value embedding; 3: causal width-3 convolution.
    std::size_t value_kernel = 1;

    /// Throws DataError on an inconsistent config.
    void validate() const;
    std::size_t decoder_len() const { return label_len + pred_len; }

    /// One `key=value` line per field, in a fixed order.
    std::string canonical() const;
    std::uint64_t digest() const;
    static ModelConfig parse(std::string_view canonical_text);

    /// d_model 64, 4 heads, d_ff 256.
    static ModelConfig desk();
    /// d_model 512, 8 heads, d_ff 2048.
    static ModelConfig paper();
};

/// Field-by-field differences, e.g. "d_model: 64 != 512".
std::vector<std::string> config_diff(const ModelConfig& a, const ModelConfig& b);

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view data);

/// Number of active queries: ceil(c ln L) clamped to [1, L].
std::size_t active_query_count(double sampling_factor, std::size_t length);

/// Sparsity measure max_j s_ij - mean_j s_ij over one head's scaled scores
/// s = q k^T / sqrt(d_k), laid out [Lq, Lk]. In causal mode only keys j <= i
/// take part.
std::vector<double> sparsity_measure(std::span<const double> scores, std::size_t lq, std::size_t lk, bool causal);

/// Active-query flags for one head.
///
/// Non-causal: the u queries with the largest measure (ties to the lower
/// index). Causal: query i is active when it ranks within the top u among
/// queries 0..i, so the choice for row i never depends on later rows.
/// Both rules select everything when u >= Lq, and the active set only
/// grows with u.
std::vector<std::uint8_t> select_queries(std::span<const double> measure, std::size_t u, bool causal);

/// Key sampling for the approximate sparsity measure: each query looks at
/// `keys` keys drawn uniformly (with replacement) from the keys it may see.
struct KeySampling {
    std::size_t keys = 0;
    std::uint64_t seed = 0;
};

/// Sampled variant of sparsity_measure for one head; query i of batch
/// element `batch_index` draws from stream_seed(seed, batch_index * lq + i).
std::vector<double> sampled_sparsity_measure(std::span<const double> scores, std::size_t lq, std::size_t lk,
                                             bool causal, const KeySampling& sampling, std::size_t batch_index);

/// ProbSparse attention for Q [B, Lq, dk], K/V [B, Lk, dk].
/// Active rows get softmax(q K^T / sqrt(dk)) V (future keys masked when
/// causal). Inactive rows get mean(V), or the running mean of V up to their
/// position when causal.
ad::Tensor probsparse_attention(const ad::Tensor& q, const ad::Tensor& k, const ad::Tensor& v, std::size_t u,
                                bool causal, const KeySampling* sampling = nullptr);

/// Model outputs, each [B, pred_len, 1].
struct ModelOutput {
    ad::Tensor base;
    ad::Tensor burst_prob;
    ad::Tensor delta;
    ad::Tensor combined;
};

/// Batched model inputs, each [B, L, 1]. Distances are already log(1 + d).
/// The decoder carries label_len known steps followed by pred_len zeros.
struct ModelInput {
    ad::Tensor enc_values;
    ad::Tensor enc_log_dist;
    ad::Tensor dec_values;
    ad::Tensor dec_log_dist;
};

/// Targets, each [B, pred_len, 1]; burst is 0/1.
struct BatchTargets {
    ad::Tensor y;
    ad::Tensor burst;
};

/// Denominators of the loss means. Training splits a batch into chunks and
/// passes the whole-batch counts so the chunk losses add up to the batch loss.
struct LossNormalizer {
    double steps = 0.0;
    double burst_steps = 0.0;
};

struct LossBreakdown {
    ad::Tensor total;
    double asym = 0.0;
    double bce = 0.0;
    double mae = 0.0;
};

inline constexpr double kLossTermWeight = 0.33;
inline constexpr double kProbClamp = 1e-7;

/// 0.33 (asym + bce + mae) with the burst heads on, asym alone otherwise.
///   asym = sum (1 + gamma y^p)(combined - y)^2 / steps
///   bce  = sum [w y^p (-log p) + (1 - y^p)(-log(1 - p))] / steps
///   mae  = sum_{y^p = 1} |combined - y| / burst_steps   (0 without bursts)
/// gamma is taken as 0 when the asymmetric loss is disabled.
LossBreakdown composite_loss(const ModelOutput& out, const BatchTargets& tgt, const ModelConfig& cfg,
                             double pos_weight, const LossNormalizer* norm = nullptr);

/// Sinusoidal positional encoding [length, d_model].
ad::Tensor positional_encoding(std::size_t length, std::size_t d_model);

class BurstInformer {
public:
    explicit BurstInformer(const ModelConfig& cfg, std::uint64_t init_seed = 0);

    const ModelConfig& config() const { return cfg_; }
    std::vector<ad::Parameter>& parameters() { return params_; }
    const std::vector<ad::Parameter>& parameters() const { return params_; }
    ad::Tensor& param(const std::string& name);

    /// value projection + positional encoding (+ burst-distance projection).
    ad::Tensor embed(const ad::Tensor& values, const ad::Tensor& log_dist) const;
    ad::Tensor encoder_forward(const ad::Tensor& x) const;
    /// Returns the last pred_len rows.
    ad::Tensor decoder_forward(const ad::Tensor& dec_in, const ad::Tensor& enc_out) const;
    ModelOutput heads(const ad::Tensor& features) const;
    ModelOutput forward(const ModelInput& in) const;

private:
    struct Linear {
        ad::Tensor w;
        ad::Tensor b;
    };
    struct Norm {
        ad::Tensor gain;
        ad::Tensor bias;
    };
    struct Attention {
        Linear q, k, v, o;
    };
    struct EncoderLayer {
        Attention attn;
        Norm norm1, norm2;
        Linear ff1, ff2;
    };
    struct DecoderLayer {
        Attention self_attn, cross_attn;
        Norm norm1, norm2, norm3;
        Linear ff1, ff2;
    };

    Linear make_linear(const std::string& name, std::size_t in, std::size_t out);
    Norm make_norm(const std::string& name, std::size_t dim);
    Attention make_attention(const std::string& name);

    ad::Tensor apply(const Linear& l, const ad::Tensor& x) const;
    ad::Tensor apply(const Norm& n, const ad::Tensor& x) const;
    ad::Tensor feed_forward(const Linear& ff1, const Linear& ff2, const ad::Tensor& x) const;
    ad::Tensor multi_head(const Attention& a, const ad::Tensor& xq, const ad::Tensor& xkv, bool causal,
                          bool sparse, std::uint64_t call_tag) const;

    ModelConfig cfg_;
    std::uint64_t init_seed_;
    std::vector<ad::Parameter> params_;
    std::map<std::string, std::size_t> index_;
    Linear value_embed_;
    Linear burst_embed_;
    std::vector<EncoderLayer> encoder_;
    std::vector<DecoderLayer> decoder_;
    Linear head_base_;
    Linear head_prob_;
    Linear head_delta_;
};

}  // namespace burstcast
