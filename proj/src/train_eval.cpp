#include "burstcast/train_eval.hpp"

#include "burstcast/error.hpp"
#include "burstcast/rng.hpp"
#include "burstcast/stat_models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

namespace burstcast {

using ad::Tensor;

// TrainConfig ----------------------------------------------------------------

void TrainConfig::validate() const {
    if (epochs == 0) throw DataError("epochs must be at least 1");
    if (batch_size == 0) throw DataError("batch_size must be at least 1");
    if (micro_batch == 0) throw DataError("micro_batch must be at least 1");
    if (!(learning_rate > 0.0)) throw DataError("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw DataError("Adam betas must be in [0, 1)");
    if (!(eps > 0.0)) throw DataError("Adam eps must be positive");
}

std::string TrainConfig::canonical() const {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "epochs=%zu\nbatch_size=%zu\nlearning_rate=%.17g\nseed=%llu\nbeta1=%.17g\nbeta2=%.17g\n"
                  "eps=%.17g\nmax_train_windows=%zu\nmax_val_windows=%zu\nmicro_batch=%zu\ntrain_distance=%s\n",
                  epochs, batch_size, learning_rate, static_cast<unsigned long long>(seed), beta1, beta2, eps,
                  max_train_windows, max_val_windows, micro_batch,
                  train_distance == DistanceMode::offline ? "offline" : "causal");
    return buf;
}

std::uint64_t TrainConfig::digest() const { return fnv1a64(canonical()); }

TrainConfig TrainConfig::paper() { return TrainConfig{}; }

TrainConfig TrainConfig::desk() {
    TrainConfig t;
    t.epochs = 6;
    t.batch_size = 8;
    t.learning_rate = 1e-3;
    t.max_train_windows = 768;
    t.max_val_windows = 256;
    t.micro_batch = 8;
    return t;
}

DivergenceError::DivergenceError(std::size_t s, double loss)
    : std::runtime_error("training diverged: non-finite loss " + std::to_string(loss) + " at step " +
                         std::to_string(s)),
      step(s) {}

// Data -----------------------------------------------------------------------

PreparedSeries prepare_series(const TimeSeries& series, const BurstLabels& labels, std::optional<NormStats> norm) {
    if (labels.flags.size() != series.size())
        throw DataError("burst labels cover " + std::to_string(labels.flags.size()) + " samples, series has " +
                        std::to_string(series.size()));
    PreparedSeries d;
    std::tie(d.train_end, d.val_end) = split_points(series.size());
    if (norm) {
        d.norm = *norm;
    } else {
        d.norm = compute_norm_stats(std::span(series.values).first(d.train_end));
    }
    if (!(d.norm.sd > 0.0)) throw DataError("degenerate series");
    d.z.resize(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) d.z[i] = (series.values[i] - d.norm.mean) / d.norm.sd;
    d.flags = labels.flags;
    d.offline_log_dist = log_distance(burst_distance(d.flags));
    d.causal_log_dist = log_distance(causal_burst_distance(d.flags, labels.k));
    return d;
}

std::vector<std::size_t> window_starts(std::size_t begin, std::size_t end, const ModelConfig& cfg) {
    auto ws = make_windows(end > begin ? end - begin : 0, cfg.encoder_len, cfg.label_len, cfg.pred_len);
    std::vector<std::size_t> out;
    out.reserve(ws.windows.size());
    for (const auto& w : ws.windows) out.push_back(begin + w.encoder.begin);
    return out;
}

Batch make_batch(const PreparedSeries& data, std::span<const std::size_t> starts, const ModelConfig& cfg,
                 DistanceMode mode) {
    const auto nb = starts.size();
    const auto enc = cfg.encoder_len;
    const auto label = cfg.label_len;
    const auto pred = cfg.pred_len;
    const auto dec = cfg.decoder_len();
    const auto& dist = mode == DistanceMode::offline ? data.offline_log_dist : data.causal_log_dist;

    std::vector<double> ev(nb * enc), ed(nb * enc), dv(nb * dec, 0.0), dd(nb * dec, 0.0), y(nb * pred),
        yb(nb * pred);
    for (std::size_t b = 0; b < nb; ++b) {
        const auto t = starts[b];
        if (t + enc + pred > data.z.size()) throw DataError("window at " + std::to_string(t) + " runs past the series");
        for (std::size_t i = 0; i < enc; ++i) {
            ev[b * enc + i] = data.z[t + i];
            ed[b * enc + i] = dist[t + i];
        }
        for (std::size_t i = 0; i < label; ++i) {
            dv[b * dec + i] = data.z[t + enc - label + i];
            dd[b * dec + i] = dist[t + enc - label + i];
        }
        for (std::size_t j = 0; j < pred; ++j) {
            y[b * pred + j] = data.z[t + enc + j];
            yb[b * pred + j] = data.flags[t + enc + j];
        }
    }
    Batch out;
    out.input.enc_values = Tensor::from({nb, enc, 1}, std::move(ev));
    out.input.enc_log_dist = Tensor::from({nb, enc, 1}, std::move(ed));
    out.input.dec_values = Tensor::from({nb, dec, 1}, std::move(dv));
    out.input.dec_log_dist = Tensor::from({nb, dec, 1}, std::move(dd));
    out.targets.y = Tensor::from({nb, pred, 1}, std::move(y));
    out.targets.burst = Tensor::from({nb, pred, 1}, std::move(yb));
    return out;
}

double burst_pos_weight(const PreparedSeries& data) {
    double pos = 0.0;
    for (std::size_t i = 0; i < data.train_end; ++i) pos += data.flags[i];
    double neg = static_cast<double>(data.train_end) - pos;
    if (pos == 0.0) return 100.0;
    return std::clamp(neg / pos, 1.0, 100.0);
}

// Training -------------------------------------------------------------------

namespace {

std::vector<std::size_t> strided_subset(const std::vector<std::size_t>& v, std::size_t cap) {
    if (cap == 0 || v.size() <= cap) return v;
    std::vector<std::size_t> out;
    out.reserve(cap);
    for (std::size_t i = 0; i < cap; ++i) out.push_back(v[i * v.size() / cap]);
    return out;
}

LossNormalizer normalizer_for(const PreparedSeries& data, std::span<const std::size_t> starts,
                              const ModelConfig& cfg) {
    LossNormalizer n;
    n.steps = static_cast<double>(starts.size() * cfg.pred_len);
    for (auto t : starts)
        for (std::size_t j = 0; j < cfg.pred_len; ++j) n.burst_steps += data.flags[t + cfg.encoder_len + j];
    return n;
}

struct ValStats {
    double loss = 0.0;
    double mse = 0.0;
};

ValStats validate_model(const BurstInformer& model, const PreparedSeries& data, std::span<const std::size_t> starts,
                        double pos_weight, std::size_t chunk) {
    ad::NoGradGuard no_grad;
    const auto& cfg = model.config();
    auto norm = normalizer_for(data, starts, cfg);
    ValStats s;
    double sq = 0.0;
    for (std::size_t i = 0; i < starts.size(); i += chunk) {
        auto part = starts.subspan(i, std::min(chunk, starts.size() - i));
        auto batch = make_batch(data, part, cfg, DistanceMode::causal);
        auto out = model.forward(batch.input);
        s.loss += composite_loss(out, batch.targets, cfg, pos_weight, &norm).total.item();
        auto c = out.combined.values();
        auto y = batch.targets.y.values();
        for (std::size_t k = 0; k < c.size(); ++k) sq += (c[k] - y[k]) * (c[k] - y[k]);
    }
    s.mse = sq / norm.steps;
    return s;
}

}  // namespace

TrainResult train(const TimeSeries& series, const BurstLabels& labels, const ModelConfig& mcfg,
                  const TrainConfig& tcfg, const ProgressFn& progress) {
    return train(prepare_series(series, labels), mcfg, tcfg, progress);
}

TrainResult train(const PreparedSeries& data, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const ProgressFn& progress) {
    mcfg.validate();
    tcfg.validate();
    auto order = window_starts(0, data.train_end, mcfg);
    auto val = strided_subset(window_starts(data.train_end, data.val_end, mcfg), tcfg.max_val_windows);

    TrainResult res;
    res.pos_weight = burst_pos_weight(data);
    BurstInformer model(mcfg, stream_seed(tcfg.seed, 1));
    ad::Adam opt(model.parameters(), {tcfg.learning_rate, tcfg.beta1, tcfg.beta2, tcfg.eps});
    Rng shuffle(stream_seed(tcfg.seed, 2));
    const auto per_epoch = tcfg.max_train_windows ? std::min(tcfg.max_train_windows, order.size()) : order.size();
    double best_mse = std::numeric_limits<double>::infinity();

    for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t b0 = 0; b0 < per_epoch; b0 += tcfg.batch_size) {
            auto batch_starts = std::span(order).subspan(b0, std::min(tcfg.batch_size, per_epoch - b0));
            auto norm = normalizer_for(data, batch_starts, mcfg);
            opt.zero_grad();
            double batch_loss = 0.0;
            for (std::size_t m0 = 0; m0 < batch_starts.size(); m0 += tcfg.micro_batch) {
                auto part = batch_starts.subspan(m0, std::min(tcfg.micro_batch, batch_starts.size() - m0));
                auto batch = make_batch(data, part, mcfg, tcfg.train_distance);
                auto loss = composite_loss(model.forward(batch.input), batch.targets, mcfg, res.pos_weight, &norm);
                batch_loss += loss.total.item();
                if (!std::isfinite(batch_loss)) throw DivergenceError(res.steps, batch_loss);
                ad::backward(loss.total);
            }
            if (res.steps == 0) res.initial_loss = batch_loss;
            opt.step();
            ++res.steps;
            loss_sum += batch_loss;
            ++batches;
        }
        auto v = validate_model(model, data, val, res.pos_weight, tcfg.micro_batch);
        EpochLog log{epoch + 1, loss_sum / static_cast<double>(batches), v.loss, v.mse};
        res.trace.push_back(log);
        if (v.mse < best_mse || epoch == 0) {
            best_mse = v.mse;
            res.best = make_checkpoint(model, data.norm, tcfg.digest());
            res.best_epoch = epoch + 1;
        }
        if (progress) progress(log);
    }
    return res;
}

// Evaluation -----------------------------------------------------------------

ForecastSet forecast_frame(const PreparedSeries& data, std::span<const std::size_t> starts, const ModelConfig& cfg) {
    ForecastSet f;
    f.pred_len = cfg.pred_len;
    f.starts.assign(starts.begin(), starts.end());
    f.forecast.assign(starts.size() * cfg.pred_len, 0.0);
    for (auto t : starts)
        for (std::size_t j = 0; j < cfg.pred_len; ++j) {
            auto idx = t + cfg.encoder_len + j;
            if (idx >= data.z.size()) throw DataError("window at " + std::to_string(t) + " runs past the series");
            f.target.push_back(data.z[idx]);
            f.burst.push_back(data.flags[idx]);
        }
    return f;
}

ForecastSet model_forecasts(const BurstInformer& model, const PreparedSeries& data,
                            std::span<const std::size_t> starts, DistanceMode mode, std::size_t chunk) {
    ad::NoGradGuard no_grad;
    const auto& cfg = model.config();
    auto f = forecast_frame(data, starts, cfg);
    for (std::size_t i = 0; i < starts.size(); i += chunk) {
        auto part = starts.subspan(i, std::min(chunk, starts.size() - i));
        auto out = model.forward(make_batch(data, part, cfg, mode).input);
        auto c = out.combined.values();
        std::copy(c.begin(), c.end(), f.forecast.begin() + static_cast<std::ptrdiff_t>(i * cfg.pred_len));
    }
    return f;
}

std::vector<HeatCell> burst_position_heatmap(const ForecastSet& f) {
    std::vector<HeatCell> cells(f.pred_len);
    std::vector<double> sq(f.pred_len, 0.0);
    for (std::size_t w = 0; w < f.size(); ++w)
        for (std::size_t i = 0; i < f.pred_len; ++i) {
            auto k = w * f.pred_len + i;
            if (!f.burst[k]) continue;
            double e = f.forecast[k] - f.target[k];
            sq[i] += e * e;
            ++cells[i].count;
        }
    for (std::size_t i = 0; i < f.pred_len; ++i) {
        cells[i].index = i;
        if (cells[i].count) cells[i].mse = sq[i] / static_cast<double>(cells[i].count);
    }
    return cells;
}

EvalReport evaluate_forecasts(const ForecastSet& f, std::uint64_t config_digest) {
    if (f.size() == 0) throw DataError("no windows to evaluate");
    if (f.forecast.size() != f.size() * f.pred_len || f.target.size() != f.forecast.size())
        throw DataError("forecast set is inconsistent");
    EvalReport r;
    r.n_windows = f.size();
    r.config_digest = config_digest;
    double all = 0.0;
    double burst = 0.0;
    for (std::size_t w = 0; w < f.size(); ++w) {
        double sq = 0.0;
        bool any = false;
        for (std::size_t i = 0; i < f.pred_len; ++i) {
            auto k = w * f.pred_len + i;
            double e = f.forecast[k] - f.target[k];
            sq += e * e;
            any = any || f.burst[k];
        }
        all += sq;
        if (any) {
            burst += sq;
            ++r.n_burst_windows;
        }
    }
    const auto pl = static_cast<double>(f.pred_len);
    r.overall_mse = all / (static_cast<double>(r.n_windows) * pl);
    if (r.n_burst_windows) r.burst_mse = burst / (static_cast<double>(r.n_burst_windows) * pl);
    r.heatmap = burst_position_heatmap(f);
    return r;
}

EvalReport evaluate(const Checkpoint& ckpt, const PreparedSeries& data) {
    auto model = restore_model(ckpt);
    auto starts = window_starts(data.val_end, data.z.size(), ckpt.model);
    return evaluate_forecasts(model_forecasts(model, data, starts), ckpt.model.digest());
}

EvalReport evaluate(const Checkpoint& ckpt, const TimeSeries& series, const BurstLabels& labels) {
    return evaluate(ckpt, prepare_series(series, labels, ckpt.norm));
}

std::string metrics_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["overall_mse"] = r.overall_mse;
    j["burst_mse"] = r.burst_mse ? nlohmann::ordered_json(*r.burst_mse) : nlohmann::ordered_json(nullptr);
    j["n_windows"] = r.n_windows;
    j["n_burst_windows"] = r.n_burst_windows;
    auto cells = nlohmann::ordered_json::array();
    for (const auto& c : r.heatmap) {
        nlohmann::ordered_json cell;
        cell["index"] = c.index;
        cell["mse"] = c.mse ? nlohmann::ordered_json(*c.mse) : nlohmann::ordered_json(nullptr);
        cell["count"] = c.count;
        cells.push_back(cell);
    }
    j["heatmap"] = cells;
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(r.config_digest));
    j["config_digest"] = hex;
    return j.dump(2) + "\n";
}

void write_metrics(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << metrics_json(report);
    if (!out) throw DataError("write failed: " + path.string());
}

// Baselines ------------------------------------------------------------------

ForecastSet baseline_forecasts(const PreparedSeries& data, const BaselineConfig& bcfg, std::size_t pred_len,
                               std::size_t encoder_len) {
    ModelConfig geometry;
    geometry.encoder_len = encoder_len;
    geometry.label_len = std::min(geometry.label_len, encoder_len);
    geometry.pred_len = pred_len;
    auto starts = window_starts(data.val_end, data.z.size(), geometry);
    auto f = forecast_frame(data, starts, geometry);
    auto train = std::span(data.z).first(data.train_end);

    std::function<std::vector<double>(std::span<const double>)> predict;
    if (bcfg.kind == BaselineKind::ar) {
        auto m = fit_ar_yule_walker(train, bcfg.p, bcfg.d_int);
        predict = [m, pred_len](std::span<const double> h) { return forecast_ar(m, h, pred_len); };
    } else {
        auto m = fit_farima(train, bcfg.p, bcfg.d, bcfg.trunc);
        predict = [m, pred_len](std::span<const double> h) { return forecast_farima(m, h, pred_len); };
    }
    for (std::size_t w = 0; w < starts.size(); ++w) {
        auto out = predict(std::span(data.z).first(starts[w] + encoder_len));
        std::copy(out.begin(), out.end(), f.forecast.begin() + static_cast<std::ptrdiff_t>(w * pred_len));
    }
    return f;
}

// Ablation -------------------------------------------------------------------

std::vector<ModelConfig> ablation_configs(const ModelConfig& base) {
    std::vector<ModelConfig> out(4, base);
    const bool flags[4][3] = {{false, false, false}, {true, false, false}, {true, true, false}, {true, true, true}};
    for (std::size_t r = 0; r < 4; ++r) {
        out[r].enable_burst_embed = flags[r][0];
        out[r].enable_burst_heads = flags[r][1];
        out[r].enable_asym_loss = flags[r][2];
    }
    return out;
}

std::vector<AblationRow> run_ablation(const TimeSeries& series, const BurstLabels& labels, const ModelConfig& base,
                                      const TrainConfig& tcfg, const ProgressFn& progress) {
    static const char* names[4] = {"none", "embed", "embed+heads", "embed+heads+asym"};
    auto data = prepare_series(series, labels);
    std::vector<AblationRow> rows;
    auto configs = ablation_configs(base);
    for (std::size_t r = 0; r < 4; ++r) {
        auto cfg = configs[r];
        cfg.pred_len = 1;
        auto res = train(data, cfg, tcfg, progress);
        rows.push_back({names[r], cfg, evaluate(res.best, data)});
    }
    return rows;
}

}  // namespace burstcast
