#include "burstcast/traffic_gen.hpp"

#include "burstcast/error.hpp"

#include <cmath>
#include <limits>

namespace burstcast {

namespace {

// Normal truncated at zero by rejection. With the default 1 +- 0.05 Mbps the
// loop never repeats; the cap only guards absurd configs.
double draw_rate(const SourceConfig& cfg, Rng& rng) {
    if (cfg.rate_sd_mbps == 0.0) return cfg.rate_mean_mbps;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        double r = rng.normal(cfg.rate_mean_mbps, cfg.rate_sd_mbps);
        if (r >= 0.0) return r;
    }
    return 0.0;
}

std::uint64_t sojourn_ticks(double shape, double scale, Rng& rng) {
    double d = std::ceil(sample_pareto(shape, scale, rng.uniform()));
    if (!(d >= 1.0)) return 1;
    if (d > 1e18) return std::numeric_limits<std::uint64_t>::max() / 2;
    return static_cast<std::uint64_t>(d);
}

}  // namespace

void validate(const GenConfig& cfg) {
    const auto& s = cfg.source;
    if (cfg.num_sources < 1) throw DataError("num_sources must be >= 1");
    if (cfg.num_ticks < 1) throw DataError("num_ticks must be >= 1");
    if (cfg.tick_ms < 1) throw DataError("tick_ms must be >= 1");
    if (!(s.shape_on > 1.0 && s.shape_on < 2.0) || !(s.shape_off > 1.0 && s.shape_off < 2.0))
        throw DataError("Pareto shape must lie in (1, 2)");
    if (!(s.scale_on > 0.0) || !(s.scale_off > 0.0)) throw DataError("Pareto scale must be positive");
    if (!(s.rate_mean_mbps > 0.0)) throw DataError("rate mean must be positive");
    if (!(s.rate_sd_mbps >= 0.0)) throw DataError("rate SD must be non-negative");
}

double sample_pareto(double shape, double scale, double u) {
    return scale * std::pow(1.0 - u, -1.0 / shape);
}

double pareto_mean(double shape, double scale) {
    if (shape <= 1.0) return std::numeric_limits<double>::infinity();
    return shape * scale / (shape - 1.0);
}

std::vector<std::uint8_t> gen_onoff_source(const SourceConfig& cfg, std::uint64_t num_ticks, Rng& rng) {
    std::vector<std::uint8_t> activity(num_ticks, 0);
    double mu_on = pareto_mean(cfg.shape_on, cfg.scale_on);
    double mu_off = pareto_mean(cfg.shape_off, cfg.scale_off);
    bool on = rng.uniform() < mu_on / (mu_on + mu_off);
    std::uint64_t t = 0;
    while (t < num_ticks) {
        auto len = on ? sojourn_ticks(cfg.shape_on, cfg.scale_on, rng)
                      : sojourn_ticks(cfg.shape_off, cfg.scale_off, rng);
        auto end = len >= num_ticks - t ? num_ticks : t + len;
        if (on) std::fill(activity.begin() + static_cast<std::ptrdiff_t>(t),
                          activity.begin() + static_cast<std::ptrdiff_t>(end), std::uint8_t{1});
        t = end;
        on = !on;
    }
    return activity;
}

std::vector<double> source_rates(const GenConfig& cfg) {
    std::vector<double> rates(cfg.num_sources);
    for (std::uint32_t m = 0; m < cfg.num_sources; ++m) {
        Rng rng(stream_seed(cfg.seed, m));
        rates[m] = draw_rate(cfg.source, rng);
    }
    return rates;
}

TimeSeries superpose(const GenConfig& cfg) {
    validate(cfg);
    TimeSeries out;
    out.tick_ms = cfg.tick_ms;
    out.values.assign(cfg.num_ticks, 0.0);
    // Sources are accumulated in index order, so every tick sums m = 0..M-1.
    for (std::uint32_t m = 0; m < cfg.num_sources; ++m) {
        Rng rng(stream_seed(cfg.seed, m));
        double rate = draw_rate(cfg.source, rng);
        auto activity = gen_onoff_source(cfg.source, cfg.num_ticks, rng);
        if (cfg.source.per_tick_rates) {
            // Separate sub-stream so the activity draws match static mode.
            Rng rate_rng(stream_seed(splitmix64(cfg.seed), m));
            for (std::uint64_t t = 0; t < cfg.num_ticks; ++t)
                if (activity[t]) out.values[t] += draw_rate(cfg.source, rate_rng);
        } else {
            for (std::uint64_t t = 0; t < cfg.num_ticks; ++t)
                if (activity[t]) out.values[t] += rate;
        }
    }
    return out;
}

TimeSeries generate_dataset(const GenConfig& cfg, const std::filesystem::path& out) {
    auto series = superpose(cfg);
    save_series(series, out);
    return series;
}

}  // namespace burstcast
