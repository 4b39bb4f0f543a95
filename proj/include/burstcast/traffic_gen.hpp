#pragma once

#include "burstcast/rng.hpp"
#include "burstcast/series.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace burstcast {

/// ON/OFF source parameters. Sojourn times are Pareto(shape, scale) in ticks.
///
/// The heavy-tail regime needs 1 < shape < 2. The default shape 1.04 gives
/// H = (3 - 1.04) / 2 = 0.98. Some parameter tables list "0.98" as the shape.
/// That value is the Hurst parameter, not a valid shape.
struct SourceConfig {
    double shape_on = 1.04;
    double shape_off = 1.04;
    double scale_on = 1.0;
    double scale_off = 1.0;
    double rate_mean_mbps = 1.0;
    double rate_sd_mbps = 0.05;
    /// Redraw the rate on every ON tick instead of once per source.
    bool per_tick_rates = false;
};

struct GenConfig {
    std::uint32_t num_sources = 750;
    std::uint64_t num_ticks = 60000;
    std::uint32_t tick_ms = 10;
    std::uint64_t seed = 1;
    SourceConfig source;
};

/// Throws DataError when the config is outside the supported domain.
void validate(const GenConfig& cfg);

/// Inverse-CDF Pareto draw: scale * (1 - u)^(-1/shape).
double sample_pareto(double shape, double scale, double u);

/// Analytic Pareto mean shape*scale/(shape-1) (infinite for shape <= 1).
double pareto_mean(double shape, double scale);

/// Binary activity of one source over `num_ticks`. Sojourns are rounded up to
/// whole ticks (minimum one). The first phase is ON with probability
/// mu_on / (mu_on + mu_off).
std::vector<std::uint8_t> gen_onoff_source(const SourceConfig& cfg, std::uint64_t num_ticks, Rng& rng);

/// Per-tick demand of the aggregate. Source m uses the sub-stream
/// stream_seed(cfg.seed, m): first its rate, then its activity.
TimeSeries superpose(const GenConfig& cfg);

/// Rate of each source as drawn by superpose (static-rate mode).
std::vector<double> source_rates(const GenConfig& cfg);

/// superpose() followed by save_series(out).
TimeSeries generate_dataset(const GenConfig& cfg, const std::filesystem::path& out);

}  // namespace burstcast
