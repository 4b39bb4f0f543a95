#pragma once

#include "burstcast/series.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace burstcast {

struct BurstConfig {
    std::size_t k = 128;  ///< neighbour half-width
    double h = 2.5;       ///< SD multiplier
};

struct BurstStats {
    double mu_x = 0.0;
    double sigma_x = 0.0;
    double mu_p = 0.0;
    double sigma_p = 0.0;
};

/// Burst flags over a series. Scores are defined on [k, N-k) and zero elsewhere.
struct BurstLabels {
    std::vector<std::uint8_t> flags;
    std::vector<double> scores;
    BurstStats stats;
    std::size_t k = 0;
    double h = 0.0;

    std::size_t count() const;
};

inline constexpr std::uint32_t kDefaultDistanceCap = 10000;

/// Moving-contrast score a_j = x_j - (sum of k left + k right neighbours) / 2k
/// for j in [k, N-k), via sliding sums (O(N)). Entries outside that range are 0.
std::vector<double> contrast_scores(std::span<const double> x, std::size_t k);

/// Index i in [k, N-k) is a burst when a_i > 0, a_i - mu_P > h sigma_P and
/// x_i - mu_X > h sigma_X. mu_P/sigma_P are taken over the positive scores;
/// all SDs are population SDs. Degenerate inputs (P empty, sigma_X = 0)
/// yield no bursts.
BurstLabels label_bursts(std::span<const double> x, const BurstConfig& cfg);
BurstLabels label_bursts(const TimeSeries& x, const BurstConfig& cfg);

/// Ticks since the last flagged index, with a virtual burst at -1, clamped at `cap`.
std::vector<std::uint32_t> burst_distance(std::span<const std::uint8_t> flags,
                                          std::uint32_t cap = kDefaultDistanceCap);

/// Causal variant for inference: at time t only flags with index <= t - k are
/// known, because the score at i looks k samples ahead.
std::vector<std::uint32_t> causal_burst_distance(std::span<const std::uint8_t> flags, std::size_t k,
                                                 std::uint32_t cap = kDefaultDistanceCap);

/// log(1 + d), elementwise.
std::vector<double> log_distance(std::span<const std::uint32_t> d);

}  // namespace burstcast
