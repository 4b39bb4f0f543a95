#pragma once

#include "burstcast/series.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace burstcast {

/// Aggregated-variance Hurst estimate: log var(X^(m)) ~ const - beta log m.
struct HurstEstimate {
    double hurst = 0.5;
    double beta = 1.0;
    double slope_stderr = 0.0;
    std::vector<std::size_t> block_sizes;
    std::vector<double> variances;
};

/// Block means over non-overlapping blocks of size m; length floor(N/m).
std::vector<double> aggregate(std::span<const double> x, std::size_t m);
TimeSeries aggregate(const TimeSeries& x, std::size_t m);

/// Powers of two 1..512.
std::vector<std::size_t> default_block_sizes();

/// Powers of two up to the largest block leaving >= 10 aggregated points
/// (capped at 512).
std::vector<std::size_t> block_sizes_for(std::size_t n);

/// Unweighted least-squares fit over the given block sizes (population
/// variances). Needs >= 3 strictly increasing sizes and >= 10 points at the
/// largest one.
HurstEstimate variance_time_hurst(std::span<const double> x, std::span<const std::size_t> block_sizes);
HurstEstimate variance_time_hurst(const TimeSeries& x, std::span<const std::size_t> block_sizes);

/// Biased (1/N) sample autocorrelation r(0..max_lag); requires max_lag < N/2.
std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag);

/// Biased sample autocovariance gamma(0..max_lag) around the sample mean.
std::vector<double> autocovariance(std::span<const double> x, std::size_t max_lag);

}  // namespace burstcast
