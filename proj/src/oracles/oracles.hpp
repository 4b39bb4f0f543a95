#pragma once

// Literal, slow reference implementations. Nothing here shares code with the
// library paths they check.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace burstcast::oracle {

/// Burst flags straight from the definitions: every neighbour mean summed
/// afresh, two-pass population moments.
std::vector<std::uint8_t> burst_flags(std::span<const double> x, std::size_t k, double h);

/// Row-major [m, k] x [k, n].
std::vector<double> matmul(std::span<const double> a, std::span<const double> b, std::size_t m, std::size_t k,
                           std::size_t n);

struct AttentionResult {
    std::vector<double> measure;
    std::vector<std::uint8_t> selected;
    std::vector<double> out;  ///< [lq, d]
};

/// One head, one batch element. q [lq, d], k and v [lk, d].
AttentionResult probsparse(std::span<const double> q, std::span<const double> k, std::span<const double> v,
                           std::size_t lq, std::size_t lk, std::size_t d, std::size_t u, bool causal);

/// Dense softmax attention, future keys masked when causal.
std::vector<double> full_attention(std::span<const double> q, std::span<const double> k,
                                   std::span<const double> v, std::size_t lq, std::size_t lk, std::size_t d,
                                   bool causal);

double mse(std::span<const double> forecast, std::span<const double> target);

struct ScanResult {
    std::size_t n_windows = 0;
    std::size_t n_burst_windows = 0;
    double overall_mse = 0.0;
    double burst_mse = 0.0;
    std::vector<std::size_t> cell_count;
    std::vector<double> cell_mse;  ///< 0 where the count is 0
};

/// Scans every window start t in [begin, end - encoder_len - pred_len] of a
/// series; forecasts are indexed [window][step] in that order.
ScanResult window_scan(std::span<const double> series, std::span<const std::uint8_t> flags, std::size_t begin,
                       std::size_t end, std::size_t encoder_len, std::size_t pred_len,
                       std::span<const double> forecasts);

/// Iterated AR forecast: mean + phi applied to demeaned values, no shortcuts.
std::vector<double> ar_recursion(std::span<const double> phi, double mean, std::span<const double> history,
                                 std::size_t horizon);

/// Simulates AR(p) driven by N(0, 1) noise after a burn-in.
std::vector<double> simulate_ar(std::span<const double> phi, std::size_t n, std::uint64_t seed,
                                std::size_t burn_in = 1000);

/// Exact fractional Gaussian noise with Hurst parameter H by circulant
/// embedding (Davies-Harte).
std::vector<double> fgn(std::size_t n, double hurst, std::uint64_t seed);

std::vector<double> white_noise(std::size_t n, std::uint64_t seed);

}  // namespace burstcast::oracle
