#pragma once

#include "burstcast/series.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace burstcast {

/// AR(p) on a series differenced d_int times. Forecasts are re-integrated
/// and re-meaned by forecast_ar.
struct ArModel {
    std::vector<double> phi;
    double intercept_mean = 0.0;
    double noise_var = 0.0;
    unsigned d_int = 0;

    std::size_t order() const { return phi.size(); }
};

/// Fractionally differenced AR(p):
///   (1 - B)^d (x_t - intercept_mean) = y_t,  y_t AR(p) around ar_mean.
/// The filter is truncated after trunc_lags lags.
struct FarimaModel {
    std::vector<double> phi;
    double d_frac = 0.0;
    std::size_t trunc_lags = 1000;
    std::vector<double> pi_coeffs;
    double intercept_mean = 0.0;
    double ar_mean = 0.0;
    double noise_var = 0.0;
};

inline constexpr std::size_t kDefaultTruncLags = 1000;

/// True when the AR polynomial 1 - sum phi_i z^i has all roots outside the
/// unit circle (checked through the reflection coefficients).
bool is_stationary(std::span<const double> phi);

/// x differenced `d` times (length N - d).
std::vector<double> difference(std::span<const double> x, unsigned d);

/// Yule-Walker fit via the Levinson-Durbin recursion on biased
/// autocovariances. Requires N >= 50 p. Throws DataError on a singular
/// autocovariance matrix or a non-stationary solution.
ArModel fit_ar_yule_walker(std::span<const double> x, std::size_t p, unsigned d_int = 0);
ArModel fit_ar_yule_walker(const TimeSeries& x, std::size_t p, unsigned d_int = 0);

/// Iterated multi-step forecast from the end of `history`.
std::vector<double> forecast_ar(const ArModel& model, std::span<const double> history, std::size_t horizon);

/// Binomial weights of (1 - B)^d: pi_0 = 1, pi_j = pi_{j-1} (j - 1 - d) / j.
std::vector<double> frac_weights(double d, std::size_t trunc);

/// y_t = sum_{j=0}^{min(t, trunc)} pi_j x_{t-j}.
std::vector<double> frac_diff(std::span<const double> x, double d, std::size_t trunc);

/// Exact inverse of frac_diff with the same (d, trunc):
///   x_t = y_t - sum_{j=1}^{min(t, trunc)} pi_j x_{t-j}.
std::vector<double> frac_integrate(std::span<const double> y, double d, std::size_t trunc);

/// With `d` absent, d = clamp(H - 0.5, 0, 0.49) using the variance-time
/// Hurst estimate. Requires N >= 1000.
FarimaModel fit_farima(std::span<const double> x, std::size_t p, std::optional<double> d = std::nullopt,
                       std::size_t trunc = kDefaultTruncLags);
FarimaModel fit_farima(const TimeSeries& x, std::size_t p, std::optional<double> d = std::nullopt,
                       std::size_t trunc = kDefaultTruncLags);

/// Requires history.size() > trunc_lags.
std::vector<double> forecast_farima(const FarimaModel& model, std::span<const double> history,
                                    std::size_t horizon);

}  // namespace burstcast
