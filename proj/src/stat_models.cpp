#include "burstcast/stat_models.hpp"

#include "burstcast/error.hpp"
#include "burstcast/selfsim.hpp"

#include <algorithm>
#include <cmath>

namespace burstcast {

namespace {

double mean_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

struct LevinsonResult {
    std::vector<double> phi;
    double innovation_var = 0.0;
};

LevinsonResult levinson_durbin(std::span<const double> gamma, std::size_t p) {
    LevinsonResult res;
    res.phi.assign(p, 0.0);
    double err = gamma[0];
    std::vector<double> prev;
    for (std::size_t m = 1; m <= p; ++m) {
        double acc = gamma[m];
        for (std::size_t i = 1; i < m; ++i) acc -= res.phi[i - 1] * gamma[m - i];
        if (!(err > 0.0)) throw DataError("singular autocorrelation matrix");
        double kappa = acc / err;
        if (!(std::abs(kappa) < 1.0)) throw DataError("singular autocorrelation matrix");
        prev.assign(res.phi.begin(), res.phi.begin() + static_cast<std::ptrdiff_t>(m - 1));
        for (std::size_t i = 1; i < m; ++i) res.phi[i - 1] = prev[i - 1] - kappa * prev[m - i - 1];
        res.phi[m - 1] = kappa;
        err *= 1.0 - kappa * kappa;
    }
    res.innovation_var = err;
    return res;
}

}  // namespace

bool is_stationary(std::span<const double> phi) {
    std::vector<double> a(phi.begin(), phi.end());
    for (std::size_t m = a.size(); m >= 1; --m) {
        double kappa = a[m - 1];
        if (!(std::abs(kappa) < 1.0)) return false;
        std::vector<double> next(m - 1);
        for (std::size_t i = 1; i < m; ++i)
            next[i - 1] = (a[i - 1] + kappa * a[m - i - 1]) / (1.0 - kappa * kappa);
        a = std::move(next);
    }
    return true;
}

std::vector<double> difference(std::span<const double> x, unsigned d) {
    std::vector<double> out(x.begin(), x.end());
    for (unsigned k = 0; k < d; ++k) {
        if (out.size() < 2) throw DataError("series too short to difference");
        for (std::size_t i = 0; i + 1 < out.size(); ++i) out[i] = out[i + 1] - out[i];
        out.pop_back();
    }
    return out;
}

ArModel fit_ar_yule_walker(std::span<const double> x, std::size_t p, unsigned d_int) {
    if (p == 0) throw DataError("AR order must be >= 1");
    if (x.size() < 50 * p)
        throw DataError("AR(" + std::to_string(p) + ") fit needs at least " + std::to_string(50 * p) +
                        " samples, have " + std::to_string(x.size()));
    auto z = difference(x, d_int);
    ArModel model;
    model.d_int = d_int;
    model.intercept_mean = mean_of(z);
    auto gamma = autocovariance(z, p);
    if (!(gamma[0] > 0.0)) throw DataError("singular autocorrelation matrix");
    auto lev = levinson_durbin(gamma, p);
    if (!is_stationary(lev.phi)) throw DataError("Yule-Walker solution is not stationary");
    model.phi = std::move(lev.phi);
    double nv = gamma[0];
    for (std::size_t i = 0; i < p; ++i) nv -= model.phi[i] * gamma[i + 1];
    model.noise_var = std::max(nv, 0.0);
    return model;
}

ArModel fit_ar_yule_walker(const TimeSeries& x, std::size_t p, unsigned d_int) {
    return fit_ar_yule_walker(std::span<const double>(x.values), p, d_int);
}

std::vector<double> forecast_ar(const ArModel& model, std::span<const double> history, std::size_t horizon) {
    const auto p = model.order();
    if (history.size() < p + model.d_int)
        throw DataError("insufficient history: AR forecast needs " + std::to_string(p + model.d_int) +
                        " samples, have " + std::to_string(history.size()));

    // Only the tail matters: p values at the differenced level plus d_int
    // anchors for re-integration.
    auto tail_len = p + model.d_int;
    auto tail = history.subspan(history.size() - tail_len);
    std::vector<std::vector<double>> levels{std::vector<double>(tail.begin(), tail.end())};
    for (unsigned l = 0; l < model.d_int; ++l) levels.push_back(difference(levels.back(), 1));

    std::vector<double> w(levels.back());
    for (auto& v : w) v -= model.intercept_mean;
    std::vector<double> out(horizon);
    for (std::size_t h = 0; h < horizon; ++h) {
        double f = 0.0;
        for (std::size_t i = 0; i < p; ++i) f += model.phi[i] * w[w.size() - 1 - i];
        w.push_back(f);
        out[h] = f + model.intercept_mean;
    }
    for (unsigned l = model.d_int; l-- > 0;) {
        double acc = levels[l].back();
        for (auto& v : out) {
            acc += v;
            v = acc;
        }
    }
    return out;
}

std::vector<double> frac_weights(double d, std::size_t trunc) {
    std::vector<double> pi(trunc + 1);
    pi[0] = 1.0;
    for (std::size_t j = 1; j <= trunc; ++j)
        pi[j] = pi[j - 1] * (static_cast<double>(j) - 1.0 - d) / static_cast<double>(j);
    return pi;
}

std::vector<double> frac_diff(std::span<const double> x, double d, std::size_t trunc) {
    if (!(d >= 0.0 && d < 0.5)) throw DataError("fractional order must lie in [0, 0.5)");
    auto pi = frac_weights(d, trunc);
    std::vector<double> y(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        double s = 0.0;
        auto jmax = std::min(t, trunc);
        for (std::size_t j = 0; j <= jmax; ++j) s += pi[j] * x[t - j];
        y[t] = s;
    }
    return y;
}

std::vector<double> frac_integrate(std::span<const double> y, double d, std::size_t trunc) {
    if (!(d >= 0.0 && d < 0.5)) throw DataError("fractional order must lie in [0, 0.5)");
    auto pi = frac_weights(d, trunc);
    std::vector<double> x(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) {
        double s = y[t];
        auto jmax = std::min(t, trunc);
        for (std::size_t j = 1; j <= jmax; ++j) s -= pi[j] * x[t - j];
        x[t] = s;
    }
    return x;
}

FarimaModel fit_farima(std::span<const double> x, std::size_t p, std::optional<double> d, std::size_t trunc) {
    if (x.size() < 1000)
        throw DataError("FARIMA fit needs at least 1000 samples, have " + std::to_string(x.size()));
    if (trunc == 0) throw DataError("truncation lag must be positive");
    FarimaModel model;
    if (d) {
        if (!(*d >= 0.0 && *d < 0.5)) throw DataError("fractional order must lie in [0, 0.5)");
        model.d_frac = *d;
    } else {
        auto blocks = block_sizes_for(x.size());
        auto est = variance_time_hurst(x, blocks);
        model.d_frac = std::clamp(est.hurst - 0.5, 0.0, 0.49);
    }
    model.trunc_lags = trunc;
    model.pi_coeffs = frac_weights(model.d_frac, trunc);
    model.intercept_mean = mean_of(x);
    std::vector<double> z(x.begin(), x.end());
    for (auto& v : z) v -= model.intercept_mean;
    auto y = frac_diff(z, model.d_frac, trunc);
    auto ar = fit_ar_yule_walker(y, p);
    model.phi = std::move(ar.phi);
    model.ar_mean = ar.intercept_mean;
    model.noise_var = ar.noise_var;
    return model;
}

FarimaModel fit_farima(const TimeSeries& x, std::size_t p, std::optional<double> d, std::size_t trunc) {
    return fit_farima(std::span<const double>(x.values), p, d, trunc);
}

std::vector<double> forecast_farima(const FarimaModel& model, std::span<const double> history,
                                    std::size_t horizon) {
    const auto trunc = model.trunc_lags;
    const auto p = model.phi.size();
    if (history.size() <= trunc)
        throw DataError("insufficient history: FARIMA forecast needs more than " + std::to_string(trunc) +
                        " samples, have " + std::to_string(history.size()));
    if (model.pi_coeffs.size() != trunc + 1) throw DataError("FARIMA model has inconsistent filter length");
    const auto& pi = model.pi_coeffs;

    // Work on the last trunc + p samples: enough for p differenced values,
    // each of which sees the full filter.
    auto tail_len = std::min(history.size(), trunc + p);
    auto tail = history.subspan(history.size() - tail_len);
    std::vector<double> z(tail.begin(), tail.end());
    for (auto& v : z) v -= model.intercept_mean;
    const auto offset = history.size() - tail_len;  // absolute index of z[0]

    // Differenced value at tail position t (absolute index offset + t).
    auto diff_at = [&](std::size_t t) {
        auto jmax = std::min(offset + t, trunc);
        double s = 0.0;
        for (std::size_t j = 0; j <= jmax; ++j) s += pi[j] * z[t - j];
        return s;
    };
    std::vector<double> w;
    w.reserve(p + horizon);
    for (std::size_t i = p; i-- > 0;) w.push_back(diff_at(z.size() - 1 - i) - model.ar_mean);

    std::vector<double> out(horizon);
    for (std::size_t h = 0; h < horizon; ++h) {
        double f = 0.0;
        for (std::size_t i = 0; i < p; ++i) f += model.phi[i] * w[w.size() - 1 - i];
        w.push_back(f);
        double yhat = f + model.ar_mean;
        auto t = z.size();
        auto jmax = std::min(offset + t, trunc);
        double s = yhat;
        for (std::size_t j = 1; j <= jmax; ++j) s -= pi[j] * z[t - j];
        z.push_back(s);
        out[h] = s + model.intercept_mean;
    }
    return out;
}

}  // namespace burstcast
