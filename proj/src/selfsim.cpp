#include "burstcast/selfsim.hpp"

#include "burstcast/error.hpp"

#include <cmath>

namespace burstcast {

std::vector<double> aggregate(std::span<const double> x, std::size_t m) {
    if (m == 0) throw DataError("block size must be >= 1");
    if (m > x.size())
        throw DataError("block size " + std::to_string(m) + " exceeds series length " +
                        std::to_string(x.size()));
    const auto blocks = x.size() / m;
    std::vector<double> out(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        double s = 0.0;
        for (std::size_t i = b * m; i < (b + 1) * m; ++i) s += x[i];
        out[b] = s / static_cast<double>(m);
    }
    return out;
}

TimeSeries aggregate(const TimeSeries& x, std::size_t m) {
    TimeSeries out;
    out.values = aggregate(std::span<const double>(x.values), m);
    out.tick_ms = x.tick_ms * static_cast<std::int64_t>(m);
    out.origin_tick = 0;
    return out;
}

std::vector<std::size_t> default_block_sizes() {
    std::vector<std::size_t> out;
    for (std::size_t m = 1; m <= 512; m *= 2) out.push_back(m);
    return out;
}

std::vector<std::size_t> block_sizes_for(std::size_t n) {
    std::vector<std::size_t> out;
    for (std::size_t m = 1; m <= 512 && n / m >= 10; m *= 2) out.push_back(m);
    return out;
}

HurstEstimate variance_time_hurst(std::span<const double> x, std::span<const std::size_t> block_sizes) {
    if (block_sizes.size() < 3) throw DataError("variance-time fit needs at least 3 block sizes");
    for (std::size_t i = 0; i < block_sizes.size(); ++i) {
        if (block_sizes[i] < 1) throw DataError("block sizes must be >= 1");
        if (i > 0 && block_sizes[i] <= block_sizes[i - 1])
            throw DataError("block sizes must be strictly increasing");
    }
    if (x.size() / block_sizes.back() < 10)
        throw DataError("insufficient data: largest block " + std::to_string(block_sizes.back()) +
                        " leaves fewer than 10 aggregated points");

    HurstEstimate est;
    est.block_sizes.assign(block_sizes.begin(), block_sizes.end());
    std::vector<double> lx;
    std::vector<double> ly;
    for (auto m : block_sizes) {
        auto agg = aggregate(x, m);
        auto var = compute_norm_stats(agg).sd;
        var *= var;
        if (!(var > 0.0)) throw DataError("insufficient data: zero variance at block size " + std::to_string(m));
        est.variances.push_back(var);
        lx.push_back(std::log(static_cast<double>(m)));
        ly.push_back(std::log(var));
    }
    const double n = static_cast<double>(lx.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    double slope = sxy / sxx;
    double intercept = my - slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        double r = ly[i] - (intercept + slope * lx[i]);
        rss += r * r;
    }
    est.beta = -slope;
    est.hurst = 1.0 - est.beta / 2.0;
    est.slope_stderr = std::sqrt(rss / (n - 2.0) / sxx);
    return est;
}

HurstEstimate variance_time_hurst(const TimeSeries& x, std::span<const std::size_t> block_sizes) {
    return variance_time_hurst(std::span<const double>(x.values), block_sizes);
}

std::vector<double> autocovariance(std::span<const double> x, std::size_t max_lag) {
    const auto n = x.size();
    if (n == 0 || max_lag >= n) throw DataError("autocovariance lag exceeds series length");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> g(max_lag + 1, 0.0);
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
        double s = 0.0;
        for (std::size_t t = lag; t < n; ++t) s += (x[t] - mean) * (x[t - lag] - mean);
        g[lag] = s / static_cast<double>(n);
    }
    return g;
}

std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
    if (2 * max_lag >= x.size())
        throw DataError("max_lag " + std::to_string(max_lag) + " must be below N/2");
    auto g = autocovariance(x, max_lag);
    if (!(g[0] > 0.0)) throw DataError("autocorrelation of a constant series is undefined");
    std::vector<double> r(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) r[i] = g[i] / g[0];
    return r;
}

}  // namespace burstcast
