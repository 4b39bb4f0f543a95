#include "burstcast/burst.hpp"

#include "burstcast/error.hpp"

#include <algorithm>
#include <cmath>

namespace burstcast {

namespace {

void require_length(std::size_t n, std::size_t k) {
    if (k == 0) throw DataError("burst window half-width k must be positive");
    if (n <= 2 * k)
        throw DataError("series too short for burst scoring: need more than " + std::to_string(2 * k) +
                        " samples, have " + std::to_string(n));
}

}  // namespace

std::size_t BurstLabels::count() const {
    return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
}

std::vector<double> contrast_scores(std::span<const double> x, std::size_t k) {
    require_length(x.size(), k);
    const auto n = x.size();
    std::vector<double> a(n, 0.0);
    // left = x[j-k..j-1], right = x[j+1..j+k]
    double left = 0.0;
    double right = 0.0;
    for (std::size_t r = 0; r < k; ++r) left += x[r];
    for (std::size_t r = k + 1; r <= 2 * k; ++r) right += x[r];
    const double inv = 1.0 / (2.0 * static_cast<double>(k));
    for (std::size_t j = k; j < n - k; ++j) {
        a[j] = x[j] - (left + right) * inv;
        if (j + 1 < n - k) {
            left += x[j] - x[j - k];
            right += x[j + k + 1] - x[j + 1];
        }
    }
    return a;
}

BurstLabels label_bursts(std::span<const double> x, const BurstConfig& cfg) {
    require_length(x.size(), cfg.k);
    const auto n = x.size();
    BurstLabels out;
    out.k = cfg.k;
    out.h = cfg.h;
    out.flags.assign(n, 0);
    out.scores = contrast_scores(x, cfg.k);

    auto sx = compute_norm_stats(x);
    out.stats.mu_x = sx.mean;
    out.stats.sigma_x = sx.sd;

    std::vector<double> positive;
    for (std::size_t j = cfg.k; j < n - cfg.k; ++j)
        if (out.scores[j] > 0.0) positive.push_back(out.scores[j]);
    if (positive.empty() || !(sx.sd > 0.0)) return out;
    auto sp = compute_norm_stats(positive);
    out.stats.mu_p = sp.mean;
    out.stats.sigma_p = sp.sd;

    for (std::size_t i = cfg.k; i < n - cfg.k; ++i) {
        double a = out.scores[i];
        if (a > 0.0 && a - sp.mean > cfg.h * sp.sd && x[i] - sx.mean > cfg.h * sx.sd) out.flags[i] = 1;
    }
    return out;
}

BurstLabels label_bursts(const TimeSeries& x, const BurstConfig& cfg) {
    return label_bursts(std::span<const double>(x.values), cfg);
}

std::vector<std::uint32_t> burst_distance(std::span<const std::uint8_t> flags, std::uint32_t cap) {
    std::vector<std::uint32_t> d(flags.size());
    std::uint32_t cur = 0;  // distance at the virtual burst
    for (std::size_t t = 0; t < flags.size(); ++t) {
        cur = flags[t] ? 0 : std::min<std::uint32_t>(cur + 1, cap);
        d[t] = cur;
    }
    return d;
}

std::vector<std::uint32_t> causal_burst_distance(std::span<const std::uint8_t> flags, std::size_t k,
                                                 std::uint32_t cap) {
    std::vector<std::uint32_t> d(flags.size());
    long long last = -1;
    for (std::size_t t = 0; t < flags.size(); ++t) {
        if (t >= k && flags[t - k]) last = static_cast<long long>(t - k);
        auto dist = static_cast<long long>(t) - last;
        d[t] = static_cast<std::uint32_t>(std::min<long long>(dist, cap));
    }
    return d;
}

std::vector<double> log_distance(std::span<const std::uint32_t> d) {
    std::vector<double> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = std::log1p(static_cast<double>(d[i]));
    return out;
}

}  // namespace burstcast
