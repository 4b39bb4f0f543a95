#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace burstcast::oracle {

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double pop_sd(const std::vector<double>& v) {
    double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

double dot(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += a[i] * b[i];
    return s;
}

void fft(std::vector<std::complex<double>>& a) {
    const auto n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        for (std::size_t i = 0; i < n; i += len)
            for (std::size_t j = 0; j < len / 2; ++j) {
                auto w = std::polar(1.0, ang * static_cast<double>(j));
                auto u = a[i + j];
                auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
            }
    }
}

}  // namespace

std::vector<std::uint8_t> burst_flags(std::span<const double> x, std::size_t k, double h) {
    const auto n = x.size();
    std::vector<std::uint8_t> flags(n, 0);
    std::vector<double> all(x.begin(), x.end());
    std::vector<double> a(n, 0.0);
    std::vector<double> positive;
    for (std::size_t j = k; j + k < n; ++j) {
        double left = 0.0;
        double right = 0.0;
        for (std::size_t r = 1; r <= k; ++r) {
            left += x[j - r];
            right += x[j + r];
        }
        a[j] = x[j] - (left + right) / (2.0 * static_cast<double>(k));
        if (a[j] > 0.0) positive.push_back(a[j]);
    }
    if (positive.empty()) return flags;
    double mu_p = mean_of(positive), sd_p = pop_sd(positive);
    double mu_x = mean_of(all), sd_x = pop_sd(all);
    if (sd_x == 0.0) return flags;
    for (std::size_t i = k; i + k < n; ++i)
        if (a[i] > 0.0 && a[i] - mu_p > h * sd_p && x[i] - mu_x > h * sd_x) flags[i] = 1;
    return flags;
}

std::vector<double> matmul(std::span<const double> a, std::span<const double> b, std::size_t m, std::size_t k,
                           std::size_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < k; ++r) s += a[i * k + r] * b[r * n + j];
            c[i * n + j] = s;
        }
    return c;
}

std::vector<double> full_attention(std::span<const double> q, std::span<const double> k, std::span<const double> v,
                                   std::size_t lq, std::size_t lk, std::size_t d, bool causal) {
    std::vector<double> out(lq * d, 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < lq; ++i) {
        std::size_t visible = causal ? std::min(i + 1, lk) : lk;
        std::vector<double> s(visible);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < visible; ++j) {
            s[j] = dot(&q[i * d], &k[j * d], d) * scale;
            mx = std::max(mx, s[j]);
        }
        double z = 0.0;
        for (auto& e : s) z += (e = std::exp(e - mx));
        for (std::size_t j = 0; j < visible; ++j)
            for (std::size_t c = 0; c < d; ++c) out[i * d + c] += s[j] / z * v[j * d + c];
    }
    return out;
}

AttentionResult probsparse(std::span<const double> q, std::span<const double> k, std::span<const double> v,
                           std::size_t lq, std::size_t lk, std::size_t d, std::size_t u, bool causal) {
    AttentionResult r;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    r.measure.resize(lq);
    for (std::size_t i = 0; i < lq; ++i) {
        std::size_t visible = causal ? std::min(i + 1, lk) : lk;
        double mx = -std::numeric_limits<double>::infinity();
        double sum = 0.0;
        for (std::size_t j = 0; j < visible; ++j) {
            double s = dot(&q[i * d], &k[j * d], d) * scale;
            mx = std::max(mx, s);
            sum += s;
        }
        r.measure[i] = mx - sum / static_cast<double>(visible);
    }

    // Ranking: larger measure first, lower index on ties.
    auto before = [&](std::size_t a, std::size_t b) {
        return r.measure[a] > r.measure[b] || (r.measure[a] == r.measure[b] && a < b);
    };
    r.selected.assign(lq, 0);
    if (causal) {
        for (std::size_t i = 0; i < lq; ++i) {
            std::vector<std::size_t> prefix(i + 1);
            for (std::size_t j = 0; j <= i; ++j) prefix[j] = j;
            std::sort(prefix.begin(), prefix.end(), before);
            auto pos = std::find(prefix.begin(), prefix.end(), i) - prefix.begin();
            r.selected[i] = static_cast<std::size_t>(pos) < u ? 1 : 0;
        }
    } else {
        std::vector<std::size_t> idx(lq);
        for (std::size_t i = 0; i < lq; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), before);
        for (std::size_t t = 0; t < std::min(u, lq); ++t) r.selected[idx[t]] = 1;
    }

    auto full = full_attention(q, k, v, lq, lk, d, causal);
    r.out.assign(lq * d, 0.0);
    for (std::size_t i = 0; i < lq; ++i) {
        if (r.selected[i]) {
            for (std::size_t c = 0; c < d; ++c) r.out[i * d + c] = full[i * d + c];
            continue;
        }
        std::size_t visible = causal ? std::min(i + 1, lk) : lk;
        for (std::size_t c = 0; c < d; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < visible; ++j) s += v[j * d + c];
            r.out[i * d + c] = s / static_cast<double>(visible);
        }
    }
    return r;
}

double mse(std::span<const double> forecast, std::span<const double> target) {
    if (forecast.size() != target.size() || forecast.empty()) throw std::invalid_argument("mse: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < forecast.size(); ++i) s += (forecast[i] - target[i]) * (forecast[i] - target[i]);
    return s / static_cast<double>(forecast.size());
}

ScanResult window_scan(std::span<const double> series, std::span<const std::uint8_t> flags, std::size_t begin,
                       std::size_t end, std::size_t encoder_len, std::size_t pred_len,
                       std::span<const double> forecasts) {
    ScanResult r;
    r.cell_count.assign(pred_len, 0);
    r.cell_mse.assign(pred_len, 0.0);
    std::vector<double> all_f, all_y, burst_f, burst_y;
    std::vector<std::vector<double>> cell_f(pred_len), cell_y(pred_len);
    std::size_t w = 0;
    for (std::size_t t = begin; t + encoder_len + pred_len <= end; ++t, ++w) {
        bool burst = false;
        for (std::size_t i = 0; i < pred_len; ++i) burst = burst || flags[t + encoder_len + i] == 1;
        for (std::size_t i = 0; i < pred_len; ++i) {
            double f = forecasts[w * pred_len + i];
            double y = series[t + encoder_len + i];
            all_f.push_back(f);
            all_y.push_back(y);
            if (burst) {
                burst_f.push_back(f);
                burst_y.push_back(y);
            }
            if (flags[t + encoder_len + i]) {
                cell_f[i].push_back(f);
                cell_y[i].push_back(y);
            }
        }
        if (burst) ++r.n_burst_windows;
    }
    r.n_windows = w;
    if (w) r.overall_mse = mse(all_f, all_y);
    if (r.n_burst_windows) r.burst_mse = mse(burst_f, burst_y);
    for (std::size_t i = 0; i < pred_len; ++i) {
        r.cell_count[i] = cell_f[i].size();
        if (!cell_f[i].empty()) r.cell_mse[i] = mse(cell_f[i], cell_y[i]);
    }
    return r;
}

std::vector<double> ar_recursion(std::span<const double> phi, double mean, std::span<const double> history,
                                 std::size_t horizon) {
    std::vector<double> path;
    for (double h : history) path.push_back(h - mean);
    std::vector<double> out;
    for (std::size_t s = 0; s < horizon; ++s) {
        double next = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i) next += phi[i] * path[path.size() - 1 - i];
        path.push_back(next);
        out.push_back(next + mean);
    }
    return out;
}

std::vector<double> simulate_ar(std::span<const double> phi, std::size_t n, std::uint64_t seed,
                                std::size_t burn_in) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> x(n + burn_in, 0.0);
    for (std::size_t t = 0; t < x.size(); ++t) {
        double v = noise(eng);
        for (std::size_t i = 0; i < phi.size() && i < t; ++i) v += phi[i] * x[t - 1 - i];
        x[t] = v;
    }
    return {x.begin() + static_cast<std::ptrdiff_t>(burn_in), x.end()};
}

std::vector<double> fgn(std::size_t n, double hurst, std::uint64_t seed) {
    std::size_t m = 1;
    while (m < 2 * n) m <<= 1;
    const std::size_t half = m / 2;
    auto gamma = [hurst](double k) {
        double h2 = 2.0 * hurst;
        return 0.5 * (std::pow(std::abs(k + 1), h2) - 2.0 * std::pow(std::abs(k), h2) + std::pow(std::abs(k - 1), h2));
    };
    std::vector<std::complex<double>> row(m);
    for (std::size_t j = 0; j <= half; ++j) row[j] = gamma(static_cast<double>(j));
    for (std::size_t j = half + 1; j < m; ++j) row[j] = gamma(static_cast<double>(m - j));
    fft(row);

    std::mt19937_64 eng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<std::complex<double>> w(m);
    const double md = static_cast<double>(m);
    for (std::size_t j = 0; j < m; ++j) {
        double lambda = std::max(row[j].real(), 0.0);
        double a = std::sqrt(lambda / md);
        if (j == 0 || j == half) {
            w[j] = a * z(eng);
        } else if (j < half) {
            double re = z(eng), im = z(eng);
            w[j] = a * std::complex<double>(re, im) / std::sqrt(2.0);
            w[m - j] = std::conj(w[j]);  // the embedding is symmetric
        }
    }
    fft(w);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = w[i].real();
    return out;
}

std::vector<double> white_noise(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> out(n);
    for (auto& v : out) v = z(eng);
    return out;
}

}  // namespace burstcast::oracle
