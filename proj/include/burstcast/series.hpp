#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace burstcast {

/// Uniformly sampled demand series (Mbps per tick).
struct TimeSeries {
    std::vector<double> values;
    std::int64_t tick_ms = 10;
    std::int64_t origin_tick = 0;

    std::size_t size() const { return values.size(); }
    bool empty() const { return values.empty(); }
};

/// Location and scale of a z-score transform.
struct NormStats {
    double mean = 0.0;
    double sd = 1.0;
};

enum class SeriesFormat { csv, raw_f64 };

/// Half-open index range [begin, end).
struct Slice {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

struct Window {
    Slice encoder;
    Slice label;
    Slice target;
};

struct WindowSet {
    std::size_t encoder_len = 0;
    std::size_t label_len = 0;
    std::size_t pred_len = 0;
    std::vector<Window> windows;
};

/// A series read from csv, together with the optional `burst` and `score`
/// columns written by the labeler.
struct SeriesFile {
    TimeSeries series;
    std::optional<std::vector<std::uint8_t>> burst;
    std::optional<std::vector<double>> score;
};

/// Chronological train/validation/test partition of one series.
struct SplitSeries {
    TimeSeries train;
    TimeSeries val;
    TimeSeries test;
};

SeriesFormat format_from_path(const std::filesystem::path& path);

TimeSeries load_series(const std::filesystem::path& path, SeriesFormat format);
TimeSeries load_series(const std::filesystem::path& path);
SeriesFile load_series_file(const std::filesystem::path& path);

void save_series(const TimeSeries& series, const std::filesystem::path& path, SeriesFormat format);
void save_series(const TimeSeries& series, const std::filesystem::path& path);

/// Writes csv with the optional burst flag and score columns.
void save_series_csv(const TimeSeries& series, const std::filesystem::path& path,
                     std::span<const std::uint8_t> burst = {},
                     std::span<const double> score = {});

/// Population mean and SD of `values`.
NormStats compute_norm_stats(std::span<const double> values);

/// z-score transform. Without `stats` they are fitted on `series`
/// (population SD); with them the supplied stats are applied unchanged.
/// Throws DataError("degenerate series") on zero SD.
std::pair<TimeSeries, NormStats> zscore_normalize(const TimeSeries& series,
                                                  std::optional<NormStats> stats = std::nullopt);

TimeSeries denormalize(const TimeSeries& series, const NormStats& stats);

/// Stride-1 windows; count = series_len - encoder_len - pred_len + 1.
WindowSet make_windows(std::size_t series_len, std::size_t encoder_len, std::size_t label_len,
                       std::size_t pred_len);

/// 70/10/20 chronological split (fractions configurable). Child series
/// carry their origin_tick relative to `series`.
SplitSeries split_chronological(const TimeSeries& series, double train_frac = 0.7,
                                double val_frac = 0.1);

/// Index boundaries used by split_chronological: [0,a) train, [a,b) val, [b,N) test.
std::pair<std::size_t, std::size_t> split_points(std::size_t n, double train_frac = 0.7,
                                                 double val_frac = 0.1);

TimeSeries subseries(const TimeSeries& series, std::size_t begin, std::size_t end);

}  // namespace burstcast
