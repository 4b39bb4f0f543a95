#include "burstcast/series.hpp"

#include "burstcast/error.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace burstcast {

static_assert(std::endian::native == std::endian::little,
              "raw series format assumes a little-endian host");

namespace {

constexpr char kRawMagic[4] = {'B', 'A', 'F', 'S'};
constexpr std::uint32_t kRawVersion = 1;

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    }
    return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::string row_error(const char* what, std::size_t row) {
    return std::string(what) + " at row " + std::to_string(row);
}

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError(std::string("truncated raw series: missing ") + what);
    return v;
}

SeriesFile load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file: " + path.string());
    auto header = split_fields(line);
    if (header.size() < 2 || header[0] != "t_ms" || header[1] != "demand_mbps")
        throw DataError("bad csv header (expected t_ms,demand_mbps) at row 0");
    int burst_col = -1;
    int score_col = -1;
    for (std::size_t c = 2; c < header.size(); ++c) {
        if (header[c] == "burst") burst_col = static_cast<int>(c);
        else if (header[c] == "score") score_col = static_cast<int>(c);
        else throw DataError("unknown csv column '" + std::string(header[c]) + "' at row 0");
    }

    SeriesFile file;
    std::vector<std::uint8_t> burst;
    std::vector<double> score;
    std::int64_t first_t = 0;
    std::int64_t prev_t = 0;
    std::int64_t tick = 0;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        auto fields = split_fields(line);
        if (fields.size() != header.size()) throw DataError(row_error("wrong field count", row));
        std::int64_t t = 0;
        double v = 0.0;
        if (!parse_number(fields[0], t)) throw DataError(row_error("bad timestamp", row));
        if (!parse_number(fields[1], v) || !std::isfinite(v))
            throw DataError(row_error("bad demand value", row));
        if (row == 1) {
            first_t = t;
        } else if (row == 2) {
            tick = t - prev_t;
            if (tick <= 0) throw DataError(row_error("non-increasing timestamp", row));
        } else if (t - prev_t != tick) {
            throw DataError(row_error("non-uniform timestamp", row));
        }
        prev_t = t;
        file.series.values.push_back(v);
        if (burst_col >= 0) {
            int b = 0;
            if (!parse_number(fields[static_cast<std::size_t>(burst_col)], b) || (b != 0 && b != 1))
                throw DataError(row_error("bad burst flag", row));
            burst.push_back(static_cast<std::uint8_t>(b));
        }
        if (score_col >= 0) {
            double s = 0.0;
            if (!parse_number(fields[static_cast<std::size_t>(score_col)], s))
                throw DataError(row_error("bad score", row));
            score.push_back(s);
        }
    }
    if (row == 0) throw DataError("empty file: " + path.string());
    // A single row carries no spacing information; keep the default tick.
    file.series.tick_ms = row >= 2 ? tick : file.series.tick_ms;
    file.series.origin_tick = file.series.tick_ms > 0 ? first_t / file.series.tick_ms : 0;
    if (burst_col >= 0) file.burst = std::move(burst);
    if (score_col >= 0) file.score = std::move(score);
    return file;
}

TimeSeries load_raw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in) throw DataError("empty file: " + path.string());
    if (std::memcmp(magic, kRawMagic, 4) != 0) throw DataError("bad raw series magic");
    auto version = read_pod<std::uint32_t>(in, "version");
    if (version != kRawVersion) throw DataError("unsupported raw series version " + std::to_string(version));
    TimeSeries s;
    s.tick_ms = read_pod<std::uint32_t>(in, "tick_ms");
    auto n = read_pod<std::uint64_t>(in, "length");
    if (n == 0) throw DataError("empty file: " + path.string());
    s.values.resize(n);
    in.read(reinterpret_cast<char*>(s.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw DataError("truncated raw series: expected " + std::to_string(n) + " values");
    return s;
}

}  // namespace

SeriesFormat format_from_path(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    if (ext == ".csv") return SeriesFormat::csv;
    return SeriesFormat::raw_f64;
}

TimeSeries load_series(const std::filesystem::path& path, SeriesFormat format) {
    if (format == SeriesFormat::csv) return load_csv(path).series;
    return load_raw(path);
}

TimeSeries load_series(const std::filesystem::path& path) {
    return load_series(path, format_from_path(path));
}

SeriesFile load_series_file(const std::filesystem::path& path) {
    if (format_from_path(path) == SeriesFormat::csv) return load_csv(path);
    return SeriesFile{load_raw(path), std::nullopt, std::nullopt};
}

void save_series_csv(const TimeSeries& series, const std::filesystem::path& path,
                     std::span<const std::uint8_t> burst, std::span<const double> score) {
    if (!burst.empty() && burst.size() != series.size())
        throw DataError("burst column length does not match series");
    if (!score.empty() && score.size() != series.size())
        throw DataError("score column length does not match series");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "t_ms,demand_mbps";
    if (!burst.empty()) out << ",burst";
    if (!score.empty()) out << ",score";
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < series.size(); ++i) {
        auto t = (series.origin_tick + static_cast<std::int64_t>(i)) * series.tick_ms;
        out << t << ',';
        std::snprintf(buf, sizeof buf, "%.9g", series.values[i]);
        out << buf;
        if (!burst.empty()) out << ',' << int(burst[i]);
        if (!score.empty()) {
            std::snprintf(buf, sizeof buf, "%.9g", score[i]);
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

void save_series(const TimeSeries& series, const std::filesystem::path& path, SeriesFormat format) {
    if (format == SeriesFormat::csv) {
        save_series_csv(series, path);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(kRawMagic, 4);
    write_pod(out, kRawVersion);
    write_pod(out, static_cast<std::uint32_t>(series.tick_ms));
    write_pod(out, static_cast<std::uint64_t>(series.size()));
    out.write(reinterpret_cast<const char*>(series.values.data()),
              static_cast<std::streamsize>(series.size() * sizeof(double)));
    if (!out) throw DataError("write failed: " + path.string());
}

void save_series(const TimeSeries& series, const std::filesystem::path& path) {
    save_series(series, path, format_from_path(path));
}

NormStats compute_norm_stats(std::span<const double> values) {
    NormStats st;
    if (values.empty()) return st;
    double sum = 0.0;
    for (double v : values) sum += v;
    st.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - st.mean) * (v - st.mean);
    st.sd = std::sqrt(ss / static_cast<double>(values.size()));
    return st;
}

std::pair<TimeSeries, NormStats> zscore_normalize(const TimeSeries& series,
                                                  std::optional<NormStats> stats) {
    NormStats st;
    if (stats) {
        st = *stats;
        if (!(st.sd > 0.0)) throw DataError("degenerate series");
    } else {
        if (series.size() < 2) throw DataError("degenerate series");
        st = compute_norm_stats(series.values);
        if (!(st.sd > 0.0)) throw DataError("degenerate series");
    }
    TimeSeries out = series;
    for (auto& v : out.values) v = (v - st.mean) / st.sd;
    return {std::move(out), st};
}

TimeSeries denormalize(const TimeSeries& series, const NormStats& stats) {
    TimeSeries out = series;
    for (auto& v : out.values) v = v * stats.sd + stats.mean;
    return out;
}

WindowSet make_windows(std::size_t series_len, std::size_t encoder_len, std::size_t label_len,
                       std::size_t pred_len) {
    if (encoder_len == 0 || pred_len == 0) throw DataError("encoder_len and pred_len must be positive");
    if (label_len > encoder_len) throw DataError("label_len exceeds encoder_len");
    auto need = encoder_len + pred_len;
    if (series_len < need)
        throw DataError("series too short for windowing: need at least " + std::to_string(need) +
                        " samples, have " + std::to_string(series_len));
    WindowSet ws{encoder_len, label_len, pred_len, {}};
    auto count = series_len - need + 1;
    ws.windows.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        Window w;
        w.encoder = {t, t + encoder_len};
        w.label = {t + encoder_len - label_len, t + encoder_len};
        w.target = {t + encoder_len, t + encoder_len + pred_len};
        ws.windows.push_back(w);
    }
    return ws;
}

std::pair<std::size_t, std::size_t> split_points(std::size_t n, double train_frac, double val_frac) {
    // The small slack keeps e.g. 20000 * 0.9 from landing on 15999.
    auto cut = [n](double f) { return static_cast<std::size_t>(std::floor(static_cast<double>(n) * f + 1e-9)); };
    auto a = cut(train_frac);
    auto b = cut(train_frac + val_frac);
    return {a, std::min(b, n)};
}

TimeSeries subseries(const TimeSeries& series, std::size_t begin, std::size_t end) {
    TimeSeries out;
    out.tick_ms = series.tick_ms;
    out.origin_tick = series.origin_tick + static_cast<std::int64_t>(begin);
    out.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(begin),
                      series.values.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

SplitSeries split_chronological(const TimeSeries& series, double train_frac, double val_frac) {
    auto [a, b] = split_points(series.size(), train_frac, val_frac);
    return {subseries(series, 0, a), subseries(series, a, b), subseries(series, b, series.size())};
}

}  // namespace burstcast
