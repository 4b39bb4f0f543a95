#pragma once

#include "burstcast/burst.hpp"
#include "burstcast/checkpoint.hpp"
#include "burstcast/informer.hpp"
#include "burstcast/series.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace burstcast {

/// Which burst-distance feature a window reads: `offline` sees every label,
/// `causal` only labels already confirmable at that tick.
enum class DistanceMode { offline, causal };

/// Optimisation schedule. The defaults are the full-scale schedule; desk()
/// is sized for a single CPU core.
struct TrainConfig {
    std::size_t epochs = 15;
    std::size_t batch_size = 128;
    double learning_rate = 1e-4;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Training windows drawn (without replacement) per epoch; 0 = all.
    std::size_t max_train_windows = 0;
    /// Validation windows, evenly strided over the split; 0 = all.
    std::size_t max_val_windows = 0;
    /// Windows per forward/backward pass. Gradients are accumulated so the
    /// update equals the full-batch one.
    std::size_t micro_batch = 32;
    /// Distance feature used by training windows. Validation always reads
    /// causal distances.
    DistanceMode train_distance = DistanceMode::offline;

    void validate() const;
    std::string canonical() const;
    std::uint64_t digest() const;

    /// Full schedule: 15 epochs over every window.
    static TrainConfig paper();
    /// Capped schedule sized for a single CPU core.
    static TrainConfig desk();
};

/// Normalized series with everything the windows draw on.
struct PreparedSeries {
    std::vector<double> z;
    std::vector<std::uint8_t> flags;
    /// log(1 + distance to the last burst), using every label (training).
    std::vector<double> offline_log_dist;
    /// Same, using only labels already confirmable at t (inference).
    std::vector<double> causal_log_dist;
    NormStats norm;
    std::size_t train_end = 0;
    std::size_t val_end = 0;
};

/// Splits 70/10/20, normalizes with train-split stats (or `norm` if given).
PreparedSeries prepare_series(const TimeSeries& series, const BurstLabels& labels,
                              std::optional<NormStats> norm = std::nullopt);

/// Start offsets of every stride-1 window lying inside [begin, end).
std::vector<std::size_t> window_starts(std::size_t begin, std::size_t end, const ModelConfig& cfg);

struct Batch {
    ModelInput input;
    BatchTargets targets;
};

Batch make_batch(const PreparedSeries& data, std::span<const std::size_t> starts, const ModelConfig& cfg,
                 DistanceMode mode);

/// BCE positive weight: negatives / positives over the training split,
/// clamped to [1, 100].
double burst_pos_weight(const PreparedSeries& data);

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_mse = 0.0;
};

struct TrainResult {
    Checkpoint best;
    std::size_t best_epoch = 0;
    std::vector<EpochLog> trace;
    /// Loss of the first batch before any update.
    double initial_loss = 0.0;
    std::size_t steps = 0;
    double pos_weight = 1.0;
};

/// Raised when a loss turns non-finite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t step, double loss);
    std::size_t step;
};

using ProgressFn = std::function<void(const EpochLog&)>;

TrainResult train(const TimeSeries& series, const BurstLabels& labels, const ModelConfig& mcfg,
                  const TrainConfig& tcfg, const ProgressFn& progress = {});
TrainResult train(const PreparedSeries& data, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const ProgressFn& progress = {});

/// Forecasts and truths for a list of windows, row-major [n, pred_len].
struct ForecastSet {
    std::size_t pred_len = 0;
    std::vector<std::size_t> starts;
    std::vector<double> forecast;
    std::vector<double> target;
    std::vector<std::uint8_t> burst;
    std::size_t size() const { return starts.size(); }
};

/// Truths for the given windows with an empty forecast to fill in.
ForecastSet forecast_frame(const PreparedSeries& data, std::span<const std::size_t> starts,
                           const ModelConfig& cfg);

/// Runs the model (no gradients) over every window, `chunk` windows at a time.
ForecastSet model_forecasts(const BurstInformer& model, const PreparedSeries& data,
                            std::span<const std::size_t> starts, DistanceMode mode = DistanceMode::causal,
                            std::size_t chunk = 64);

struct HeatCell {
    std::size_t index = 0;
    std::optional<double> mse;  ///< absent when count is 0
    std::size_t count = 0;
};

struct EvalReport {
    double overall_mse = 0.0;
    std::optional<double> burst_mse;  ///< absent without burst windows
    std::size_t n_windows = 0;
    std::size_t n_burst_windows = 0;
    std::vector<HeatCell> heatmap;
    std::uint64_t config_digest = 0;
};

/// Per horizon index i: MSE over the windows whose target step i is a burst.
std::vector<HeatCell> burst_position_heatmap(const ForecastSet& f);

EvalReport evaluate_forecasts(const ForecastSet& f, std::uint64_t config_digest = 0);

/// Evaluates a checkpoint on the test split of `series`, normalized with the
/// checkpoint's stats.
EvalReport evaluate(const Checkpoint& ckpt, const TimeSeries& series, const BurstLabels& labels);
EvalReport evaluate(const Checkpoint& ckpt, const PreparedSeries& data);

std::string metrics_json(const EvalReport& report);
void write_metrics(const EvalReport& report, const std::filesystem::path& path);

enum class BaselineKind { ar, farima };

struct BaselineConfig {
    BaselineKind kind = BaselineKind::ar;
    std::size_t p = 2;
    std::optional<double> d;  ///< FARIMA only; absent = from the Hurst estimate
    unsigned d_int = 0;       ///< ARIMA only
    std::size_t trunc = 1000;
};

/// Fits on the training split once, then forecasts every test window from
/// the full history up to its origin.
ForecastSet baseline_forecasts(const PreparedSeries& data, const BaselineConfig& bcfg, std::size_t pred_len,
                               std::size_t encoder_len = 128);

struct AblationRow {
    std::string name;
    ModelConfig config;
    EvalReport report;
};

/// The four flag combinations none / embed / embed+heads / embed+heads+asym.
std::vector<ModelConfig> ablation_configs(const ModelConfig& base);

std::vector<AblationRow> run_ablation(const TimeSeries& series, const BurstLabels& labels,
                                      const ModelConfig& base, const TrainConfig& tcfg,
                                      const ProgressFn& progress = {});

}  // namespace burstcast
