#include "burstcast/cli.hpp"

#include "burstcast/autodiff.hpp"
#include "burstcast/burst.hpp"
#include "burstcast/checkpoint.hpp"
#include "burstcast/error.hpp"
#include "burstcast/informer.hpp"
#include "burstcast/rng.hpp"
#include "burstcast/selfsim.hpp"
#include "burstcast/stat_models.hpp"
#include "burstcast/traffic_gen.hpp"
#include "burstcast/train_eval.hpp"

#include "oracles.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace burstcast {

namespace {

using json = nlohmann::ordered_json;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

/// Reads `key=value` lines and turns every key not already on the command
/// line into `--key value`, so flags win over the file.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::string path;
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            kept.push_back(args[i]);
        }
    }
    if (path.empty()) return kept;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path);
    auto given = [&](const std::string& key) {
        for (const auto& a : kept)
            if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
        return false;
    };
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("config line " + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        auto key = trim(line.substr(0, eq));
        auto val = trim(line.substr(eq + 1));
        if (given(key)) continue;
        if (val == "true" || val == "false") {
            if (val == "true") kept.push_back("--" + key);
        } else {
            kept.push_back("--" + key);
            kept.push_back(val);
        }
    }
    return kept;
}

struct Manifest {
    std::string command_line;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::map<std::string, std::uint64_t> seeds;
    std::string effective_config;
    std::optional<std::string> path;
};

void emit_manifest(const Manifest& m, double wall_s, std::ostream& out) {
    json j;
    j["command_line"] = m.command_line;
    j["config_digest"] = hex64(fnv1a64(m.effective_config));
    json seeds = json::object();
    for (const auto& [k, v] : m.seeds) seeds[k] = v;
    j["seeds"] = seeds;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    j["tool_version"] = kToolVersion;
    j["wall_clock_s"] = wall_s;
    j["effective_config"] = m.effective_config;
    if (m.path) {
        write_text(*m.path, j.dump(2) + "\n");
    } else {
        out << j.dump(2) << "\n";
    }
}

// Model and training options shared by train / ablate.
struct ModelOpts {
    std::string profile = "desk";
    std::optional<std::size_t> d_model, n_heads, d_ff, enc_len, label_len, pred_len, value_kernel;
    std::optional<double> gamma, c;
    bool no_embed = false, no_heads = false, no_asym = false, sampled = false;
    std::optional<std::size_t> epochs, batch, max_train, max_val, micro_batch;
    std::optional<double> lr;
    std::optional<std::string> distance;
    std::uint64_t seed = 0;

    void attach(CLI::App* app) {
        app->add_option("--profile", profile, "scale preset")->check(CLI::IsMember({"desk", "paper"}));
        app->add_option("--d-model", d_model);
        app->add_option("--heads", n_heads);
        app->add_option("--d-ff", d_ff);
        app->add_option("--enc-len", enc_len);
        app->add_option("--label-len", label_len);
        app->add_option("--pred-len", pred_len)->check(CLI::IsMember({1, 12, 24, 48}));
        app->add_option("--value-kernel", value_kernel);
        app->add_option("--gamma", gamma, "asymmetric penalty");
        app->add_option("--c", c, "ProbSparse sampling factor");
        app->add_flag("--no-burst-embed", no_embed);
        app->add_flag("--no-burst-heads", no_heads);
        app->add_flag("--no-asym-loss", no_asym);
        app->add_flag("--sampled-sparsity", sampled);
        app->add_option("--epochs", epochs);
        app->add_option("--batch", batch);
        app->add_option("--lr", lr);
        app->add_option("--max-train-windows", max_train, "0 = all");
        app->add_option("--max-val-windows", max_val, "0 = all");
        app->add_option("--micro-batch", micro_batch);
        app->add_option("--distance", distance, "burst-distance feature for training windows")
            ->check(CLI::IsMember({"offline", "causal"}));
        app->add_option("--seed", seed);
    }

    ModelConfig model() const {
        auto m = profile == "paper" ? ModelConfig::paper() : ModelConfig::desk();
        if (d_model) {
            m.d_model = *d_model;
            if (!d_ff) m.d_ff = 4 * *d_model;
        }
        if (n_heads) m.n_heads = *n_heads;
        if (d_ff) m.d_ff = *d_ff;
        if (enc_len) m.encoder_len = *enc_len;
        if (label_len) m.label_len = *label_len;
        if (pred_len) m.pred_len = *pred_len;
        if (value_kernel) m.value_kernel = *value_kernel;
        if (gamma) m.gamma = *gamma;
        if (c) m.sampling_factor = *c;
        m.enable_burst_embed = !no_embed;
        m.enable_burst_heads = !no_heads;
        m.enable_asym_loss = !no_asym;
        m.sampled_sparsity = sampled;
        m.validate();
        return m;
    }

    TrainConfig train() const {
        auto t = profile == "paper" ? TrainConfig::paper() : TrainConfig::desk();
        if (epochs) t.epochs = *epochs;
        if (batch) t.batch_size = *batch;
        if (lr) t.learning_rate = *lr;
        if (max_train) t.max_train_windows = *max_train;
        if (max_val) t.max_val_windows = *max_val;
        if (micro_batch) t.micro_batch = *micro_batch;
        if (distance) t.train_distance = *distance == "causal" ? DistanceMode::causal : DistanceMode::offline;
        t.seed = seed;
        t.validate();
        return t;
    }
};

/// Series plus burst labels: taken from the file's burst column when present,
/// computed otherwise.
std::pair<TimeSeries, BurstLabels> load_labeled(const std::string& path, const BurstConfig& bc) {
    auto file = load_series_file(path);
    BurstLabels labels;
    if (file.burst) {
        labels.flags = *file.burst;
        labels.k = bc.k;
        labels.h = bc.h;
    } else {
        labels = label_bursts(file.series, bc);
    }
    return {std::move(file.series), std::move(labels)};
}

void write_forecasts_csv(const ForecastSet& f, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "start,step,forecast,target,burst\n";
    char buf[128];
    for (std::size_t w = 0; w < f.size(); ++w)
        for (std::size_t i = 0; i < f.pred_len; ++i) {
            auto k = w * f.pred_len + i;
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%d\n", f.starts[w], i, f.forecast[k], f.target[k],
                          int(f.burst[k]));
            out << buf;
        }
    if (!out) throw DataError("write failed: " + path.string());
}

std::string rows_json(const std::vector<AblationRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) {
        json j;
        j["name"] = r.name;
        j["overall_mse"] = r.report.overall_mse;
        j["burst_mse"] = r.report.burst_mse ? json(*r.report.burst_mse) : json(nullptr);
        j["n_windows"] = r.report.n_windows;
        j["n_burst_windows"] = r.report.n_burst_windows;
        j["config_digest"] = hex64(r.config.digest());
        arr.push_back(j);
    }
    return arr.dump(2) + "\n";
}

std::vector<double> scaled_scores(const std::vector<double>& q, const std::vector<double>& k, std::size_t lq,
                                  std::size_t lk, std::size_t d) {
    std::vector<double> kt(d * lk);
    for (std::size_t a = 0; a < lk; ++a)
        for (std::size_t b = 0; b < d; ++b) kt[b * lk + a] = k[a * d + b];
    auto s = oracle::matmul(q, kt, lq, d, lk);
    for (auto& e : s) e /= std::sqrt(static_cast<double>(d));
    return s;
}

}  // namespace

// Selftest ---------------------------------------------------------------------

bool run_selftest(std::ostream& out) {
    bool all = true;
    auto report = [&](const char* name, bool ok, const std::string& detail) {
        out << (ok ? "PASS " : "FAIL ") << name << "  " << detail << "\n";
        all = all && ok;
    };

    {
        std::size_t mismatches = 0;
        for (std::uint64_t s = 0; s < 20; ++s) {
            Rng rng(stream_seed(91, s));
            std::vector<double> x(1500);
            for (auto& v : x) v = rng.normal(0.0, 1.0) + (rng.uniform() < 0.01 ? 6.0 : 0.0);
            for (std::size_t k : {4, 16, 128})
                if (label_bursts(x, {k, 2.5}).flags != oracle::burst_flags(x, k, 2.5)) ++mismatches;
        }
        report("burst_oracle", mismatches == 0, std::to_string(mismatches) + " mismatching series of 60");
    }

    {
        ModelConfig toy;
        toy.d_model = 8;
        toy.n_heads = 2;
        toy.d_ff = 16;
        toy.encoder_len = 12;
        toy.label_len = 6;
        toy.pred_len = 3;
        BurstInformer model(toy, 3);
        Rng rng(5);
        auto rand_t = [&](ad::Shape s) {
            std::vector<double> v(ad::numel(s));
            for (auto& e : v) e = rng.normal(0.0, 1.0);
            return ad::Tensor::from(s, v);
        };
        ModelInput in{rand_t({2, 12, 1}), rand_t({2, 12, 1}), rand_t({2, 9, 1}), rand_t({2, 9, 1})};
        std::vector<double> flags = {1, 0, 0, 0, 1, 1};
        BatchTargets tgt{rand_t({2, 3, 1}), ad::Tensor::from({2, 3, 1}, flags)};
        std::vector<ad::Tensor> params;
        for (auto& p : model.parameters()) params.push_back(p.tensor);
        auto rep = ad::grad_check(
            [&](const std::vector<ad::Tensor>&) { return composite_loss(model.forward(in), tgt, toy, 3.0).total; },
            params);
        char buf[64];
        std::snprintf(buf, sizeof buf, "max rel error %.3g", rep.worst);
        report("grad_check", rep.worst < 1e-3, buf);
    }

    {
        double worst = 0.0;
        std::size_t sel_mismatch = 0;
        Rng rng(17);
        for (int trial = 0; trial < 10; ++trial) {
            std::size_t lq = 8 + rng.below(12), d = 4 + rng.below(5), u = 1 + rng.below(lq);
            bool causal = trial % 2 == 1;
            std::size_t lk = causal ? lq : 6 + rng.below(14);
            std::vector<double> q(lq * d), k(lk * d), v(lk * d);
            for (auto* vec : {&q, &k, &v})
                for (auto& e : *vec) e = rng.normal(0.0, 1.0);
            auto got = probsparse_attention(ad::Tensor::from({1, lq, d}, q), ad::Tensor::from({1, lk, d}, k),
                                            ad::Tensor::from({1, lk, d}, v), u, causal);
            auto ref = oracle::probsparse(q, k, v, lq, lk, d, u, causal);
            auto sel = select_queries(sparsity_measure(scaled_scores(q, k, lq, lk, d), lq, lk, causal), u, causal);
            if (sel != ref.selected) ++sel_mismatch;
            for (std::size_t i = 0; i < ref.out.size(); ++i)
                worst = std::max(worst, std::abs(got.values()[i] - ref.out[i]));
        }
        char buf[96];
        std::snprintf(buf, sizeof buf, "max abs diff %.3g, %zu selection mismatches", worst, sel_mismatch);
        report("attention_oracle", worst < 1e-10 && sel_mismatch == 0, buf);
    }

    {
        std::vector<double> phi = {0.5, -0.3};
        auto x = oracle::simulate_ar(phi, 20000, 4);
        auto m = fit_ar_yule_walker(x, 2);
        auto tail = std::span(x).last(50);
        auto got = forecast_ar(m, tail, 48);
        auto ref = oracle::ar_recursion(m.phi, m.intercept_mean, tail, 48);
        double worst = 0.0;
        for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - ref[i]));
        char buf[64];
        std::snprintf(buf, sizeof buf, "max abs diff %.3g", worst);
        report("ar_recursion", worst < 1e-10, buf);
    }
    return all;
}

// Dispatch ---------------------------------------------------------------------

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string command_line;
    for (int i = 0; i < argc; ++i) command_line += (i ? " " : "") + std::string(argv[i]);

    CLI::App app{"Burst-aware traffic demand forecasting", "burstcast"};
    app.require_subcommand(1);
    // "--h" is the burst threshold, so help is long-form only.
    app.set_help_flag("--help", "print help");
    app.fallthrough();
    app.option_defaults()->always_capture_default();
    app.set_version_flag("--version", kToolVersion);
    std::optional<std::string> manifest_path;
    app.add_option("--manifest", manifest_path, "write the run manifest here instead of stdout");

    Manifest man;

    // generate
    auto* gen = app.add_subcommand("generate", "superpose ON/OFF Pareto sources");
    GenConfig gcfg;
    std::string gen_profile = "desk";
    std::optional<std::uint64_t> gen_ticks;
    std::string gen_out;
    gen->add_option("--sources", gcfg.num_sources);
    gen->add_option("--ticks", gen_ticks, "series length (desk 20000, paper 60000)");
    gen->add_option("--tick-ms", gcfg.tick_ms);
    gen->add_option("--shape", gcfg.source.shape_on, "Pareto shape for ON and OFF periods");
    gen->add_option("--rate-mean", gcfg.source.rate_mean_mbps);
    gen->add_option("--rate-sd", gcfg.source.rate_sd_mbps);
    gen->add_flag("--per-tick-rates", gcfg.source.per_tick_rates);
    gen->add_option("--seed", gcfg.seed);
    gen->add_option("--profile", gen_profile)->check(CLI::IsMember({"desk", "paper"}));
    gen->add_option("--out", gen_out)->required();

    // label
    auto* lab = app.add_subcommand("label", "flag bursts");
    std::string lab_in, lab_out;
    BurstConfig bcfg;
    bool emit_scores = false;
    lab->add_option("--input", lab_in)->required()->check(CLI::ExistingFile);
    lab->add_option("--k", bcfg.k);
    lab->add_option("--h", bcfg.h);
    lab->add_option("--out", lab_out)->required();
    lab->add_flag("--emit-scores", emit_scores);

    // stats
    auto* st = app.add_subcommand("stats", "variance-time Hurst estimate and autocorrelation");
    std::string st_in, st_out;
    std::vector<std::size_t> blocks;
    std::size_t max_lag = 100;
    st->add_option("--input", st_in)->required()->check(CLI::ExistingFile);
    st->add_option("--blocks", blocks)->delimiter(',');
    st->add_option("--max-lag", max_lag);
    st->add_option("--out", st_out)->required();

    // baseline
    auto* bl = app.add_subcommand("baseline", "AR / FARIMA rolling-origin forecasts");
    std::string bl_model = "ar", bl_d = "auto", bl_in, bl_out;
    std::optional<std::string> bl_metrics;
    BaselineConfig blc;
    std::size_t bl_pred = 1;
    BurstConfig bl_bc;
    bl->add_option("--model", bl_model)->check(CLI::IsMember({"ar", "farima"}));
    bl->add_option("--p", blc.p);
    bl->add_option("--d", bl_d, "fractional order or 'auto'");
    bl->add_option("--d-int", blc.d_int)->check(CLI::IsMember({0u, 1u}));
    bl->add_option("--trunc", blc.trunc);
    bl->add_option("--input", bl_in)->required()->check(CLI::ExistingFile);
    bl->add_option("--pred-len", bl_pred)->check(CLI::IsMember({1, 12, 24, 48}));
    bl->add_option("--k", bl_bc.k);
    bl->add_option("--h", bl_bc.h);
    bl->add_option("--out", bl_out)->required();
    bl->add_option("--metrics", bl_metrics);

    // train
    auto* tr = app.add_subcommand("train", "train the burst-aware forecaster");
    ModelOpts tr_opts;
    tr_opts.attach(tr);
    std::string tr_in, tr_out;
    std::optional<std::string> tr_trace;
    BurstConfig tr_bc;
    tr->add_option("--input", tr_in)->required()->check(CLI::ExistingFile);
    tr->add_option("--out", tr_out, "checkpoint path")->required();
    tr->add_option("--trace", tr_trace, "per-epoch loss csv");
    tr->add_option("--k", tr_bc.k);
    tr->add_option("--h", tr_bc.h);

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    std::string ev_ckpt, ev_in, ev_out;
    std::optional<std::string> ev_fc;
    BurstConfig ev_bc;
    ev->add_option("--checkpoint", ev_ckpt)->required()->check(CLI::ExistingFile);
    ev->add_option("--input", ev_in)->required()->check(CLI::ExistingFile);
    ev->add_option("--out", ev_out, "metrics json")->required();
    ev->add_option("--forecasts", ev_fc, "per-window forecasts csv");
    std::string ev_dist = "causal";
    ev->add_option("--distance", ev_dist, "burst-distance feature; offline sees labels not yet confirmable")
        ->check(CLI::IsMember({"offline", "causal"}))
        ->capture_default_str();
    ev->add_option("--k", ev_bc.k);
    ev->add_option("--h", ev_bc.h);

    // ablate
    auto* ab = app.add_subcommand("ablate", "four-row enhancement ablation at pred_len 1");
    ModelOpts ab_opts;
    ab_opts.attach(ab);
    std::string ab_in, ab_out;
    BurstConfig ab_bc;
    ab->add_option("--input", ab_in)->required()->check(CLI::ExistingFile);
    ab->add_option("--out", ab_out)->required();
    ab->add_option("--k", ab_bc.k);
    ab->add_option("--h", ab_bc.h);

    auto* selftest = app.add_subcommand("selftest", "run the oracle suites");

    try {
        auto expanded = expand_config(args);
        std::reverse(expanded.begin(), expanded.end());
        app.parse(expanded);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    man.command_line = command_line;
    man.path = manifest_path;
    try {
        if (*gen) {
            if (gen_ticks) gcfg.num_ticks = *gen_ticks;
            else gcfg.num_ticks = gen_profile == "paper" ? 60000 : 20000;
            gcfg.source.shape_off = gcfg.source.shape_on;
            auto s = generate_dataset(gcfg, gen_out);
            man.outputs = {gen_out};
            man.seeds["generate"] = gcfg.seed;
            man.effective_config = gen->config_to_str(true, false) + "ticks=" + std::to_string(gcfg.num_ticks) + "\n";
            err << "generated " << s.size() << " samples\n";
        } else if (*lab) {
            auto s = load_series(lab_in);
            auto labels = label_bursts(s, bcfg);
            save_series_csv(s, lab_out, labels.flags,
                            emit_scores ? std::span<const double>(labels.scores) : std::span<const double>());
            man.inputs = {lab_in};
            man.outputs = {lab_out};
            man.effective_config = lab->config_to_str(true, false);
            err << "flagged " << labels.count() << " of " << s.size() << " samples\n";
        } else if (*st) {
            auto s = load_series(st_in);
            if (blocks.empty()) blocks = default_block_sizes();
            auto h = variance_time_hurst(s, blocks);
            auto lag = std::min(max_lag, s.size() / 2 > 0 ? s.size() / 2 - 1 : 0);
            json j;
            j["hurst"] = h.hurst;
            j["beta"] = h.beta;
            j["stderr"] = h.slope_stderr;
            j["block_sizes"] = h.block_sizes;
            j["variances"] = h.variances;
            j["acf"] = autocorrelation(s.values, lag);
            write_text(st_out, j.dump(2) + "\n");
            man.inputs = {st_in};
            man.outputs = {st_out};
            man.effective_config = st->config_to_str(true, false);
        } else if (*bl) {
            auto [s, labels] = load_labeled(bl_in, bl_bc);
            auto data = prepare_series(s, labels);
            blc.kind = bl_model == "farima" ? BaselineKind::farima : BaselineKind::ar;
            if (bl_d != "auto") {
                try {
                    blc.d = std::stod(bl_d);
                } catch (const std::exception&) {
                    throw DataError("--d must be a number or 'auto', got " + bl_d);
                }
            }
            auto f = baseline_forecasts(data, blc, bl_pred);
            write_forecasts_csv(f, bl_out);
            man.inputs = {bl_in};
            man.outputs = {bl_out};
            if (bl_metrics) {
                write_metrics(evaluate_forecasts(f), *bl_metrics);
                man.outputs.push_back(*bl_metrics);
            }
            man.effective_config = bl->config_to_str(true, false);
        } else if (*tr) {
            auto mcfg = tr_opts.model();
            auto tcfg = tr_opts.train();
            auto [s, labels] = load_labeled(tr_in, tr_bc);
            auto res = train(s, labels, mcfg, tcfg, [&](const EpochLog& l) {
                err << "epoch " << l.epoch << " train " << l.train_loss << " val " << l.val_loss << " val_mse "
                    << l.val_mse << "\n";
            });
            save_checkpoint(res.best, tr_out);
            man.inputs = {tr_in};
            man.outputs = {tr_out};
            if (tr_trace) {
                std::ostringstream csv;
                csv << "epoch,train_loss,val_loss,val_mse\n";
                char buf[128];
                for (const auto& l : res.trace) {
                    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", l.epoch, l.train_loss, l.val_loss,
                                  l.val_mse);
                    csv << buf;
                }
                write_text(*tr_trace, csv.str());
                man.outputs.push_back(*tr_trace);
            }
            man.seeds["train"] = tcfg.seed;
            man.effective_config = mcfg.canonical() + tcfg.canonical();
        } else if (*ev) {
            auto ckpt = load_checkpoint(ev_ckpt);
            auto [s, labels] = load_labeled(ev_in, ev_bc);
            auto data = prepare_series(s, labels, ckpt.norm);
            auto model = restore_model(ckpt);
            auto mode = ev_dist == "offline" ? DistanceMode::offline : DistanceMode::causal;
            auto f = model_forecasts(model, data, window_starts(data.val_end, data.z.size(), ckpt.model), mode);
            write_metrics(evaluate_forecasts(f, ckpt.model.digest()), ev_out);
            man.inputs = {ev_ckpt, ev_in};
            man.outputs = {ev_out};
            if (ev_fc) {
                write_forecasts_csv(f, *ev_fc);
                man.outputs.push_back(*ev_fc);
            }
            man.effective_config =
                ckpt.model.canonical() + "train_digest=" + hex64(ckpt.train_digest) + "\neval_distance=" + ev_dist + "\n";
        } else if (*ab) {
            auto mcfg = ab_opts.model();
            auto tcfg = ab_opts.train();
            auto [s, labels] = load_labeled(ab_in, ab_bc);
            auto rows = run_ablation(s, labels, mcfg, tcfg, [&](const EpochLog& l) {
                err << "epoch " << l.epoch << " train " << l.train_loss << " val_mse " << l.val_mse << "\n";
            });
            write_text(ab_out, rows_json(rows));
            man.inputs = {ab_in};
            man.outputs = {ab_out};
            man.seeds["train"] = tcfg.seed;
            man.effective_config = mcfg.canonical() + tcfg.canonical();
        } else if (*selftest) {
            bool ok = run_selftest(out);
            return ok ? 0 : 2;
        }
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    emit_manifest(man, wall, out);
    return 0;
}

}  // namespace burstcast
