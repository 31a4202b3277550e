#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcdf/artifacts.hpp"
#include "pcdf/bench.hpp"
#include "pcdf/config.hpp"
#include "pcdf/errors.hpp"
#include "pcdf/pipeline.hpp"
#include "pcdf/spectral.hpp"

namespace pcdf {

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    // splitmix64 step keeps the derived streams decorrelated.
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::string output_dir(const PipelineConfig& config) {
    if (const char* env = std::getenv("PCDF_OUTPUT_DIR"); env != nullptr && *env != '\0')
        return env;
    return config.output_dir;
}

}  // namespace detail

struct TauResolution {
    std::size_t tau = 0;
    bool auto_detected = false;
    std::vector<std::size_t> per_channel;  // empty unless auto
    bool capped = false;
    std::vector<bool> defaulted;  // channels that showed no seasonality
};

/// Fixed tau is taken as-is. "auto" detects each channel's dominant period on
/// the given block (default period where a channel shows no seasonality),
/// combines them by lcm, and enforces the seasonal-coverage requirement that
/// the lookback window holds at least two shared periods.
inline TauResolution resolve_tau(const PipelineConfig& config, const MultichannelSeries& series) {
    TauResolution out;
    if (auto fixed = config.fixed_tau()) {
        out.tau = *fixed;
        return out;
    }
    out.auto_detected = true;
    const std::size_t channels = series.channels();
    out.defaulted.assign(channels, false);
    for (std::size_t c = 0; c < channels; ++c) {
        const auto column = series.values.col(c);
        const auto period = dominant_period(column);
        out.defaulted[c] = !period.has_value();
        out.per_channel.push_back(period.value_or(config.default_period));
    }
    const auto profile = shared_period(out.per_channel, series.length());
    out.tau = profile.shared_period;
    out.capped = profile.capped;
    if (config.lookback < 2 * out.tau)
        throw ConfigError(
            "auto tau: lookback window must cover at least two shared seasonal periods "
            "(lookback=" +
            std::to_string(config.lookback) + ", shared period=" + std::to_string(out.tau) + ")");
    return out;
}

inline json redundancy_to_json(const RedundancyReport& r) {
    return json{{"pcs_at_threshold", r.pcs_at_threshold},
                {"threshold", r.threshold},
                {"top_k_var", r.top_k_var},
                {"pc1_var", r.pc1_var},
                {"pc2_var", r.pc2_var},
                {"k", r.k},
                {"rank_deficient", r.rank_deficient}};
}

/// Data diagnostics: per-channel dominant periods, the shared period, the
/// PCA redundancy summary, and per-channel block-predictability scores.
inline json cmd_analyze(const PipelineConfig& config) {
    config.validate();
    const auto series = load_csv(config.data_path, config.ingestion);
    json report;
    report["source"] = series.source_id;
    report["channels"] = series.channels();
    report["length"] = series.length();
    report["fingerprint"] = config_fingerprint(config);

    json periods = json::array();
    std::vector<std::size_t> detected;
    std::size_t n_defaulted = 0;
    for (std::size_t c = 0; c < series.channels(); ++c) {
        const auto period = dominant_period(series.values.col(c));
        if (!period) ++n_defaulted;
        detected.push_back(period.value_or(config.default_period));
        periods.push_back(json{{"channel", series.channel_names[c]},
                               {"period", detected.back()},
                               {"defaulted", !period.has_value()}});
    }
    report["per_channel_periods"] = periods;
    report["defaulted_channels"] = n_defaulted;

    const auto profile = shared_period(detected, series.length());
    report["seasonal_profile"] = json{{"shared_period", profile.shared_period},
                                      {"capped", profile.capped}};

    report["redundancy"] =
        series.channels() >= 2 ? redundancy_to_json(pca_redundancy(series, 0.95, 50)) : json();

    json scores = json::array();
    const std::size_t tau = profile.shared_period;
    for (std::size_t c = 0; c < series.channels(); ++c) {
        json entry{{"channel", series.channel_names[c]}};
        if (series.length() >= 2 * tau) {
            const auto score = predictability_score(series.values.col(c), tau);
            entry["score"] = score ? json(*score) : json();
        } else {
            entry["score"] = json();
        }
        scores.push_back(entry);
    }
    report["predictability"] = scores;
    return report;
}

namespace detail {

struct PreparedData {
    MultichannelSeries series;
    SeriesSplit split;
    std::vector<WindowPair> train_windows;
    std::vector<WindowPair> val_windows;
    std::vector<WindowPair> test_windows;
    TauResolution tau;
};

inline PreparedData prepare_data(const PipelineConfig& config) {
    PreparedData d;
    d.series = load_csv(config.data_path, config.ingestion);
    d.split = split_series(d.series, config.train_ratio, config.val_ratio, config.test_ratio);
    d.tau = resolve_tau(config, d.split.train);
    d.train_windows = make_windows(d.split.train, config.lookback, config.horizon, config.stride);
    if (d.split.val.length() >= config.lookback + config.horizon)
        d.val_windows = make_windows(d.split.val, config.lookback, config.horizon, config.stride);
    d.test_windows = make_windows(d.split.test, config.lookback, config.horizon, config.stride);
    return d;
}

inline PipelineModel build_model(const PipelineConfig& config, std::size_t channels,
                                 std::size_t tau, Variant variant) {
    PipelineInit init;
    init.variant = variant;
    init.mode = config.mode;
    init.lookback = config.lookback;
    init.horizon = config.horizon;
    init.channels = channels;
    init.tau = tau;
    init.key_kind = config.key;
    init.key_seed = config.key_seed;
    init.per_channel_keys = config.per_channel_keys;
    init.predictor = config.predictor;
    init.hidden_width = config.hidden_width;
    init.init_seed = derive_seed(config.key_seed, 1);
    init.norm_source = config.norm_source;
    return make_pipeline(init);
}

inline json history_to_json(const std::vector<LossBreakdown>& history) {
    json arr = json::array();
    for (const auto& h : history)
        arr.push_back(json{{"prediction", h.prediction},
                           {"regulation", h.regulation},
                           {"latent", h.latent},
                           {"total", h.total}});
    return arr;
}

inline json run_report_to_json(const RunReport& r) {
    return json{{"mse", r.mse},
                {"runtime_s", r.runtime_s},
                {"runtime_min_s", r.runtime_min_s},
                {"runtime_max_s", r.runtime_max_s},
                {"cdpi", r.cdpi},
                {"fingerprint", r.config_fingerprint},
                {"payload_bytes", r.payload_bytes},
                {"mode", r.mode}};
}

inline void write_reports(const std::vector<RunReport>& reports, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream jsonl(dir + "/reports.jsonl");
    for (const auto& r : reports) jsonl << run_report_to_json(r).dump() << '\n';
    std::ofstream csv(dir + "/reports.csv");
    csv << "mode,mse,runtime_s,runtime_min_s,runtime_max_s,cdpi,payload_bytes,fingerprint\n";
    csv.precision(17);
    for (const auto& r : reports)
        csv << r.mode << ',' << r.mse << ',' << r.runtime_s << ',' << r.runtime_min_s << ','
            << r.runtime_max_s << ',' << r.cdpi << ',' << r.payload_bytes << ','
            << r.config_fingerprint << '\n';
}

/// Compressed payload of one window, normalized, as it would cross the wire.
inline std::vector<std::uint8_t> window_payload(const PipelineModel& model,
                                                const WindowPair& window) {
    CompressedSeries compressed;
    if (variant_uses_keys(model.variant)) {
        compressed = compress(window.history, model.keys, model.mode);
    } else {
        compressed.y = apply_linear_encoder(window.history, model.encoder);
        compressed.mode = model.mode;
        compressed.tau = model.tau;
    }
    NormStats stats;
    compressed.y = normalize(compressed.y, stats);
    compressed.norm = stats;
    return serialize_payload(compressed);
}

}  // namespace detail

/// Trains the configured pipeline and writes the artifact set: model.json,
/// keys.json, history.json, run_meta.json. Byte-stable for a fixed config.
inline json cmd_train(const PipelineConfig& config, Variant variant = Variant::comp_decomp) {
    config.validate();
    auto data = detail::prepare_data(config);
    const std::string dir = detail::output_dir(config);
    std::filesystem::create_directories(dir);

    auto model = detail::build_model(config, data.series.channels(), data.tau.tau, variant);

    TrainConfig tc;
    tc.epochs = config.epochs;
    tc.lr = config.lr;
    tc.alpha = config.alpha;
    tc.beta = config.beta;
    tc.clip_alpha = config.clip_alpha;
    tc.batch = config.batch;
    tc.seed = detail::derive_seed(config.key_seed, 2);

    std::vector<LossBreakdown> history;
    try {
        auto result = train(model, data.train_windows, tc);
        history = std::move(result.history);
    } catch (const TrainDivergence& e) {
        write_json_file(json{{"diverged_at_epoch", e.epoch()},
                             {"history", detail::history_to_json(e.history())}},
                        dir + "/history.json");
        throw;
    }

    const std::string fingerprint = config_fingerprint(config);
    json model_json{{"fingerprint", fingerprint}, {"model", model_to_json(model)}};
    write_json_file(model_json, dir + "/model.json");

    json keys = json::array();
    for (const auto& k : model.keys) keys.push_back(key_to_json(k));
    write_json_file(json{{"fingerprint", fingerprint}, {"keys", keys}}, dir + "/keys.json");

    write_json_file(detail::history_to_json(history), dir + "/history.json");

    json meta{{"fingerprint", fingerprint},
              {"config", canonical_config(config)},
              {"variant", to_string(variant)},
              {"tau", data.tau.tau},
              {"tau_auto", data.tau.auto_detected},
              {"tau_capped", data.tau.capped},
              {"channels", data.series.channels()},
              {"train_windows", data.train_windows.size()},
              {"val_windows", data.val_windows.size()},
              {"test_windows", data.test_windows.size()},
              {"norm_convention", "z-score of the compressed history window, inverted before "
                                  "decoding"}};
    write_json_file(meta, dir + "/run_meta.json");

    json out{{"fingerprint", fingerprint},
             {"tau", data.tau.tau},
             {"epochs_run", history.size()},
             {"artifacts", {dir + "/model.json", dir + "/keys.json", dir + "/history.json",
                            dir + "/run_meta.json"}}};
    if (!history.empty())
        out["final_loss"] = json{{"prediction", history.back().prediction},
                                 {"total", history.back().total}};
    return out;
}

namespace detail {

inline RunReport evaluate_model(const PipelineConfig& config, const PipelineModel& model,
                                std::span<const WindowPair> windows,
                                const std::string& fingerprint, const std::string& mode_label) {
    if (windows.empty()) throw DataError("eval: no evaluation windows for this split");

    double total_mse = 0.0;
    for (const auto& w : windows) total_mse += mse(pipeline_predict(model, w.history), w.future);
    total_mse /= static_cast<double>(windows.size());

    const auto timing = time_inference(
        [&] {
            for (const auto& w : windows) {
                volatile double sink = pipeline_predict(model, w.history)(0, 0);
                (void)sink;
            }
        },
        config.repetitions, config.warmup);

    const auto payload = window_payload(model, windows[0]);
    return RunReport::make(total_mse, timing, fingerprint, payload.size(), mode_label);
}

}  // namespace detail

/// Evaluates trained artifacts: MSE + runtime + CDPI on the configured split,
/// the single-channel payload check, and the C:1 compression ratio.
inline json cmd_eval(const PipelineConfig& config) {
    config.validate();
    const std::string dir = detail::output_dir(config);
    const auto model_json = read_json_file(dir + "/model.json");

    const std::string fingerprint = config_fingerprint(config);
    const auto stored = model_json.at("fingerprint").get<std::string>();
    if (stored != fingerprint)
        throw ConfigError("artifact fingerprint " + stored +
                          " does not match this config's fingerprint " + fingerprint +
                          "; re-train or fix the config");

    auto model = model_from_json(model_json.at("model"));
    auto data = detail::prepare_data(config);
    const auto& windows = config.eval_split == "train"
                              ? data.train_windows
                              : (config.eval_split == "val" ? data.val_windows
                                                            : data.test_windows);

    auto report = detail::evaluate_model(config, model, windows, fingerprint,
                                         to_string(model.variant));

    // The compressed representation must be a single channel: one flat vector
    // whose payload round-trips exactly.
    const auto payload = detail::window_payload(model, windows[0]);
    const auto round_trip = deserialize_payload(payload);
    const bool single_channel = round_trip.y.size() == model.compressed_len();

    detail::write_reports({report}, dir);

    json out = detail::run_report_to_json(report);
    out["eval_split"] = config.eval_split;
    out["windows"] = windows.size();
    out["single_channel"] = single_channel;
    out["compression_ratio"] = std::to_string(model.channels) + ":1";
    if (!single_channel) throw NumericError("eval: compressed payload is not single-channel");
    return out;
}

/// Trains and evaluates one framework variant under the shared config, data
/// split, seed, and predictor. The five variants of cmd_ablate all go
/// through here.
inline RunReport ablation_run(const PipelineConfig& config, Variant variant) {
    config.validate();
    auto data = detail::prepare_data(config);
    auto model = detail::build_model(config, data.series.channels(), data.tau.tau, variant);
    TrainConfig tc;
    tc.epochs = config.epochs;
    tc.lr = config.lr;
    tc.alpha = config.alpha;
    tc.beta = config.beta;
    tc.clip_alpha = config.clip_alpha;
    tc.batch = config.batch;
    tc.seed = detail::derive_seed(config.key_seed, 2);
    train(model, data.train_windows, tc);
    return detail::evaluate_model(config, model, data.test_windows, config_fingerprint(config),
                                  to_string(variant));
}

inline RunReport ablation_run(const PipelineConfig& config, const std::string& variant) {
    return ablation_run(config, variant_from_string(variant));
}

/// Runs all five framework variants under one config/seed/split and reports
/// each one's RunReport.
inline json cmd_ablate(const PipelineConfig& config) {
    config.validate();
    const std::string dir = detail::output_dir(config);
    const Variant variants[] = {Variant::comp_decomp, Variant::rand_decomp, Variant::comp_decode,
                                Variant::encode_decomp, Variant::encode_decode};
    std::vector<RunReport> reports;
    json out = json::array();
    for (Variant v : variants) {
        reports.push_back(ablation_run(config, v));
        out.push_back(detail::run_report_to_json(reports.back()));
    }
    detail::write_reports(reports, dir);
    return json{{"fingerprint", config_fingerprint(config)}, {"variants", out}};
}

/// Theory calculators: either (D, E, tau) for the superiority threshold or
/// (C, L, sigma^2) for the information bound, or both.
struct TheoryArgs {
    std::optional<std::size_t> depth;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> tau;
    std::optional<std::size_t> channels;
    std::optional<std::size_t> length;
    std::optional<double> sigma_sq;
};

inline json cmd_theory(const TheoryArgs& args) {
    json out;
    bool any = false;
    if (args.depth && args.epochs && args.tau) {
        const auto r = superiority_threshold(*args.depth, *args.epochs, *args.tau);
        out["superiority"] = json{{"D", r.depth},
                                  {"E", r.epochs},
                                  {"tau", r.tau},
                                  {"threshold", r.threshold},
                                  {"holds_for_C", r.holds_for_c}};
        any = true;
    }
    if (args.channels && args.length && args.sigma_sq) {
        out["ib_bound"] = json{{"C", *args.channels},
                               {"L", *args.length},
                               {"sigma_sq", *args.sigma_sq},
                               {"nats", ib_bound(*args.channels, *args.length, *args.sigma_sq)}};
        any = true;
    }
    if (!any)
        throw ConfigError("theory: supply D, E and tau, and/or C, L and sigma^2");
    return out;
}

/// Latency harness: the single-channel predictor of the configured
/// architecture against the same architecture applied to all channels
/// directly, timed on the test windows.
inline json cmd_bench(const PipelineConfig& config) {
    config.validate();
    auto data = detail::prepare_data(config);
    auto model = detail::build_model(config, data.series.channels(), data.tau.tau,
                                     Variant::comp_decomp);
    const auto& windows = data.test_windows;
    if (windows.empty()) throw DataError("bench: no test windows");

    const std::size_t channels = data.series.channels();
    auto multi = PredictorParams::make(
        config.predictor == PredictorKind::naive ? PredictorKind::linear : config.predictor,
        config.lookback * channels, config.horizon * channels, config.hidden_width, 1);
    Rng rng(detail::derive_seed(config.key_seed, 3));
    multi.init_random(rng);

    // Pre-compress the histories; the comparison times the predictors alone.
    std::vector<std::vector<double>> compressed;
    std::vector<std::vector<double>> flattened;
    for (const auto& w : windows) {
        NormStats stats;
        compressed.push_back(normalize(compress(w.history, model.keys, model.mode).y, stats));
        std::vector<double> flat;
        flat.reserve(config.lookback * channels);
        for (std::size_t t = 0; t < w.history.rows(); ++t)
            for (std::size_t c = 0; c < channels; ++c) flat.push_back(w.history(t, c));
        flattened.push_back(std::move(flat));
    }

    const auto single_time = time_inference(
        [&] {
            for (const auto& y : compressed) {
                volatile double sink = predict(model.predictor, y)[0];
                (void)sink;
            }
        },
        config.repetitions, config.warmup);
    const auto multi_time = time_inference(
        [&] {
            for (const auto& x : flattened) {
                volatile double sink = predict(multi, x)[0];
                (void)sink;
            }
        },
        config.repetitions, config.warmup);

    const std::size_t depth = config.predictor == PredictorKind::mlp ? 2 : 1;
    json out{{"fingerprint", config_fingerprint(config)},
             {"channels", channels},
             {"windows", windows.size()},
             {"predictor", to_string(config.predictor)},
             {"single_channel_runtime_s", single_time.median_s},
             {"multichannel_runtime_s", multi_time.median_s},
             {"single_faster", single_time.median_s < multi_time.median_s}};
    try {
        const auto sup = superiority_threshold(depth, std::max<std::size_t>(config.epochs, 1),
                                               data.tau.tau);
        out["superiority_threshold"] = sup.threshold;
        out["holds_for_C"] = sup.holds_for_c;
    } catch (const ArgumentError&) {
        out["superiority_threshold"] = nullptr;
    }
    return out;
}

}  // namespace pcdf
