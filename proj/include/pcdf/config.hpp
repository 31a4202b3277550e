#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pcdf/codec.hpp"
#include "pcdf/errors.hpp"
#include "pcdf/keys.hpp"
#include "pcdf/pipeline.hpp"
#include "pcdf/predictors.hpp"
#include "pcdf/series.hpp"

namespace pcdf {

/// Run configuration: everything a command needs, one flat key set.
/// File values come from `key = value` lines; CLI flags override them.
struct PipelineConfig {
    std::string data_path;
    std::size_t lookback = 96;
    std::size_t horizon = 24;
    std::size_t stride = 1;
    std::string tau = "auto";  // "auto" or a positive integer
    CompressionMode mode = CompressionMode::sparse;
    KeyKind key = KeyKind::seasonal_orthogonal;
    std::uint64_t key_seed = 1;
    bool per_channel_keys = false;
    PredictorKind predictor = PredictorKind::linear;
    std::size_t hidden_width = 64;
    std::size_t epochs = 100;
    double lr = 1e-3;
    double alpha = 0.1;
    double beta = 0.1;
    double clip_alpha = 1.0;
    std::size_t batch = 32;
    double train_ratio = 0.7;
    double val_ratio = 0.1;
    double test_ratio = 0.2;
    std::size_t repetitions = 20;
    std::size_t warmup = 3;
    std::string output_dir = "out";
    IngestionPolicy ingestion = IngestionPolicy::reject;
    std::size_t default_period = 24;  // fallback when no channel shows seasonality
    NormSource norm_source = NormSource::window;
    std::string eval_split = "test";  // test | train | val

    std::optional<std::size_t> fixed_tau() const {
        if (tau == "auto") return std::nullopt;
        char* end = nullptr;
        const long v = std::strtol(tau.c_str(), &end, 10);
        if (end == nullptr || *end != '\0' || v < 1)
            throw ConfigError("tau must be 'auto' or a positive integer, got '" + tau + "'");
        return static_cast<std::size_t>(v);
    }

    void validate() const {
        if (lookback < 2) throw ConfigError("lookback must be >= 2");
        if (horizon < 1) throw ConfigError("horizon must be >= 1");
        if (stride < 1) throw ConfigError("stride must be >= 1");
        if (lr <= 0.0) throw ConfigError("lr must be positive");
        if (alpha < 0.0 || beta < 0.0) throw ConfigError("alpha and beta must be >= 0");
        if (clip_alpha <= 0.0) throw ConfigError("clip_alpha must be positive");
        if (batch < 1) throw ConfigError("batch must be >= 1");
        if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
        if (eval_split != "test" && eval_split != "train" && eval_split != "val")
            throw ConfigError("eval_split must be one of test/train/val");
        fixed_tau();  // validates the string form
        const double sum = train_ratio + val_ratio + test_ratio;
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    }
};

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Canonical key=value listing of the run-defining fields. Output location,
/// timing repetitions, and eval split selection are excluded on purpose: they
/// do not change what was trained, so reports stay comparable across them.
inline std::map<std::string, std::string> canonical_config(const PipelineConfig& c) {
    std::map<std::string, std::string> kv;
    kv["data_path"] = c.data_path;
    kv["lookback"] = std::to_string(c.lookback);
    kv["horizon"] = std::to_string(c.horizon);
    kv["stride"] = std::to_string(c.stride);
    kv["tau"] = c.tau;
    kv["mode"] = to_string(c.mode);
    kv["key"] = to_string(c.key);
    kv["key_seed"] = std::to_string(c.key_seed);
    kv["per_channel_keys"] = c.per_channel_keys ? "true" : "false";
    kv["predictor"] = to_string(c.predictor);
    kv["hidden_width"] = std::to_string(c.hidden_width);
    kv["epochs"] = std::to_string(c.epochs);
    kv["lr"] = detail::format_double(c.lr);
    kv["alpha"] = detail::format_double(c.alpha);
    kv["beta"] = detail::format_double(c.beta);
    kv["clip_alpha"] = detail::format_double(c.clip_alpha);
    kv["batch"] = std::to_string(c.batch);
    kv["train_ratio"] = detail::format_double(c.train_ratio);
    kv["val_ratio"] = detail::format_double(c.val_ratio);
    kv["test_ratio"] = detail::format_double(c.test_ratio);
    kv["ingestion"] = c.ingestion == IngestionPolicy::reject ? "reject" : "forward_fill";
    kv["default_period"] = std::to_string(c.default_period);
    kv["norm_source"] = c.norm_source == NormSource::window ? "window" : "train";
    return kv;
}

/// FNV-1a 64-bit over the canonical listing; hex string.
inline std::string config_fingerprint(const PipelineConfig& c) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    auto mix = [&](const std::string& s) {
        for (unsigned char ch : s) {
            hash ^= ch;
            hash *= 0x100000001b3ull;
        }
    };
    for (const auto& [key, value] : canonical_config(c)) {
        mix(key);
        mix("=");
        mix(value);
        mix("\n");
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

namespace detail {

inline std::size_t parse_size(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const long long v = std::strtoll(value.c_str(), &end, 10);
    if (end == nullptr || *end != '\0' || v < 0)
        throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" +
                          value + "'");
    return static_cast<std::size_t>(v);
}

inline double parse_real(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == nullptr || *end != '\0')
        throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + value + "'");
}

}  // namespace detail

/// Applies one key=value assignment (from a file line or a CLI flag).
inline void apply_config_entry(PipelineConfig& c, const std::string& key,
                               const std::string& value) {
    try {
        if (key == "data_path") c.data_path = value;
        else if (key == "lookback") c.lookback = detail::parse_size(key, value);
        else if (key == "horizon") c.horizon = detail::parse_size(key, value);
        else if (key == "stride") c.stride = detail::parse_size(key, value);
        else if (key == "tau") c.tau = value;
        else if (key == "mode") c.mode = compression_mode_from_string(value);
        else if (key == "key") c.key = key_kind_from_string(value);
        else if (key == "key_seed") c.key_seed = detail::parse_size(key, value);
        else if (key == "per_channel_keys") c.per_channel_keys = detail::parse_bool(key, value);
        else if (key == "predictor") c.predictor = predictor_kind_from_string(value);
        else if (key == "hidden_width") c.hidden_width = detail::parse_size(key, value);
        else if (key == "epochs") c.epochs = detail::parse_size(key, value);
        else if (key == "lr") c.lr = detail::parse_real(key, value);
        else if (key == "alpha") c.alpha = detail::parse_real(key, value);
        else if (key == "beta") c.beta = detail::parse_real(key, value);
        else if (key == "clip_alpha") c.clip_alpha = detail::parse_real(key, value);
        else if (key == "batch") c.batch = detail::parse_size(key, value);
        else if (key == "train_ratio") c.train_ratio = detail::parse_real(key, value);
        else if (key == "val_ratio") c.val_ratio = detail::parse_real(key, value);
        else if (key == "test_ratio") c.test_ratio = detail::parse_real(key, value);
        else if (key == "repetitions") c.repetitions = detail::parse_size(key, value);
        else if (key == "warmup") c.warmup = detail::parse_size(key, value);
        else if (key == "output_dir") c.output_dir = value;
        else if (key == "ingestion") {
            if (value == "reject") c.ingestion = IngestionPolicy::reject;
            else if (value == "forward_fill") c.ingestion = IngestionPolicy::forward_fill;
            else throw ConfigError("ingestion must be reject or forward_fill, got '" + value + "'");
        } else if (key == "default_period") c.default_period = detail::parse_size(key, value);
        else if (key == "norm_source") {
            if (value == "window") c.norm_source = NormSource::window;
            else if (value == "train") c.norm_source = NormSource::train;
            else throw ConfigError("norm_source must be window or train, got '" + value + "'");
        } else if (key == "eval_split") c.eval_split = value;
        else throw ConfigError("unknown config key '" + key + "'");
    } catch (const ArgumentError& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

/// Parses a flat `key = value` config file. '#' starts a comment.
inline PipelineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    PipelineConfig c;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + trimmed + "'");
        const std::string key = detail::trim(trimmed.substr(0, eq));
        const std::string value = detail::trim(trimmed.substr(eq + 1));
        apply_config_entry(c, key, value);
    }
    return c;
}

}  // namespace pcdf
