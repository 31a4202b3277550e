#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcdf/codec.hpp"
#include "pcdf/errors.hpp"
#include "pcdf/keys.hpp"
#include "pcdf/pipeline.hpp"
#include "pcdf/predictors.hpp"

namespace pcdf {

using json = nlohmann::json;

// JSON forms of the serializable pieces: keys travel to both ends of the
// pipeline as a sidecar, trained parameters reload exactly from their shape
// manifest, and every artifact embeds the config fingerprint it was made
// under.

inline json key_to_json(const CircularKey& key) {
    return json{{"kind", to_string(key.kind)},
                {"tau", key.tau()},
                {"seed", key.seed},
                {"sum_sq", key.sum_sq},
                {"base", key.base}};
}

inline CircularKey key_from_json(const json& j) {
    CircularKey key;
    key.kind = key_kind_from_string(j.at("kind").get<std::string>());
    key.seed = j.at("seed").get<std::uint64_t>();
    key.sum_sq = j.at("sum_sq").get<double>();
    key.base = j.at("base").get<std::vector<double>>();
    if (key.base.size() != j.at("tau").get<std::size_t>())
        throw DataError("key artifact: tau does not match base length");
    return key;
}

inline json params_to_json(const ParamVec& params) {
    json groups = json::array();
    for (const auto& g : params.groups)
        groups.push_back(json{{"name", g.name}, {"rows", g.rows}, {"cols", g.cols}});
    return json{{"groups", groups}, {"values", params.values}};
}

inline ParamVec params_from_json(const json& j) {
    ParamVec p;
    for (const auto& g : j.at("groups"))
        p.add_group(g.at("name").get<std::string>(), g.at("rows").get<std::size_t>(),
                    g.at("cols").get<std::size_t>());
    const auto values = j.at("values").get<std::vector<double>>();
    if (values.size() != p.values.size())
        throw DataError("parameter artifact: value count does not match manifest");
    p.values = values;
    return p;
}

inline json predictor_to_json(const PredictorParams& p) {
    return json{{"kind", to_string(p.kind)},     {"input_len", p.input_len},
                {"output_len", p.output_len},    {"hidden", p.hidden},
                {"period", p.period},            {"params", params_to_json(p.params)}};
}

inline PredictorParams predictor_from_json(const json& j) {
    auto p = PredictorParams::make(predictor_kind_from_string(j.at("kind").get<std::string>()),
                                   j.at("input_len").get<std::size_t>(),
                                   j.at("output_len").get<std::size_t>(),
                                   j.at("hidden").get<std::size_t>(),
                                   j.at("period").get<std::size_t>());
    auto loaded = params_from_json(j.at("params"));
    if (!loaded.same_manifest(p.params))
        throw DataError("predictor artifact: shape manifest mismatch");
    p.params = std::move(loaded);
    return p;
}

inline json head_to_json(const ReconstructionHead& head) {
    return json{{"channels", head.channels},
                {"hidden", head.hidden},
                {"kernel", head.kernel},
                {"params", params_to_json(head.params)}};
}

inline ReconstructionHead head_from_json(const json& j) {
    auto head = ReconstructionHead::make(j.at("channels").get<std::size_t>(),
                                         j.at("hidden").get<std::size_t>(),
                                         j.at("kernel").get<std::size_t>());
    auto loaded = params_from_json(j.at("params"));
    if (!loaded.same_manifest(head.params)) throw DataError("head artifact: manifest mismatch");
    head.params = std::move(loaded);
    return head;
}

inline json norm_stats_to_json(const NormStats& s) {
    return json{{"mean", s.mean},
                {"std", s.std},
                {"flagged", s.flagged},
                {"applied_to", NormStats::k_applied_to}};
}

inline NormStats norm_stats_from_json(const json& j) {
    NormStats s;
    s.mean = j.at("mean").get<double>();
    s.std = j.at("std").get<double>();
    s.flagged = j.at("flagged").get<bool>();
    return s;
}

inline json model_to_json(const PipelineModel& m) {
    json keys = json::array();
    for (const auto& k : m.keys) keys.push_back(key_to_json(k));
    json j{{"variant", to_string(m.variant)},
           {"mode", to_string(m.mode)},
           {"lookback", m.lookback},
           {"horizon", m.horizon},
           {"channels", m.channels},
           {"tau", m.tau},
           {"keys", keys},
           {"predictor", predictor_to_json(m.predictor)},
           {"norm_source", m.norm_source == NormSource::window ? "window" : "train"}};
    if (variant_uses_head(m.variant)) j["head"] = head_to_json(m.head);
    if (!variant_uses_keys(m.variant)) j["encoder"] = params_to_json(m.encoder);
    if (m.variant == Variant::encode_decode) j["decoder"] = params_to_json(m.decoder);
    if (m.train_stats) j["train_stats"] = norm_stats_to_json(*m.train_stats);
    return j;
}

inline PipelineModel model_from_json(const json& j) {
    PipelineModel m;
    m.variant = variant_from_string(j.at("variant").get<std::string>());
    m.mode = compression_mode_from_string(j.at("mode").get<std::string>());
    m.lookback = j.at("lookback").get<std::size_t>();
    m.horizon = j.at("horizon").get<std::size_t>();
    m.channels = j.at("channels").get<std::size_t>();
    m.tau = j.at("tau").get<std::size_t>();
    for (const auto& k : j.at("keys")) m.keys.push_back(key_from_json(k));
    m.predictor = predictor_from_json(j.at("predictor"));
    m.norm_source = j.at("norm_source").get<std::string>() == "train" ? NormSource::train
                                                                      : NormSource::window;
    if (j.contains("head")) m.head = head_from_json(j.at("head"));
    if (j.contains("encoder")) m.encoder = params_from_json(j.at("encoder"));
    if (j.contains("decoder")) m.decoder = params_from_json(j.at("decoder"));
    if (j.contains("train_stats")) m.train_stats = norm_stats_from_json(j.at("train_stats"));
    return m;
}

inline void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << '\n';
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing artifact file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(path + ": invalid JSON: " + e.what());
    }
    return j;
}

}  // namespace pcdf
