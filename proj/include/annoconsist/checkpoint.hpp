#pragma once

// Model checkpoints: JSON with shape headers and base64 float64 payloads.

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "annoconsist/codec.hpp"
#include "annoconsist/config.hpp"
#include "annoconsist/train.hpp"

namespace annoconsist {

inline constexpr int kCheckpointVersion = 1;

[[nodiscard]] inline nlohmann::json checkpoint_to_json(const Model& m, int iter) {
    nlohmann::json j;
    j["version"] = kCheckpointVersion;
    j["iter"] = iter;
    j["cond"] = {{"kind", detail::enum_name(m.cond.kind)},
                 {"num_classes", m.cond.num_classes},
                 {"feature_dim", m.cond.feature_dim},
                 {"noise_dim", m.cond.noise_dim},
                 {"hidden", m.cond.hidden},
                 {"count", m.cond.values.size()},
                 {"values", pack_f64(m.cond.values)}};
    j["pred"] = {{"num_classes", m.pred.num_classes},
                 {"feature_dim", m.pred.feature_dim},
                 {"count", m.pred.values.size()},
                 {"values", pack_f64(m.pred.values)}};
    return j;
}

[[nodiscard]] inline Model checkpoint_from_json(const nlohmann::json& j) {
    try {
        if (j.at("version").get<int>() != kCheckpointVersion) throw ParseError("checkpoint: unsupported version");
        Model m;
        const auto& c = j.at("cond");
        m.cond = make_cond_params(detail::enum_from<ScorerKind>(c.at("kind").get<std::string>(), "cond.kind"), c.at("num_classes").get<int>(),
                                  c.at("noise_dim").get<int>(), std::max(1, c.at("hidden").get<int>()));
        if (m.cond.feature_dim != c.at("feature_dim").get<int>()) throw ParseError("checkpoint: cond feature_dim mismatch");
        m.cond.values = unpack_f64(c.at("values").get<std::string>());
        if (m.cond.values.size() != m.cond.param_count() || m.cond.values.size() != c.at("count").get<std::size_t>()) {
            throw ParseError("checkpoint: cond parameter count mismatch");
        }
        const auto& p = j.at("pred");
        m.pred = make_pred_params(p.at("num_classes").get<int>());
        if (m.pred.feature_dim != p.at("feature_dim").get<int>()) throw ParseError("checkpoint: pred feature_dim mismatch");
        m.pred.values = unpack_f64(p.at("values").get<std::string>());
        if (m.pred.values.size() != m.pred.param_count() || m.pred.values.size() != p.at("count").get<std::size_t>()) {
            throw ParseError("checkpoint: pred parameter count mismatch");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const Model& m, int iter, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << checkpoint_to_json(m, iter).dump(1) << '\n';
}

[[nodiscard]] inline Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace annoconsist
