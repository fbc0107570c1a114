#pragma once

// Inference dumps: decoded predictions and conditional samples per scene,
// one block per training-iteration checkpoint.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "annoconsist/dataset_io.hpp"
#include "annoconsist/eval.hpp"
#include "annoconsist/prepared.hpp"

namespace annoconsist {

inline constexpr int kPredictionFormatVersion = 1;

struct SceneDump {
    std::uint64_t id = 0;
    ScenePredictions predictions;
    std::vector<InstanceLabeling> samples;  // over the scene's prepared pool
};

struct IterationDump {
    int iter = 0;
    std::vector<SceneDump> scenes;
};

struct InferenceDump {
    PoolOptions pool;  // how the sample pools were prepared
    std::vector<IterationDump> iterations;

    /// Predictions of the last iteration, ordered like `records` by scene id.
    [[nodiscard]] std::vector<ScenePredictions> final_predictions(const std::vector<SceneRecord>& records) const {
        if (iterations.empty()) throw std::invalid_argument("InferenceDump: no iterations");
        const auto& last = iterations.back().scenes;
        std::vector<ScenePredictions> out;
        for (const auto& r : records) {
            const auto it = std::find_if(last.begin(), last.end(), [&](const SceneDump& s) { return s.id == r.id; });
            if (it == last.end()) throw std::invalid_argument("InferenceDump: no predictions for scene " + std::to_string(r.id));
            out.push_back(it->predictions);
        }
        return out;
    }
};

[[nodiscard]] inline nlohmann::json predictions_to_json(const ScenePredictions& preds) {
    auto arr = nlohmann::json::array();
    for (const auto& p : preds) {
        arr.push_back({{"class", p.class_id},
                       {"confidence", p.confidence},
                       {"rle_mask", detail::mask_to_json(p.mask)},
                       {"box", detail::box_to_json(p.box)},
                       {"proposal", p.proposal}});
    }
    return arr;
}

[[nodiscard]] inline ScenePredictions predictions_from_json(const nlohmann::json& arr, int width, int height) {
    ScenePredictions out;
    for (const auto& j : arr) {
        InstancePrediction p;
        p.class_id = j.at("class").get<int>();
        p.confidence = j.at("confidence").get<double>();
        p.mask = detail::mask_from_json(j.at("rle_mask"), width, height);
        p.box = detail::box_from_json(j.at("box"));
        p.proposal = j.value("proposal", -1);
        if (p.class_id < 1) throw ParseError("prediction class must be >= 1");
        out.push_back(std::move(p));
    }
    return out;
}

[[nodiscard]] inline nlohmann::json dump_to_json(const InferenceDump& d) {
    nlohmann::json j;
    j["version"] = kPredictionFormatVersion;
    j["pool"] = {{"use_boxes", d.pool.use_boxes},
                 {"box_min_iou", d.pool.box_min_iou},
                 {"adjacency_dilation", d.pool.adjacency_dilation},
                 {"normalize_edge_weights", d.pool.normalize_edge_weights}};
    auto& its = j["iterations"] = nlohmann::json::array();
    for (const auto& it : d.iterations) {
        nlohmann::json ji;
        ji["iter"] = it.iter;
        auto& sc = ji["scenes"] = nlohmann::json::array();
        for (const auto& s : it.scenes) {
            auto samples = nlohmann::json::array();
            for (const auto& y : s.samples) samples.push_back(y.labels);
            sc.push_back({{"id", s.id}, {"predictions", predictions_to_json(s.predictions)}, {"samples", std::move(samples)}});
        }
        its.push_back(std::move(ji));
    }
    return j;
}

/// Needs the dataset for mask dimensions.
[[nodiscard]] inline InferenceDump dump_from_json(const nlohmann::json& j, const std::vector<SceneRecord>& records) {
    try {
        if (j.at("version").get<int>() != kPredictionFormatVersion) throw ParseError("predictions: unsupported version");
        InferenceDump d;
        const auto& p = j.at("pool");
        d.pool.use_boxes = p.at("use_boxes").get<bool>();
        d.pool.box_min_iou = p.at("box_min_iou").get<double>();
        d.pool.adjacency_dilation = p.at("adjacency_dilation").get<int>();
        d.pool.normalize_edge_weights = p.at("normalize_edge_weights").get<bool>();
        for (const auto& ji : j.at("iterations")) {
            IterationDump it;
            it.iter = ji.at("iter").get<int>();
            for (const auto& js : ji.at("scenes")) {
                SceneDump s;
                s.id = js.at("id").get<std::uint64_t>();
                const auto rec = std::find_if(records.begin(), records.end(), [&](const SceneRecord& r) { return r.id == s.id; });
                if (rec == records.end()) throw ParseError("predictions: scene " + std::to_string(s.id) + " is not in the dataset");
                s.predictions = predictions_from_json(js.at("predictions"), rec->width, rec->height);
                for (const auto& y : js.at("samples")) s.samples.push_back(InstanceLabeling{y.get<std::vector<int>>()});
                it.scenes.push_back(std::move(s));
            }
            d.iterations.push_back(std::move(it));
        }
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("predictions: ") + e.what());
    }
}

inline void save_dump(const InferenceDump& d, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << dump_to_json(d).dump() << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

[[nodiscard]] inline InferenceDump load_dump(const std::filesystem::path& path, const std::vector<SceneRecord>& records) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return dump_from_json(j, records);
}

}  // namespace annoconsist
