#pragma once

// JSON-lines dataset persistence: one scene per line, masks run-length
// encoded, float planes packed as base64 float32.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "annoconsist/codec.hpp"
#include "annoconsist/synthgen.hpp"

namespace annoconsist {

inline constexpr int kDatasetFormatVersion = 1;

namespace detail {

inline nlohmann::json mask_to_json(const PixelMask& m) { return rle_encode(m); }

inline PixelMask mask_from_json(const nlohmann::json& j, int width, int height) {
    const auto counts = j.get<std::vector<std::uint32_t>>();
    return rle_decode(counts, width, height);
}

inline nlohmann::json box_to_json(const Box& b) { return nlohmann::json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

inline Box box_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4) throw ParseError("box must be an array of 4 integers");
    return Box{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

}  // namespace detail

[[nodiscard]] inline nlohmann::json scene_to_json(const SceneRecord& r) {
    nlohmann::json j;
    j["version"] = kDatasetFormatVersion;
    j["id"] = r.id;
    j["width"] = r.width;
    j["height"] = r.height;
    j["num_classes"] = r.num_classes;
    j["image"] = pack_f32(r.image);
    j["edges"] = pack_f32(r.edges.values);
    auto& gt = j["gt"] = nlohmann::json::array();
    for (const auto& g : r.gt) gt.push_back({{"class_id", g.class_id}, {"rle", detail::mask_to_json(g.mask)}});
    nlohmann::json ann;
    ann["presence"] = r.annotation.presence;
    if (r.annotation.boxes) {
        auto& boxes = ann["boxes"] = nlohmann::json::array();
        for (const auto& b : *r.annotation.boxes) boxes.push_back({{"class_id", b.class_id}, {"box", detail::box_to_json(b.box)}});
    } else {
        ann["boxes"] = nullptr;
    }
    j["annotation"] = std::move(ann);
    auto& pool = j["pool"] = nlohmann::json::array();
    for (std::size_t u = 0; u < r.pool.masks.size(); ++u) {
        nlohmann::json p;
        p["rle"] = detail::mask_to_json(r.pool.masks[u]);
        p["neighbors"] = u < r.pool.adjacency.neighbors.size() ? r.pool.adjacency.neighbors[u] : std::vector<int>{};
        p["edge_weights"] = u < r.pool.adjacency.edge_weights.size() ? r.pool.adjacency.edge_weights[u] : std::vector<double>{};
        pool.push_back(std::move(p));
    }
    auto& seeds = j["seeds"] = nlohmann::json::array();
    for (const auto& s : r.seeds) seeds.push_back({{"class_id", s.class_id}, {"rle", detail::mask_to_json(s.mask)}});
    return j;
}

[[nodiscard]] inline SceneRecord scene_from_json(const nlohmann::json& j) {
    try {
        const int version = j.at("version").get<int>();
        if (version != kDatasetFormatVersion) {
            throw ParseError("dataset format version " + std::to_string(version) + " is not supported (expected " +
                             std::to_string(kDatasetFormatVersion) + ")");
        }
        SceneRecord r;
        r.id = j.at("id").get<std::uint64_t>();
        r.width = j.at("width").get<int>();
        r.height = j.at("height").get<int>();
        r.num_classes = j.at("num_classes").get<int>();
        if (r.width <= 0 || r.height <= 0 || r.num_classes <= 0) throw ParseError("non-positive scene dimensions");
        const auto plane = static_cast<std::size_t>(r.width) * static_cast<std::size_t>(r.height);
        r.image = unpack_f32(j.at("image").get<std::string>());
        if (r.image.size() != plane * 3) throw ParseError("image plane has the wrong size");
        r.edges.width = r.width;
        r.edges.height = r.height;
        r.edges.values = unpack_f32(j.at("edges").get<std::string>());
        if (r.edges.values.size() != plane) throw ParseError("edge plane has the wrong size");
        for (const auto& g : j.at("gt")) {
            r.gt.push_back({g.at("class_id").get<int>(), detail::mask_from_json(g.at("rle"), r.width, r.height)});
        }
        const auto& ann = j.at("annotation");
        r.annotation.presence = ann.at("presence").get<std::vector<int>>();
        if (ann.contains("boxes") && !ann.at("boxes").is_null()) {
            std::vector<ClassBox> boxes;
            for (const auto& b : ann.at("boxes")) boxes.push_back({b.at("class_id").get<int>(), detail::box_from_json(b.at("box"))});
            r.annotation.boxes = std::move(boxes);
        }
        for (const auto& p : j.at("pool")) {
            r.pool.masks.push_back(detail::mask_from_json(p.at("rle"), r.width, r.height));
            r.pool.adjacency.neighbors.push_back(p.at("neighbors").get<std::vector<int>>());
            r.pool.adjacency.edge_weights.push_back(p.at("edge_weights").get<std::vector<double>>());
            if (r.pool.adjacency.neighbors.back().size() != r.pool.adjacency.edge_weights.back().size()) {
                throw ParseError("neighbors and edge_weights lengths differ");
            }
        }
        for (const auto& s : j.at("seeds")) {
            r.seeds.push_back({s.at("class_id").get<int>(), detail::mask_from_json(s.at("rle"), r.width, r.height)});
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed scene record: ") + e.what());
    }
}

inline void write_dataset(std::ostream& out, const std::vector<SceneRecord>& records) {
    for (const auto& r : records) out << scene_to_json(r).dump() << '\n';
}

[[nodiscard]] inline std::vector<SceneRecord> read_dataset(std::istream& in) {
    std::vector<SceneRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            out.push_back(scene_from_json(j));
        } catch (const ParseError& e) {
            throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

inline void save_dataset(const std::vector<SceneRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_dataset(out, records);
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

[[nodiscard]] inline std::vector<SceneRecord> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_dataset(in);
}

}  // namespace annoconsist
