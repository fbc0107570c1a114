#pragma once

// Per-scene precomputation shared by inference, training and evaluation:
// the working proposal pool (optionally box filtered), its features,
// pairwise intersections and tight boxes.

#include <cstddef>
#include <vector>

#include "annoconsist/core.hpp"
#include "annoconsist/scorer.hpp"
#include "annoconsist/synthgen.hpp"

namespace annoconsist {

/// Pairwise intersection counts and tight boxes of a proposal pool.
struct PoolGeometry {
    int size = 0;
    std::vector<std::size_t> area;
    std::vector<std::size_t> inter;  // size × size
    std::vector<Box> boxes;

    [[nodiscard]] std::size_t intersection(int i, int l) const noexcept {
        return inter[static_cast<std::size_t>(i) * static_cast<std::size_t>(size) + static_cast<std::size_t>(l)];
    }
    /// overlap_fraction(r_i, r_l) = |r_i ∩ r_l| / |r_l|.
    [[nodiscard]] double fraction(int i, int l) const noexcept {
        return static_cast<double>(intersection(i, l)) / static_cast<double>(area[static_cast<std::size_t>(l)]);
    }
};

[[nodiscard]] inline PoolGeometry pool_geometry(const std::vector<PixelMask>& masks) {
    PoolGeometry g;
    g.size = static_cast<int>(masks.size());
    g.area.resize(masks.size());
    g.boxes.resize(masks.size());
    g.inter.assign(masks.size() * masks.size(), 0);
    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (masks[i].empty()) throw std::invalid_argument("pool_geometry: empty proposal mask");
        g.area[i] = masks[i].area();
        g.boxes[i] = tight_box(masks[i]);
    }
    for (std::size_t i = 0; i < masks.size(); ++i) {
        g.inter[i * masks.size() + i] = g.area[i];
        for (std::size_t l = i + 1; l < masks.size(); ++l) {
            const Box& a = g.boxes[i];
            const Box& b = g.boxes[l];
            if (a.x_max < b.x_min || b.x_max < a.x_min || a.y_max < b.y_min || b.y_max < a.y_min) continue;
            const std::size_t n = intersection_area(masks[i], masks[l]);
            g.inter[i * masks.size() + l] = n;
            g.inter[l * masks.size() + i] = n;
        }
    }
    return g;
}

struct PreparedScene {
    const SceneRecord* record = nullptr;
    std::vector<PixelMask> masks;
    Adjacency adjacency;
    FeatureTable features;
    PoolGeometry geometry;
    Annotation annotation;

    [[nodiscard]] int size() const noexcept { return geometry.size; }
    [[nodiscard]] int num_classes() const noexcept { return record->num_classes; }
};

struct PoolOptions {
    bool use_boxes = false;
    double box_min_iou = 0.5;
    int adjacency_dilation = 1;
    bool normalize_edge_weights = false;
};

/// Throws EmptyPoolError when box filtering leaves nothing.
[[nodiscard]] inline PreparedScene prepare_scene(const SceneRecord& rec, const PoolOptions& opt = {}) {
    PreparedScene ps;
    ps.record = &rec;
    ps.annotation = rec.annotation;
    if (opt.use_boxes && rec.annotation.boxes) {
        ProposalPool filtered = filter_by_boxes(rec.pool, *rec.annotation.boxes, opt.box_min_iou, rec.edges,
                                                opt.adjacency_dilation, opt.normalize_edge_weights);
        ps.masks = std::move(filtered.masks);
        ps.adjacency = std::move(filtered.adjacency);
    } else {
        ps.masks = rec.pool.masks;
        ps.adjacency = rec.pool.adjacency;
        if (ps.adjacency.size() != ps.masks.size()) {
            ps.adjacency = build_adjacency(ps.masks, rec.edges, opt.adjacency_dilation, opt.normalize_edge_weights);
        }
    }
    if (!opt.use_boxes) ps.annotation.boxes.reset();
    ps.features = feature_table(rec, ps.masks);
    ps.geometry = pool_geometry(ps.masks);
    return ps;
}

}  // namespace annoconsist
