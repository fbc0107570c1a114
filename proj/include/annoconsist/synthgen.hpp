#pragma once

// Seeded synthetic scenes: shapes on a textured background, an edge map,
// weak annotations, partial "discriminative region" seeds and a proposal
// pool with perturbed variants and distractors.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "annoconsist/core.hpp"
#include "annoconsist/rng.hpp"

namespace annoconsist {

class InfeasibleSceneError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyPoolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GroundTruthInstance {
    int class_id = 1;
    PixelMask mask;
    friend bool operator==(const GroundTruthInstance&, const GroundTruthInstance&) = default;
};

struct ClassBox {
    int class_id = 1;
    Box box;
    friend bool operator==(const ClassBox&, const ClassBox&) = default;
};

/// Image-level presence vector (index j-1 holds class j) plus optional boxes.
struct Annotation {
    std::vector<int> presence;
    std::optional<std::vector<ClassBox>> boxes;

    [[nodiscard]] bool has(int class_id) const {
        return class_id >= 1 && class_id <= static_cast<int>(presence.size()) && presence[class_id - 1] != 0;
    }
    [[nodiscard]] std::vector<int> annotated_classes() const {
        std::vector<int> out;
        for (std::size_t j = 0; j < presence.size(); ++j) {
            if (presence[j] != 0) out.push_back(static_cast<int>(j) + 1);
        }
        return out;
    }
    friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct SeedMask {
    int class_id = 1;
    PixelMask mask;
    friend bool operator==(const SeedMask&, const SeedMask&) = default;
};

struct ProposalPool {
    std::vector<PixelMask> masks;
    Adjacency adjacency;

    [[nodiscard]] std::size_t size() const noexcept { return masks.size(); }
    friend bool operator==(const ProposalPool&, const ProposalPool&) = default;
};

struct SceneRecord {
    std::uint64_t id = 0;
    int width = 0;
    int height = 0;
    int num_classes = 0;
    std::vector<float> image;  // H*W*3 interleaved RGB in [0,1]
    EdgeMap edges;
    std::vector<GroundTruthInstance> gt;
    Annotation annotation;
    ProposalPool pool;
    std::vector<SeedMask> seeds;

    [[nodiscard]] float pixel(int x, int y, int channel) const {
        return image[(static_cast<std::size_t>(y) * width + x) * 3 + channel];
    }
    friend bool operator==(const SceneRecord&, const SceneRecord&) = default;
};

enum class ShapeKind { rect, ellipse, ell };

struct SceneConfig {
    int width = 48;
    int height = 48;
    int num_classes = 3;
    int min_objects = 1;
    int max_objects = 3;
    std::vector<ShapeKind> shapes{ShapeKind::rect, ShapeKind::ellipse, ShapeKind::ell};
    int min_size = 10;
    int max_size = 20;
    double max_overlap = 0.0;  // fraction of a new object's area allowed under earlier objects
    double edge_noise_density = 0.05;
    double edge_noise_amplitude = 0.5;
    double color_noise = 0.08;
    double seed_fraction_min = 0.2;
    double seed_fraction_max = 0.5;
    bool emit_boxes = true;
    int max_retries = 200;
};

struct ProposalConfig {
    int p_target = 32;
    bool include_exact = true;
    bool perturb = true;
    int variants_per_object = 8;
    int distractors = 6;
    bool seed_filter = true;
    int min_area = 4;
    int adjacency_dilation = 1;
    bool normalize_edge_weights = false;
};

namespace detail {

inline constexpr std::array<std::array<float, 3>, 5> kClassColors{{
    {0.85f, 0.25f, 0.20f},
    {0.20f, 0.70f, 0.30f},
    {0.25f, 0.35f, 0.85f},
    {0.90f, 0.80f, 0.20f},
    {0.70f, 0.30f, 0.80f},
}};

inline PixelMask draw_shape(int width, int height, ShapeKind kind, int x0, int y0, int w, int h, Rng& rng) {
    PixelMask m(width, height);
    switch (kind) {
        case ShapeKind::rect:
            for (int y = y0; y < y0 + h; ++y)
                for (int x = x0; x < x0 + w; ++x)
                    if (m.contains(x, y)) m.set(x, y);
            break;
        case ShapeKind::ellipse: {
            const double cx = x0 + (w - 1) / 2.0;
            const double cy = y0 + (h - 1) / 2.0;
            const double rx = w / 2.0;
            const double ry = h / 2.0;
            for (int y = y0; y < y0 + h; ++y)
                for (int x = x0; x < x0 + w; ++x) {
                    const double nx = (x - cx) / rx;
                    const double ny = (y - cy) / ry;
                    if (nx * nx + ny * ny <= 1.0 && m.contains(x, y)) m.set(x, y);
                }
            break;
        }
        case ShapeKind::ell: {
            // Full box minus one randomly chosen quadrant-sized corner.
            const int cut_w = std::max(1, w / 2);
            const int cut_h = std::max(1, h / 2);
            const int corner = rng.uniform_int(0, 3);
            const int cx0 = (corner & 1) ? x0 + w - cut_w : x0;
            const int cy0 = (corner & 2) ? y0 + h - cut_h : y0;
            for (int y = y0; y < y0 + h; ++y)
                for (int x = x0; x < x0 + w; ++x) {
                    const bool in_cut = x >= cx0 && x < cx0 + cut_w && y >= cy0 && y < cy0 + cut_h;
                    if (!in_cut && m.contains(x, y)) m.set(x, y);
                }
            break;
        }
    }
    return m;
}

/// Breadth-first region grown inside `within` from a random start until
/// `target` pixels are collected. The result is 4-connected.
inline PixelMask grow_region(const PixelMask& within, std::size_t target, Rng& rng) {
    std::vector<int> members;
    const int w = within.width();
    for (std::size_t i = 0; i < within.size(); ++i)
        if (within.bits()[i]) members.push_back(static_cast<int>(i));
    PixelMask out(within.width(), within.height());
    if (members.empty()) return out;
    const int start = members[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(members.size()) - 1))];
    std::deque<int> frontier{start};
    out.bits()[static_cast<std::size_t>(start)] = 1;
    std::size_t count = 1;
    constexpr int dx[4] = {1, -1, 0, 0};
    constexpr int dy[4] = {0, 0, 1, -1};
    while (!frontier.empty() && count < target) {
        const int cur = frontier.front();
        frontier.pop_front();
        const int x = cur % w;
        const int y = cur / w;
        for (int k = 0; k < 4 && count < target; ++k) {
            const int nx = x + dx[k];
            const int ny = y + dy[k];
            if (!within.contains(nx, ny) || !within.at(nx, ny) || out.at(nx, ny)) continue;
            out.set(nx, ny);
            ++count;
            frontier.push_back(ny * w + nx);
        }
    }
    return out;
}

inline PixelMask shift_mask(const PixelMask& m, int sx, int sy) {
    PixelMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (m.at(x, y) && out.contains(x + sx, y + sy)) out.set(x + sx, y + sy);
    return out;
}

inline PixelMask crop_mask(const PixelMask& m, Rng& rng) {
    const Box b = tight_box(m);
    const bool vertical_cut = rng.bernoulli(0.5);
    const bool keep_low = rng.bernoulli(0.5);
    const double keep = rng.uniform(0.5, 0.85);
    PixelMask out(m.width(), m.height());
    if (vertical_cut) {
        const int span = b.x_max - b.x_min + 1;
        const int cut = b.x_min + static_cast<int>(std::round(keep * span));
        for (int y = b.y_min; y <= b.y_max; ++y)
            for (int x = b.x_min; x <= b.x_max; ++x)
                if (m.at(x, y) && (keep_low ? x < cut : x >= b.x_max + 1 - (cut - b.x_min))) out.set(x, y);
    } else {
        const int span = b.y_max - b.y_min + 1;
        const int cut = b.y_min + static_cast<int>(std::round(keep * span));
        for (int y = b.y_min; y <= b.y_max; ++y)
            for (int x = b.x_min; x <= b.x_max; ++x)
                if (m.at(x, y) && (keep_low ? y < cut : y >= b.y_max + 1 - (cut - b.y_min))) out.set(x, y);
    }
    return out;
}

inline PixelMask random_blob(int width, int height, Rng& rng) {
    const int w = rng.uniform_int(4, 14);
    const int h = rng.uniform_int(4, 14);
    const int x0 = rng.uniform_int(0, std::max(0, width - w));
    const int y0 = rng.uniform_int(0, std::max(0, height - h));
    const ShapeKind kind = rng.bernoulli(0.5) ? ShapeKind::rect : ShapeKind::ellipse;
    return draw_shape(width, height, kind, x0, y0, w, h, rng);
}

/// A blob touching the boundary of `m`, unioned with it.
inline PixelMask leak_mask(const PixelMask& m, Rng& rng) {
    const PixelMask ring = inner_boundary(m);
    std::vector<std::pair<int, int>> pts;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (ring.at(x, y)) pts.emplace_back(x, y);
    if (pts.empty()) return m;
    const auto [px, py] = pts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pts.size()) - 1))];
    const int w = rng.uniform_int(4, 9);
    const int h = rng.uniform_int(4, 9);
    const PixelMask blob = draw_shape(m.width(), m.height(), ShapeKind::ellipse, px - w / 2, py - h / 2, w, h, rng);
    return mask_union(m, blob);
}

}  // namespace detail

/// Deterministic scene for (config, seed); the proposal pool is left empty.
[[nodiscard]] inline SceneRecord gen_scene(const SceneConfig& cfg, std::uint64_t seed) {
    if (cfg.width <= 0 || cfg.height <= 0 || cfg.width > 128 || cfg.height > 128) {
        throw std::invalid_argument("gen_scene: width/height must be in 1..128");
    }
    if (cfg.num_classes < 1 || cfg.num_classes > static_cast<int>(detail::kClassColors.size())) {
        throw std::invalid_argument("gen_scene: num_classes must be in 1..5");
    }
    if (cfg.min_objects < 1 || cfg.max_objects > 6 || cfg.min_objects > cfg.max_objects) {
        throw std::invalid_argument("gen_scene: object count must satisfy 1 <= min <= max <= 6");
    }
    if (cfg.shapes.empty()) throw std::invalid_argument("gen_scene: no shape kinds configured");
    if (cfg.min_size < 3 || cfg.min_size > cfg.max_size) throw std::invalid_argument("gen_scene: bad size range");
    if (!(cfg.seed_fraction_min > 0.0 && cfg.seed_fraction_min <= cfg.seed_fraction_max && cfg.seed_fraction_max <= 1.0)) {
        throw std::invalid_argument("gen_scene: bad seed fraction range");
    }

    Rng rng(derive_seed(seed, {0x5CE4E}));
    SceneRecord rec;
    rec.id = seed;
    rec.width = cfg.width;
    rec.height = cfg.height;
    rec.num_classes = cfg.num_classes;

    const int n_objects = rng.uniform_int(cfg.min_objects, cfg.max_objects);
    std::vector<GroundTruthInstance> placed;
    PixelMask occupied(cfg.width, cfg.height);
    for (int attempt = 0; static_cast<int>(placed.size()) < n_objects; ++attempt) {
        if (attempt >= cfg.max_retries) {
            throw InfeasibleSceneError("gen_scene: could not place " + std::to_string(n_objects) + " objects");
        }
        const int w = rng.uniform_int(cfg.min_size, cfg.max_size);
        const int h = rng.uniform_int(cfg.min_size, cfg.max_size);
        if (w > cfg.width || h > cfg.height) continue;
        const int x0 = rng.uniform_int(0, cfg.width - w);
        const int y0 = rng.uniform_int(0, cfg.height - h);
        const ShapeKind kind = cfg.shapes[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(cfg.shapes.size()) - 1))];
        const int class_id = rng.uniform_int(1, cfg.num_classes);
        PixelMask m = detail::draw_shape(cfg.width, cfg.height, kind, x0, y0, w, h, rng);
        const double covered = static_cast<double>(intersection_area(m, occupied)) / static_cast<double>(m.area());
        if (covered > cfg.max_overlap) continue;
        // Later objects occlude earlier ones; an occluded instance must stay visible.
        bool ok = true;
        for (const auto& g : placed) {
            const std::size_t left = g.mask.area() - intersection_area(g.mask, m);
            if (left < g.mask.area() / 2 || left < 4) ok = false;
        }
        if (!ok) continue;
        for (auto& g : placed) {
            for (std::size_t i = 0; i < m.size(); ++i)
                if (m.bits()[i]) g.mask.bits()[i] = 0;
        }
        occupied = mask_union(occupied, m);
        placed.push_back({class_id, std::move(m)});
    }
    rec.gt = std::move(placed);

    // Image: noisy grey background, per-object tinted class colour.
    rec.image.assign(static_cast<std::size_t>(cfg.width) * cfg.height * 3, 0.0f);
    const float bg = static_cast<float>(rng.uniform(0.40, 0.60));
    for (std::size_t i = 0; i < rec.image.size(); ++i) {
        rec.image[i] = bg + static_cast<float>(cfg.color_noise * rng.normal());
    }
    for (const auto& g : rec.gt) {
        const auto& base = detail::kClassColors[static_cast<std::size_t>(g.class_id - 1)];
        std::array<float, 3> tint{};
        for (auto& t : tint) t = static_cast<float>(rng.uniform(-0.08, 0.08));
        for (std::size_t i = 0; i < g.mask.size(); ++i) {
            if (!g.mask.bits()[i]) continue;
            for (int c = 0; c < 3; ++c) {
                rec.image[i * 3 + c] = base[c] + tint[c] + static_cast<float>(cfg.color_noise * rng.normal());
            }
        }
    }
    for (auto& v : rec.image) v = std::clamp(v, 0.0f, 1.0f);

    rec.edges = EdgeMap(cfg.width, cfg.height);
    for (const auto& g : rec.gt) {
        const PixelMask ring = inner_boundary(g.mask);
        for (std::size_t i = 0; i < ring.size(); ++i)
            if (ring.bits()[i]) rec.edges.values[i] = 1.0f;
    }
    for (auto& v : rec.edges.values) {
        if (rng.bernoulli(cfg.edge_noise_density)) {
            v = std::max(v, static_cast<float>(rng.uniform(0.0, cfg.edge_noise_amplitude)));
        }
        v = std::clamp(v, 0.0f, 1.0f);
    }

    rec.annotation.presence.assign(static_cast<std::size_t>(cfg.num_classes), 0);
    for (const auto& g : rec.gt) rec.annotation.presence[static_cast<std::size_t>(g.class_id - 1)] = 1;
    if (cfg.emit_boxes) {
        std::vector<ClassBox> boxes;
        for (const auto& g : rec.gt) boxes.push_back({g.class_id, tight_box(g.mask)});
        rec.annotation.boxes = std::move(boxes);
    }

    for (const auto& g : rec.gt) {
        const double f = rng.uniform(cfg.seed_fraction_min, cfg.seed_fraction_max);
        const auto target = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(f * static_cast<double>(g.mask.area()))));
        rec.seeds.push_back({g.class_id, detail::grow_region(g.mask, target, rng)});
    }
    return rec;
}

namespace detail {

inline bool touches_any_seed(const PixelMask& m, const std::vector<SeedMask>& seeds) {
    return std::any_of(seeds.begin(), seeds.end(), [&](const SeedMask& s) { return intersection_area(m, s.mask) > 0; });
}

}  // namespace detail

/// Candidate pool: exact instances, perturbed variants and distractors,
/// optionally filtered to proposals touching a seed, then shuffled.
[[nodiscard]] inline ProposalPool gen_proposals(const SceneRecord& scene, const ProposalConfig& cfg, std::uint64_t seed) {
    if (cfg.p_target < 1) throw std::invalid_argument("gen_proposals: p_target must be >= 1");
    Rng rng(derive_seed(seed, {0x9909, scene.id}));
    std::vector<PixelMask> exact;
    std::vector<PixelMask> extra;

    if (cfg.include_exact) {
        for (const auto& g : scene.gt) exact.push_back(g.mask);
    }
    if (cfg.perturb) {
        // Round-robin over objects so truncation to p_target stays balanced.
        for (int v = 0; v < cfg.variants_per_object; ++v) {
            for (const auto& g : scene.gt) {
                PixelMask m;
                switch (rng.uniform_int(0, 5)) {
                    case 0: m = erode(g.mask, rng.uniform_int(1, 2)); break;
                    case 1: m = dilate(g.mask, rng.uniform_int(1, 3)); break;
                    case 2: {
                        int sx = 0;
                        int sy = 0;
                        while (sx == 0 && sy == 0) {
                            sx = rng.uniform_int(-4, 4);
                            sy = rng.uniform_int(-4, 4);
                        }
                        m = detail::shift_mask(g.mask, sx, sy);
                        break;
                    }
                    case 3: m = detail::crop_mask(g.mask, rng); break;
                    case 4: {
                        const double f = rng.uniform(0.2, 0.6);
                        m = detail::grow_region(g.mask, static_cast<std::size_t>(f * static_cast<double>(g.mask.area())) + 1, rng);
                        break;
                    }
                    default: m = detail::leak_mask(g.mask, rng); break;
                }
                extra.push_back(std::move(m));
            }
        }
    }
    for (int d = 0; d < cfg.distractors; ++d) extra.push_back(detail::random_blob(scene.width, scene.height, rng));

    std::vector<PixelMask> pool;
    std::set<std::vector<std::uint8_t>> seen;
    const auto admit = [&](PixelMask&& m) {
        if (static_cast<int>(pool.size()) >= cfg.p_target) return;
        if (m.empty() || static_cast<int>(m.area()) < cfg.min_area) return;
        if (cfg.seed_filter && !detail::touches_any_seed(m, scene.seeds)) return;
        std::vector<std::uint8_t> key(m.bits().begin(), m.bits().end());
        if (!seen.insert(std::move(key)).second) return;
        pool.push_back(std::move(m));
    };
    for (auto& m : exact) admit(std::move(m));
    for (auto& m : extra) admit(std::move(m));

    for (std::size_t i = pool.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
        std::swap(pool[i - 1], pool[j]);
    }

    ProposalPool out;
    out.adjacency = build_adjacency(pool, scene.edges, cfg.adjacency_dilation, cfg.normalize_edge_weights);
    out.masks = std::move(pool);
    return out;
}

/// Keeps proposals whose tight box reaches `min_iou` box-IoU with some
/// annotated box and rebuilds the adjacency over the survivors.
[[nodiscard]] inline ProposalPool filter_by_boxes(const ProposalPool& pool, const std::vector<ClassBox>& boxes, double min_iou,
                                                  const EdgeMap& edges, int dilation = 1, bool normalize_edge_weights = false) {
    if (!(min_iou > 0.0 && min_iou <= 1.0)) throw std::invalid_argument("filter_by_boxes: min_iou must be in (0,1]");
    ProposalPool out;
    for (const auto& m : pool.masks) {
        if (m.empty()) continue;
        const Box tb = tight_box(m);
        const bool keep = std::any_of(boxes.begin(), boxes.end(), [&](const ClassBox& b) { return box_iou(tb, b.box) >= min_iou; });
        if (keep) out.masks.push_back(m);
    }
    if (out.masks.empty()) throw EmptyPoolError("filter_by_boxes: no proposal survives box filtering");
    out.adjacency = build_adjacency(out.masks, edges, dilation, normalize_edge_weights);
    return out;
}

/// Full record: scene plus its proposal pool.
[[nodiscard]] inline SceneRecord gen_record(const SceneConfig& scfg, const ProposalConfig& pcfg, std::uint64_t seed) {
    SceneRecord rec = gen_scene(scfg, seed);
    rec.pool = gen_proposals(rec, pcfg, seed);
    return rec;
}

[[nodiscard]] inline std::vector<SceneRecord> gen_records(const SceneConfig& scfg, const ProposalConfig& pcfg,
                                                          std::uint64_t first_seed, int count) {
    std::vector<SceneRecord> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) out.push_back(gen_record(scfg, pcfg, first_seed + static_cast<std::uint64_t>(i)));
    return out;
}

}  // namespace annoconsist
