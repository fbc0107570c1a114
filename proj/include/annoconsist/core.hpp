#pragma once

// Binary masks, boxes, edge maps and the proposal adjacency graph shared by
// every other module.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace annoconsist {

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Row-major binary occupancy grid.
class PixelMask {
public:
    PixelMask() = default;
    PixelMask(int width, int height) : width_(width), height_(height) {
        if (width <= 0 || height <= 0) {
            throw DimensionError("PixelMask: dimensions must be positive");
        }
        bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
    }

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] std::size_t size() const noexcept { return bits_.size(); }

    [[nodiscard]] bool at(int x, int y) const noexcept {
        return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
    }
    void set(int x, int y, bool on = true) noexcept {
        bits_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0;
    }
    [[nodiscard]] bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    [[nodiscard]] std::span<const std::uint8_t> bits() const noexcept { return bits_; }
    [[nodiscard]] std::span<std::uint8_t> bits() noexcept { return bits_; }

    [[nodiscard]] std::size_t area() const noexcept {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }
    [[nodiscard]] bool empty() const noexcept {
        return std::none_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; });
    }

    [[nodiscard]] bool same_shape(const PixelMask& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const PixelMask&, const PixelMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Inclusive pixel-coordinate box.
struct Box {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    [[nodiscard]] long area() const noexcept {
        return static_cast<long>(x_max - x_min + 1) * static_cast<long>(y_max - y_min + 1);
    }
    friend bool operator==(const Box&, const Box&) = default;
};

/// Per-pixel edge strength in [0,1].
struct EdgeMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    EdgeMap() = default;
    EdgeMap(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0f) {}

    [[nodiscard]] float at(int x, int y) const noexcept {
        return values[static_cast<std::size_t>(y) * width + x];
    }
    float& at(int x, int y) noexcept { return values[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const EdgeMap&, const EdgeMap&) = default;
};

/// Symmetric neighbour lists with inter-region edge weights I_{u,v}.
struct Adjacency {
    std::vector<std::vector<int>> neighbors;
    std::vector<std::vector<double>> edge_weights;  // parallel to neighbors

    [[nodiscard]] std::size_t size() const noexcept { return neighbors.size(); }

    [[nodiscard]] std::size_t edge_count() const noexcept {
        std::size_t n = 0;
        for (const auto& nb : neighbors) n += nb.size();
        return n / 2;
    }

    /// Weight of edge (u,v), or -1 when u and v are not neighbours.
    [[nodiscard]] double weight(int u, int v) const {
        const auto& nb = neighbors.at(static_cast<std::size_t>(u));
        for (std::size_t i = 0; i < nb.size(); ++i) {
            if (nb[i] == v) return edge_weights[static_cast<std::size_t>(u)][i];
        }
        return -1.0;
    }

    friend bool operator==(const Adjacency&, const Adjacency&) = default;
};

namespace detail {

inline void require_same_shape(const PixelMask& a, const PixelMask& b, const char* what) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(what) + ": mask dimensions differ");
    }
}

inline std::size_t intersection_count(const PixelMask& a, const PixelMask& b) {
    const auto ab = a.bits();
    const auto bb = b.bits();
    std::size_t n = 0;
    for (std::size_t i = 0; i < ab.size(); ++i) n += static_cast<std::size_t>(ab[i] & bb[i]);
    return n;
}

}  // namespace detail

[[nodiscard]] inline std::size_t intersection_area(const PixelMask& a, const PixelMask& b) {
    detail::require_same_shape(a, b, "intersection_area");
    return detail::intersection_count(a, b);
}

/// |a ∩ b| / |a ∪ b|; zero when both masks are empty.
[[nodiscard]] inline double mask_iou(const PixelMask& a, const PixelMask& b) {
    detail::require_same_shape(a, b, "mask_iou");
    const auto ab = a.bits();
    const auto bb = b.bits();
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < ab.size(); ++i) {
        inter += static_cast<std::size_t>(ab[i] & bb[i]);
        uni += static_cast<std::size_t>(ab[i] | bb[i]);
    }
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

/// |r_i ∩ r_l| / |r_l|: how much of r_l lies inside r_i.
[[nodiscard]] inline double overlap_fraction(const PixelMask& r_i, const PixelMask& r_l) {
    detail::require_same_shape(r_i, r_l, "overlap_fraction");
    const std::size_t denom = r_l.area();
    if (denom == 0) throw std::invalid_argument("overlap_fraction: r_l is empty");
    return static_cast<double>(detail::intersection_count(r_i, r_l)) / static_cast<double>(denom);
}

[[nodiscard]] inline Box tight_box(const PixelMask& m) {
    int x0 = m.width();
    int y0 = m.height();
    int x1 = -1;
    int y1 = -1;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m.at(x, y)) continue;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    if (x1 < 0) throw std::invalid_argument("tight_box: mask is empty");
    return Box{x0, y0, x1, y1};
}

[[nodiscard]] inline double box_iou(const Box& a, const Box& b) noexcept {
    const int ix0 = std::max(a.x_min, b.x_min);
    const int iy0 = std::max(a.y_min, b.y_min);
    const int ix1 = std::min(a.x_max, b.x_max);
    const int iy1 = std::min(a.y_max, b.y_max);
    if (ix1 < ix0 || iy1 < iy0) return 0.0;
    const double inter = static_cast<double>(ix1 - ix0 + 1) * static_cast<double>(iy1 - iy0 + 1);
    return inter / (static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter);
}

/// Chebyshev (square structuring element) dilation by `radius` pixels.
[[nodiscard]] inline PixelMask dilate(const PixelMask& m, int radius) {
    if (radius <= 0) return m;
    const int w = m.width();
    const int h = m.height();
    // Separable: horizontal pass then vertical pass.
    PixelMask horiz(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!m.at(x, y)) continue;
            for (int dx = std::max(0, x - radius); dx <= std::min(w - 1, x + radius); ++dx) horiz.set(dx, y);
        }
    }
    PixelMask out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!horiz.at(x, y)) continue;
            for (int dy = std::max(0, y - radius); dy <= std::min(h - 1, y + radius); ++dy) out.set(x, dy);
        }
    }
    return out;
}

[[nodiscard]] inline PixelMask erode(const PixelMask& m, int radius) {
    if (radius <= 0) return m;
    PixelMask inv(m.width(), m.height());
    for (std::size_t i = 0; i < m.size(); ++i) inv.bits()[i] = m.bits()[i] ? 0 : 1;
    const PixelMask grown = dilate(inv, radius);
    PixelMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            // outside-image pixels do not count as background
            out.set(x, y, m.at(x, y) && !grown.at(x, y));
        }
    }
    return out;
}

/// Set pixels of `m` with at least one 4-neighbour inside the image that is unset.
[[nodiscard]] inline PixelMask inner_boundary(const PixelMask& m) {
    PixelMask out(m.width(), m.height());
    constexpr int dx[4] = {1, -1, 0, 0};
    constexpr int dy[4] = {0, 0, 1, -1};
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m.at(x, y)) continue;
            for (int k = 0; k < 4; ++k) {
                const int nx = x + dx[k];
                const int ny = y + dy[k];
                if (m.contains(nx, ny) && !m.at(nx, ny)) {
                    out.set(x, y);
                    break;
                }
            }
        }
    }
    return out;
}

[[nodiscard]] inline PixelMask mask_union(const PixelMask& a, const PixelMask& b) {
    detail::require_same_shape(a, b, "mask_union");
    PixelMask out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) out.bits()[i] = a.bits()[i] | b.bits()[i];
    return out;
}

[[nodiscard]] inline PixelMask mask_intersection(const PixelMask& a, const PixelMask& b) {
    detail::require_same_shape(a, b, "mask_intersection");
    PixelMask out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) out.bits()[i] = a.bits()[i] & b.bits()[i];
    return out;
}

/// Neighbours are proposals whose `dilation`-dilated mask touches the other;
/// I_{u,v} sums the edge map over the contact band (dilate(u)∩v) ∪ (dilate(v)∩u).
/// With `normalize_by_contact` the sum is divided by the band size.
[[nodiscard]] inline Adjacency build_adjacency(std::span<const PixelMask> pool, const EdgeMap& edges,
                                               int dilation = 1, bool normalize_by_contact = false) {
    if (dilation < 1) throw std::invalid_argument("build_adjacency: dilation must be >= 1");
    const std::size_t n = pool.size();
    Adjacency adj;
    adj.neighbors.resize(n);
    adj.edge_weights.resize(n);
    if (n == 0) return adj;

    std::vector<PixelMask> grown;
    std::vector<Box> grown_box;
    std::vector<bool> nonempty(n, false);
    grown.reserve(n);
    for (const auto& m : pool) {
        if (m.width() != edges.width || m.height() != edges.height) {
            throw DimensionError("build_adjacency: mask and edge map dimensions differ");
        }
        grown.push_back(dilate(m, dilation));
    }
    for (std::size_t i = 0; i < n; ++i) {
        nonempty[i] = !pool[i].empty();
        grown_box.push_back(nonempty[i] ? tight_box(grown[i]) : Box{});
    }

    for (std::size_t u = 0; u < n; ++u) {
        if (!nonempty[u]) continue;
        for (std::size_t v = u + 1; v < n; ++v) {
            if (!nonempty[v]) continue;
            const Box& bu = grown_box[u];
            const Box& bv = grown_box[v];
            if (bu.x_max < bv.x_min || bv.x_max < bu.x_min || bu.y_max < bv.y_min || bv.y_max < bu.y_min) {
                continue;
            }
            const auto gu = grown[u].bits();
            const auto gv = grown[v].bits();
            const auto mu = pool[u].bits();
            const auto mv = pool[v].bits();
            double sum = 0.0;
            std::size_t band = 0;
            for (std::size_t i = 0; i < gu.size(); ++i) {
                if ((gu[i] & mv[i]) | (gv[i] & mu[i])) {
                    sum += static_cast<double>(edges.values[i]);
                    ++band;
                }
            }
            if (band == 0) continue;
            const double w = normalize_by_contact ? sum / static_cast<double>(band) : sum;
            adj.neighbors[u].push_back(static_cast<int>(v));
            adj.edge_weights[u].push_back(w);
            adj.neighbors[v].push_back(static_cast<int>(u));
            adj.edge_weights[v].push_back(w);
        }
    }
    return adj;
}

}  // namespace annoconsist
