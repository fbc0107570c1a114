#pragma once

// Static PPM panels: per scene, one row per iteration showing the image,
// the ground truth, the K conditional samples and the decoded prediction.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "annoconsist/eval.hpp"
#include "annoconsist/loss.hpp"
#include "annoconsist/synthgen.hpp"

namespace annoconsist {

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    RgbImage() = default;
    RgbImage(int w, int h, std::uint8_t fill = 255) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

    void put(int x, int y, std::array<float, 3> c) {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        for (int k = 0; k < 3; ++k) rgb[i + k] = static_cast<std::uint8_t>(std::clamp(c[k], 0.0f, 1.0f) * 255.0f + 0.5f);
    }
};

inline void write_ppm(const RgbImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
}

struct Overlay {
    int class_id = 1;
    const PixelMask* mask = nullptr;
};

namespace detail {

inline std::array<float, 3> class_color(int c) { return kClassColors[static_cast<std::size_t>((c - 1) % 5)]; }

/// Dimmed scene image with class-colored masks and a 1-px outline.
inline void draw_panel(RgbImage& canvas, int ox, int oy, int scale, const SceneRecord& r, const std::vector<Overlay>& overlays, bool dim) {
    for (int y = 0; y < r.height; ++y) {
        for (int x = 0; x < r.width; ++x) {
            std::array<float, 3> c{r.pixel(x, y, 0), r.pixel(x, y, 1), r.pixel(x, y, 2)};
            if (dim)
                for (auto& v : c) v = 0.35f * v + 0.1f;
            for (const auto& o : overlays) {
                if (!o.mask->at(x, y)) continue;
                const auto col = class_color(o.class_id);
                const bool edge = x == 0 || y == 0 || x + 1 == r.width || y + 1 == r.height || !o.mask->at(x - 1, y) || !o.mask->at(x + 1, y) ||
                                  !o.mask->at(x, y - 1) || !o.mask->at(x, y + 1);
                for (int k = 0; k < 3; ++k) c[static_cast<std::size_t>(k)] = edge ? 1.0f : 0.45f * c[static_cast<std::size_t>(k)] + 0.55f * col[static_cast<std::size_t>(k)];
            }
            for (int dy = 0; dy < scale; ++dy)
                for (int dx = 0; dx < scale; ++dx) canvas.put(ox + x * scale + dx, oy + y * scale + dy, c);
        }
    }
}

}  // namespace detail

struct PanelRow {
    std::vector<InstanceLabeling> samples;  // over `pool`
    ScenePredictions predictions;
};

/// Columns: image, ground truth, samples..., prediction. One row per entry.
[[nodiscard]] inline RgbImage render_scene(const SceneRecord& r, const std::vector<PixelMask>& pool, const std::vector<PanelRow>& rows,
                                           int scale = 3, int gap = 2) {
    std::size_t K = 0;
    for (const auto& row : rows) K = std::max(K, row.samples.size());
    const int cols = static_cast<int>(K) + 3;
    const int pw = r.width * scale;
    const int ph = r.height * scale;
    const int nrows = static_cast<int>(std::max<std::size_t>(rows.size(), 1));
    RgbImage img(cols * pw + (cols + 1) * gap, nrows * ph + (nrows + 1) * gap);
    std::vector<Overlay> gt;
    for (const auto& g : r.gt) gt.push_back({g.class_id, &g.mask});
    for (int ri = 0; ri < nrows; ++ri) {
        const int oy = gap + ri * (ph + gap);
        const auto x_of = [&](int c) { return gap + c * (pw + gap); };
        detail::draw_panel(img, x_of(0), oy, scale, r, {}, false);
        detail::draw_panel(img, x_of(1), oy, scale, r, gt, true);
        if (rows.empty()) continue;
        const auto& row = rows[static_cast<std::size_t>(ri)];
        for (std::size_t k = 0; k < row.samples.size(); ++k) {
            std::vector<Overlay> ov;
            const auto& y = row.samples[k];
            for (std::size_t u = 0; u < y.size() && u < pool.size(); ++u)
                if (y.labels[u] != 0) ov.push_back({y.labels[u], &pool[u]});
            detail::draw_panel(img, x_of(2 + static_cast<int>(k)), oy, scale, r, ov, true);
        }
        std::vector<Overlay> pv;
        for (const auto& p : row.predictions) pv.push_back({p.class_id, &p.mask});
        detail::draw_panel(img, x_of(cols - 1), oy, scale, r, pv, true);
    }
    return img;
}

}  // namespace annoconsist
