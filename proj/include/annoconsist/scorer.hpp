#pragma once

// Noise-conditioned proposal scorer F(u, c; θ_c, z): hand-crafted proposal
// features concatenated with a noise vector, fed to a linear map or a
// one-hidden-layer tanh MLP. Gradients are exact (reverse mode by hand).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "annoconsist/core.hpp"
#include "annoconsist/matrix.hpp"
#include "annoconsist/rng.hpp"
#include "annoconsist/synthgen.hpp"

namespace annoconsist {

/// Feature layout: [area, cx, cy, r, g, b, boundary edge, seed cover × C, bias].
[[nodiscard]] constexpr int feature_dim(int num_classes) noexcept { return 8 + num_classes; }

using FeatureVector = std::vector<double>;

/// P × feature_dim rows, one per proposal of a pool.
using FeatureTable = Matrix;

[[nodiscard]] inline FeatureVector proposal_features(const SceneRecord& scene, const PixelMask& mask) {
    const int C = scene.num_classes;
    FeatureVector f(static_cast<std::size_t>(feature_dim(C)), 0.0);
    const double total = static_cast<double>(scene.width) * scene.height;
    double n = 0.0;
    double sx = 0.0;
    double sy = 0.0;
    double rgb[3] = {0.0, 0.0, 0.0};
    for (int y = 0; y < scene.height; ++y) {
        for (int x = 0; x < scene.width; ++x) {
            if (!mask.at(x, y)) continue;
            n += 1.0;
            sx += x + 0.5;
            sy += y + 0.5;
            for (int c = 0; c < 3; ++c) rgb[c] += scene.pixel(x, y, c);
        }
    }
    if (n > 0.0) {
        f[0] = n / total;
        f[1] = sx / n / scene.width;
        f[2] = sy / n / scene.height;
        for (int c = 0; c < 3; ++c) f[static_cast<std::size_t>(3 + c)] = rgb[c] / n;
        const PixelMask ring = inner_boundary(mask);
        double e = 0.0;
        double m = 0.0;
        for (std::size_t i = 0; i < ring.size(); ++i) {
            if (!ring.bits()[i]) continue;
            e += scene.edges.values[i];
            m += 1.0;
        }
        f[6] = m > 0.0 ? e / m : 0.0;
        for (const auto& s : scene.seeds) {
            if (s.class_id < 1 || s.class_id > C || s.mask.empty()) continue;
            auto& slot = f[static_cast<std::size_t>(6 + s.class_id)];
            slot = std::max(slot, overlap_fraction(mask, s.mask));
        }
    }
    f.back() = 1.0;
    return f;
}

/// Features of proposal `index` in the scene's own pool.
[[nodiscard]] inline FeatureVector features(const SceneRecord& scene, std::size_t index) {
    if (index >= scene.pool.masks.size()) throw std::out_of_range("features: proposal index out of range");
    return proposal_features(scene, scene.pool.masks[index]);
}

[[nodiscard]] inline FeatureTable feature_table(const SceneRecord& scene, const std::vector<PixelMask>& masks) {
    FeatureTable t(static_cast<int>(masks.size()), feature_dim(scene.num_classes));
    for (std::size_t u = 0; u < masks.size(); ++u) {
        const auto f = proposal_features(scene, masks[u]);
        std::copy(f.begin(), f.end(), t.row(static_cast<int>(u)).begin());
    }
    return t;
}

using NoiseVector = std::vector<double>;

struct NoiseConfig {
    int dim = 8;
    double low = 0.0;
    double high = 1.0;
};

[[nodiscard]] inline NoiseVector sample_noise(const NoiseConfig& cfg, Rng& rng) {
    NoiseVector z(static_cast<std::size_t>(cfg.dim));
    for (auto& v : z) v = rng.uniform(cfg.low, cfg.high);
    return z;
}

enum class ScorerKind { linear, mlp };

/// θ_c, stored flat. Linear: W is (C+1) × (D+d). MLP: W1 is H × (D+d),
/// followed by W2 of (C+1) × (H+1) where the last column multiplies a
/// constant 1.
struct CondParams {
    ScorerKind kind = ScorerKind::linear;
    int num_classes = 0;
    int feature_dim = 0;
    int noise_dim = 0;
    int hidden = 0;
    std::vector<double> values;

    [[nodiscard]] int input_dim() const noexcept { return feature_dim + noise_dim; }
    [[nodiscard]] int outputs() const noexcept { return num_classes + 1; }
    [[nodiscard]] std::size_t first_layer_size() const noexcept {
        return static_cast<std::size_t>(kind == ScorerKind::linear ? outputs() : hidden) * input_dim();
    }
    [[nodiscard]] std::size_t param_count() const noexcept {
        if (kind == ScorerKind::linear) return first_layer_size();
        return first_layer_size() + static_cast<std::size_t>(outputs()) * (hidden + 1);
    }

    friend bool operator==(const CondParams&, const CondParams&) = default;
};

[[nodiscard]] inline CondParams make_cond_params(ScorerKind kind, int num_classes, int noise_dim, int hidden = 32) {
    CondParams p;
    p.kind = kind;
    p.num_classes = num_classes;
    p.feature_dim = feature_dim(num_classes);
    p.noise_dim = noise_dim;
    p.hidden = kind == ScorerKind::mlp ? hidden : 0;
    p.values.assign(p.param_count(), 0.0);
    return p;
}

inline void randomize(CondParams& p, double scale, std::uint64_t seed) {
    Rng rng(derive_seed(seed, {0xC0DE}));
    for (auto& v : p.values) v = scale * rng.normal();
}

namespace detail {

inline void check_score_inputs(const CondParams& theta, const FeatureTable& feats, const NoiseVector& z) {
    if (feats.cols != theta.feature_dim) {
        throw DimensionError("scorer: feature width " + std::to_string(feats.cols) + " != " + std::to_string(theta.feature_dim));
    }
    if (static_cast<int>(z.size()) != theta.noise_dim) {
        throw DimensionError("scorer: noise length " + std::to_string(z.size()) + " != " + std::to_string(theta.noise_dim));
    }
    if (theta.values.size() != theta.param_count()) throw DimensionError("scorer: parameter vector has the wrong size");
}

inline std::vector<double> scorer_input(const FeatureTable& feats, int u, const NoiseVector& z) {
    std::vector<double> x(feats.row(u).begin(), feats.row(u).end());
    x.insert(x.end(), z.begin(), z.end());
    return x;
}

}  // namespace detail

/// Row u = model(concat(features(u), z)).
[[nodiscard]] inline ScoreTable score_all(const CondParams& theta, const FeatureTable& feats, const NoiseVector& z) {
    detail::check_score_inputs(theta, feats, z);
    const int P = feats.rows;
    const int out = theta.outputs();
    const int in = theta.input_dim();
    ScoreTable table(P, out);
    const std::span<const double> w(theta.values);
    for (int u = 0; u < P; ++u) {
        const auto x = detail::scorer_input(feats, u, z);
        if (theta.kind == ScorerKind::linear) {
            for (int c = 0; c < out; ++c) table(u, c) = dot(w.subspan(static_cast<std::size_t>(c) * in, in), x);
        } else {
            const int H = theta.hidden;
            std::vector<double> h(static_cast<std::size_t>(H) + 1, 1.0);
            for (int k = 0; k < H; ++k) h[k] = std::tanh(dot(w.subspan(static_cast<std::size_t>(k) * in, in), x));
            const auto w2 = w.subspan(theta.first_layer_size());
            for (int c = 0; c < out; ++c) table(u, c) = dot(w2.subspan(static_cast<std::size_t>(c) * (H + 1), H + 1), h);
        }
    }
    return table;
}

[[nodiscard]] inline ScoreTable score_all(const CondParams& theta, const SceneRecord& scene, const NoiseVector& z) {
    return score_all(theta, feature_table(scene, scene.pool.masks), z);
}

/// Gradient of Σ_{u,c} upstream(u,c) · F(u,c) with respect to θ_c.
[[nodiscard]] inline std::vector<double> score_vjp(const CondParams& theta, const FeatureTable& feats, const NoiseVector& z,
                                                   const Matrix& upstream) {
    detail::check_score_inputs(theta, feats, z);
    if (upstream.rows != feats.rows || upstream.cols != theta.outputs()) throw DimensionError("score_vjp: upstream shape mismatch");
    std::vector<double> grad(theta.param_count(), 0.0);
    const int in = theta.input_dim();
    const int out = theta.outputs();
    const std::span<const double> w(theta.values);
    const std::span<double> g(grad);
    for (int u = 0; u < feats.rows; ++u) {
        const auto up = upstream.row(u);
        if (std::all_of(up.begin(), up.end(), [](double v) { return v == 0.0; })) continue;
        const auto x = detail::scorer_input(feats, u, z);
        if (theta.kind == ScorerKind::linear) {
            for (int c = 0; c < out; ++c) {
                if (up[c] != 0.0) axpy(up[c], x, g.subspan(static_cast<std::size_t>(c) * in, in));
            }
            continue;
        }
        const int H = theta.hidden;
        std::vector<double> h(static_cast<std::size_t>(H) + 1, 1.0);
        for (int k = 0; k < H; ++k) h[k] = std::tanh(dot(w.subspan(static_cast<std::size_t>(k) * in, in), x));
        const auto w2 = w.subspan(theta.first_layer_size());
        auto g2 = g.subspan(theta.first_layer_size());
        std::vector<double> dh(static_cast<std::size_t>(H), 0.0);
        for (int c = 0; c < out; ++c) {
            if (up[c] == 0.0) continue;
            axpy(up[c], h, g2.subspan(static_cast<std::size_t>(c) * (H + 1), H + 1));
            for (int k = 0; k < H; ++k) dh[k] += up[c] * w2[static_cast<std::size_t>(c) * (H + 1) + k];
        }
        for (int k = 0; k < H; ++k) {
            const double da = dh[k] * (1.0 - h[k] * h[k]);
            if (da != 0.0) axpy(da, x, g.subspan(static_cast<std::size_t>(k) * in, in));
        }
    }
    return grad;
}

/// Exact gradient of the single entry F(proposal_index, class_id).
[[nodiscard]] inline std::vector<double> score_grad(const CondParams& theta, const FeatureTable& feats, const NoiseVector& z,
                                                    int proposal_index, int class_id) {
    if (proposal_index < 0 || proposal_index >= feats.rows || class_id < 0 || class_id >= theta.outputs()) {
        throw std::out_of_range("score_grad: index out of range");
    }
    Matrix up(feats.rows, theta.outputs());
    up(proposal_index, class_id) = 1.0;
    return score_vjp(theta, feats, z, up);
}

[[nodiscard]] inline std::vector<double> score_grad(const CondParams& theta, const SceneRecord& scene, const NoiseVector& z,
                                                    int proposal_index, int class_id) {
    return score_grad(theta, feature_table(scene, scene.pool.masks), z, proposal_index, class_id);
}

}  // namespace annoconsist
