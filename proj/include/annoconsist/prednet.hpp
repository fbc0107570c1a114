#pragma once

// Fully factorised prediction distribution Pr_p: an independent softmax over
// C+1 classes for every proposal, its exact expected losses, and decoding
// into scored instance predictions.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "annoconsist/core.hpp"
#include "annoconsist/loss.hpp"
#include "annoconsist/matrix.hpp"
#include "annoconsist/prepared.hpp"
#include "annoconsist/scorer.hpp"

namespace annoconsist {

/// θ_p: a (C+1) × D weight matrix over proposal features.
struct PredParams {
    int num_classes = 0;
    int feature_dim = 0;
    std::vector<double> values;

    [[nodiscard]] int outputs() const noexcept { return num_classes + 1; }
    [[nodiscard]] std::size_t param_count() const noexcept { return static_cast<std::size_t>(outputs()) * feature_dim; }
    double& w(int c, int d) noexcept { return values[static_cast<std::size_t>(c) * feature_dim + d]; }
    [[nodiscard]] double w(int c, int d) const noexcept { return values[static_cast<std::size_t>(c) * feature_dim + d]; }

    friend bool operator==(const PredParams&, const PredParams&) = default;
};

[[nodiscard]] inline PredParams make_pred_params(int num_classes) {
    PredParams p;
    p.num_classes = num_classes;
    p.feature_dim = feature_dim(num_classes);
    p.values.assign(p.param_count(), 0.0);
    return p;
}

/// P × (C+1) class probabilities; every row lies on the simplex.
using PredictiveState = Matrix;

inline void softmax_inplace(std::span<double> v) noexcept {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (auto& x : v) {
        x = std::exp(x - m);
        s += x;
    }
    for (auto& x : v) x /= s;
}

[[nodiscard]] inline PredictiveState predict(const PredParams& theta, const FeatureTable& feats) {
    if (feats.cols != theta.feature_dim) throw DimensionError("predict: feature width differs from parameters");
    if (theta.values.size() != theta.param_count()) throw DimensionError("predict: parameter vector has the wrong size");
    PredictiveState p(feats.rows, theta.outputs());
    const std::span<const double> w(theta.values);
    for (int u = 0; u < feats.rows; ++u) {
        auto row = p.row(u);
        for (int c = 0; c < theta.outputs(); ++c) {
            row[c] = dot(w.subspan(static_cast<std::size_t>(c) * theta.feature_dim, theta.feature_dim), feats.row(u));
        }
        softmax_inplace(row);
    }
    return p;
}

[[nodiscard]] inline PredictiveState predict(const PredParams& theta, const PreparedScene& scene) {
    return predict(theta, scene.features);
}

/// Most probable class per proposal (lowest class on ties).
[[nodiscard]] inline InstanceLabeling argmax_labeling(const PredictiveState& state) {
    InstanceLabeling y{std::vector<int>(static_cast<std::size_t>(state.rows), 0)};
    for (int u = 0; u < state.rows; ++u) {
        const auto row = state.row(u);
        y.labels[static_cast<std::size_t>(u)] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return y;
}

struct InstancePrediction {
    int class_id = 1;
    double confidence = 0.0;
    PixelMask mask;
    Box box;
    int proposal = -1;  // index into the pool it was decoded from
};

struct DecodeConfig {
    double score_thresh = 0.7;
    double nms_t = 0.5;
};

/// Candidates are proposals whose best foreground probability reaches the
/// threshold; per class, greedy NMS by confidence drops any remaining r_l
/// with overlap_fraction(r_kept, r_l) > nms_t.
[[nodiscard]] inline std::vector<InstancePrediction> decode(const PredictiveState& state, const std::vector<PixelMask>& pool,
                                                            const DecodeConfig& cfg = {}) {
    if (static_cast<std::size_t>(state.rows) != pool.size()) throw DimensionError("decode: state rows differ from pool size");
    if (cfg.score_thresh < 0.0 || cfg.score_thresh > 1.0 || cfg.nms_t < 0.0 || cfg.nms_t > 1.0) {
        throw std::invalid_argument("decode: thresholds must lie in [0,1]");
    }
    struct Cand {
        int u;
        int c;
        double conf;
    };
    std::vector<Cand> cands;
    for (int u = 0; u < state.rows; ++u) {
        int best = 1;
        for (int c = 2; c < state.cols; ++c)
            if (state(u, c) > state(u, best)) best = c;
        if (state.cols > 1 && state(u, best) >= cfg.score_thresh) cands.push_back({u, best, state(u, best)});
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.c != b.c) return a.c < b.c;
        return a.conf > b.conf;
    });
    std::vector<InstancePrediction> out;
    std::vector<char> dropped(cands.size(), 0);
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (dropped[i]) continue;
        const auto& ki = cands[i];
        const PixelMask& mi = pool[static_cast<std::size_t>(ki.u)];
        out.push_back({ki.c, ki.conf, mi, tight_box(mi), ki.u});
        for (std::size_t l = i + 1; l < cands.size() && cands[l].c == ki.c; ++l) {
            if (!dropped[l] && overlap_fraction(mi, pool[static_cast<std::size_t>(cands[l].u)]) > cfg.nms_t) dropped[l] = 1;
        }
    }
    return out;
}

/// Σ_u Σ_c p_u(c) · cost(c, y_c[u]) under identity pairing on the shared pool.
[[nodiscard]] inline double expected_loss_vs_sample(const PredictiveState& state, const InstanceLabeling& y, const LossConfig& cfg) {
    if (static_cast<std::size_t>(state.rows) != y.size()) throw DimensionError("expected_loss_vs_sample: pool size mismatch");
    double total = 0.0;
    for (int u = 0; u < state.rows; ++u) {
        const int yc = y.labels[static_cast<std::size_t>(u)];
        for (int c = 0; c < state.cols; ++c) total += state(u, c) * proposal_cost(c, yc, cfg);
    }
    return total;
}

/// Exact E[Δ(y, y')] for y, y' drawn independently from the state.
[[nodiscard]] inline double self_diversity_pred(const PredictiveState& state, const LossConfig& cfg) {
    double total = 0.0;
    for (int u = 0; u < state.rows; ++u) {
        for (int c = 0; c < state.cols; ++c) {
            for (int d = 0; d < state.cols; ++d) total += state(u, c) * state(u, d) * proposal_cost(c, d, cfg);
        }
    }
    return total;
}

}  // namespace annoconsist
