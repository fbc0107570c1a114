#pragma once

// Hand-rolled generators and oracles shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "annoconsist.hpp"

namespace testkit {

using namespace annoconsist;

inline PixelMask rect_mask(int w, int h, int x0, int y0, int x1, int y1) {
    PixelMask m(w, h);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) m.set(x, y);
    return m;
}

inline PixelMask random_rect(int w, int h, Rng& rng) {
    const int x0 = rng.uniform_int(0, w - 1);
    const int y0 = rng.uniform_int(0, h - 1);
    return rect_mask(w, h, x0, y0, rng.uniform_int(x0, w - 1), rng.uniform_int(y0, h - 1));
}

/// Scattered pixels with density p (at least one pixel set).
inline PixelMask random_mask(int w, int h, double p, Rng& rng) {
    PixelMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (rng.bernoulli(p)) m.set(x, y);
    if (m.empty()) m.set(rng.uniform_int(0, w - 1), rng.uniform_int(0, h - 1));
    return m;
}

inline EdgeMap random_edges(int w, int h, Rng& rng) {
    EdgeMap e(w, h);
    for (auto& v : e.values) v = static_cast<float>(rng.uniform());
    return e;
}

/// A greedy/exact inference problem on a small pool.
struct InferenceCase {
    std::vector<PixelMask> pool;
    ScoreTable G;
    Annotation ann;
};

inline Annotation random_annotation(int C, int max_present, Rng& rng) {
    Annotation a;
    a.presence.assign(static_cast<std::size_t>(C), 0);
    const int n = rng.uniform_int(1, std::min(C, max_present));
    int placed = 0;
    while (placed < n) {
        const int j = rng.uniform_int(0, C - 1);
        if (a.presence[static_cast<std::size_t>(j)] == 0) {
            a.presence[static_cast<std::size_t>(j)] = 1;
            ++placed;
        }
    }
    return a;
}

/// Overlapping rectangles on a 12×12 grid; scores uniform in [lo, hi).
inline InferenceCase random_case(int P, int C, Rng& rng, double lo = 0.0, double hi = 1.0) {
    InferenceCase c;
    for (int u = 0; u < P; ++u) c.pool.push_back(random_rect(12, 12, rng));
    c.G = ScoreTable(P, C + 1);
    for (auto& v : c.G.data) v = rng.uniform(lo, hi);
    c.ann = random_annotation(C, P, rng);
    return c;
}

/// Pairwise-disjoint proposals: each lives in its own 3×6 cell of a 12×12 grid.
inline InferenceCase disjoint_case(int P, int C, Rng& rng, double lo = 0.0, double hi = 1.0) {
    InferenceCase c;
    std::vector<int> cells(8);
    for (int i = 0; i < 8; ++i) cells[static_cast<std::size_t>(i)] = i;
    for (int i = 7; i > 0; --i) std::swap(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(rng.uniform_int(0, i))]);
    for (int u = 0; u < P; ++u) {
        const int cell = cells[static_cast<std::size_t>(u)];
        const int cx = (cell % 4) * 3;
        const int cy = (cell / 4) * 6;
        const int x0 = cx + rng.uniform_int(0, 1);
        const int y0 = cy + rng.uniform_int(0, 2);
        c.pool.push_back(rect_mask(12, 12, x0, y0, rng.uniform_int(x0, cx + 2), rng.uniform_int(y0, cy + 5)));
    }
    c.G = ScoreTable(P, C + 1);
    for (auto& v : c.G.data) v = rng.uniform(lo, hi);
    c.ann = random_annotation(C, P, rng);
    return c;
}

/// Brute force over every labeling in {0, annotated}^P with the exact
/// oracle's non-overlap restriction; returns the best total score.
inline double brute_force_best(const InferenceCase& c, const InferenceConfig& cfg) {
    const int P = static_cast<int>(c.pool.size());
    std::vector<int> labels{0};
    for (const int j : c.ann.annotated_classes()) labels.push_back(j);
    const auto L = labels.size();
    std::size_t total = 1;
    for (int u = 0; u < P; ++u) total *= L;
    double best = -std::numeric_limits<double>::infinity();
    InstanceLabeling y{std::vector<int>(static_cast<std::size_t>(P), 0)};
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t r = code;
        for (int u = 0; u < P; ++u) {
            y.labels[static_cast<std::size_t>(u)] = labels[r % L];
            r /= L;
        }
        bool ok = true;
        for (int a = 0; a < P && ok; ++a) {
            for (int b = a + 1; b < P && ok; ++b) {
                if (y.labels[static_cast<std::size_t>(a)] == 0 || y.labels[static_cast<std::size_t>(a)] != y.labels[static_cast<std::size_t>(b)]) continue;
                const double inter = static_cast<double>(intersection_area(c.pool[static_cast<std::size_t>(a)], c.pool[static_cast<std::size_t>(b)]));
                const double larger = static_cast<double>(std::max(c.pool[static_cast<std::size_t>(a)].area(), c.pool[static_cast<std::size_t>(b)].area()));
                ok = inter / larger <= cfg.overlap_t;
            }
        }
        if (!ok) continue;
        best = std::max(best, total_score(c.G, y, c.ann, c.pool, cfg));
    }
    return best;
}

/// Random simplex rows with occasional near-deterministic proposals.
inline PredictiveState random_state(int P, int C, Rng& rng) {
    PredictiveState s(P, C + 1);
    for (int u = 0; u < P; ++u) {
        auto row = s.row(u);
        const double sharp = rng.bernoulli(0.3) ? 4.0 : 1.0;
        for (auto& v : row) v = sharp * rng.normal();
        softmax_inplace(row);
    }
    return s;
}

inline InstanceLabeling random_labeling(int P, int C, Rng& rng) {
    InstanceLabeling y{std::vector<int>(static_cast<std::size_t>(P), 0)};
    for (auto& l : y.labels) l = rng.uniform_int(0, C);
    return y;
}

/// One labeling drawn from the factorised state.
inline InstanceLabeling draw_from(const PredictiveState& s, Rng& rng) {
    InstanceLabeling y{std::vector<int>(static_cast<std::size_t>(s.rows), 0)};
    for (int u = 0; u < s.rows; ++u) {
        double r = rng.uniform();
        int c = 0;
        for (; c < s.cols - 1; ++c) {
            r -= s(u, c);
            if (r < 0.0) break;
        }
        y.labels[static_cast<std::size_t>(u)] = c;
    }
    return y;
}

struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

inline McEstimate monte_carlo(int draws, const std::function<double()>& sample) {
    double s = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double x = sample();
        s += x;
        s2 += x * x;
    }
    const double n = draws;
    const double mean = s / n;
    const double var = std::max(0.0, s2 / n - mean * mean);
    return {mean, std::sqrt(var / n)};
}

/// Within 3 standard errors; a degenerate estimate must match to rounding.
inline bool within_3_sigma(double exact, const McEstimate& mc) {
    return std::abs(exact - mc.mean) <= 3.0 * mc.stderr_ + 1e-12 * std::max(1.0, std::abs(exact));
}

/// ||a − n|| / max(||a||, ||n||), 0 when both vanish.
inline double gradient_rel_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    double diff = 0.0;
    double na = 0.0;
    double nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        na += analytic[i] * analytic[i];
        nn += numeric[i] * numeric[i];
    }
    const double scale = std::sqrt(std::max(na, nn));
    return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

/// Central differences of f around x.
inline std::vector<double> numeric_gradient(std::vector<double> x, const std::function<double(const std::vector<double>&)>& f,
                                            double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// Small synthetic scene for gradient and training checks.
inline SceneRecord micro_record(std::uint64_t seed, int classes = 2, int p_target = 8) {
    SceneConfig sc;
    sc.width = 24;
    sc.height = 24;
    sc.num_classes = classes;
    sc.min_objects = 1;
    sc.max_objects = 2;
    sc.min_size = 6;
    sc.max_size = 10;
    ProposalConfig pc;
    pc.p_target = p_target;
    pc.variants_per_object = 3;
    pc.distractors = 2;
    return gen_record(sc, pc, seed);
}

/// Perfect predictions: every gt instance predicted with its own mask.
inline std::vector<ScenePredictions> oracle_predictions(const std::vector<SceneRecord>& records) {
    std::vector<ScenePredictions> out;
    for (const auto& r : records) {
        ScenePredictions p;
        for (const auto& g : r.gt) p.push_back({g.class_id, 0.9, g.mask, tight_box(g.mask), -1});
        out.push_back(std::move(p));
    }
    return out;
}

/// Cut-down training setup that finishes in a second or two.
inline FitConfig quick_fit_config(std::uint64_t seed = 0) {
    FitConfig fc = reference_run_config().fit;
    fc.train.outer_iters = 1;
    fc.train.init_epochs = 3;
    fc.train.warmup_epochs = 3;
    fc.train.cond_epochs = 2;
    fc.train.pred_epochs = 2;
    fc.train.K = 3;
    fc.train.seed = seed;
    return fc;
}

/// Two disjoint proposals, one class, linear scorer with a 1-d noise.
/// With z = (0.2, 0.4) the unary gains are u0: 2+z, u1: z−0.5, so every
/// sample is (1,0); against y_p = (1,1) the cond gradient is
/// row 1 = −½(x₁¹ + x₁²), row 0 = +½(x₁¹ + x₁²), and against y_p = (1,0) it is 0.
struct HandCondCase {
    SceneRecord record;
    PreparedScene scene;
    CondParams theta;
    std::vector<NoiseVector> noises{{0.2}, {0.4}};
    FitConfig cfg;

    HandCondCase() {
        record.width = 4;
        record.height = 4;
        record.num_classes = 1;
        record.annotation.presence = {1};
        scene.record = &record;
        scene.masks = {rect_mask(4, 4, 0, 0, 1, 1), rect_mask(4, 4, 2, 2, 3, 3)};
        scene.adjacency.neighbors.assign(2, {});
        scene.adjacency.edge_weights.assign(2, {});
        scene.features = FeatureTable(2, feature_dim(1));
        scene.features(0, 0) = 1.0;
        scene.features(1, 1) = 1.0;
        scene.geometry = pool_geometry(scene.masks);
        scene.annotation = record.annotation;
        theta = make_cond_params(ScorerKind::linear, 1, 1);
        const int in = theta.input_dim();
        theta.values[static_cast<std::size_t>(in + 0)] = 2.0;
        theta.values[static_cast<std::size_t>(in + 1)] = -0.5;
        theta.values[static_cast<std::size_t>(in + 9)] = 1.0;
        cfg.train.term_mode = TermMode::full;
        cfg.train.K = 2;
        cfg.train.epsilon = 1.0;
        cfg.train.aug_sign = 1;
        cfg.disco.gamma = 0.5;
        cfg.noise.dim = 1;
    }

    /// Expected gradient for y_p = (1,1).
    [[nodiscard]] std::vector<double> expected_grad() const {
        const int in = theta.input_dim();
        std::vector<double> g(theta.param_count(), 0.0);
        for (const auto& z : noises) {
            std::vector<double> x(scene.features.row(1).begin(), scene.features.row(1).end());
            x.insert(x.end(), z.begin(), z.end());
            for (int i = 0; i < in; ++i) {
                g[static_cast<std::size_t>(i)] += 0.5 * x[static_cast<std::size_t>(i)];
                g[static_cast<std::size_t>(in + i)] -= 0.5 * x[static_cast<std::size_t>(i)];
            }
        }
        return g;
    }
};

}  // namespace testkit
