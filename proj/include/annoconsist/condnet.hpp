#pragma once

// Conditional distribution over instance labelings: boundary-aware pairwise
// refinement of the unary scores, the annotation-consistency constraint,
// greedy sampling of labelings and an exhaustive oracle for small pools.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "annoconsist/core.hpp"
#include "annoconsist/loss.hpp"
#include "annoconsist/matrix.hpp"
#include "annoconsist/prepared.hpp"
#include "annoconsist/rng.hpp"
#include "annoconsist/scorer.hpp"

namespace annoconsist {

class InferenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct InferenceConfig {
    double delta = 0.1;
    int n_iters = 3;
    double overlap_t = 0.5;
    double select_threshold = 0.0;  // τ_sel, compared against G(u,j) - G(u,0)
    double box_overlap = 0.5;       // ρ
    double pairwise_weight = 1.0;   // multiplies exp(-I_uv)
    int max_exact_pool = 12;

    void validate() const {
        if (!(delta > 0.0)) throw std::invalid_argument("InferenceConfig: delta must be > 0");
        if (n_iters < 1) throw std::invalid_argument("InferenceConfig: n_iters must be >= 1");
        if (!(overlap_t > 0.0 && overlap_t <= 1.0)) throw std::invalid_argument("InferenceConfig: overlap_t must be in (0,1]");
        if (!(box_overlap > 0.0 && box_overlap <= 1.0)) throw std::invalid_argument("InferenceConfig: box_overlap must be in (0,1]");
        if (!(pairwise_weight >= 0.0 && std::isfinite(pairwise_weight))) throw std::invalid_argument("InferenceConfig: pairwise_weight must be finite and >= 0");
    }
};

/// Which score terms the conditional distribution uses.
enum class TermMode { unary, unary_pairwise, full };

[[nodiscard]] constexpr bool uses_pairwise(TermMode m) noexcept { return m != TermMode::unary; }
[[nodiscard]] constexpr bool uses_higher_order(TermMode m) noexcept { return m == TermMode::full; }

// ---------------------------------------------------------------------------
// Pairwise refinement

/// Score tables of every refinement round; rounds.front() is F, rounds.back() is G.
struct RefineTrace {
    std::vector<ScoreTable> rounds;
    [[nodiscard]] const ScoreTable& result() const { return rounds.back(); }
};

[[nodiscard]] inline RefineTrace pairwise_refine_trace(const ScoreTable& F, const Adjacency& adj, const InferenceConfig& cfg) {
    if (adj.size() != static_cast<std::size_t>(F.rows)) throw DimensionError("pairwise_refine: adjacency size differs from score rows");
    RefineTrace trace;
    trace.rounds.reserve(static_cast<std::size_t>(cfg.n_iters) + 1);
    trace.rounds.push_back(F);
    for (int n = 0; n < cfg.n_iters; ++n) {
        const ScoreTable& prev = trace.rounds.back();
        ScoreTable next = prev;
        for (int u = 0; u < F.rows; ++u) {
            const auto& nb = adj.neighbors[static_cast<std::size_t>(u)];
            const auto& iw = adj.edge_weights[static_cast<std::size_t>(u)];
            for (std::size_t k = 0; k < nb.size(); ++k) {
                const double decay = cfg.pairwise_weight * std::exp(-iw[k]);
                if (decay == 0.0) continue;
                for (int c = 0; c < F.cols; ++c) {
                    const double d = prev(u, c) - prev(nb[k], c);
                    next(u, c) += decay / (d * d + cfg.delta);
                }
            }
        }
        trace.rounds.push_back(std::move(next));
    }
    return trace;
}

/// Synchronous refinement: every round reads only the previous round.
[[nodiscard]] inline ScoreTable pairwise_refine(const ScoreTable& F, const Adjacency& adj, const InferenceConfig& cfg) {
    return pairwise_refine_trace(F, adj, cfg).result();
}

/// Pulls a gradient on the refined scores back onto the unary scores F.
[[nodiscard]] inline Matrix refine_backward(const RefineTrace& trace, const Adjacency& adj, const InferenceConfig& cfg,
                                            const Matrix& upstream) {
    Matrix g = upstream;
    for (std::size_t n = trace.rounds.size() - 1; n >= 1; --n) {
        const ScoreTable& prev = trace.rounds[n - 1];
        Matrix back = g;
        for (int u = 0; u < prev.rows; ++u) {
            const auto& nb = adj.neighbors[static_cast<std::size_t>(u)];
            const auto& iw = adj.edge_weights[static_cast<std::size_t>(u)];
            for (std::size_t k = 0; k < nb.size(); ++k) {
                const double decay = cfg.pairwise_weight * std::exp(-iw[k]);
                if (decay == 0.0) continue;
                const int v = nb[k];
                for (int c = 0; c < prev.cols; ++c) {
                    const double d = prev(u, c) - prev(v, c);
                    const double q = d * d + cfg.delta;
                    // ∂/∂G_u of the (u,v) term in both u's and v's update.
                    back(u, c) += -2.0 * decay * d / (q * q) * (g(u, c) + g(v, c));
                }
            }
        }
        g = std::move(back);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Annotation consistency

[[nodiscard]] inline bool higher_order_feasible(const InstanceLabeling& y, const Annotation& ann, const PoolGeometry& geom,
                                                const InferenceConfig& cfg) {
    if (static_cast<int>(y.size()) != geom.size) throw DimensionError("higher_order_feasible: labeling size differs from pool");
    for (const int j : ann.annotated_classes()) {
        if (std::find(y.labels.begin(), y.labels.end(), j) == y.labels.end()) return false;
    }
    if (ann.boxes) {
        for (const auto& b : *ann.boxes) {
            bool covered = false;
            for (int u = 0; u < geom.size && !covered; ++u) {
                covered = y.labels[static_cast<std::size_t>(u)] == b.class_id &&
                          box_iou(geom.boxes[static_cast<std::size_t>(u)], b.box) >= cfg.box_overlap;
            }
            if (!covered) return false;
        }
    }
    return true;
}

[[nodiscard]] inline bool higher_order_feasible(const InstanceLabeling& y, const Annotation& ann, const std::vector<PixelMask>& pool,
                                                const InferenceConfig& cfg) {
    return higher_order_feasible(y, ann, pool_geometry(pool), cfg);
}

/// Σ_u G(u, y_u) + Q(y), Q = 0 when feasible and -∞ otherwise.
[[nodiscard]] inline double total_score(const ScoreTable& G, const InstanceLabeling& y, const Annotation& ann, const PoolGeometry& geom,
                                        const InferenceConfig& cfg) {
    if (static_cast<int>(y.size()) != G.rows) throw DimensionError("total_score: labeling size differs from score rows");
    if (!higher_order_feasible(y, ann, geom, cfg)) return -std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (int u = 0; u < G.rows; ++u) s += G(u, y.labels[static_cast<std::size_t>(u)]);
    return s;
}

[[nodiscard]] inline double total_score(const ScoreTable& G, const InstanceLabeling& y, const Annotation& ann,
                                        const std::vector<PixelMask>& pool, const InferenceConfig& cfg) {
    return total_score(G, y, ann, pool_geometry(pool), cfg);
}

// ---------------------------------------------------------------------------
// Greedy inference

namespace detail {

/// Something that must be covered by a selected proposal: an annotated class
/// (image-level) or an annotated box.
struct CoverageUnit {
    int class_id = 0;
    std::vector<char> eligible;
};

inline std::vector<CoverageUnit> coverage_units(const Annotation& ann, const PoolGeometry& geom, const InferenceConfig& cfg) {
    std::vector<CoverageUnit> units;
    const auto P = static_cast<std::size_t>(geom.size);
    if (ann.boxes && !ann.boxes->empty()) {
        std::vector<char> class_boxed(ann.presence.size() + 1, 0);
        for (const auto& b : *ann.boxes) {
            CoverageUnit unit{b.class_id, std::vector<char>(P, 0)};
            for (std::size_t u = 0; u < P; ++u) unit.eligible[u] = box_iou(geom.boxes[u], b.box) >= cfg.box_overlap ? 1 : 0;
            if (b.class_id >= 1 && static_cast<std::size_t>(b.class_id) < class_boxed.size()) class_boxed[static_cast<std::size_t>(b.class_id)] = 1;
            units.push_back(std::move(unit));
        }
        for (const int j : ann.annotated_classes()) {
            if (!class_boxed[static_cast<std::size_t>(j)]) units.push_back({j, std::vector<char>(P, 1)});
        }
    } else {
        for (const int j : ann.annotated_classes()) units.push_back({j, std::vector<char>(P, 1)});
    }
    return units;
}

/// Chooses distinct representative proposals for every coverage unit that
/// minimise the total score given up relative to each proposal's best free
/// choice; ties prefer the larger total gain, then earlier proposals.
inline std::vector<int> choose_representatives(const std::vector<CoverageUnit>& units, const Matrix& gain,
                                               const std::vector<double>& best_free) {
    const std::size_t U = units.size();
    std::vector<int> reps(U, -1);
    if (U == 0) return reps;
    if (U > 16) throw InferenceError("greedy_infer: too many coverage units");
    const int P = gain.rows;
    const std::size_t S = std::size_t{1} << U;
    struct Cell {
        double regret = std::numeric_limits<double>::infinity();
        double neg_gain = 0.0;
    };
    const auto better = [](const Cell& a, const Cell& b) {
        return a.regret < b.regret || (a.regret == b.regret && a.neg_gain < b.neg_gain);
    };
    std::vector<Cell> dp(S);
    dp[0].regret = 0.0;
    // choice[u][mask]: unit taken by proposal u when reaching mask, or -1.
    std::vector<std::vector<int>> choice(static_cast<std::size_t>(P), std::vector<int>(S, -1));
    for (int u = 0; u < P; ++u) {
        std::vector<Cell> next = dp;
        for (std::size_t mask = 0; mask < S; ++mask) {
            if (!std::isfinite(dp[mask].regret)) continue;
            for (std::size_t k = 0; k < U; ++k) {
                if (mask & (std::size_t{1} << k)) continue;
                if (!units[k].eligible[static_cast<std::size_t>(u)]) continue;
                const double g = gain(u, units[k].class_id);
                const Cell cand{dp[mask].regret + (best_free[static_cast<std::size_t>(u)] - g), dp[mask].neg_gain - g};
                const std::size_t to = mask | (std::size_t{1} << k);
                if (better(cand, next[to])) {
                    next[to] = cand;
                    choice[static_cast<std::size_t>(u)][to] = static_cast<int>(k);
                }
            }
        }
        dp = std::move(next);
    }
    // Cover as many units as possible (units with no eligible proposal stay uncovered).
    std::size_t target = 0;
    for (std::size_t mask = 0; mask < S; ++mask) {
        if (!std::isfinite(dp[mask].regret)) continue;
        const auto pc = std::popcount(mask);
        const auto tc = std::popcount(target);
        if (pc > tc || (pc == tc && better(dp[mask], dp[target]))) target = mask;
    }
    std::size_t mask = target;
    for (int u = P - 1; u >= 0 && mask != 0; --u) {
        const int k = choice[static_cast<std::size_t>(u)][mask];
        if (k < 0) continue;
        // Only accept the choice if it lies on the optimal path reconstructed so far.
        reps[static_cast<std::size_t>(k)] = u;
        mask &= ~(std::size_t{1} << static_cast<std::size_t>(k));
    }
    return reps;
}

}  // namespace detail

/// Greedy sampler. For each annotated class in ascending order, proposals are
/// visited by descending gain G(u,j) - G(u,0); a proposal is taken when its
/// gain exceeds τ_sel and j is its best annotated class, and every remaining
/// r_l with overlap_fraction(r_i, r_l) > t is removed from the class's list.
/// With `enforce_higher_order`, one representative per annotated class (or
/// box) is reserved first so the output is annotation consistent.
[[nodiscard]] inline InstanceLabeling greedy_infer(const ScoreTable& G, const PoolGeometry& geom, const Annotation& ann,
                                                   const InferenceConfig& cfg, bool enforce_higher_order = true) {
    const int P = geom.size;
    if (G.rows != P) throw DimensionError("greedy_infer: score rows differ from pool size");
    const auto classes = ann.annotated_classes();
    InstanceLabeling y{std::vector<int>(static_cast<std::size_t>(P), 0)};
    if (classes.empty()) return y;
    if (P == 0) throw InferenceError("greedy_infer: empty pool for an annotated class");
    for (const int j : classes) {
        if (j >= G.cols) throw DimensionError("greedy_infer: annotated class outside the score table");
    }

    Matrix gain(P, G.cols);
    std::vector<int> best_class(static_cast<std::size_t>(P), 0);
    std::vector<double> best_free(static_cast<std::size_t>(P), 0.0);
    for (int u = 0; u < P; ++u) {
        double best = -std::numeric_limits<double>::infinity();
        for (const int j : classes) {
            gain(u, j) = G(u, j) - G(u, 0);
            if (gain(u, j) > best) {
                best = gain(u, j);
                best_class[static_cast<std::size_t>(u)] = j;
            }
        }
        best_free[static_cast<std::size_t>(u)] = std::max(0.0, best);
    }

    std::vector<char> reserved(static_cast<std::size_t>(P), 0);
    std::vector<std::vector<int>> reps_of_class(static_cast<std::size_t>(G.cols));
    if (enforce_higher_order) {
        const auto units = detail::coverage_units(ann, geom, cfg);
        const auto reps = detail::choose_representatives(units, gain, best_free);
        for (std::size_t k = 0; k < units.size(); ++k) {
            if (reps[k] < 0) continue;
            reserved[static_cast<std::size_t>(reps[k])] = 1;
            reps_of_class[static_cast<std::size_t>(units[k].class_id)].push_back(reps[k]);
        }
    }

    const double t = cfg.overlap_t;
    for (const int j : classes) {
        std::vector<int> order(static_cast<std::size_t>(P));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return gain(a, j) > gain(b, j); });
        std::vector<char> removed(static_cast<std::size_t>(P), 0);
        const auto take = [&](int i) {
            y.labels[static_cast<std::size_t>(i)] = j;
            removed[static_cast<std::size_t>(i)] = 1;
            for (int l = 0; l < P; ++l) {
                if (removed[static_cast<std::size_t>(l)] || reserved[static_cast<std::size_t>(l)]) continue;
                if (geom.fraction(i, l) > t) removed[static_cast<std::size_t>(l)] = 1;
            }
        };
        auto& reps = reps_of_class[static_cast<std::size_t>(j)];
        std::stable_sort(reps.begin(), reps.end(), [&](int a, int b) { return gain(a, j) > gain(b, j); });
        for (const int r : reps) take(r);
        for (const int u : order) {
            if (removed[static_cast<std::size_t>(u)] || reserved[static_cast<std::size_t>(u)]) continue;
            if (y.labels[static_cast<std::size_t>(u)] != 0) continue;
            if (!(gain(u, j) > cfg.select_threshold)) break;
            if (best_class[static_cast<std::size_t>(u)] != j) continue;
            take(u);
        }
    }
    return y;
}

[[nodiscard]] inline InstanceLabeling greedy_infer(const ScoreTable& G, const std::vector<PixelMask>& pool, const Annotation& ann,
                                                   const InferenceConfig& cfg, bool enforce_higher_order = true) {
    return greedy_infer(G, pool_geometry(pool), ann, cfg, enforce_higher_order);
}

/// Exhaustive argmax of total_score over labelings that use only annotated
/// classes and whose same-class pairs satisfy |r_a ∩ r_b| / max(|r_a|,|r_b|) ≤ t.
/// Ties resolve to the lexicographically smallest labeling.
[[nodiscard]] inline InstanceLabeling exact_infer(const ScoreTable& G, const PoolGeometry& geom, const Annotation& ann,
                                                  const InferenceConfig& cfg) {
    const int P = geom.size;
    if (P > cfg.max_exact_pool) {
        throw InferenceError("exact_infer: pool of " + std::to_string(P) + " exceeds the limit of " + std::to_string(cfg.max_exact_pool));
    }
    if (G.rows != P) throw DimensionError("exact_infer: score rows differ from pool size");
    std::vector<int> labels{0};
    for (const int j : ann.annotated_classes()) labels.push_back(j);

    std::vector<double> optimistic(static_cast<std::size_t>(P) + 1, 0.0);
    for (int u = P - 1; u >= 0; --u) {
        double m = -std::numeric_limits<double>::infinity();
        for (const int c : labels) m = std::max(m, G(u, c));
        optimistic[static_cast<std::size_t>(u)] = optimistic[static_cast<std::size_t>(u) + 1] + m;
    }
    const auto compatible = [&](int a, int b) {
        const double larger = static_cast<double>(std::max(geom.area[static_cast<std::size_t>(a)], geom.area[static_cast<std::size_t>(b)]));
        return static_cast<double>(geom.intersection(a, b)) / larger <= cfg.overlap_t;
    };

    InstanceLabeling current{std::vector<int>(static_cast<std::size_t>(P), 0)};
    InstanceLabeling best = current;
    double best_score = -std::numeric_limits<double>::infinity();
    bool found = false;

    const auto recurse = [&](auto&& self, int u, double partial) -> void {
        if (found && partial + optimistic[static_cast<std::size_t>(u)] + 1e-9 <= best_score) return;
        if (u == P) {
            if (!higher_order_feasible(current, ann, geom, cfg)) return;
            const double s = total_score(G, current, ann, geom, cfg);
            if (!found || s > best_score) {
                best_score = s;
                best = current;
                found = true;
            }
            return;
        }
        for (const int c : labels) {
            if (c != 0) {
                bool ok = true;
                for (int v = 0; v < u && ok; ++v) {
                    if (current.labels[static_cast<std::size_t>(v)] == c) ok = compatible(u, v);
                }
                if (!ok) continue;
            }
            current.labels[static_cast<std::size_t>(u)] = c;
            self(self, u + 1, partial + G(u, c));
            current.labels[static_cast<std::size_t>(u)] = 0;
        }
    };
    recurse(recurse, 0, 0.0);
    if (!found) throw InferenceError("exact_infer: no annotation-consistent labeling exists");
    return best;
}

[[nodiscard]] inline InstanceLabeling exact_infer(const ScoreTable& G, const std::vector<PixelMask>& pool, const Annotation& ann,
                                                  const InferenceConfig& cfg) {
    return exact_infer(G, pool_geometry(pool), ann, cfg);
}

// ---------------------------------------------------------------------------
// Sampling

struct CondSample {
    NoiseVector z;
    RefineTrace trace;  // trace.rounds.front() is F
    InstanceLabeling labeling;

    [[nodiscard]] const ScoreTable& refined() const { return trace.result(); }
};

struct SamplingOptions {
    TermMode mode = TermMode::full;
    NoiseConfig noise;
    bool zero_noise = false;  // pointwise conditional
};

/// Unary scores for one noise draw, refined when the mode has the pairwise term.
[[nodiscard]] inline RefineTrace conditional_scores(const CondParams& theta, const PreparedScene& ps, const NoiseVector& z,
                                                    const InferenceConfig& cfg, TermMode mode) {
    ScoreTable F = score_all(theta, ps.features, z);
    if (!uses_pairwise(mode)) {
        RefineTrace t;
        t.rounds.push_back(std::move(F));
        return t;
    }
    return pairwise_refine_trace(F, ps.adjacency, cfg);
}

[[nodiscard]] inline NoiseVector draw_noise(const SamplingOptions& opt, std::uint64_t seed, std::uint64_t scene_id, int k) {
    if (opt.zero_noise) return NoiseVector(static_cast<std::size_t>(opt.noise.dim), 0.0);
    Rng rng(derive_seed(seed, {scene_id, static_cast<std::uint64_t>(k)}));
    return sample_noise(opt.noise, rng);
}

/// K labelings from K noise draws; stream k is seeded by (seed, scene id, k).
[[nodiscard]] inline std::vector<CondSample> sample_k(const CondParams& theta, const PreparedScene& ps, int K, std::uint64_t seed,
                                                      const InferenceConfig& cfg, const SamplingOptions& opt = {}) {
    if (K < 1) throw std::invalid_argument("sample_k: K must be >= 1");
    std::vector<CondSample> out;
    out.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        CondSample s;
        s.z = draw_noise(opt, seed, ps.record->id, k);
        s.trace = conditional_scores(theta, ps, s.z, cfg, opt.mode);
        s.labeling = greedy_infer(s.refined(), ps.geometry, ps.annotation, cfg, uses_higher_order(opt.mode));
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace annoconsist
