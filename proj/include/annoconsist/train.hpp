#pragma once

// Block coordinate descent over the two distributions. The prediction side
// takes exact gradient steps on its dissimilarity objective; the conditional
// side uses direct-loss-minimisation estimates built from loss-augmented
// greedy inference.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "annoconsist/condnet.hpp"
#include "annoconsist/disco.hpp"
#include "annoconsist/eval.hpp"
#include "annoconsist/loss.hpp"
#include "annoconsist/parallel.hpp"
#include "annoconsist/prednet.hpp"
#include "annoconsist/prepared.hpp"
#include "annoconsist/scorer.hpp"

namespace annoconsist {

class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
    int outer_iters = 4;
    int init_epochs = 5;
    int warmup_epochs = 5;
    int cond_epochs = 5;
    int pred_epochs = 5;
    int cond_batch = 10;
    int pred_batch = 1;
    double lr_p = 0.5;
    double lr_c = 0.05;
    OptimizerKind optimizer_p = OptimizerKind::sgd;
    OptimizerKind optimizer_c = OptimizerKind::sgd;
    int K = 10;
    double epsilon = 1.0;
    int aug_sign = 1;
    std::uint64_t seed = 0;
    ScorerKind scorer = ScorerKind::linear;
    int hidden = 32;
    double init_scale = 0.01;
    TermMode term_mode = TermMode::full;
    bool pointwise_pred = false;  // drop the prediction self-diversity
    bool pointwise_cond = false;  // zero noise and drop the conditional self-diversity
    bool log_map = true;
    int jobs = 1;

    void validate() const {
        if (outer_iters < 0) throw std::invalid_argument("TrainConfig: outer_iters must be >= 0");
        if (init_epochs < 0 || warmup_epochs < 0 || cond_epochs < 1 || pred_epochs < 1) {
            throw std::invalid_argument("TrainConfig: epoch counts must be positive");
        }
        if (cond_batch < 1 || pred_batch < 1) throw std::invalid_argument("TrainConfig: batch sizes must be >= 1");
        if (!(lr_p >= 0.0) || !(lr_c >= 0.0)) throw std::invalid_argument("TrainConfig: learning rates must be >= 0");
        if (K < 2) throw std::invalid_argument("TrainConfig: K must be >= 2");
        if (!(epsilon > 0.0)) throw std::invalid_argument("TrainConfig: epsilon must be > 0");
        if (aug_sign != 1 && aug_sign != -1) throw std::invalid_argument("TrainConfig: aug_sign must be +1 or -1");
        if (hidden < 1) throw std::invalid_argument("TrainConfig: hidden must be >= 1");
        if (jobs < 1) throw std::invalid_argument("TrainConfig: jobs must be >= 1");
    }
};

/// Everything the learner needs besides data.
struct FitConfig {
    TrainConfig train;
    InferenceConfig infer;
    LossConfig loss;
    DiscoConfig disco;
    NoiseConfig noise;
    DecodeConfig decode;
    PoolOptions pool;

    void validate() const {
        train.validate();
        infer.validate();
        loss.validate();
        disco.validate();
        if (noise.dim < 1 || !(noise.high > noise.low)) throw std::invalid_argument("NoiseConfig: need dim >= 1 and high > low");
    }

    [[nodiscard]] SamplingOptions sampling() const {
        return {train.term_mode, noise, train.pointwise_cond};
    }
};

struct Model {
    CondParams cond;
    PredParams pred;
    friend bool operator==(const Model&, const Model&) = default;
};

// ---------------------------------------------------------------------------
// Optimisers

struct Optimizer {
    OptimizerKind kind = OptimizerKind::sgd;
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m;
    std::vector<double> v;
    long t = 0;

    Optimizer() = default;
    Optimizer(OptimizerKind k, double rate) : kind(k), lr(rate) {}

    void step(std::vector<double>& params, const std::vector<double>& grad) {
        if (grad.size() != params.size()) throw DimensionError("Optimizer: gradient size differs from parameters");
        if (kind == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
            return;
        }
        if (m.size() != params.size()) {
            m.assign(params.size(), 0.0);
            v.assign(params.size(), 0.0);
        }
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

inline void require_finite(std::span<const double> g, const char* what) {
    for (const double x : g) {
        if (!std::isfinite(x)) throw NonFiniteError(std::string(what) + ": non-finite gradient");
    }
}

// ---------------------------------------------------------------------------
// Prediction side

/// div_pc − w·div_pp with w = 1−γ, or 0 for the pointwise prediction network.
[[nodiscard]] inline double pred_objective(const PredParams& theta, const FeatureTable& feats, std::span<const InstanceLabeling> samples,
                                           const LossConfig& loss, double gamma, bool pointwise = false) {
    const PredictiveState p = predict(theta, feats);
    const double w = pointwise ? 0.0 : 1.0 - gamma;
    return div_pc(p, samples, loss) - w * div_pp(p, loss);
}

[[nodiscard]] inline std::vector<double> pred_gradient(const PredParams& theta, const FeatureTable& feats,
                                                       std::span<const InstanceLabeling> samples, const LossConfig& loss,
                                                       double gamma, bool pointwise = false) {
    if (samples.empty()) throw std::invalid_argument("pred_gradient: no conditional samples");
    const PredictiveState p = predict(theta, feats);
    const double w = pointwise ? 0.0 : 1.0 - gamma;
    const int C1 = theta.outputs();
    const double invK = 1.0 / static_cast<double>(samples.size());
    std::vector<double> grad(theta.param_count(), 0.0);
    std::vector<double> gp(static_cast<std::size_t>(C1));
    for (int u = 0; u < feats.rows; ++u) {
        for (int c = 0; c < C1; ++c) {
            double g = 0.0;
            for (const auto& y : samples) g += proposal_cost(c, y.labels[static_cast<std::size_t>(u)], loss);
            g *= invK;
            double self = 0.0;
            for (int d = 0; d < C1; ++d) self += proposal_cost(c, d, loss) * p(u, d);
            gp[static_cast<std::size_t>(c)] = g - 2.0 * w * self;
        }
        double mean = 0.0;
        for (int c = 0; c < C1; ++c) mean += p(u, c) * gp[static_cast<std::size_t>(c)];
        for (int c = 0; c < C1; ++c) {
            const double dlogit = p(u, c) * (gp[static_cast<std::size_t>(c)] - mean);
            if (dlogit == 0.0) continue;
            axpy(dlogit, feats.row(u), std::span<double>(grad).subspan(static_cast<std::size_t>(c) * theta.feature_dim, theta.feature_dim));
        }
    }
    return grad;
}

struct SceneSamples {
    const PreparedScene* scene = nullptr;
    std::vector<InstanceLabeling> samples;
};

/// One step on the mean prediction objective over a batch of scenes whose
/// conditional samples are held fixed.
inline void pred_step(PredParams& theta, std::span<const SceneSamples> batch, const FitConfig& cfg, Optimizer& opt) {
    if (batch.empty()) return;
    const auto grads = parallel_map(batch.size(), cfg.train.jobs, [&](std::size_t i) {
        return pred_gradient(theta, batch[i].scene->features, batch[i].samples, cfg.loss, cfg.disco.gamma, cfg.train.pointwise_pred);
    });
    std::vector<double> total(theta.param_count(), 0.0);
    for (const auto& g : grads) axpy(1.0 / static_cast<double>(batch.size()), g, total);
    require_finite(total, "pred_step");
    opt.step(theta.values, total);
}

// ---------------------------------------------------------------------------
// Conditional side

/// Greedy inference on G + sign·ε·cost(·, y_ref).
[[nodiscard]] inline InstanceLabeling loss_augmented_infer(const ScoreTable& G, const PoolGeometry& geom, const Annotation& ann,
                                                           const InstanceLabeling& y_ref, int sign, double epsilon,
                                                           const LossConfig& loss, const InferenceConfig& cfg,
                                                           bool enforce_higher_order = true) {
    if (y_ref.size() != static_cast<std::size_t>(G.rows)) throw DimensionError("loss_augmented_infer: reference labeling size mismatch");
    ScoreTable aug = G;
    for (int u = 0; u < G.rows; ++u) {
        const int r = y_ref.labels[static_cast<std::size_t>(u)];
        for (int c = 0; c < G.cols; ++c) aug(u, c) += sign * epsilon * proposal_cost(c, r, loss);
    }
    return greedy_infer(aug, geom, ann, cfg, enforce_higher_order);
}

struct CondGradResult {
    std::vector<double> grad;
    std::vector<InstanceLabeling> samples;  // ŷ_c^k
};

namespace detail {

/// t += w·(onehot(a) − onehot(b)), touching only the proposals where they differ.
inline void add_difference(Matrix& t, const InstanceLabeling& a, const InstanceLabeling& b, double w) {
    for (std::size_t u = 0; u < a.size(); ++u) {
        if (a.labels[u] == b.labels[u]) continue;
        t(static_cast<int>(u), a.labels[u]) += w;
        t(static_cast<int>(u), b.labels[u]) -= w;
    }
}

}  // namespace detail

/// Direct-loss-minimisation estimate of ∇θ_c DISC for one scene, given the
/// noise draws and the prediction-side reference labeling y_p.
[[nodiscard]] inline CondGradResult cond_grad(const CondParams& theta, const PreparedScene& ps, const std::vector<NoiseVector>& noises,
                                              const InstanceLabeling& y_p, const FitConfig& cfg) {
    const std::size_t K = noises.size();
    if (K < 2) throw std::invalid_argument("cond_grad: needs at least two noise draws");
    const TermMode mode = cfg.train.term_mode;
    const bool enforce = uses_higher_order(mode);
    const LossConfig loss = cfg.loss.conditional_side();
    const double eps = cfg.train.epsilon;
    const int sign = cfg.train.aug_sign;
    const double gamma = cfg.train.pointwise_cond ? 0.0 : cfg.disco.gamma;

    std::vector<RefineTrace> traces;
    CondGradResult res;
    traces.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        traces.push_back(conditional_scores(theta, ps, noises[k], cfg.infer, mode));
        require_finite(traces.back().result().data, "cond_grad");
        res.samples.push_back(greedy_infer(traces.back().result(), ps.geometry, ps.annotation, cfg.infer, enforce));
    }

    const int P = ps.size();
    const int C1 = theta.outputs();
    std::vector<Matrix> T(K, Matrix(P, C1));
    // difference quotient with step sign·ε
    const double scale = static_cast<double>(sign) / eps;
    const double wa = scale / static_cast<double>(K);
    const double wb = scale * gamma * 2.0 / static_cast<double>(K * (K - 1));
    for (std::size_t k = 0; k < K; ++k) {
        const ScoreTable& G = traces[k].result();
        const auto ya = loss_augmented_infer(G, ps.geometry, ps.annotation, y_p, sign, eps, loss, cfg.infer, enforce);
        detail::add_difference(T[k], ya, res.samples[k], wa);
        if (wb == 0.0) continue;
        // Σ_{k≠l} S^l(ŷ_c^l) reindexed as Σ_{k≠l} S^k(ŷ_c^k)
        for (std::size_t l = 0; l < K; ++l) {
            if (l == k) continue;
            const auto yb = loss_augmented_infer(G, ps.geometry, ps.annotation, res.samples[l], sign, eps, loss, cfg.infer, enforce);
            detail::add_difference(T[k], yb, res.samples[k], -wb);
        }
    }

    res.grad.assign(theta.param_count(), 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        const Matrix up = uses_pairwise(mode) ? refine_backward(traces[k], ps.adjacency, cfg.infer, T[k]) : T[k];
        axpy(1.0, score_vjp(theta, ps.features, noises[k], up), res.grad);
    }
    require_finite(res.grad, "cond_grad");
    return res;
}

[[nodiscard]] inline std::vector<NoiseVector> draw_noises(const SamplingOptions& opt, std::uint64_t seed, std::uint64_t scene_id, int K) {
    std::vector<NoiseVector> z;
    z.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) z.push_back(draw_noise(opt, seed, scene_id, k));
    return z;
}

struct CondTarget {
    const PreparedScene* scene = nullptr;
    InstanceLabeling y_p;
};

inline void cond_step(CondParams& theta, std::span<const CondTarget> batch, std::uint64_t step_seed, const FitConfig& cfg,
                      Optimizer& opt) {
    if (batch.empty()) return;
    const SamplingOptions so = cfg.sampling();
    const auto grads = parallel_map(batch.size(), cfg.train.jobs, [&](std::size_t i) {
        const auto& ps = *batch[i].scene;
        return cond_grad(theta, ps, draw_noises(so, step_seed, ps.record->id, cfg.train.K), batch[i].y_p, cfg).grad;
    });
    std::vector<double> total(theta.param_count(), 0.0);
    for (const auto& g : grads) axpy(1.0 / static_cast<double>(batch.size()), g, total);
    require_finite(total, "cond_step");
    opt.step(theta.values, total);
}

/// Pseudo target built from the seed masks: each annotated seed labels the
/// proposal that covers at least half of it with the best combined seed
/// coverage and boundary strength (falls back to the best coverage).
[[nodiscard]] inline InstanceLabeling seed_labeling(const PreparedScene& ps) {
    InstanceLabeling y{std::vector<int>(static_cast<std::size_t>(ps.size()), 0)};
    const auto& ann = ps.annotation;
    for (const auto& s : ps.record->seeds) {
        if (!ann.has(s.class_id) || s.mask.empty()) continue;
        int best = -1;
        double best_score = -1.0;
        int fallback = -1;
        double best_cover = 0.0;
        for (int u = 0; u < ps.size(); ++u) {
            const double cover = overlap_fraction(ps.masks[static_cast<std::size_t>(u)], s.mask);
            if (cover > best_cover) {
                best_cover = cover;
                fallback = u;
            }
            if (cover < 0.5) continue;
            const double score = cover + ps.features(u, 6);
            if (score > best_score) {
                best_score = score;
                best = u;
            }
        }
        const int pick = best >= 0 ? best : fallback;
        if (pick >= 0) y.labels[static_cast<std::size_t>(pick)] = s.class_id;
    }
    return y;
}

// ---------------------------------------------------------------------------
// fit

struct LogRow {
    std::string phase;
    int iter = 0;
    int epoch = 0;
    DiscoTerms terms;
    double map50 = 0.0;
};

struct TrainLog {
    std::vector<LogRow> rows;

    void write_csv(std::ostream& os) const {
        os << "phase,iter,epoch,disc,div_pc,div_cc,div_pp,map50\n";
        os.precision(10);
        for (const auto& r : rows) {
            os << r.phase << ',' << r.iter << ',' << r.epoch << ',' << r.terms.disc << ',' << r.terms.div_pc << ',' << r.terms.div_cc << ','
               << r.terms.div_pp << ',' << r.map50 << '\n';
        }
    }
};

struct FitResult {
    Model model;
    TrainLog log;
};

/// Called after initialisation (iteration 0) and after every outer iteration.
using IterationHook = std::function<void(int iter, const Model&)>;

[[nodiscard]] inline Model initial_model(int num_classes, const FitConfig& cfg) {
    Model m;
    m.cond = make_cond_params(cfg.train.scorer, num_classes, cfg.noise.dim, cfg.train.hidden);
    randomize(m.cond, cfg.train.init_scale, cfg.train.seed);
    m.pred = make_pred_params(num_classes);
    return m;
}

[[nodiscard]] inline std::vector<PreparedScene> prepare_all(const std::vector<SceneRecord>& records, const PoolOptions& opt, int jobs = 1) {
    return parallel_map(records.size(), jobs, [&](std::size_t i) { return prepare_scene(records[i], opt); });
}

[[nodiscard]] inline std::vector<ScenePredictions> predict_dataset(const PredParams& theta, std::span<const PreparedScene> scenes,
                                                                   const DecodeConfig& dc, int jobs = 1) {
    return parallel_map(scenes.size(), jobs, [&](std::size_t i) { return decode(predict(theta, scenes[i]), scenes[i].masks, dc); });
}

/// Conditional samples for every scene with one shared noise stream seed.
[[nodiscard]] inline std::vector<SceneSamples> sample_dataset(const CondParams& theta, std::span<const PreparedScene> scenes,
                                                              std::uint64_t seed, const FitConfig& cfg) {
    const SamplingOptions so = cfg.sampling();
    return parallel_map(scenes.size(), cfg.train.jobs, [&](std::size_t i) {
        SceneSamples s{&scenes[i], {}};
        for (auto& c : sample_k(theta, scenes[i], cfg.train.K, seed, cfg.infer, so)) s.samples.push_back(std::move(c.labeling));
        return s;
    });
}

namespace detail {

inline LogRow log_row(const std::string& phase, int iter, int epoch, const Model& m, std::span<const PreparedScene> scenes,
                      std::span<const SceneSamples> samples, const FitConfig& cfg) {
    LogRow row{phase, iter, epoch, {}, 0.0};
    const LossConfig loss = cfg.loss.conditional_side();
    const auto terms = parallel_map(scenes.size(), cfg.train.jobs, [&](std::size_t i) {
        return disco_terms(predict(m.pred, scenes[i]), samples[i].samples, loss, cfg.disco);
    });
    std::vector<double> pc, cc, pp, d;
    for (const auto& t : terms) {
        pc.push_back(t.div_pc);
        cc.push_back(t.div_cc);
        pp.push_back(t.div_pp);
        d.push_back(t.disc);
        if (!std::isfinite(t.disc)) throw NonFiniteError("fit: non-finite dissimilarity");
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, scenes.size()));
    row.terms = {pairwise_sum(pc) / n, pairwise_sum(cc) / n, pairwise_sum(pp) / n, pairwise_sum(d) / n};
    if (cfg.train.log_map) {
        std::vector<SceneTruth> gts;
        for (const auto& s : scenes) gts.push_back(s.record->gt);
        row.map50 = map_r(predict_dataset(m.pred, scenes, cfg.decode, cfg.train.jobs), gts, {0.5}).map[0];
    }
    return row;
}

template <class Item>
std::vector<std::span<const Item>> batches(const std::vector<Item>& items, int batch_size) {
    std::vector<std::span<const Item>> out;
    const std::size_t b = static_cast<std::size_t>(batch_size);
    for (std::size_t i = 0; i < items.size(); i += b) out.emplace_back(items.data() + i, std::min(b, items.size() - i));
    return out;
}

enum SeedTag : std::uint64_t { tag_init = 1, tag_cond = 2, tag_sample = 3, tag_log = 4 };

}  // namespace detail

/// Initialisation against seed-derived targets, a prediction warm-up, then
/// `outer_iters` rounds of (conditional phase, resample, prediction phase).
[[nodiscard]] inline FitResult fit(std::span<const PreparedScene> scenes, const FitConfig& cfg, const IterationHook& hook = {}) {
    cfg.validate();
    if (scenes.empty()) throw std::invalid_argument("fit: empty dataset");
    const int C = scenes.front().num_classes();
    for (const auto& s : scenes) {
        if (s.num_classes() != C) throw std::invalid_argument("fit: scenes disagree on the number of classes");
    }
    const TrainConfig& tc = cfg.train;
    FitResult res{initial_model(C, cfg), {}};
    if (tc.outer_iters == 0) return res;
    Model& m = res.model;

    Optimizer opt_c(tc.optimizer_c, tc.lr_c);
    Optimizer opt_p(tc.optimizer_p, tc.lr_p);

    const auto run_cond_phase = [&](const std::string& phase, int iter, int epochs, const std::vector<CondTarget>& targets) {
        for (int e = 0; e < epochs; ++e) {
            int b = 0;
            for (const auto batch : detail::batches(targets, tc.cond_batch)) {
                const auto step_seed = derive_seed(tc.seed, {detail::tag_cond, static_cast<std::uint64_t>(iter), static_cast<std::uint64_t>(e),
                                                             static_cast<std::uint64_t>(b++)});
                cond_step(m.cond, batch, step_seed, cfg, opt_c);
            }
            const auto log_seed = derive_seed(tc.seed, {detail::tag_log, static_cast<std::uint64_t>(iter), static_cast<std::uint64_t>(e)});
            const auto samples = sample_dataset(m.cond, scenes, log_seed, cfg);
            res.log.rows.push_back(detail::log_row(phase, iter, e, m, scenes, samples, cfg));
        }
    };
    const auto run_pred_phase = [&](const std::string& phase, int iter, int epochs) {
        const auto seed = derive_seed(tc.seed, {detail::tag_sample, static_cast<std::uint64_t>(iter)});
        const auto samples = sample_dataset(m.cond, scenes, seed, cfg);
        for (int e = 0; e < epochs; ++e) {
            for (const auto batch : detail::batches(samples, tc.pred_batch)) pred_step(m.pred, batch, cfg, opt_p);
            res.log.rows.push_back(detail::log_row(phase, iter, e, m, scenes, samples, cfg));
        }
    };

    std::vector<CondTarget> targets;
    for (const auto& s : scenes) targets.push_back({&s, seed_labeling(s)});
    run_cond_phase("init", 0, tc.init_epochs, targets);
    run_pred_phase("warmup", 0, tc.warmup_epochs);
    if (hook) hook(0, m);

    for (int it = 1; it <= tc.outer_iters; ++it) {
        for (auto& t : targets) t.y_p = argmax_labeling(predict(m.pred, *t.scene));
        run_cond_phase("cond", it, tc.cond_epochs, targets);
        run_pred_phase("pred", it, tc.pred_epochs);
        if (hook) hook(it, m);
    }
    return res;
}

[[nodiscard]] inline FitResult fit(const std::vector<SceneRecord>& records, const FitConfig& cfg, const IterationHook& hook = {}) {
    const auto scenes = prepare_all(records, cfg.pool, cfg.train.jobs);
    return fit(scenes, cfg, hook);
}

/// Held-out evaluation of a prediction network on image-level pools.
[[nodiscard]] inline EvalResult evaluate(const PredParams& theta, const std::vector<SceneRecord>& records, const FitConfig& cfg,
                                         const std::vector<double>& thresholds = kDefaultIouThresholds) {
    PoolOptions po = cfg.pool;
    po.use_boxes = false;
    const auto scenes = prepare_all(records, po, cfg.train.jobs);
    return map_r(predict_dataset(theta, scenes, cfg.decode, cfg.train.jobs), truths_of(records), thresholds);
}

}  // namespace annoconsist
