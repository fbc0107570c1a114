#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "support.hpp"

using namespace annoconsist;

namespace {

PredParams random_pred(int C, double scale, Rng& rng) {
    auto p = make_pred_params(C);
    for (auto& v : p.values) v = scale * rng.normal();
    return p;
}

std::vector<InstanceLabeling> random_samples(int P, int C, int K, Rng& rng) {
    std::vector<InstanceLabeling> s;
    for (int k = 0; k < K; ++k) s.push_back(testkit::random_labeling(P, C, rng));
    return s;
}

}  // namespace

TEST(PredStep, ZeroLearningRateLeavesParameters) {
    const auto rec = testkit::micro_record(1);
    const auto ps = prepare_scene(rec);
    Rng rng(1);
    auto theta = random_pred(rec.num_classes, 0.3, rng);
    const auto before = theta;
    FitConfig cfg;
    cfg.train.lr_p = 0.0;
    const std::vector<SceneSamples> batch{{&ps, random_samples(ps.size(), rec.num_classes, 3, rng)}};
    Optimizer opt(OptimizerKind::sgd, 0.0);
    pred_step(theta, batch, cfg, opt);
    EXPECT_EQ(theta, before);
}

TEST(PredGradient, MatchesFiniteDifferences) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto rec = testkit::micro_record(50 + static_cast<std::uint64_t>(trial), 1 + trial % 3);
        const auto ps = prepare_scene(rec);
        const auto theta = random_pred(rec.num_classes, 0.5, rng);
        const auto samples = random_samples(ps.size(), rec.num_classes, 4, rng);
        const bool pointwise = trial % 4 == 3;
        const auto analytic = pred_gradient(theta, ps.features, samples, LossConfig{}, 0.5, pointwise);
        const auto numeric = testkit::numeric_gradient(theta.values, [&](const std::vector<double>& w) {
            PredParams p = theta;
            p.values = w;
            return pred_objective(p, ps.features, samples, LossConfig{}, 0.5, pointwise);
        });
        EXPECT_LT(testkit::gradient_rel_error(analytic, numeric), 1e-4) << "trial " << trial;
    }
}

TEST(PredStep, HundredStepsDecreaseObjective) {
    SceneConfig sc;
    sc.min_objects = 1;
    sc.max_objects = 1;
    const auto rec = gen_record(sc, ProposalConfig{}, 3);
    const auto ps = prepare_scene(rec);
    const std::vector<SceneSamples> batch{{&ps, std::vector<InstanceLabeling>(3, seed_labeling(ps))}};
    FitConfig cfg;
    auto theta = make_pred_params(rec.num_classes);
    const auto objective = [&] { return pred_objective(theta, ps.features, batch[0].samples, cfg.loss, cfg.disco.gamma); };
    const double start = objective();
    Optimizer opt(OptimizerKind::sgd, 0.1);
    for (int i = 0; i < 100; ++i) pred_step(theta, batch, cfg, opt);
    EXPECT_LT(objective(), start);
}

TEST(LossAugmented, ZeroLossEqualsPlainInference) {
    Rng rng(4);
    InferenceConfig cfg;
    LossConfig free;
    free.mismatch_cost = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto c = testkit::random_case(rng.uniform_int(1, 8), 3, rng, -1.0, 1.0);
        const auto geom = pool_geometry(c.pool);
        const auto y_ref = testkit::random_labeling(geom.size, 3, rng);
        for (const bool enforce : {true, false}) {
            EXPECT_EQ(loss_augmented_infer(c.G, geom, c.ann, y_ref, 1, 1.0, free, cfg, enforce), greedy_infer(c.G, geom, c.ann, cfg, enforce));
        }
    }
}

TEST(LossAugmented, FlipsWhenLossExceedsGap) {
    const std::vector<PixelMask> pool{testkit::rect_mask(4, 4, 0, 0, 1, 1)};
    const auto geom = pool_geometry(pool);
    Annotation ann;
    ann.presence = {1};
    ScoreTable G(1, 2);
    G(0, 1) = 0.5;  // gap 0.5 in favour of class 1
    const InferenceConfig cfg;
    const InstanceLabeling ref{{1}};
    ASSERT_EQ(greedy_infer(G, geom, ann, cfg, false), ref);
    // background gains ε·1 against y_ref = 1
    EXPECT_EQ(loss_augmented_infer(G, geom, ann, ref, 1, 1.0, LossConfig{}, cfg, false), (InstanceLabeling{{0}}));
    EXPECT_EQ(loss_augmented_infer(G, geom, ann, ref, 1, 0.4, LossConfig{}, cfg, false), ref);
    EXPECT_EQ(loss_augmented_infer(G, geom, ann, ref, -1, 1.0, LossConfig{}, cfg, false), ref);
}

TEST(CondGrad, HandComputedCase) {
    const testkit::HandCondCase h;
    const auto r = cond_grad(h.theta, h.scene, h.noises, InstanceLabeling{{1, 1}}, h.cfg);
    ASSERT_EQ(r.samples.size(), 2u);
    for (const auto& y : r.samples) EXPECT_EQ(y, (InstanceLabeling{{1, 0}}));
    const auto expected = h.expected_grad();
    ASSERT_EQ(r.grad.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(r.grad[i], expected[i], 1e-9) << i;

    const auto zero = cond_grad(h.theta, h.scene, h.noises, InstanceLabeling{{1, 0}}, h.cfg);
    for (const double g : zero.grad) EXPECT_NEAR(g, 0.0, 1e-9);
}

TEST(CondGrad, ZeroLossGivesExactZero) {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto rec = testkit::micro_record(200 + static_cast<std::uint64_t>(trial));
        const auto ps = prepare_scene(rec);
        FitConfig cfg;
        cfg.loss.mismatch_cost = 0.0;
        cfg.train.term_mode = static_cast<TermMode>(trial % 3);
        cfg.train.K = 3;
        auto theta = make_cond_params(trial % 2 ? ScorerKind::mlp : ScorerKind::linear, rec.num_classes, cfg.noise.dim, 5);
        randomize(theta, 1.0, static_cast<std::uint64_t>(trial));
        const auto noises = draw_noises(cfg.sampling(), 7, rec.id, cfg.train.K);
        const auto r = cond_grad(theta, ps, noises, testkit::random_labeling(ps.size(), rec.num_classes, rng), cfg);
        for (const double g : r.grad) ASSERT_EQ(g, 0.0);
    }
}

TEST(CondGrad, InvariantToNoiseOrder) {
    for (int trial = 0; trial < 10; ++trial) {
        const auto rec = testkit::micro_record(300 + static_cast<std::uint64_t>(trial));
        const auto ps = prepare_scene(rec);
        FitConfig cfg = testkit::quick_fit_config();
        cfg.train.K = 4;
        auto theta = make_cond_params(ScorerKind::linear, rec.num_classes, cfg.noise.dim);
        randomize(theta, 1.0, static_cast<std::uint64_t>(trial));
        auto noises = draw_noises(cfg.sampling(), 11, rec.id, cfg.train.K);
        const auto y_p = seed_labeling(ps);
        const auto a = cond_grad(theta, ps, noises, y_p, cfg);
        std::reverse(noises.begin(), noises.end());
        const auto b = cond_grad(theta, ps, noises, y_p, cfg);
        for (std::size_t i = 0; i < a.grad.size(); ++i) EXPECT_NEAR(a.grad[i], b.grad[i], 1e-12);
        for (std::size_t k = 0; k < a.samples.size(); ++k) EXPECT_EQ(a.samples[k], b.samples[a.samples.size() - 1 - k]);
    }
}

TEST(CondGrad, RejectsSingleDraw) {
    const testkit::HandCondCase h;
    EXPECT_THROW((void)cond_grad(h.theta, h.scene, {h.noises[0]}, InstanceLabeling{{1, 1}}, h.cfg), std::invalid_argument);
}

class FitTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        SceneConfig sc;
        ProposalConfig pc;
        records_ = new std::vector<SceneRecord>(gen_records(sc, pc, 0, 4));
    }
    static void TearDownTestSuite() {
        delete records_;
        records_ = nullptr;
    }
    static std::vector<SceneRecord>* records_;
};

std::vector<SceneRecord>* FitTest::records_ = nullptr;

TEST_F(FitTest, ZeroOuterIterationsReturnsInitialModel) {
    auto cfg = testkit::quick_fit_config(3);
    cfg.train.outer_iters = 0;
    const auto res = fit(*records_, cfg);
    EXPECT_EQ(res.model, initial_model(records_->front().num_classes, cfg));
    EXPECT_TRUE(res.log.rows.empty());
}

TEST_F(FitTest, BitReproducible) {
    const auto cfg = testkit::quick_fit_config(4);
    const auto a = fit(*records_, cfg);
    const auto b = fit(*records_, cfg);
    EXPECT_EQ(a.model, b.model);
    std::ostringstream la, lb;
    a.log.write_csv(la);
    b.log.write_csv(lb);
    EXPECT_EQ(la.str(), lb.str());
}

TEST_F(FitTest, HookSeesEveryIteration) {
    auto cfg = testkit::quick_fit_config(5);
    cfg.train.outer_iters = 2;
    std::vector<int> seen;
    Model last;
    const auto res = fit(*records_, cfg, [&](int it, const Model& m) {
        seen.push_back(it);
        last = m;
    });
    EXPECT_EQ(seen, (std::vector<int>{0, 1, 2}));
    EXPECT_EQ(last, res.model);
}

TEST_F(FitTest, SamplesAreAnnotationConsistent) {
    const auto cfg = testkit::quick_fit_config(6);
    const auto res = fit(*records_, cfg);
    const auto scenes = prepare_all(*records_, cfg.pool);
    for (const auto& s : sample_dataset(res.model.cond, scenes, 99, cfg)) {
        for (const auto& y : s.samples) EXPECT_TRUE(higher_order_feasible(y, s.scene->annotation, s.scene->geometry, cfg.infer));
    }
}

TEST(Fit, ReferenceRunFitsTrainingScenes) {
    const RunConfig rc = reference_run_config();
    const auto train = gen_records(rc.scene, rc.proposal, rc.data.train_seed, rc.data.train_scenes);
    auto cfg = rc.fit;
    cfg.train.log_map = false;
    const auto res = fit(train, cfg);
    const double map50 = evaluate(res.model.pred, train, cfg, {0.5}).at(0.5);
    RecordProperty("train_map50", std::to_string(map50));
    EXPECT_GE(map50, 0.8);
}

TEST(TrainConfig, Validation) {
    TrainConfig t;
    EXPECT_NO_THROW(t.validate());
    t.K = 1;
    EXPECT_THROW(t.validate(), std::invalid_argument);
    t = {};
    t.aug_sign = 0;
    EXPECT_THROW(t.validate(), std::invalid_argument);
    t = {};
    t.lr_c = -1.0;
    EXPECT_THROW(t.validate(), std::invalid_argument);
}
