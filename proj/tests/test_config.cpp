#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"

using namespace annoconsist;
using nlohmann::json;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("annoconsist_test_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST(RunConfig, EmptyDocumentIsReference) {
    const auto rc = run_config_from_json(json::object());
    EXPECT_EQ(run_config_to_json(rc), run_config_to_json(reference_run_config()));
}

TEST(RunConfig, JsonRoundTrip) {
    auto rc = reference_run_config();
    rc.seed = 42;
    rc.fit.train.seed = 42;
    rc.fit.train.term_mode = TermMode::unary_pairwise;
    rc.fit.train.optimizer_c = OptimizerKind::adam;
    rc.fit.train.scorer = ScorerKind::mlp;
    rc.fit.pool.use_boxes = true;
    rc.scene.shapes = {ShapeKind::ell, ShapeKind::rect};
    rc.fit.infer.pairwise_weight = 0.25;
    const json j = run_config_to_json(rc);
    const auto back = run_config_from_json(j);
    EXPECT_EQ(run_config_to_json(back), j);
    EXPECT_EQ(back.fit.train.seed, 42u);
    EXPECT_EQ(j.at("train").at("term_mode"), "U+P");
}

TEST(RunConfig, UnknownKeysRejected) {
    EXPECT_THROW((void)run_config_from_json(json{{"bogus", 1}}), ConfigError);
    EXPECT_THROW((void)run_config_from_json(json{{"train", {{"outer_iter", 3}}}}), ConfigError);
    EXPECT_THROW((void)run_config_from_json(json{{"inference", {{"delta", 0.1}, {"sigma", 2}}}}), ConfigError);
}

TEST(RunConfig, InvalidValuesRejected) {
    EXPECT_THROW((void)run_config_from_json(json{{"train", {{"K", 1}}}}), ConfigError);
    EXPECT_THROW((void)run_config_from_json(json{{"train", {{"term_mode", "everything"}}}}), ConfigError);
    EXPECT_THROW((void)run_config_from_json(json{{"train", {{"lr_p", "fast"}}}}), ConfigError);
    EXPECT_THROW((void)run_config_from_json(json{{"inference", {{"delta", 0.0}}}}), ConfigError);
    EXPECT_THROW((void)run_config_from_json(json{{"scene", {{"num_classes", 9}}}}), ConfigError);
    EXPECT_THROW((void)run_config_from_json(json{{"disco", {{"gamma", 1.5}}}}), ConfigError);
    EXPECT_THROW((void)run_config_from_json(json{{"eval_thresholds", {0.5, 1.5}}}), ConfigError);
}

TEST(RunConfig, PartialOverride) {
    const auto rc = run_config_from_json(json{{"seed", 9}, {"train", {{"outer_iters", 2}}}, {"pool", {{"use_boxes", true}}}});
    EXPECT_EQ(rc.fit.train.outer_iters, 2);
    EXPECT_EQ(rc.fit.train.seed, 9u);
    EXPECT_TRUE(rc.fit.pool.use_boxes);
    EXPECT_EQ(rc.fit.train.K, reference_run_config().fit.train.K);
}

TEST(RunConfig, LoadFromFile) {
    const auto path = temp_path("cfg.json");
    {
        std::ofstream out(path);
        out << R"({"data": {"train_scenes": 3}})";
    }
    EXPECT_EQ(load_run_config(path).data.train_scenes, 3);
    {
        std::ofstream out(path);
        out << "{not json";
    }
    EXPECT_THROW((void)load_run_config(path), ConfigError);
    std::filesystem::remove(path);
    EXPECT_THROW((void)load_run_config(path), ConfigError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    for (const auto kind : {ScorerKind::linear, ScorerKind::mlp}) {
        Model m;
        m.cond = make_cond_params(kind, 3, 8, 7);
        randomize(m.cond, 0.3, 5);
        m.pred = make_pred_params(3);
        Rng rng(5);
        for (auto& v : m.pred.values) v = rng.normal() * 1e-7;
        const auto path = temp_path("model.json");
        save_checkpoint(m, 2, path);
        EXPECT_EQ(load_checkpoint(path), m);
        std::filesystem::remove(path);
    }
}

TEST(Checkpoint, CorruptInputRejected) {
    Model m;
    m.cond = make_cond_params(ScorerKind::linear, 2, 4);
    m.pred = make_pred_params(2);
    auto j = checkpoint_to_json(m, 0);
    j["version"] = 7;
    EXPECT_THROW((void)checkpoint_from_json(j), ParseError);
    j = checkpoint_to_json(m, 0);
    j["pred"]["count"] = 3;
    EXPECT_THROW((void)checkpoint_from_json(j), ParseError);
    j = checkpoint_to_json(m, 0);
    j["cond"].erase("values");
    EXPECT_THROW((void)checkpoint_from_json(j), ParseError);
}

TEST(PredictionDump, RoundTrip) {
    const auto records = gen_records(SceneConfig{}, ProposalConfig{}, 0, 3);
    InferenceDump d;
    d.pool.use_boxes = true;
    Rng rng(3);
    for (int it = 0; it < 2; ++it) {
        IterationDump id;
        id.iter = it;
        const auto preds = testkit::oracle_predictions(records);
        for (std::size_t s = 0; s < records.size(); ++s) {
            SceneDump sd;
            sd.id = records[s].id;
            sd.predictions = preds[s];
            for (int k = 0; k < 3; ++k) sd.samples.push_back(testkit::random_labeling(static_cast<int>(records[s].pool.size()), 3, rng));
            id.scenes.push_back(std::move(sd));
        }
        d.iterations.push_back(std::move(id));
    }
    const auto back = dump_from_json(dump_to_json(d), records);
    EXPECT_EQ(dump_to_json(back), dump_to_json(d));
    EXPECT_TRUE(back.pool.use_boxes);
    const auto finals = back.final_predictions(records);
    ASSERT_EQ(finals.size(), records.size());
    EXPECT_EQ(map_r(finals, truths_of(records)).at(0.5), 1.0);

    auto j = dump_to_json(d);
    j["iterations"][0]["scenes"][0]["id"] = 123456;
    EXPECT_THROW((void)dump_from_json(j, records), ParseError);
}
