#pragma once

// RunConfig: one JSON document covering generation, inference, loss,
// training and evaluation. Unknown keys are rejected.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "annoconsist/eval.hpp"
#include "annoconsist/synthgen.hpp"
#include "annoconsist/train.hpp"

namespace annoconsist {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DataConfig {
    int train_scenes = 50;
    int test_scenes = 50;
    std::uint64_t train_seed = 0;
    std::uint64_t test_seed = 1000;
};

struct RunConfig {
    SceneConfig scene;
    ProposalConfig proposal;
    DataConfig data;
    FitConfig fit;
    std::vector<double> eval_thresholds = kDefaultIouThresholds;
    int ablation_seeds = 1;
    std::uint64_t seed = 0;

    void validate() const {
        fit.validate();
        if (data.train_scenes < 1 || data.test_scenes < 0) throw ConfigError("data: need train_scenes >= 1 and test_scenes >= 0");
        if (scene.num_classes < 1 || scene.num_classes > 5) throw ConfigError("scene: num_classes must be in [1,5]");
        if (scene.width < 1 || scene.height < 1 || scene.width > 128 || scene.height > 128) {
            throw ConfigError("scene: width and height must be in [1,128]");
        }
        if (scene.min_objects < 1 || scene.max_objects > 6 || scene.min_objects > scene.max_objects) {
            throw ConfigError("scene: object count must satisfy 1 <= min_objects <= max_objects <= 6");
        }
        if (scene.shapes.empty()) throw ConfigError("scene: shapes must not be empty");
        if (ablation_seeds < 1) throw ConfigError("ablation_seeds must be >= 1");
        for (const double t : eval_thresholds) {
            if (!(t > 0.0 && t <= 1.0)) throw ConfigError("eval thresholds must lie in (0,1]");
        }
    }
};

/// The benchmark configuration used by the acceptance suite and by the CLI
/// when no config file is given.
[[nodiscard]] inline RunConfig reference_run_config() {
    RunConfig rc;
    TrainConfig& t = rc.fit.train;
    t.outer_iters = 4;
    t.init_epochs = 150;
    t.warmup_epochs = 100;
    t.cond_epochs = 20;
    t.pred_epochs = 30;
    t.cond_batch = 10;
    t.pred_batch = 1;
    t.lr_c = 0.5;
    t.optimizer_c = OptimizerKind::sgd;
    t.lr_p = 0.1;
    t.optimizer_p = OptimizerKind::adam;
    t.K = 10;
    t.epsilon = 1.0;
    t.aug_sign = 1;
    rc.fit.infer.pairwise_weight = std::exp(-5.0);
    return rc;
}

namespace detail {

template <class E>
struct EnumNames;

template <>
struct EnumNames<ShapeKind> {
    static constexpr std::pair<ShapeKind, const char*> table[] = {{ShapeKind::rect, "rect"}, {ShapeKind::ellipse, "ellipse"}, {ShapeKind::ell, "L"}};
};
template <>
struct EnumNames<ScorerKind> {
    static constexpr std::pair<ScorerKind, const char*> table[] = {{ScorerKind::linear, "linear"}, {ScorerKind::mlp, "mlp"}};
};
template <>
struct EnumNames<OptimizerKind> {
    static constexpr std::pair<OptimizerKind, const char*> table[] = {{OptimizerKind::sgd, "sgd"}, {OptimizerKind::adam, "adam"}};
};
template <>
struct EnumNames<TermMode> {
    static constexpr std::pair<TermMode, const char*> table[] = {
        {TermMode::unary, "U"}, {TermMode::unary_pairwise, "U+P"}, {TermMode::full, "U+P+H"}};
};

template <class E>
std::string enum_name(E e) {
    for (const auto& [v, n] : EnumNames<E>::table)
        if (v == e) return n;
    throw ConfigError("unnamed enum value");
}

template <class E>
E enum_from(const std::string& s, const std::string& where) {
    std::string options;
    for (const auto& [v, n] : EnumNames<E>::table) {
        if (s == n) return v;
        options += std::string(options.empty() ? "" : ", ") + n;
    }
    throw ConfigError(where + ": unknown value '" + s + "' (expected one of " + options + ")");
}

/// Reads fields out of one JSON object and complains about leftovers.
class Section {
public:
    Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError(name_ + ": expected an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            if constexpr (std::is_enum_v<T>) {
                out = enum_from<T>(j_.at(key).template get<std::string>(), name_ + "." + key);
            } else if constexpr (std::is_same_v<T, std::vector<ShapeKind>>) {
                out.clear();
                for (const auto& s : j_.at(key)) out.push_back(enum_from<ShapeKind>(s.template get<std::string>(), name_ + "." + key));
            } else {
                out = j_.at(key).template get<T>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(name_ + "." + key + ": " + e.what());
        }
    }

    [[nodiscard]] Section sub(const char* key) {
        seen_.insert(key);
        static const nlohmann::json empty = nlohmann::json::object();
        return Section(j_.contains(key) ? j_.at(key) : empty, name_.empty() ? key : name_ + "." + key);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) throw ConfigError("unknown config key '" + (name_.empty() ? k : name_ + "." + k) + "'");
        }
    }

private:
    const nlohmann::json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

}  // namespace detail

/// Applies `j` on top of `base`.
[[nodiscard]] inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = reference_run_config()) {
    RunConfig rc = std::move(base);
    detail::Section root(j, "");
    root.get("seed", rc.seed);
    root.get("eval_thresholds", rc.eval_thresholds);
    root.get("ablation_seeds", rc.ablation_seeds);
    {
        auto s = root.sub("scene");
        auto& c = rc.scene;
        s.get("width", c.width);
        s.get("height", c.height);
        s.get("num_classes", c.num_classes);
        s.get("min_objects", c.min_objects);
        s.get("max_objects", c.max_objects);
        s.get("shapes", c.shapes);
        s.get("min_size", c.min_size);
        s.get("max_size", c.max_size);
        s.get("max_overlap", c.max_overlap);
        s.get("edge_noise_density", c.edge_noise_density);
        s.get("edge_noise_amplitude", c.edge_noise_amplitude);
        s.get("color_noise", c.color_noise);
        s.get("seed_fraction_min", c.seed_fraction_min);
        s.get("seed_fraction_max", c.seed_fraction_max);
        s.get("emit_boxes", c.emit_boxes);
        s.get("max_retries", c.max_retries);
        s.finish();
    }
    {
        auto s = root.sub("proposal");
        auto& c = rc.proposal;
        s.get("p_target", c.p_target);
        s.get("include_exact", c.include_exact);
        s.get("perturb", c.perturb);
        s.get("variants_per_object", c.variants_per_object);
        s.get("distractors", c.distractors);
        s.get("seed_filter", c.seed_filter);
        s.get("min_area", c.min_area);
        s.get("adjacency_dilation", c.adjacency_dilation);
        s.get("normalize_edge_weights", c.normalize_edge_weights);
        s.finish();
    }
    {
        auto s = root.sub("data");
        auto& c = rc.data;
        s.get("train_scenes", c.train_scenes);
        s.get("test_scenes", c.test_scenes);
        s.get("train_seed", c.train_seed);
        s.get("test_seed", c.test_seed);
        s.finish();
    }
    {
        auto s = root.sub("pool");
        auto& c = rc.fit.pool;
        s.get("use_boxes", c.use_boxes);
        s.get("box_min_iou", c.box_min_iou);
        s.get("adjacency_dilation", c.adjacency_dilation);
        s.get("normalize_edge_weights", c.normalize_edge_weights);
        s.finish();
    }
    {
        auto s = root.sub("inference");
        auto& c = rc.fit.infer;
        s.get("delta", c.delta);
        s.get("n_iters", c.n_iters);
        s.get("overlap_t", c.overlap_t);
        s.get("select_threshold", c.select_threshold);
        s.get("box_overlap", c.box_overlap);
        s.get("pairwise_weight", c.pairwise_weight);
        s.get("max_exact_pool", c.max_exact_pool);
        s.finish();
    }
    {
        auto s = root.sub("loss");
        auto& c = rc.fit.loss;
        s.get("w_cls", c.w_cls);
        s.get("w_box", c.w_box);
        s.get("w_mask", c.w_mask);
        s.get("mismatch_cost", c.mismatch_cost);
        s.get("mask_clamp", c.mask_clamp);
        s.get("match_iou_floor", c.match_iou_floor);
        s.finish();
    }
    {
        auto s = root.sub("disco");
        s.get("gamma", rc.fit.disco.gamma);
        s.finish();
    }
    {
        auto s = root.sub("noise");
        auto& c = rc.fit.noise;
        s.get("dim", c.dim);
        s.get("low", c.low);
        s.get("high", c.high);
        s.finish();
    }
    {
        auto s = root.sub("decode");
        auto& c = rc.fit.decode;
        s.get("score_thresh", c.score_thresh);
        s.get("nms_t", c.nms_t);
        s.finish();
    }
    {
        auto s = root.sub("train");
        auto& c = rc.fit.train;
        s.get("outer_iters", c.outer_iters);
        s.get("init_epochs", c.init_epochs);
        s.get("warmup_epochs", c.warmup_epochs);
        s.get("cond_epochs", c.cond_epochs);
        s.get("pred_epochs", c.pred_epochs);
        s.get("cond_batch", c.cond_batch);
        s.get("pred_batch", c.pred_batch);
        s.get("lr_p", c.lr_p);
        s.get("lr_c", c.lr_c);
        s.get("optimizer_p", c.optimizer_p);
        s.get("optimizer_c", c.optimizer_c);
        s.get("K", c.K);
        s.get("epsilon", c.epsilon);
        s.get("aug_sign", c.aug_sign);
        s.get("scorer", c.scorer);
        s.get("hidden", c.hidden);
        s.get("init_scale", c.init_scale);
        s.get("term_mode", c.term_mode);
        s.get("pointwise_pred", c.pointwise_pred);
        s.get("pointwise_cond", c.pointwise_cond);
        s.get("log_map", c.log_map);
        s.get("jobs", c.jobs);
        s.finish();
    }
    root.finish();
    rc.fit.train.seed = rc.seed;
    try {
        rc.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return rc;
}

[[nodiscard]] inline nlohmann::json run_config_to_json(const RunConfig& rc) {
    using detail::enum_name;
    nlohmann::json j;
    j["seed"] = rc.seed;
    j["eval_thresholds"] = rc.eval_thresholds;
    j["ablation_seeds"] = rc.ablation_seeds;
    const auto& sc = rc.scene;
    std::vector<std::string> shapes;
    for (const auto s : sc.shapes) shapes.push_back(enum_name(s));
    j["scene"] = {{"width", sc.width},
                  {"height", sc.height},
                  {"num_classes", sc.num_classes},
                  {"min_objects", sc.min_objects},
                  {"max_objects", sc.max_objects},
                  {"shapes", shapes},
                  {"min_size", sc.min_size},
                  {"max_size", sc.max_size},
                  {"max_overlap", sc.max_overlap},
                  {"edge_noise_density", sc.edge_noise_density},
                  {"edge_noise_amplitude", sc.edge_noise_amplitude},
                  {"color_noise", sc.color_noise},
                  {"seed_fraction_min", sc.seed_fraction_min},
                  {"seed_fraction_max", sc.seed_fraction_max},
                  {"emit_boxes", sc.emit_boxes},
                  {"max_retries", sc.max_retries}};
    const auto& pc = rc.proposal;
    j["proposal"] = {{"p_target", pc.p_target},
                     {"include_exact", pc.include_exact},
                     {"perturb", pc.perturb},
                     {"variants_per_object", pc.variants_per_object},
                     {"distractors", pc.distractors},
                     {"seed_filter", pc.seed_filter},
                     {"min_area", pc.min_area},
                     {"adjacency_dilation", pc.adjacency_dilation},
                     {"normalize_edge_weights", pc.normalize_edge_weights}};
    j["data"] = {{"train_scenes", rc.data.train_scenes},
                 {"test_scenes", rc.data.test_scenes},
                 {"train_seed", rc.data.train_seed},
                 {"test_seed", rc.data.test_seed}};
    const auto& po = rc.fit.pool;
    j["pool"] = {{"use_boxes", po.use_boxes},
                 {"box_min_iou", po.box_min_iou},
                 {"adjacency_dilation", po.adjacency_dilation},
                 {"normalize_edge_weights", po.normalize_edge_weights}};
    const auto& in = rc.fit.infer;
    j["inference"] = {{"delta", in.delta},
                      {"n_iters", in.n_iters},
                      {"overlap_t", in.overlap_t},
                      {"select_threshold", in.select_threshold},
                      {"box_overlap", in.box_overlap},
                      {"pairwise_weight", in.pairwise_weight},
                      {"max_exact_pool", in.max_exact_pool}};
    const auto& lc = rc.fit.loss;
    j["loss"] = {{"w_cls", lc.w_cls},
                 {"w_box", lc.w_box},
                 {"w_mask", lc.w_mask},
                 {"mismatch_cost", lc.mismatch_cost},
                 {"mask_clamp", lc.mask_clamp},
                 {"match_iou_floor", lc.match_iou_floor}};
    j["disco"] = {{"gamma", rc.fit.disco.gamma}};
    j["noise"] = {{"dim", rc.fit.noise.dim}, {"low", rc.fit.noise.low}, {"high", rc.fit.noise.high}};
    j["decode"] = {{"score_thresh", rc.fit.decode.score_thresh}, {"nms_t", rc.fit.decode.nms_t}};
    const auto& t = rc.fit.train;
    j["train"] = {{"outer_iters", t.outer_iters},
                  {"init_epochs", t.init_epochs},
                  {"warmup_epochs", t.warmup_epochs},
                  {"cond_epochs", t.cond_epochs},
                  {"pred_epochs", t.pred_epochs},
                  {"cond_batch", t.cond_batch},
                  {"pred_batch", t.pred_batch},
                  {"lr_p", t.lr_p},
                  {"lr_c", t.lr_c},
                  {"optimizer_p", enum_name(t.optimizer_p)},
                  {"optimizer_c", enum_name(t.optimizer_c)},
                  {"K", t.K},
                  {"epsilon", t.epsilon},
                  {"aug_sign", t.aug_sign},
                  {"scorer", enum_name(t.scorer)},
                  {"hidden", t.hidden},
                  {"init_scale", t.init_scale},
                  {"term_mode", enum_name(t.term_mode)},
                  {"pointwise_pred", t.pointwise_pred},
                  {"pointwise_cond", t.pointwise_cond},
                  {"log_map", t.log_map},
                  {"jobs", t.jobs}};
    return j;
}

[[nodiscard]] inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace annoconsist
