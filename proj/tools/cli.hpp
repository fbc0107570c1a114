#pragma once

// annoconsist command line: gen, train, infer, eval, ablate, render.
// Exit codes: 0 success, 2 bad usage or config, 3 runtime failure.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "annoconsist.hpp"

namespace annoconsist::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline RunConfig resolve_config(const std::string& path) {
    RunConfig rc = path.empty() ? reference_run_config() : load_run_config(path);
    if (const char* env = std::getenv("ANNOCONSIST_SEED")) {
        try {
            std::size_t used = 0;
            const std::string s(env);
            rc.seed = std::stoull(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
        } catch (const std::exception&) {
            throw ConfigError(std::string("ANNOCONSIST_SEED is not an unsigned integer: ") + env);
        }
    }
    rc.fit.train.seed = rc.seed;
    return rc;
}

/// A dataset argument is either a .jsonl file or a directory holding
/// train.jsonl and test.jsonl.
inline fs::path dataset_file(const std::string& data, const std::string& split) {
    const fs::path p(data);
    if (fs::is_regular_file(p)) return p;
    if (fs::is_directory(p)) return p / (split + ".jsonl");
    throw UsageError("dataset not found: " + data);
}

inline std::vector<fs::path> iteration_checkpoints(const fs::path& model_dir) {
    std::vector<std::pair<int, fs::path>> found;
    const std::regex pat("ckpt_iter([0-9]+)\\.json");
    for (const auto& e : fs::directory_iterator(model_dir)) {
        std::smatch m;
        const std::string name = e.path().filename().string();
        if (std::regex_match(name, m, pat)) found.emplace_back(std::stoi(m[1].str()), e.path());
    }
    std::sort(found.begin(), found.end());
    std::vector<fs::path> out;
    for (auto& [i, p] : found) out.push_back(p);
    return out;
}

inline void print_eval(std::ostream& os, const EvalResult& r) {
    os << "threshold,mAP\n";
    char buf[64];
    for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.2f,%.4f\n", r.thresholds[i], r.map[i]);
        os << buf;
    }
}

inline int cmd_gen(const std::string& config, const std::string& out_dir) {
    const RunConfig rc = resolve_config(config);
    fs::create_directories(out_dir);
    const auto train = gen_records(rc.scene, rc.proposal, rc.data.train_seed + rc.seed, rc.data.train_scenes);
    const auto test = gen_records(rc.scene, rc.proposal, rc.data.test_seed + rc.seed, rc.data.test_scenes);
    save_dataset(train, fs::path(out_dir) / "train.jsonl");
    save_dataset(test, fs::path(out_dir) / "test.jsonl");
    std::cerr << "wrote " << train.size() << " train and " << test.size() << " test scenes to " << out_dir << '\n';
    return kExitOk;
}

inline int cmd_train(const std::string& config, const std::string& data, const std::string& out_dir, int jobs) {
    RunConfig rc = resolve_config(config);
    rc.fit.train.jobs = jobs;
    const auto train = load_dataset(dataset_file(data, "train"));
    if (train.empty()) throw UsageError("training dataset is empty");
    fs::create_directories(out_dir);
    {
        std::ofstream cfg(fs::path(out_dir) / "config.json");
        cfg << run_config_to_json(rc).dump(2) << '\n';
    }
    const auto res = fit(train, rc.fit, [&](int iter, const Model& m) {
        save_checkpoint(m, iter, fs::path(out_dir) / ("ckpt_iter" + std::to_string(iter) + ".json"));
        std::cerr << "iteration " << iter << " checkpoint written\n";
    });
    save_checkpoint(res.model, rc.fit.train.outer_iters, fs::path(out_dir) / "model.json");
    std::ofstream log(fs::path(out_dir) / "train_log.csv");
    res.log.write_csv(log);
    return kExitOk;
}

inline int cmd_infer(const std::string& model_dir, const std::string& data, const std::string& split, const std::string& out, int jobs) {
    const fs::path md(model_dir);
    if (!fs::is_directory(md)) throw UsageError("model directory not found: " + model_dir);
    RunConfig rc = fs::exists(md / "config.json") ? load_run_config(md / "config.json") : resolve_config("");
    rc.fit.train.jobs = jobs;
    auto ckpts = iteration_checkpoints(md);
    if (ckpts.empty() && fs::exists(md / "model.json")) ckpts.push_back(md / "model.json");
    if (ckpts.empty()) throw UsageError("no checkpoints in " + model_dir);
    const auto records = load_dataset(dataset_file(data, split));
    const auto eval_scenes = prepare_all(records, PoolOptions{false, rc.fit.pool.box_min_iou, rc.fit.pool.adjacency_dilation,
                                                              rc.fit.pool.normalize_edge_weights}, jobs);
    const auto sample_scenes = prepare_all(records, rc.fit.pool, jobs);
    InferenceDump dump;
    dump.pool = rc.fit.pool;
    for (std::size_t c = 0; c < ckpts.size(); ++c) {
        const Model m = load_checkpoint(ckpts[c]);
        IterationDump it;
        it.iter = static_cast<int>(c);
        const auto preds = predict_dataset(m.pred, eval_scenes, rc.fit.decode, jobs);
        const auto samples = sample_dataset(m.cond, sample_scenes, derive_seed(rc.seed, {0x1F, c}), rc.fit);
        for (std::size_t i = 0; i < records.size(); ++i) it.scenes.push_back({records[i].id, preds[i], samples[i].samples});
        dump.iterations.push_back(std::move(it));
    }
    save_dump(dump, out);
    std::cerr << "wrote " << dump.iterations.size() << " iteration(s) of predictions for " << records.size() << " scenes to " << out << '\n';
    return kExitOk;
}

inline int cmd_eval(const std::string& pred, const std::string& data, const std::string& split) {
    const auto records = load_dataset(dataset_file(data, split));
    const auto dump = load_dump(pred, records);
    print_eval(std::cout, map_r(dump.final_predictions(records), truths_of(records), kDefaultIouThresholds));
    return kExitOk;
}

inline int cmd_ablate(const std::string& config, const std::string& data, const std::string& out, int jobs) {
    const RunConfig rc = resolve_config(config);
    const auto train = load_dataset(dataset_file(data, "train"));
    const auto test = load_dataset(dataset_file(data, "test"));
    if (train.empty() || test.empty()) throw UsageError("ablation needs non-empty train and test splits");
    auto table = ablation_run(train, test, rc.fit, rc.seed, rc.ablation_seeds, jobs);
    const auto checks = ablation_trends(table, [&](AblationCell& c, std::size_t n) { extend_seeds(c, n, train, test, rc.fit, rc.seed, jobs); });
    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot open " + out + " for writing");
    table.write_csv(os);
    table.write_csv(std::cout);
    for (const auto& c : checks) {
        std::cout << (c.holds ? "holds  " : "fails  ") << c.description << "  (" << c.lhs << " vs " << c.rhs << ", " << c.seeds << " seed(s))\n";
    }
    return kExitOk;
}

inline int cmd_render(const std::string& pred, const std::string& data, const std::string& split, const std::string& out_dir, int max_scenes,
                      int scale) {
    const auto records = load_dataset(dataset_file(data, split));
    const auto dump = load_dump(pred, records);
    fs::create_directories(out_dir);
    const std::size_t n = std::min(records.size(), static_cast<std::size_t>(std::max(max_scenes, 0)));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = records[i];
        const PreparedScene ps = prepare_scene(r, dump.pool);
        std::vector<PanelRow> rows;
        for (const auto& it : dump.iterations) {
            for (const auto& s : it.scenes) {
                if (s.id == r.id) rows.push_back({s.samples, s.predictions});
            }
        }
        write_ppm(render_scene(r, ps.masks, rows, scale), fs::path(out_dir) / ("scene_" + std::to_string(r.id) + ".ppm"));
    }
    std::cerr << "rendered " << n << " scene(s) to " << out_dir << '\n';
    return kExitOk;
}

inline int run(int argc, const char* const* argv) {
    CLI::App app{"annotation-consistent weakly supervised instance segmentation"};
    app.require_subcommand(1);
    int jobs = 1;
    app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

    std::string config, data, out, model, pred, split = "test";
    int max_scenes = 8;
    int scale = 3;

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    gen->add_option("--config", config, "run config (JSON)")->check(CLI::ExistingFile);
    gen->add_option("--out", out, "output dataset directory")->required();

    auto* train = app.add_subcommand("train", "train both networks");
    train->add_option("--config", config, "run config (JSON)")->check(CLI::ExistingFile);
    train->add_option("--data", data, "dataset directory or train .jsonl")->required();
    train->add_option("--out", out, "model directory")->required();

    auto* infer = app.add_subcommand("infer", "predictions and conditional samples per checkpoint");
    infer->add_option("--model", model, "model directory")->required();
    infer->add_option("--data", data, "dataset directory or .jsonl")->required();
    infer->add_option("--split", split, "split when --data is a directory");
    infer->add_option("--out", out, "predictions file (JSON)")->required();

    auto* eval = app.add_subcommand("eval", "mAP^r of a predictions file");
    eval->add_option("--pred", pred, "predictions file")->required();
    eval->add_option("--data", data, "dataset directory or .jsonl")->required();
    eval->add_option("--split", split, "split when --data is a directory");

    auto* ablate = app.add_subcommand("ablate", "term and pointwise ablations");
    ablate->add_option("--config", config, "run config (JSON)")->check(CLI::ExistingFile);
    ablate->add_option("--data", data, "dataset directory")->required();
    ablate->add_option("--out", out, "CSV table")->required();

    auto* render = app.add_subcommand("render", "PPM panels of samples and predictions per iteration");
    render->add_option("--pred", pred, "predictions file")->required();
    render->add_option("--data", data, "dataset directory or .jsonl")->required();
    render->add_option("--split", split, "split when --data is a directory");
    render->add_option("--out", out, "output directory")->required();
    render->add_option("--max-scenes", max_scenes, "scenes to render");
    render->add_option("--scale", scale, "pixels per scene pixel")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitUsage;
    }

    try {
        if (*gen) return cmd_gen(config, out);
        if (*train) return cmd_train(config, data, out, jobs);
        if (*infer) return cmd_infer(model, data, split, out, jobs);
        if (*eval) return cmd_eval(pred, data, split);
        if (*ablate) return cmd_ablate(config, data, out, jobs);
        if (*render) return cmd_render(pred, data, split, out, max_scenes, scale);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace annoconsist::cli
