#pragma once

// Instance segmentation metrics: per-class average precision with greedy
// confidence-ordered matching and all-point interpolation, and mAP^r at
// several mask IoU thresholds.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "annoconsist/core.hpp"
#include "annoconsist/prednet.hpp"
#include "annoconsist/synthgen.hpp"

namespace annoconsist {

inline const std::vector<double> kDefaultIouThresholds{0.25, 0.50, 0.70, 0.75};

using ScenePredictions = std::vector<InstancePrediction>;
using SceneTruth = std::vector<GroundTruthInstance>;

/// Area under the all-point interpolated precision/recall curve given the
/// TP/FP flags of a confidence-ranked list and the number of positives.
[[nodiscard]] inline double interpolated_ap(const std::vector<char>& is_tp, std::size_t num_gt) {
    if (num_gt == 0) return 0.0;
    std::vector<double> recall;
    std::vector<double> precision;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < is_tp.size(); ++i) {
        tp += static_cast<std::size_t>(is_tp[i] != 0);
        recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
        precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    }
    for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

/// AP of one class over a dataset. Predictions are visited by descending
/// confidence (ties by scene, then position) and each claims the unmatched
/// same-class ground truth of its scene with the highest IoU ≥ `iou_thresh`.
[[nodiscard]] inline double average_precision(const std::vector<ScenePredictions>& preds, const std::vector<SceneTruth>& gts,
                                              int class_id, double iou_thresh) {
    if (preds.size() != gts.size()) throw std::invalid_argument("average_precision: prediction and truth scene counts differ");
    std::size_t num_gt = 0;
    std::vector<std::vector<char>> used(gts.size());
    for (std::size_t s = 0; s < gts.size(); ++s) {
        used[s].assign(gts[s].size(), 0);
        for (const auto& g : gts[s]) num_gt += static_cast<std::size_t>(g.class_id == class_id);
    }
    std::vector<std::tuple<double, std::size_t, std::size_t>> ranked;
    for (std::size_t s = 0; s < preds.size(); ++s) {
        for (std::size_t i = 0; i < preds[s].size(); ++i) {
            if (preds[s][i].class_id == class_id) ranked.emplace_back(preds[s][i].confidence, s, i);
        }
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
    std::vector<char> is_tp;
    is_tp.reserve(ranked.size());
    for (const auto& [conf, s, i] : ranked) {
        const PixelMask& m = preds[s][i].mask;
        double best = -1.0;
        std::size_t best_g = 0;
        for (std::size_t g = 0; g < gts[s].size(); ++g) {
            if (used[s][g] || gts[s][g].class_id != class_id) continue;
            const double iou = mask_iou(m, gts[s][g].mask);
            if (iou > best) {
                best = iou;
                best_g = g;
            }
        }
        const bool tp = best >= iou_thresh && best > 0.0;
        if (tp) used[s][best_g] = 1;
        is_tp.push_back(tp ? 1 : 0);
    }
    return interpolated_ap(is_tp, num_gt);
}

struct EvalResult {
    std::vector<double> thresholds;
    std::vector<int> classes;                   // classes present in the ground truth
    std::vector<std::vector<double>> class_ap;  // [threshold][class position]
    std::vector<double> map;                    // per threshold

    /// mAP at a threshold from the evaluated list; throws if absent.
    [[nodiscard]] double at(double thresh) const {
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
            if (std::abs(thresholds[i] - thresh) < 1e-12) return map[i];
        }
        throw std::out_of_range("EvalResult: threshold " + std::to_string(thresh) + " was not evaluated");
    }
};

[[nodiscard]] inline EvalResult map_r(const std::vector<ScenePredictions>& preds, const std::vector<SceneTruth>& gts,
                                      const std::vector<double>& thresholds = kDefaultIouThresholds) {
    EvalResult r;
    r.thresholds = thresholds;
    std::set<int> present;
    for (const auto& scene : gts)
        for (const auto& g : scene) present.insert(g.class_id);
    r.classes.assign(present.begin(), present.end());
    for (const double t : thresholds) {
        std::vector<double> aps;
        for (const int c : r.classes) aps.push_back(average_precision(preds, gts, c, t));
        double mean = 0.0;
        for (const double a : aps) mean += a;
        r.map.push_back(aps.empty() ? 0.0 : mean / static_cast<double>(aps.size()));
        r.class_ap.push_back(std::move(aps));
    }
    return r;
}

[[nodiscard]] inline std::vector<SceneTruth> truths_of(const std::vector<SceneRecord>& records) {
    std::vector<SceneTruth> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.gt);
    return out;
}

}  // namespace annoconsist
