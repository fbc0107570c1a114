#pragma once

// Task loss between two instance labelings: class mismatch cost, smooth-L1
// over normalised box coordinates and clamped per-pixel cross entropy on
// masks, summed over matched pairs plus a class cost per unmatched instance.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "annoconsist/core.hpp"

namespace annoconsist {

/// One class label per proposal; 0 is background.
struct InstanceLabeling {
    std::vector<int> labels;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] std::vector<int> selected() const {
        std::vector<int> out;
        for (std::size_t u = 0; u < labels.size(); ++u)
            if (labels[u] != 0) out.push_back(static_cast<int>(u));
        return out;
    }
    friend bool operator==(const InstanceLabeling&, const InstanceLabeling&) = default;
};

struct LossConfig {
    double w_cls = 1.0;
    double w_box = 1.0;
    double w_mask = 1.0;
    double mismatch_cost = 1.0;  // λ_cls
    double mask_clamp = 1e-3;    // ε_m
    double match_iou_floor = 0.1;

    void validate() const {
        if (w_cls < 0 || w_box < 0 || w_mask < 0 || mismatch_cost < 0) throw std::invalid_argument("LossConfig: negative weight");
        if (!(mask_clamp > 0.0 && mask_clamp < 0.5)) throw std::invalid_argument("LossConfig: mask_clamp must be in (0, 0.5)");
    }

    /// Conditional-side calls carry no box term.
    [[nodiscard]] LossConfig conditional_side() const {
        LossConfig c = *this;
        c.w_box = 0.0;
        return c;
    }
};

struct LossParts {
    double total = 0.0;
    double cls = 0.0;
    double box = 0.0;
    double mask = 0.0;
};

/// An instance as seen by the loss: class, mask and box.
struct Instance {
    int class_id = 1;
    const PixelMask* mask = nullptr;
    Box box;
};

struct Pairing {
    std::vector<std::pair<int, int>> matched;
    std::vector<int> unmatched_first;
    std::vector<int> unmatched_second;
};

/// Identity pairing on a shared pool: proposal u pairs with itself.
[[nodiscard]] inline Pairing match_instances(const InstanceLabeling& y1, const InstanceLabeling& y2) {
    if (y1.size() != y2.size()) throw std::invalid_argument("match_instances: labelings live on different pools");
    Pairing p;
    for (std::size_t u = 0; u < y1.size(); ++u) {
        const int a = y1.labels[u];
        const int b = y2.labels[u];
        const int ui = static_cast<int>(u);
        if (a != 0 && b != 0) p.matched.emplace_back(ui, ui);
        else if (a != 0) p.unmatched_first.push_back(ui);
        else if (b != 0) p.unmatched_second.push_back(ui);
    }
    return p;
}

/// Greedy descending-IoU matching for instances on different pools. Pairs
/// below `iou_floor` are never matched; ties resolve by (first, second) index.
[[nodiscard]] inline Pairing match_instances(const std::vector<Instance>& first, const std::vector<Instance>& second,
                                             double iou_floor) {
    std::vector<std::tuple<double, int, int>> cand;
    for (std::size_t i = 0; i < first.size(); ++i) {
        for (std::size_t j = 0; j < second.size(); ++j) {
            const double iou = mask_iou(*first[i].mask, *second[j].mask);
            if (iou >= iou_floor && iou > 0.0) cand.emplace_back(iou, static_cast<int>(i), static_cast<int>(j));
        }
    }
    std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
    });
    std::vector<bool> used1(first.size(), false);
    std::vector<bool> used2(second.size(), false);
    Pairing p;
    for (const auto& [iou, i, j] : cand) {
        if (used1[static_cast<std::size_t>(i)] || used2[static_cast<std::size_t>(j)]) continue;
        used1[static_cast<std::size_t>(i)] = true;
        used2[static_cast<std::size_t>(j)] = true;
        p.matched.emplace_back(i, j);
    }
    std::sort(p.matched.begin(), p.matched.end());
    for (std::size_t i = 0; i < first.size(); ++i)
        if (!used1[i]) p.unmatched_first.push_back(static_cast<int>(i));
    for (std::size_t j = 0; j < second.size(); ++j)
        if (!used2[j]) p.unmatched_second.push_back(static_cast<int>(j));
    return p;
}

[[nodiscard]] inline double smooth_l1(double x) noexcept {
    const double a = std::abs(x);
    return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

/// Smooth-L1 summed over the four box coordinates, each normalised by the
/// image width or height.
[[nodiscard]] inline double box_loss(const Box& a, const Box& b, int width, int height) noexcept {
    const double w = width;
    const double h = height;
    return smooth_l1((a.x_min - b.x_min) / w) + smooth_l1((a.y_min - b.y_min) / h) + smooth_l1((a.x_max - b.x_max) / w) +
           smooth_l1((a.y_max - b.y_max) / h);
}

/// Mean per-pixel cross entropy between two hard masks with probabilities
/// clamped to [ε, 1-ε]. Agreeing pixels contribute 0, disagreeing -ln ε.
[[nodiscard]] inline double mask_loss(const PixelMask& a, const PixelMask& b, double clamp) {
    if (!a.same_shape(b)) throw DimensionError("mask_loss: mask dimensions differ");
    std::size_t disagree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) disagree += static_cast<std::size_t>(a.bits()[i] != b.bits()[i]);
    return static_cast<double>(disagree) * -std::log(clamp) / static_cast<double>(a.size());
}

[[nodiscard]] inline LossParts delta_instances(const std::vector<Instance>& first, const std::vector<Instance>& second,
                                               const Pairing& pairing, int width, int height, const LossConfig& cfg) {
    LossParts parts;
    for (const auto& [i, j] : pairing.matched) {
        const Instance& a = first[static_cast<std::size_t>(i)];
        const Instance& b = second[static_cast<std::size_t>(j)];
        if (a.class_id != b.class_id) parts.cls += cfg.mismatch_cost;
        parts.box += box_loss(a.box, b.box, width, height);
        if (a.mask != b.mask) parts.mask += mask_loss(*a.mask, *b.mask, cfg.mask_clamp);
    }
    parts.cls += cfg.mismatch_cost * static_cast<double>(pairing.unmatched_first.size() + pairing.unmatched_second.size());
    parts.total = cfg.w_cls * parts.cls + cfg.w_box * parts.box + cfg.w_mask * parts.mask;
    return parts;
}

/// Δ(y1, y2) on a shared pool under identity pairing.
[[nodiscard]] inline LossParts delta(const InstanceLabeling& y1, const InstanceLabeling& y2, const std::vector<PixelMask>& pool,
                                     const LossConfig& cfg) {
    if (y1.size() != pool.size() || y2.size() != pool.size()) throw std::invalid_argument("delta: labeling size differs from pool");
    const Pairing pairing = match_instances(y1, y2);
    // Identity pairs share mask and box, so only the class term can be non-zero.
    LossParts parts;
    for (const auto& [u, v] : pairing.matched) {
        if (y1.labels[static_cast<std::size_t>(u)] != y2.labels[static_cast<std::size_t>(v)]) parts.cls += cfg.mismatch_cost;
    }
    parts.cls += cfg.mismatch_cost * static_cast<double>(pairing.unmatched_first.size() + pairing.unmatched_second.size());
    parts.total = cfg.w_cls * parts.cls;
    return parts;
}

/// Per-proposal contribution of labeling u with c1 on one side and c2 on the
/// other, under identity pairing. Δ(y1, y2) = Σ_u proposal_cost(y1_u, y2_u).
[[nodiscard]] inline double proposal_cost(int c1, int c2, const LossConfig& cfg) noexcept {
    return c1 == c2 ? 0.0 : cfg.w_cls * cfg.mismatch_cost;
}

}  // namespace annoconsist
