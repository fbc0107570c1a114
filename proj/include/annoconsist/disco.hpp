#pragma once

// Diversity coefficients between the prediction and conditional
// distributions and their dissimilarity (Jensen difference).

#include <span>
#include <stdexcept>
#include <vector>

#include "annoconsist/loss.hpp"
#include "annoconsist/prednet.hpp"

namespace annoconsist {

struct DiscoConfig {
    double gamma = 0.5;

    void validate() const {
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("DiscoConfig: gamma must be in [0,1]");
    }
};

struct DiscoTerms {
    double div_pc = 0.0;
    double div_cc = 0.0;
    double div_pp = 0.0;
    double disc = 0.0;
};

[[nodiscard]] inline double div_pc(const PredictiveState& state, std::span<const InstanceLabeling> samples, const LossConfig& loss) {
    if (samples.empty()) throw std::invalid_argument("div_pc: no conditional samples");
    std::vector<double> terms;
    terms.reserve(samples.size());
    for (const auto& y : samples) terms.push_back(expected_loss_vs_sample(state, y, loss));
    return pairwise_sum(terms) / static_cast<double>(samples.size());
}

/// Identity-pairing Δ between two labelings of the same pool.
[[nodiscard]] inline double pool_delta(const InstanceLabeling& a, const InstanceLabeling& b, const LossConfig& loss) {
    if (a.size() != b.size()) throw DimensionError("pool_delta: labelings live on different pools");
    double s = 0.0;
    for (std::size_t u = 0; u < a.size(); ++u) s += proposal_cost(a.labels[u], b.labels[u], loss);
    return s;
}

[[nodiscard]] inline double div_cc(std::span<const InstanceLabeling> samples, const LossConfig& loss) {
    const std::size_t K = samples.size();
    if (K < 2) throw std::invalid_argument("div_cc: needs at least two samples");
    std::vector<double> terms;
    terms.reserve(K * (K - 1));
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t l = 0; l < K; ++l) {
            if (k != l) terms.push_back(pool_delta(samples[k], samples[l], loss));
        }
    }
    return pairwise_sum(terms) / static_cast<double>(K * (K - 1));
}

[[nodiscard]] inline double div_pp(const PredictiveState& state, const LossConfig& loss) { return self_diversity_pred(state, loss); }

[[nodiscard]] inline DiscoTerms disco_terms(const PredictiveState& state, std::span<const InstanceLabeling> samples, const LossConfig& loss,
                                            const DiscoConfig& cfg) {
    DiscoTerms t;
    t.div_pc = div_pc(state, samples, loss);
    t.div_cc = div_cc(samples, loss);
    t.div_pp = div_pp(state, loss);
    t.disc = t.div_pc - cfg.gamma * t.div_cc - (1.0 - cfg.gamma) * t.div_pp;
    return t;
}

[[nodiscard]] inline double disc(const PredictiveState& state, std::span<const InstanceLabeling> samples, const LossConfig& loss,
                                 const DiscoConfig& cfg) {
    return disco_terms(state, samples, loss, cfg).disc;
}

}  // namespace annoconsist
