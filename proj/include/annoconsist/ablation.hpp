#pragma once

// Term ablation (U, U+P, U+P+H) crossed with the pointwise grid
// {(Pr_p,Pr_c), (PW_p,Pr_c), (Pr_p,PW_c), (PW_p,PW_c)}.

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "annoconsist/config.hpp"
#include "annoconsist/parallel.hpp"
#include "annoconsist/train.hpp"

namespace annoconsist {

struct AblationVariant {
    TermMode term = TermMode::full;
    bool pointwise_pred = false;
    bool pointwise_cond = false;

    [[nodiscard]] std::string term_name() const { return detail::enum_name(term); }
    [[nodiscard]] std::string pair_name() const {
        return std::string("(") + (pointwise_pred ? "PW_p" : "Pr_p") + "," + (pointwise_cond ? "PW_c" : "Pr_c") + ")";
    }
};

struct AblationCell {
    AblationVariant variant;
    std::vector<std::uint64_t> seeds;
    std::vector<EvalResult> results;  // one per seed

    /// Mean over the evaluated seeds of mAP at `thresh`.
    [[nodiscard]] double mean(double thresh) const {
        double s = 0.0;
        for (const auto& r : results) s += r.at(thresh);
        return results.empty() ? 0.0 : s / static_cast<double>(results.size());
    }
};

struct AblationTable {
    std::vector<AblationCell> cells;  // row-major: term, then pair

    [[nodiscard]] AblationCell& at(TermMode term, bool pw_p, bool pw_c) {
        for (auto& c : cells) {
            if (c.variant.term == term && c.variant.pointwise_pred == pw_p && c.variant.pointwise_cond == pw_c) return c;
        }
        throw std::out_of_range("AblationTable: no such cell");
    }
    [[nodiscard]] const AblationCell& at(TermMode term, bool pw_p, bool pw_c) const {
        return const_cast<AblationTable*>(this)->at(term, pw_p, pw_c);
    }

    /// term_mode,pair,seeds,map25,map50,map75 (seed means)
    void write_csv(std::ostream& os) const {
        os << "term_mode,pair,seeds,map25,map50,map75\n";
        os.precision(6);
        for (const auto& c : cells) {
            os << c.variant.term_name() << ',' << '"' << c.variant.pair_name() << '"' << ',' << c.results.size() << ',' << c.mean(0.25) << ','
               << c.mean(0.5) << ',' << c.mean(0.75) << '\n';
        }
    }
};

[[nodiscard]] inline std::vector<AblationVariant> ablation_grid() {
    std::vector<AblationVariant> out;
    for (const TermMode t : {TermMode::unary, TermMode::unary_pairwise, TermMode::full}) {
        out.push_back({t, false, false});
        out.push_back({t, true, false});
        out.push_back({t, false, true});
        out.push_back({t, true, true});
    }
    return out;
}

[[nodiscard]] inline FitConfig variant_config(const FitConfig& base, const AblationVariant& v, std::uint64_t seed) {
    FitConfig fc = base;
    fc.train.term_mode = v.term;
    fc.train.pointwise_pred = v.pointwise_pred;
    fc.train.pointwise_cond = v.pointwise_cond;
    fc.train.seed = seed;
    fc.train.jobs = 1;
    fc.train.log_map = false;
    return fc;
}

/// Trains one variant and evaluates it on the held-out records.
[[nodiscard]] inline EvalResult run_variant(const std::vector<SceneRecord>& train, const std::vector<SceneRecord>& test, const FitConfig& base,
                                            const AblationVariant& v, std::uint64_t seed) {
    const FitConfig fc = variant_config(base, v, seed);
    const auto res = fit(train, fc);
    return evaluate(res.model.pred, test, fc, {0.25, 0.5, 0.75});
}

/// Adds seeds to a cell until it holds `n` of them (seed offsets 0, 1, 2, ...).
inline void extend_seeds(AblationCell& cell, std::size_t n, const std::vector<SceneRecord>& train, const std::vector<SceneRecord>& test,
                         const FitConfig& base, std::uint64_t root_seed, int jobs) {
    const std::size_t have = cell.results.size();
    if (have >= n) return;
    auto more = parallel_map(n - have, jobs, [&](std::size_t i) {
        return run_variant(train, test, base, cell.variant, root_seed + static_cast<std::uint64_t>(have + i));
    });
    for (std::size_t i = 0; i < more.size(); ++i) {
        cell.seeds.push_back(root_seed + static_cast<std::uint64_t>(have + i));
        cell.results.push_back(std::move(more[i]));
    }
}

[[nodiscard]] inline AblationTable ablation_run(const std::vector<SceneRecord>& train, const std::vector<SceneRecord>& test, const FitConfig& base,
                                                std::uint64_t root_seed, int seeds, int jobs) {
    const auto grid = ablation_grid();
    const std::size_t S = static_cast<std::size_t>(std::max(seeds, 1));
    auto results = parallel_map(grid.size() * S, jobs, [&](std::size_t i) {
        return run_variant(train, test, base, grid[i / S], root_seed + static_cast<std::uint64_t>(i % S));
    });
    AblationTable t;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        AblationCell c{grid[g], {}, {}};
        for (std::size_t s = 0; s < S; ++s) {
            c.seeds.push_back(root_seed + static_cast<std::uint64_t>(s));
            c.results.push_back(results[g * S + s]);
        }
        t.cells.push_back(std::move(c));
    }
    return t;
}

struct TrendCheck {
    std::string description;
    double lhs = 0.0;
    double rhs = 0.0;
    std::size_t seeds = 1;
    bool holds = false;
};

/// Checks lhs ≤ rhs at mAP_0.5. An exact tie is re-decided on three-seed
/// means, using `extend` to grow both cells.
[[nodiscard]] inline TrendCheck check_leq(AblationCell& lo, AblationCell& hi, const std::function<void(AblationCell&, std::size_t)>& extend) {
    TrendCheck c;
    c.description = lo.variant.term_name() + " " + lo.variant.pair_name() + " <= " + hi.variant.term_name() + " " + hi.variant.pair_name();
    c.lhs = lo.mean(0.5);
    c.rhs = hi.mean(0.5);
    if (c.lhs == c.rhs && extend && (lo.results.size() < 3 || hi.results.size() < 3)) {
        extend(lo, 3);
        extend(hi, 3);
        c.lhs = lo.mean(0.5);
        c.rhs = hi.mean(0.5);
    }
    c.seeds = std::min(lo.results.size(), hi.results.size());
    c.holds = c.lhs <= c.rhs;
    return c;
}

/// U ≤ U+P ≤ U+P+H on the probabilistic pair, and the probabilistic pair
/// ≥ every pointwise variant under U+P+H.
[[nodiscard]] inline std::vector<TrendCheck> ablation_trends(AblationTable& t, const std::function<void(AblationCell&, std::size_t)>& extend) {
    std::vector<TrendCheck> out;
    out.push_back(check_leq(t.at(TermMode::unary, false, false), t.at(TermMode::unary_pairwise, false, false), extend));
    out.push_back(check_leq(t.at(TermMode::unary_pairwise, false, false), t.at(TermMode::full, false, false), extend));
    for (const auto& [pp, pc] : {std::pair{true, false}, std::pair{false, true}, std::pair{true, true}}) {
        out.push_back(check_leq(t.at(TermMode::full, pp, pc), t.at(TermMode::full, false, false), extend));
    }
    return out;
}

}  // namespace annoconsist
