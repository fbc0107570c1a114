#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace annoconsist {

/// Dense row-major matrix of doubles.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

    double& operator()(int r, int c) noexcept { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const noexcept { return data[static_cast<std::size_t>(r) * cols + c]; }

    [[nodiscard]] std::span<double> row(int r) noexcept {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }
    [[nodiscard]] std::span<const double> row(int r) const noexcept {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }

    [[nodiscard]] bool all_finite() const noexcept {
        return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// P × (C+1) scores; column 0 is background.
using ScoreTable = Matrix;

/// Pairwise (cascade) summation; keeps reductions stable regardless of how
/// the terms were produced.
[[nodiscard]] inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) noexcept {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

[[nodiscard]] inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace annoconsist
