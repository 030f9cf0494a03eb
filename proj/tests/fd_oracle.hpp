#pragma once

// Central finite-difference oracle, independent of every backward pass.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "c2f/rng.hpp"
#include "c2f/tensor.hpp"

namespace c2f::test {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

// Scalar probe loss L = sum_i r_i * y_i, accumulated in double.
inline double probe_loss(const Tensor& y, const Tensor& r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) acc += static_cast<double>(y[i]) * r[i];
    return acc;
}

// d loss / d x[i] by (L(x + h e_i) - L(x - h e_i)) / 2h.
inline double central_difference(Tensor& x, std::size_t i, const std::function<double()>& loss, double h = 1e-3) {
    const float orig = x[i];
    x[i] = static_cast<float>(orig + h);
    const double up = loss();
    x[i] = static_cast<float>(orig - h);
    const double down = loss();
    x[i] = orig;
    // Divide by the step actually taken after rounding to float.
    const double step = static_cast<double>(static_cast<float>(orig + h)) -
                        static_cast<double>(static_cast<float>(orig - h));
    return (up - down) / step;
}

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max(std::abs(analytic), std::abs(numeric));
    if (denom == 0.0) return 0.0;
    return std::abs(analytic - numeric) / denom;
}

// Relative error of a whole gradient tensor: ||a - n||_2 / max(||a||_2, ||n||_2).
// Entrywise ratios are ill-posed for entries near zero, where f32 rounding in
// the forward pass dominates the difference quotient.
struct GradCheck {
    double max_rel = 0.0;      // norm-wise relative error
    double worst_entry = 0.0;  // largest entrywise |a - n| / max(|a|, |n|), informational
    std::size_t checked = 0;
};

inline GradCheck check_gradient(Tensor& x, const Tensor& analytic, const std::function<double()>& loss,
                                double h = 1e-3) {
    GradCheck r;
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double num = central_difference(x, i, loss, h);
        const double a = analytic[i];
        diff2 += (a - num) * (a - num);
        a2 += a * a;
        n2 += num * num;
        r.worst_entry = std::max(r.worst_entry, relative_error(a, num));
        ++r.checked;
    }
    const double denom = std::sqrt(std::max(a2, n2));
    r.max_rel = denom == 0.0 ? 0.0 : std::sqrt(diff2) / denom;
    return r;
}

}  // namespace c2f::test
