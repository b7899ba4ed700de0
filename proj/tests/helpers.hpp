// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0
//
// Test-side oracles: central finite differences for gradient checks and
// brute-force definitional implementations of the correlation metrics. These
// stay independent of the implementation paths they verify.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mdiqa/tensor.hpp"

namespace testutil {

// Central finite differences of a scalar function w.r.t. one tensor's values.
// `eval` must rebuild the forward pass from scratch and return the scalar.
inline std::vector<double> finite_diff(const mdiqa::ad::TP<double>& t,
                                       const std::function<double()>& eval, double h = 1e-5) {
    std::vector<double> grad(t->v.size());
    for (std::size_t i = 0; i < t->v.size(); ++i) {
        const double orig = t->v[i];
        t->v[i] = orig + h;
        const double fp = eval();
        t->v[i] = orig - h;
        const double fm = eval();
        t->v[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// Same, but probing only the listed coordinates (for large inputs).
inline std::vector<double> finite_diff_subset(const mdiqa::ad::TP<double>& t,
                                              const std::vector<std::size_t>& idx,
                                              const std::function<double()>& eval,
                                              double h = 1e-5) {
    std::vector<double> grad(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const double orig = t->v[idx[k]];
        t->v[idx[k]] = orig + h;
        const double fp = eval();
        t->v[idx[k]] = orig - h;
        const double fm = eval();
        t->v[idx[k]] = orig;
        grad[k] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// Scale-aware relative error: ||a - f||_inf / max(||a||_inf, ||f||_inf).
inline double grad_rel_err(const std::vector<double>& analytic, const std::vector<double>& fd) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        num = std::max(num, std::abs(analytic[i] - fd[i]));
        den = std::max({den, std::abs(analytic[i]), std::abs(fd[i])});
    }
    return num / (den + 1e-12);
}

// ---------------------------------------------------------------------------
// Definitional metric oracles (O(n^2) ranks, covariance-formula Pearson).

inline std::vector<double> brute_ranks(const std::vector<double>& x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        int less = 0, equal = 0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (x[j] < x[i]) ++less;
            if (x[j] == x[i]) ++equal;
        }
        r[i] = less + (equal + 1) / 2.0;
    }
    return r;
}

inline double brute_pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
        sab += a[i] * b[i];
        saa += a[i] * a[i];
        sbb += b[i] * b[i];
    }
    return (sab - sa * sb / n) / std::sqrt((saa - sa * sa / n) * (sbb - sb * sb / n));
}

inline double brute_srcc(const std::vector<double>& a, const std::vector<double>& b) {
    return brute_pearson(brute_ranks(a), brute_ranks(b));
}

}  // namespace testutil
