// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode ops over mdiqa::ad::Tensor. Forward computes eagerly; when any
// input requires grad, a closure accumulating into input->g is recorded on the
// tape. Matrix products go through Eigen; everything else is plain loops with
// a fixed iteration order, so results are deterministic for a given input.

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "mdiqa/tensor.hpp"

namespace mdiqa::ad {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<EMat<T>>;
template <typename T>
using CMatMap = Eigen::Map<const EMat<T>>;

namespace detail {

template <typename T>
void check_same_shape(const TP<T>& a, const TP<T>& b, const char* op) {
    if (a->shape != b->shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a->shape) + " vs " + shape_str(b->shape));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
TP<T> add(Tape<T>& tape, const TP<T>& a, const TP<T>& b) {
    detail::check_same_shape(a, b, "add");
    auto out = make_tensor<T>(a->shape, a->req || b->req);
    for (std::int64_t i = 0; i < out->numel(); ++i) out->v[i] = a->v[i] + b->v[i];
    if (out->req)
        tape.record([a, b, out] {
            if (a->req)
                for (std::int64_t i = 0; i < out->numel(); ++i) a->g[i] += out->g[i];
            if (b->req)
                for (std::int64_t i = 0; i < out->numel(); ++i) b->g[i] += out->g[i];
        });
    return out;
}

template <typename T>
TP<T> sub(Tape<T>& tape, const TP<T>& a, const TP<T>& b) {
    detail::check_same_shape(a, b, "sub");
    auto out = make_tensor<T>(a->shape, a->req || b->req);
    for (std::int64_t i = 0; i < out->numel(); ++i) out->v[i] = a->v[i] - b->v[i];
    if (out->req)
        tape.record([a, b, out] {
            if (a->req)
                for (std::int64_t i = 0; i < out->numel(); ++i) a->g[i] += out->g[i];
            if (b->req)
                for (std::int64_t i = 0; i < out->numel(); ++i) b->g[i] -= out->g[i];
        });
    return out;
}

template <typename T>
TP<T> mul(Tape<T>& tape, const TP<T>& a, const TP<T>& b) {
    detail::check_same_shape(a, b, "mul");
    auto out = make_tensor<T>(a->shape, a->req || b->req);
    for (std::int64_t i = 0; i < out->numel(); ++i) out->v[i] = a->v[i] * b->v[i];
    if (out->req)
        tape.record([a, b, out] {
            if (a->req)
                for (std::int64_t i = 0; i < out->numel(); ++i) a->g[i] += out->g[i] * b->v[i];
            if (b->req)
                for (std::int64_t i = 0; i < out->numel(); ++i) b->g[i] += out->g[i] * a->v[i];
        });
    return out;
}

template <typename T>
TP<T> scale(Tape<T>& tape, const TP<T>& a, T c) {
    auto out = make_tensor<T>(a->shape, a->req);
    for (std::int64_t i = 0; i < out->numel(); ++i) out->v[i] = c * a->v[i];
    if (out->req)
        tape.record([a, out, c] {
            for (std::int64_t i = 0; i < out->numel(); ++i) a->g[i] += c * out->g[i];
        });
    return out;
}

template <typename T>
TP<T> add_const(Tape<T>& tape, const TP<T>& a, T c) {
    auto out = make_tensor<T>(a->shape, a->req);
    for (std::int64_t i = 0; i < out->numel(); ++i) out->v[i] = a->v[i] + c;
    if (out->req)
        tape.record([a, out] {
            for (std::int64_t i = 0; i < out->numel(); ++i) a->g[i] += out->g[i];
        });
    return out;
}

template <typename T>
TP<T> neg(Tape<T>& tape, const TP<T>& a) {
    return scale(tape, a, T(-1));
}

// y = x * m, m a constant buffer of the same length (masks, ratio overrides).
template <typename T>
TP<T> mul_const(Tape<T>& tape, const TP<T>& a, const std::vector<T>& m) {
    if (static_cast<std::int64_t>(m.size()) != a->numel())
        throw std::invalid_argument("mul_const: multiplier length mismatch");
    auto out = make_tensor<T>(a->shape, a->req);
    for (std::int64_t i = 0; i < out->numel(); ++i) out->v[i] = a->v[i] * m[i];
    if (out->req)
        tape.record([a, out, m] {
            for (std::int64_t i = 0; i < out->numel(); ++i) a->g[i] += out->g[i] * m[i];
        });
    return out;
}

// Broadcast a (D) constant across the rows of a (N,D) tensor.
template <typename T>
TP<T> mul_rowvec_const(Tape<T>& tape, const TP<T>& a, const std::vector<T>& m) {
    if (a->rank() != 2 || static_cast<int>(m.size()) != a->dim(1))
        throw std::invalid_argument("mul_rowvec_const: expected (N,D) and matching vector");
    const int n = a->dim(0), d = a->dim(1);
    auto out = make_tensor<T>(a->shape, a->req);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out->v[i * d + j] = a->v[i * d + j] * m[j];
    if (out->req)
        tape.record([a, out, m, n, d] {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j) a->g[i * d + j] += out->g[i * d + j] * m[j];
        });
    return out;
}

// ---------------------------------------------------------------------------
// Unary nonlinearities (smooth, finite-difference friendly)

template <typename T>
TP<T> gelu(Tape<T>& tape, const TP<T>& a) {
    auto out = make_tensor<T>(a->shape, a->req);
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    for (std::int64_t i = 0; i < out->numel(); ++i) {
        const double x = static_cast<double>(a->v[i]);
        out->v[i] = static_cast<T>(0.5 * x * (1.0 + std::erf(x * inv_sqrt2)));
    }
    if (out->req)
        tape.record([a, out] {
            for (std::int64_t i = 0; i < out->numel(); ++i) {
                const double x = static_cast<double>(a->v[i]);
                const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                a->g[i] += out->g[i] * static_cast<T>(cdf + x * pdf);
            }
        });
    return out;
}

template <typename T>
T sigmoid_scalar(T x) {
    if (x >= T(0)) {
        const T e = std::exp(-x);
        return T(1) / (T(1) + e);
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
TP<T> sigmoid(Tape<T>& tape, const TP<T>& a) {
    auto out = make_tensor<T>(a->shape, a->req);
    for (std::int64_t i = 0; i < out->numel(); ++i) out->v[i] = sigmoid_scalar(a->v[i]);
    if (out->req)
        tape.record([a, out] {
            for (std::int64_t i = 0; i < out->numel(); ++i) {
                const T y = out->v[i];
                a->g[i] += out->g[i] * y * (T(1) - y);
            }
        });
    return out;
}

template <typename T>
TP<T> softplus(Tape<T>& tape, const TP<T>& a) {
    auto out = make_tensor<T>(a->shape, a->req);
    for (std::int64_t i = 0; i < out->numel(); ++i) {
        const T x = a->v[i];
        out->v[i] = std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
    }
    if (out->req)
        tape.record([a, out] {
            for (std::int64_t i = 0; i < out->numel(); ++i)
                a->g[i] += out->g[i] * sigmoid_scalar(a->v[i]);
        });
    return out;
}

template <typename T>
TP<T> abs_op(Tape<T>& tape, const TP<T>& a) {
    auto out = make_tensor<T>(a->shape, a->req);
    for (std::int64_t i = 0; i < out->numel(); ++i) out->v[i] = std::abs(a->v[i]);
    if (out->req)
        tape.record([a, out] {
            for (std::int64_t i = 0; i < out->numel(); ++i) {
                const T s = a->v[i] > T(0) ? T(1) : (a->v[i] < T(0) ? T(-1) : T(0));
                a->g[i] += out->g[i] * s;
            }
        });
    return out;
}

template <typename T>
TP<T> square_op(Tape<T>& tape, const TP<T>& a) {
    auto out = make_tensor<T>(a->shape, a->req);
    for (std::int64_t i = 0; i < out->numel(); ++i) out->v[i] = a->v[i] * a->v[i];
    if (out->req)
        tape.record([a, out] {
            for (std::int64_t i = 0; i < out->numel(); ++i)
                a->g[i] += out->g[i] * T(2) * a->v[i];
        });
    return out;
}

// y = max(x, c); gradient passes through wherever x >= c.
template <typename T>
TP<T> clamp_min(Tape<T>& tape, const TP<T>& a, T c) {
    auto out = make_tensor<T>(a->shape, a->req);
    for (std::int64_t i = 0; i < out->numel(); ++i) out->v[i] = std::max(a->v[i], c);
    if (out->req)
        tape.record([a, out, c] {
            for (std::int64_t i = 0; i < out->numel(); ++i)
                if (a->v[i] >= c) a->g[i] += out->g[i];
        });
    return out;
}

template <typename T>
TP<T> sqrt_op(Tape<T>& tape, const TP<T>& a) {
    auto out = make_tensor<T>(a->shape, a->req);
    for (std::int64_t i = 0; i < out->numel(); ++i) out->v[i] = std::sqrt(a->v[i]);
    if (out->req)
        tape.record([a, out] {
            for (std::int64_t i = 0; i < out->numel(); ++i) {
                const T y = out->v[i];
                if (y > T(0)) a->g[i] += out->g[i] / (T(2) * y);
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Reductions and broadcasts

template <typename T>
TP<T> sum(Tape<T>& tape, const TP<T>& a) {
    auto out = make_tensor<T>(Shape{1}, a->req);
    T acc = T(0);
    for (std::int64_t i = 0; i < a->numel(); ++i) acc += a->v[i];
    out->v[0] = acc;
    if (out->req)
        tape.record([a, out] {
            for (std::int64_t i = 0; i < a->numel(); ++i) a->g[i] += out->g[0];
        });
    return out;
}

template <typename T>
TP<T> mean(Tape<T>& tape, const TP<T>& a) {
    const T inv = T(1) / static_cast<T>(a->numel());
    return scale(tape, sum(tape, a), inv);
}

// (N,F) -> (N): mean over the feature axis.
template <typename T>
TP<T> rowmean(Tape<T>& tape, const TP<T>& a) {
    if (a->rank() != 2) throw std::invalid_argument("rowmean: expected rank-2 input");
    const int n = a->dim(0), f = a->dim(1);
    auto out = make_tensor<T>(Shape{n}, a->req);
    for (int i = 0; i < n; ++i) {
        T acc = T(0);
        for (int j = 0; j < f; ++j) acc += a->v[i * f + j];
        out->v[i] = acc / static_cast<T>(f);
    }
    if (out->req)
        tape.record([a, out, n, f] {
            for (int i = 0; i < n; ++i) {
                const T gi = out->g[i] / static_cast<T>(f);
                for (int j = 0; j < f; ++j) a->g[i * f + j] += gi;
            }
        });
    return out;
}

// y_i = x_i - s, s a scalar tensor.
template <typename T>
TP<T> sub_bcast(Tape<T>& tape, const TP<T>& x, const TP<T>& s) {
    if (s->numel() != 1) throw std::invalid_argument("sub_bcast: s must be scalar");
    auto out = make_tensor<T>(x->shape, x->req || s->req);
    for (std::int64_t i = 0; i < out->numel(); ++i) out->v[i] = x->v[i] - s->v[0];
    if (out->req)
        tape.record([x, s, out] {
            if (x->req)
                for (std::int64_t i = 0; i < out->numel(); ++i) x->g[i] += out->g[i];
            if (s->req) {
                T acc = T(0);
                for (std::int64_t i = 0; i < out->numel(); ++i) acc += out->g[i];
                s->g[0] -= acc;
            }
        });
    return out;
}

// y_i = x_i / s, s a scalar tensor.
template <typename T>
TP<T> div_bcast(Tape<T>& tape, const TP<T>& x, const TP<T>& s) {
    if (s->numel() != 1) throw std::invalid_argument("div_bcast: s must be scalar");
    auto out = make_tensor<T>(x->shape, x->req || s->req);
    const T d = s->v[0];
    for (std::int64_t i = 0; i < out->numel(); ++i) out->v[i] = x->v[i] / d;
    if (out->req)
        tape.record([x, s, out, d] {
            if (x->req)
                for (std::int64_t i = 0; i < out->numel(); ++i) x->g[i] += out->g[i] / d;
            if (s->req) {
                T acc = T(0);
                for (std::int64_t i = 0; i < out->numel(); ++i) acc += out->g[i] * out->v[i];
                s->g[0] -= acc / d;
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Shape plumbing

template <typename T>
TP<T> reshape(Tape<T>& tape, const TP<T>& a, Shape s) {
    if (shape_numel(s) != a->numel())
        throw std::invalid_argument("reshape: element count mismatch " + shape_str(a->shape) +
                                    " -> " + shape_str(s));
    auto out = make_tensor<T>(std::move(s), a->req);
    out->v = a->v;
    if (out->req)
        tape.record([a, out] {
            for (std::int64_t i = 0; i < out->numel(); ++i) a->g[i] += out->g[i];
        });
    return out;
}

// (N,A,B) -> (N,B,A)
template <typename T>
TP<T> transpose12(Tape<T>& tape, const TP<T>& x) {
    if (x->rank() != 3) throw std::invalid_argument("transpose12: expected rank-3 input");
    const int n = x->dim(0), a = x->dim(1), b = x->dim(2);
    auto out = make_tensor<T>(Shape{n, b, a}, x->req);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < a; ++j)
            for (int k = 0; k < b; ++k)
                out->v[(static_cast<std::int64_t>(i) * b + k) * a + j] =
                    x->v[(static_cast<std::int64_t>(i) * a + j) * b + k];
    if (out->req)
        tape.record([x, out, n, a, b] {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < a; ++j)
                    for (int k = 0; k < b; ++k)
                        x->g[(static_cast<std::int64_t>(i) * a + j) * b + k] +=
                            out->g[(static_cast<std::int64_t>(i) * b + k) * a + j];
        });
    return out;
}

template <typename T>
TP<T> concat_cols(Tape<T>& tape, const std::vector<TP<T>>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_cols: empty input list");
    const int n = xs[0]->dim(0);
    int ftot = 0;
    bool req = false;
    for (const auto& x : xs) {
        if (x->rank() != 2 || x->dim(0) != n)
            throw std::invalid_argument("concat_cols: inputs must be (N,Fi) with equal N");
        ftot += x->dim(1);
        req = req || x->req;
    }
    auto out = make_tensor<T>(Shape{n, ftot}, req);
    int off = 0;
    for (const auto& x : xs) {
        const int f = x->dim(1);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < f; ++j) out->v[i * ftot + off + j] = x->v[i * f + j];
        off += f;
    }
    if (req)
        tape.record([xs, out, n, ftot] {
            int off2 = 0;
            for (const auto& x : xs) {
                const int f = x->dim(1);
                if (x->req)
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < f; ++j) x->g[i * f + j] += out->g[i * ftot + off2 + j];
                off2 += f;
            }
        });
    return out;
}

template <typename T>
TP<T> concat_channels(Tape<T>& tape, const std::vector<TP<T>>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: empty input list");
    const int n = xs[0]->dim(0), h = xs[0]->dim(2), w = xs[0]->dim(3);
    int ctot = 0;
    bool req = false;
    for (const auto& x : xs) {
        if (x->rank() != 4 || x->dim(0) != n || x->dim(2) != h || x->dim(3) != w)
            throw std::invalid_argument("concat_channels: inputs must be (N,Ci,H,W) with equal N,H,W");
        ctot += x->dim(1);
        req = req || x->req;
    }
    auto out = make_tensor<T>(Shape{n, ctot, h, w}, req);
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    std::int64_t coff = 0;
    for (const auto& x : xs) {
        const int c = x->dim(1);
        for (int i = 0; i < n; ++i)
            std::copy(x->v.begin() + i * c * hw, x->v.begin() + (i + 1) * c * hw,
                      out->v.begin() + (i * ctot + coff) * hw);
        coff += c;
    }
    if (req)
        tape.record([xs, out, n, ctot, hw] {
            std::int64_t coff2 = 0;
            for (const auto& x : xs) {
                const int c = x->dim(1);
                if (x->req)
                    for (int i = 0; i < n; ++i) {
                        const std::int64_t src = (i * ctot + coff2) * hw;
                        const std::int64_t dst = static_cast<std::int64_t>(i) * c * hw;
                        for (std::int64_t k = 0; k < c * hw; ++k) x->g[dst + k] += out->g[src + k];
                    }
                coff2 += c;
            }
        });
    return out;
}

// Select rows along axis 0 (works for (N) and (N,F...)).
template <typename T>
TP<T> gather_rows(Tape<T>& tape, const TP<T>& x, const std::vector<int>& idx) {
    const int n = x->dim(0);
    const std::int64_t rowsz = x->numel() / n;
    for (int i : idx)
        if (i < 0 || i >= n) throw std::out_of_range("gather_rows: index out of range");
    Shape s = x->shape;
    s[0] = static_cast<int>(idx.size());
    auto out = make_tensor<T>(std::move(s), x->req);
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy(x->v.begin() + idx[r] * rowsz, x->v.begin() + (idx[r] + 1) * rowsz,
                  out->v.begin() + static_cast<std::int64_t>(r) * rowsz);
    if (out->req)
        tape.record([x, out, idx, rowsz] {
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (std::int64_t k = 0; k < rowsz; ++k)
                    x->g[idx[r] * rowsz + k] += out->g[static_cast<std::int64_t>(r) * rowsz + k];
        });
    return out;
}

// (N,D) column j -> (N)
template <typename T>
TP<T> col(Tape<T>& tape, const TP<T>& x, int j) {
    if (x->rank() != 2 || j < 0 || j >= x->dim(1))
        throw std::invalid_argument("col: bad column index");
    const int n = x->dim(0), d = x->dim(1);
    auto out = make_tensor<T>(Shape{n}, x->req);
    for (int i = 0; i < n; ++i) out->v[i] = x->v[i * d + j];
    if (out->req)
        tape.record([x, out, n, d, j] {
            for (int i = 0; i < n; ++i) x->g[i * d + j] += out->g[i];
        });
    return out;
}

// D tensors of shape (N) -> (N,D)
template <typename T>
TP<T> stack_cols(Tape<T>& tape, const std::vector<TP<T>>& xs) {
    if (xs.empty()) throw std::invalid_argument("stack_cols: empty input list");
    const int n = xs[0]->dim(0), d = static_cast<int>(xs.size());
    bool req = false;
    for (const auto& x : xs) {
        if (x->rank() != 1 || x->dim(0) != n)
            throw std::invalid_argument("stack_cols: inputs must be (N) with equal N");
        req = req || x->req;
    }
    auto out = make_tensor<T>(Shape{n, d}, req);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < n; ++i) out->v[i * d + j] = xs[j]->v[i];
    if (req)
        tape.record([xs, out, n, d] {
            for (int j = 0; j < d; ++j)
                if (xs[j]->req)
                    for (int i = 0; i < n; ++i) xs[j]->g[i] += out->g[i * d + j];
        });
    return out;
}

// (N,F) scaled per row by s (N).
template <typename T>
TP<T> mul_col(Tape<T>& tape, const TP<T>& x, const TP<T>& s) {
    if (x->rank() != 2 || s->rank() != 1 || s->dim(0) != x->dim(0))
        throw std::invalid_argument("mul_col: expected (N,F) and (N)");
    const int n = x->dim(0), f = x->dim(1);
    auto out = make_tensor<T>(x->shape, x->req || s->req);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < f; ++j) out->v[i * f + j] = x->v[i * f + j] * s->v[i];
    if (out->req)
        tape.record([x, s, out, n, f] {
            for (int i = 0; i < n; ++i) {
                if (x->req)
                    for (int j = 0; j < f; ++j) x->g[i * f + j] += out->g[i * f + j] * s->v[i];
                if (s->req) {
                    T acc = T(0);
                    for (int j = 0; j < f; ++j) acc += out->g[i * f + j] * x->v[i * f + j];
                    s->g[i] += acc;
                }
            }
        });
    return out;
}

// (N,C) -> (N,C,h,w), value replicated over space.
template <typename T>
TP<T> broadcast_map(Tape<T>& tape, const TP<T>& x, int h, int w) {
    if (x->rank() != 2) throw std::invalid_argument("broadcast_map: expected (N,C)");
    const int n = x->dim(0), c = x->dim(1);
    auto out = make_tensor<T>(Shape{n, c, h, w}, x->req);
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j)
            std::fill_n(out->v.begin() + (static_cast<std::int64_t>(i) * c + j) * hw, hw,
                        x->v[i * c + j]);
    if (out->req)
        tape.record([x, out, n, c, hw] {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < c; ++j) {
                    T acc = T(0);
                    const std::int64_t base = (static_cast<std::int64_t>(i) * c + j) * hw;
                    for (std::int64_t k = 0; k < hw; ++k) acc += out->g[base + k];
                    x->g[i * c + j] += acc;
                }
        });
    return out;
}

// Row-wise x / (||x|| + eps).
template <typename T>
TP<T> l2norm_rows(Tape<T>& tape, const TP<T>& x, T eps = T(1e-12)) {
    if (x->rank() != 2) throw std::invalid_argument("l2norm_rows: expected (N,F)");
    const int n = x->dim(0), f = x->dim(1);
    auto out = make_tensor<T>(x->shape, x->req);
    std::vector<T> norms(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        T acc = T(0);
        for (int j = 0; j < f; ++j) acc += x->v[i * f + j] * x->v[i * f + j];
        norms[static_cast<std::size_t>(i)] = std::sqrt(acc);
        const T d = norms[static_cast<std::size_t>(i)] + eps;
        for (int j = 0; j < f; ++j) out->v[i * f + j] = x->v[i * f + j] / d;
    }
    if (out->req)
        tape.record([x, out, norms, n, f, eps] {
            for (int i = 0; i < n; ++i) {
                const T nrm = norms[static_cast<std::size_t>(i)];
                const T d = nrm + eps;
                T dot = T(0);
                for (int j = 0; j < f; ++j) dot += out->g[i * f + j] * x->v[i * f + j];
                for (int j = 0; j < f; ++j) {
                    T gx = out->g[i * f + j] / d;
                    if (nrm > T(1e-30)) gx -= x->v[i * f + j] * dot / (nrm * d * d);
                    x->g[i * f + j] += gx;
                }
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Dense algebra

// x (N,in) @ w (out,in)^T + b -> (N,out)
template <typename T>
TP<T> linear(Tape<T>& tape, const TP<T>& x, const TP<T>& w, const TP<T>& b) {
    if (x->rank() != 2 || w->rank() != 2 || x->dim(1) != w->dim(1))
        throw std::invalid_argument("linear: shape mismatch " + shape_str(x->shape) + " vs " +
                                    shape_str(w->shape));
    const int n = x->dim(0), in = x->dim(1), out_f = w->dim(0);
    if (b->numel() != out_f) throw std::invalid_argument("linear: bias length mismatch");
    auto out = make_tensor<T>(Shape{n, out_f}, x->req || w->req || b->req);
    {
        CMatMap<T> xm(x->v.data(), n, in);
        CMatMap<T> wm(w->v.data(), out_f, in);
        MatMap<T> ym(out->v.data(), n, out_f);
        ym.noalias() = xm * wm.transpose();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < out_f; ++j) out->v[i * out_f + j] += b->v[j];
    }
    if (out->req)
        tape.record([x, w, b, out, n, in, out_f] {
            CMatMap<T> gy(out->g.data(), n, out_f);
            if (x->req) {
                CMatMap<T> wm(w->v.data(), out_f, in);
                MatMap<T> gx(x->g.data(), n, in);
                gx.noalias() += gy * wm;
            }
            if (w->req) {
                CMatMap<T> xm(x->v.data(), n, in);
                MatMap<T> gw(w->g.data(), out_f, in);
                gw.noalias() += gy.transpose() * xm;
            }
            if (b->req)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < out_f; ++j) b->g[j] += out->g[i * out_f + j];
        });
    return out;
}

// Batched matmul: (N,M,K) @ (N,K,P) -> (N,M,P)
template <typename T>
TP<T> bmm(Tape<T>& tape, const TP<T>& a, const TP<T>& b) {
    if (a->rank() != 3 || b->rank() != 3 || a->dim(0) != b->dim(0) || a->dim(2) != b->dim(1))
        throw std::invalid_argument("bmm: shape mismatch " + shape_str(a->shape) + " vs " +
                                    shape_str(b->shape));
    const int n = a->dim(0), m = a->dim(1), k = a->dim(2), p = b->dim(2);
    auto out = make_tensor<T>(Shape{n, m, p}, a->req || b->req);
    for (int i = 0; i < n; ++i) {
        CMatMap<T> am(a->v.data() + static_cast<std::int64_t>(i) * m * k, m, k);
        CMatMap<T> bm(b->v.data() + static_cast<std::int64_t>(i) * k * p, k, p);
        MatMap<T> ym(out->v.data() + static_cast<std::int64_t>(i) * m * p, m, p);
        ym.noalias() = am * bm;
    }
    if (out->req)
        tape.record([a, b, out, n, m, k, p] {
            for (int i = 0; i < n; ++i) {
                CMatMap<T> gy(out->g.data() + static_cast<std::int64_t>(i) * m * p, m, p);
                if (a->req) {
                    CMatMap<T> bm(b->v.data() + static_cast<std::int64_t>(i) * k * p, k, p);
                    MatMap<T> ga(a->g.data() + static_cast<std::int64_t>(i) * m * k, m, k);
                    ga.noalias() += gy * bm.transpose();
                }
                if (b->req) {
                    CMatMap<T> am(a->v.data() + static_cast<std::int64_t>(i) * m * k, m, k);
                    MatMap<T> gb(b->g.data() + static_cast<std::int64_t>(i) * k * p, k, p);
                    gb.noalias() += am.transpose() * gy;
                }
            }
        });
    return out;
}

// Softmax over the last axis of (N,M,P).
template <typename T>
TP<T> softmax_last(Tape<T>& tape, const TP<T>& x) {
    if (x->rank() != 3) throw std::invalid_argument("softmax_last: expected rank-3 input");
    const int rows = x->dim(0) * x->dim(1), p = x->dim(2);
    auto out = make_tensor<T>(x->shape, x->req);
    for (int r = 0; r < rows; ++r) {
        const T* xi = x->v.data() + static_cast<std::int64_t>(r) * p;
        T* yi = out->v.data() + static_cast<std::int64_t>(r) * p;
        T mx = xi[0];
        for (int j = 1; j < p; ++j) mx = std::max(mx, xi[j]);
        T z = T(0);
        for (int j = 0; j < p; ++j) {
            yi[j] = std::exp(xi[j] - mx);
            z += yi[j];
        }
        for (int j = 0; j < p; ++j) yi[j] /= z;
    }
    if (out->req)
        tape.record([x, out, rows, p] {
            for (int r = 0; r < rows; ++r) {
                const T* yi = out->v.data() + static_cast<std::int64_t>(r) * p;
                const T* gi = out->g.data() + static_cast<std::int64_t>(r) * p;
                T dot = T(0);
                for (int j = 0; j < p; ++j) dot += gi[j] * yi[j];
                T* gx = x->g.data() + static_cast<std::int64_t>(r) * p;
                for (int j = 0; j < p; ++j) gx[j] += yi[j] * (gi[j] - dot);
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Convolution and pooling (NCHW)

namespace detail {

// Zero-padded im2col for one sample: (C*kh*kw, OH*OW), row-major.
template <typename T>
void im2col(const T* x, int c, int h, int w, int kh, int kw, int stride, int pad, int oh, int ow,
            T* colbuf) {
    const int p = oh * ow;
    for (int ch = 0; ch < c; ++ch)
        for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
                T* row = colbuf + (static_cast<std::int64_t>(ch) * kh * kw + ki * kw + kj) * p;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ki - pad;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kj - pad;
                        row[oy * ow + ox] =
                            (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                ? x[(static_cast<std::int64_t>(ch) * h + iy) * w + ix]
                                : T(0);
                    }
                }
            }
}

template <typename T>
void col2im_add(const T* colbuf, int c, int h, int w, int kh, int kw, int stride, int pad, int oh,
                int ow, T* gx) {
    const int p = oh * ow;
    for (int ch = 0; ch < c; ++ch)
        for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
                const T* row = colbuf + (static_cast<std::int64_t>(ch) * kh * kw + ki * kw + kj) * p;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ki - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kj - pad;
                        if (ix < 0 || ix >= w) continue;
                        gx[(static_cast<std::int64_t>(ch) * h + iy) * w + ix] += row[oy * ow + ox];
                    }
                }
            }
}

}  // namespace detail

// x (N,C,H,W), w (O,C,kh,kw), b (O)
template <typename T>
TP<T> conv2d(Tape<T>& tape, const TP<T>& x, const TP<T>& w, const TP<T>& b, int stride, int pad) {
    if (x->rank() != 4 || w->rank() != 4 || x->dim(1) != w->dim(1))
        throw std::invalid_argument("conv2d: shape mismatch " + shape_str(x->shape) + " vs " +
                                    shape_str(w->shape));
    const int n = x->dim(0), c = x->dim(1), h = x->dim(2), wd = x->dim(3);
    const int o = w->dim(0), kh = w->dim(2), kw = w->dim(3);
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (wd + 2 * pad - kw) / stride + 1;
    if (oh <= 0 || ow <= 0)
        throw std::invalid_argument("conv2d: input " + shape_str(x->shape) +
                                    " too small for kernel/stride");
    const int ckk = c * kh * kw, p = oh * ow;
    auto out = make_tensor<T>(Shape{n, o, oh, ow}, x->req || w->req || b->req);
    {
        std::vector<T> colbuf(static_cast<std::size_t>(ckk) * p);
        CMatMap<T> wm(w->v.data(), o, ckk);
        for (int i = 0; i < n; ++i) {
            detail::im2col(x->v.data() + static_cast<std::int64_t>(i) * c * h * wd, c, h, wd, kh,
                           kw, stride, pad, oh, ow, colbuf.data());
            CMatMap<T> cm(colbuf.data(), ckk, p);
            MatMap<T> ym(out->v.data() + static_cast<std::int64_t>(i) * o * p, o, p);
            ym.noalias() = wm * cm;
            for (int j = 0; j < o; ++j) {
                T* dst = out->v.data() + (static_cast<std::int64_t>(i) * o + j) * p;
                const T bj = b->v[j];
                for (int k = 0; k < p; ++k) dst[k] += bj;
            }
        }
    }
    if (out->req)
        tape.record([x, w, b, out, n, c, h, wd, o, kh, kw, stride, pad, oh, ow, ckk, p] {
            std::vector<T> colbuf(static_cast<std::size_t>(ckk) * p);
            std::vector<T> gcol(static_cast<std::size_t>(ckk) * p);
            for (int i = 0; i < n; ++i) {
                CMatMap<T> gy(out->g.data() + static_cast<std::int64_t>(i) * o * p, o, p);
                if (w->req) {
                    detail::im2col(x->v.data() + static_cast<std::int64_t>(i) * c * h * wd, c, h,
                                   wd, kh, kw, stride, pad, oh, ow, colbuf.data());
                    CMatMap<T> cm(colbuf.data(), ckk, p);
                    MatMap<T> gw(w->g.data(), o, ckk);
                    gw.noalias() += gy * cm.transpose();
                }
                if (b->req)
                    for (int j = 0; j < o; ++j) {
                        const T* src = out->g.data() + (static_cast<std::int64_t>(i) * o + j) * p;
                        T acc = T(0);
                        for (int k = 0; k < p; ++k) acc += src[k];
                        b->g[j] += acc;
                    }
                if (x->req) {
                    CMatMap<T> wm(w->v.data(), o, ckk);
                    MatMap<T> gc(gcol.data(), ckk, p);
                    gc.noalias() = wm.transpose() * gy;
                    detail::col2im_add(gcol.data(), c, h, wd, kh, kw, stride, pad, oh, ow,
                                       x->g.data() + static_cast<std::int64_t>(i) * c * h * wd);
                }
            }
        });
    return out;
}

// Adaptive average pooling to (oh,ow); window [floor(i*H/oh), ceil((i+1)*H/oh)).
template <typename T>
TP<T> adaptive_avg_pool(Tape<T>& tape, const TP<T>& x, int oh, int ow) {
    if (x->rank() != 4) throw std::invalid_argument("adaptive_avg_pool: expected (N,C,H,W)");
    const int n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
    if (oh > h || ow > w)
        throw std::invalid_argument("adaptive_avg_pool: target larger than input");
    auto out = make_tensor<T>(Shape{n, c, oh, ow}, x->req);
    auto lo = [](int i, int in, int on) { return (i * in) / on; };
    auto hi = [](int i, int in, int on) { return ((i + 1) * in + on - 1) / on; };
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const T* src = x->v.data() + (static_cast<std::int64_t>(i) * c + ch) * h * w;
            T* dst = out->v.data() + (static_cast<std::int64_t>(i) * c + ch) * oh * ow;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const int y0 = lo(oy, h, oh), y1 = hi(oy, h, oh);
                    const int x0 = lo(ox, w, ow), x1 = hi(ox, w, ow);
                    T acc = T(0);
                    for (int yy = y0; yy < y1; ++yy)
                        for (int xx = x0; xx < x1; ++xx) acc += src[yy * w + xx];
                    dst[oy * ow + ox] = acc / static_cast<T>((y1 - y0) * (x1 - x0));
                }
        }
    if (out->req)
        tape.record([x, out, n, c, h, w, oh, ow, lo, hi] {
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    T* gx = x->g.data() + (static_cast<std::int64_t>(i) * c + ch) * h * w;
                    const T* gy = out->g.data() + (static_cast<std::int64_t>(i) * c + ch) * oh * ow;
                    for (int oy = 0; oy < oh; ++oy)
                        for (int ox = 0; ox < ow; ++ox) {
                            const int y0 = lo(oy, h, oh), y1 = hi(oy, h, oh);
                            const int x0 = lo(ox, w, ow), x1 = hi(ox, w, ow);
                            const T gi =
                                gy[oy * ow + ox] / static_cast<T>((y1 - y0) * (x1 - x0));
                            for (int yy = y0; yy < y1; ++yy)
                                for (int xx = x0; xx < x1; ++xx) gx[yy * w + xx] += gi;
                        }
                }
        });
    return out;
}

// (N,C,H,W) -> (N,C)
template <typename T>
TP<T> global_avg_pool(Tape<T>& tape, const TP<T>& x) {
    if (x->rank() != 4) throw std::invalid_argument("global_avg_pool: expected (N,C,H,W)");
    const int n = x->dim(0), c = x->dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(x->dim(2)) * x->dim(3);
    auto out = make_tensor<T>(Shape{n, c}, x->req);
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const T* src = x->v.data() + (static_cast<std::int64_t>(i) * c + ch) * hw;
            T acc = T(0);
            for (std::int64_t k = 0; k < hw; ++k) acc += src[k];
            out->v[i * c + ch] = acc / static_cast<T>(hw);
        }
    if (out->req)
        tape.record([x, out, n, c, hw] {
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    const T gi = out->g[i * c + ch] / static_cast<T>(hw);
                    T* gx = x->g.data() + (static_cast<std::int64_t>(i) * c + ch) * hw;
                    for (std::int64_t k = 0; k < hw; ++k) gx[k] += gi;
                }
        });
    return out;
}

}  // namespace mdiqa::ad
