// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0
//
// Training objectives: masked MSE, the norm-in-norm loss, their hybrid, the
// no-reference and full-reference restoration losses, and the ratio override
// applied to adaptive weights.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "mdiqa/aggregate.hpp"
#include "mdiqa/ops.hpp"

namespace mdiqa {

// Dimension name -> lambda multiplier; names absent from the map keep 1.0.
using RatioOverride = std::map<std::string, double>;

// w'_D = lambda_D * w_D over an ordered weight vector.
inline std::vector<double> apply_override(const std::vector<double>& weights,
                                          const RatioOverride& ratios,
                                          const std::vector<std::string>& names) {
    if (weights.size() != names.size())
        throw std::invalid_argument("apply_override: weight/name count mismatch");
    std::vector<double> out = weights;
    for (const auto& [name, lambda] : ratios) {
        if (lambda <= 0.0)
            throw std::invalid_argument("ratio override must be positive: " + name);
        bool found = false;
        for (std::size_t j = 0; j < names.size(); ++j)
            if (names[j] == name) {
                out[j] *= lambda;
                found = true;
                break;
            }
        if (!found) throw std::invalid_argument("ratio override names unknown dimension: " + name);
    }
    return out;
}

// ---------------------------------------------------------------------------
// IQA losses (graph-valued; read ->v[0] for the number)

template <typename T>
ad::TP<T> mse_loss(ad::Tape<T>& tape, const ad::TP<T>& pred, const ad::TP<T>& label,
                   const std::vector<std::uint8_t>& mask = {}) {
    if (pred->shape != label->shape)
        throw std::invalid_argument("mse_loss: pred/label shape mismatch");
    const std::int64_t n = pred->numel();
    std::vector<T> m(static_cast<std::size_t>(n), T(1));
    if (!mask.empty()) {
        if (static_cast<std::int64_t>(mask.size()) != n)
            throw std::invalid_argument("mse_loss: mask length mismatch");
        for (std::int64_t i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = mask[static_cast<std::size_t>(i)] ? T(1) : T(0);
    }
    T count = T(0);
    for (T x : m) count += x;
    if (count == T(0)) throw std::invalid_argument("mse_loss: all entries masked");
    auto sq = ad::square_op(tape, ad::sub(tape, pred, label));
    return ad::scale(tape, ad::sum(tape, ad::mul_const(tape, sq, m)), T(1) / count);
}

namespace detail {

// v -> (v - mean(v)) / max(||v - mean(v)||, eps); a constant batch maps to
// zero, and the normalization is exactly invariant to positive affine maps of
// v whenever the centered norm clears the guard.
template <typename T>
ad::TP<T> nin_normalize(ad::Tape<T>& tape, const ad::TP<T>& v) {
    auto centered = ad::sub_bcast(tape, v, ad::mean(tape, v));
    auto norm = ad::sqrt_op(tape, ad::sum(tape, ad::square_op(tape, centered)));
    return ad::div_bcast(tape, centered, ad::clamp_min(tape, norm, T(1e-8)));
}

template <typename T>
bool is_constant(const ad::TP<T>& v) {
    for (std::int64_t i = 1; i < v->numel(); ++i)
        if (v->v[static_cast<std::size_t>(i)] != v->v[0]) return false;
    return true;
}

}  // namespace detail

// Squared L2 distance between mean-centered, L2-normalized batches. Invariant
// to positive affine transforms of the predictions.
template <typename T>
ad::TP<T> nin_loss(ad::Tape<T>& tape, const ad::TP<T>& pred, const ad::TP<T>& label) {
    if (pred->shape != label->shape)
        throw std::invalid_argument("nin_loss: pred/label shape mismatch");
    if (pred->numel() < 2) throw std::invalid_argument("nin_loss: batch size must be >= 2");
    if (detail::is_constant(label))
        throw std::invalid_argument("nin_loss: label batch is constant");
    auto d = ad::sub(tape, detail::nin_normalize(tape, pred), detail::nin_normalize(tape, label));
    return ad::sum(tape, ad::square_op(tape, d));
}

// mse + alpha * nin; the nin term is skipped when fewer than two entries are
// unmasked or the unmasked labels are constant.
template <typename T>
ad::TP<T> hybrid_iqa_loss(ad::Tape<T>& tape, const ad::TP<T>& pred, const ad::TP<T>& label,
                          const std::vector<std::uint8_t>& mask, T alpha) {
    auto loss = mse_loss(tape, pred, label, mask);
    if (alpha == T(0)) return loss;
    std::vector<int> keep;
    for (std::int64_t i = 0; i < pred->numel(); ++i)
        if (mask.empty() || mask[static_cast<std::size_t>(i)]) keep.push_back(static_cast<int>(i));
    if (keep.size() < 2) return loss;
    auto lsub = ad::gather_rows(tape, label, keep);
    if (detail::is_constant(lsub)) return loss;
    auto psub = ad::gather_rows(tape, pred, keep);
    return ad::add(tape, loss, ad::scale(tape, nin_loss(tape, psub, lsub), alpha));
}

// ---------------------------------------------------------------------------
// Restoration losses. The critic must be frozen by the caller; gradients then
// flow only into the restored image batch.

// Negated batch-mean overall score of the restored images, weights predicted
// per image and scaled by the override before fusion.
template <typename T>
ad::TP<T> nr_loss(ad::Tape<T>& tape, const Model<T>& critic, const ad::TP<T>& restored,
                  const RatioOverride& override_ratios = {}) {
    if (restored->dim(0) == 0) throw std::invalid_argument("nr_loss: empty batch");
    ForwardOpts opts;
    opts.ratio_override = override_ratios.empty() ? nullptr : &override_ratios;
    auto out = critic.forward(tape, restored, opts);
    return ad::neg(tape, ad::mean(tape, out.overall));
}

struct FrBreakdown {
    double total = 0.0;
    std::vector<std::pair<std::string, double>> terms;  // per active dimension
};

// Weighted per-dimension L1 distance between the dimension features of the
// restored and reference batches. Weights come from the reference image and
// are override-scaled; no gradient reaches the reference.
template <typename T>
ad::TP<T> fr_loss(ad::Tape<T>& tape, const Model<T>& critic, const ad::TP<T>& restored,
                  const ad::TP<T>& reference, const RatioOverride& override_ratios = {},
                  FrBreakdown* breakdown = nullptr) {
    if (restored->shape != reference->shape)
        throw std::invalid_argument("fr_loss: restored/reference shape mismatch");
    if (restored->dim(0) == 0) throw std::invalid_argument("fr_loss: empty batch");

    ForwardOpts ref_opts;
    ref_opts.ratio_override = override_ratios.empty() ? nullptr : &override_ratios;
    auto ref_out = critic.forward(tape, reference, ref_opts);
    auto res_out = critic.forward(tape, restored, {});

    if (breakdown) breakdown->terms.clear();
    ad::TP<T> total;
    for (int j = 0; j < critic.dims(); ++j) {
        auto diff = ad::rowmean(
            tape, ad::abs_op(tape, ad::sub(tape, res_out.features[static_cast<std::size_t>(j)],
                                           ref_out.features[static_cast<std::size_t>(j)])));
        auto term = ad::mean(tape, ad::mul(tape, diff, ad::col(tape, ref_out.weights, j)));
        if (breakdown)
            breakdown->terms.emplace_back(critic.active_name(j), static_cast<double>(term->v[0]));
        total = total ? ad::add(tape, total, term) : term;
    }
    if (breakdown) breakdown->total = static_cast<double>(total->v[0]);
    return total;
}

}  // namespace mdiqa
