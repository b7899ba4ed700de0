// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mdiqa/ops.hpp"
#include "mdiqa/rng.hpp"

namespace mdiqa::nn {

template <typename T>
using ParamVisitor = std::function<void(const std::string&, const ad::TP<T>&)>;

template <typename T>
void init_uniform(const ad::TP<T>& t, Rng& rng, double bound) {
    for (auto& v : t->v) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
struct Conv2d {
    ad::TP<T> w, b;
    int stride = 1, pad = 0;

    Conv2d() = default;
    Conv2d(int in, int out, int k, int stride_, int pad_, Rng& rng) : stride(stride_), pad(pad_) {
        w = ad::make_tensor<T>({out, in, k, k}, true);
        b = ad::make_tensor<T>({out}, true);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in) * k * k);
        init_uniform(w, rng, bound);
        init_uniform(b, rng, bound);
    }

    ad::TP<T> forward(ad::Tape<T>& tape, const ad::TP<T>& x) const {
        return ad::conv2d(tape, x, w, b, stride, pad);
    }

    void visit(const std::string& prefix, const ParamVisitor<T>& v) const {
        v(prefix + ".w", w);
        v(prefix + ".b", b);
    }
};

template <typename T>
struct Linear {
    ad::TP<T> w, b;

    Linear() = default;
    Linear(int in, int out, Rng& rng) {
        w = ad::make_tensor<T>({out, in}, true);
        b = ad::make_tensor<T>({out}, true);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        init_uniform(w, rng, bound);
        init_uniform(b, rng, bound);
    }

    ad::TP<T> forward(ad::Tape<T>& tape, const ad::TP<T>& x) const {
        return ad::linear(tape, x, w, b);
    }

    void visit(const std::string& prefix, const ParamVisitor<T>& v) const {
        v(prefix + ".w", w);
        v(prefix + ".b", b);
    }
};

template <typename T, typename M>
std::vector<std::pair<std::string, ad::TP<T>>> named_params(const M& m) {
    std::vector<std::pair<std::string, ad::TP<T>>> out;
    m.visit([&](const std::string& name, const ad::TP<T>& t) { out.emplace_back(name, t); });
    return out;
}

}  // namespace mdiqa::nn
