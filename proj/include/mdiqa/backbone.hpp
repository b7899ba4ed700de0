// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared multi-scale feature extractor with Gated Local Pooling. Two separate
// instances serve the technical and aesthetic branches; their parameters are
// disjoint by construction.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mdiqa/nn.hpp"

namespace mdiqa {

enum class Branch { technical, aesthetic };

inline const char* branch_name(Branch b) {
    return b == Branch::technical ? "technical" : "aesthetic";
}

template <typename T>
struct FeaturePyramid {
    std::vector<ad::TP<T>> levels;                  // post-GLP, all (N, C_l, h*, w*)
    std::vector<std::pair<int, int>> pre_glp_sizes; // strictly decreasing
    Branch branch = Branch::technical;
};

// Gated local pooling: local average of x * sigmoid(gate(x)), where gate is a
// learned 1x1 projection. Pooling windows adapt to the target size.
template <typename T>
struct Glp {
    nn::Conv2d<T> gate;

    Glp() = default;
    Glp(int channels, Rng& rng) : gate(channels, channels, 1, 1, 0, rng) {}

    ad::TP<T> forward(ad::Tape<T>& tape, const ad::TP<T>& x, int th, int tw) const {
        auto g = ad::sigmoid(tape, gate.forward(tape, x));
        return ad::adaptive_avg_pool(tape, ad::mul(tape, x, g), th, tw);
    }

    void visit(const std::string& prefix, const nn::ParamVisitor<T>& v) const {
        gate.visit(prefix + ".gate", v);
    }
};

// Small strided CNN: a stride-4 stem followed by one stride-2 stage per extra
// pyramid level (overall strides 4, 8, 16, ...). Widths come from the config;
// a pretrained extractor can replace this behind the same pyramid contract.
template <typename T>
class Backbone {
public:
    Backbone() = default;
    Backbone(std::vector<int> widths, Rng& rng) : widths_(std::move(widths)) {
        convs_.emplace_back(3, widths_[0], 3, 2, 1, rng);           // stem a
        convs_.emplace_back(widths_[0], widths_[0], 3, 2, 1, rng);  // stem b -> level 0
        for (std::size_t i = 1; i < widths_.size(); ++i)
            convs_.emplace_back(widths_[i - 1], widths_[i], 3, 2, 1, rng);
        for (int wdt : widths_) glps_.emplace_back(wdt, rng);
    }

    int levels() const { return static_cast<int>(widths_.size()); }

    // Coarsest stride is 4 * 2^(L-1); require at least a 2x2 coarsest map.
    int min_input() const { return 8 << (levels() - 1); }

    FeaturePyramid<T> extract(ad::Tape<T>& tape, const ad::TP<T>& images, Branch branch) const {
        if (images->rank() != 4 || images->dim(1) != 3)
            throw std::invalid_argument("extract_pyramid: expected (N,3,H,W) input");
        if (images->dim(2) < min_input() || images->dim(3) < min_input())
            throw std::invalid_argument("extract_pyramid: input " +
                                        std::to_string(images->dim(2)) + "x" +
                                        std::to_string(images->dim(3)) +
                                        " below backbone minimum " + std::to_string(min_input()) +
                                        "x" + std::to_string(min_input()));
        FeaturePyramid<T> pyr;
        pyr.branch = branch;
        std::vector<ad::TP<T>> raw;
        auto x = ad::gelu(tape, convs_[0].forward(tape, images));
        x = ad::gelu(tape, convs_[1].forward(tape, x));
        raw.push_back(x);
        for (std::size_t i = 2; i < convs_.size(); ++i) {
            x = ad::gelu(tape, convs_[i].forward(tape, x));
            raw.push_back(x);
        }
        const int th = raw.back()->dim(2), tw = raw.back()->dim(3);
        for (std::size_t l = 0; l < raw.size(); ++l) {
            pyr.pre_glp_sizes.emplace_back(raw[l]->dim(2), raw[l]->dim(3));
            pyr.levels.push_back(glps_[l].forward(tape, raw[l], th, tw));
        }
        return pyr;
    }

    void visit(const std::string& prefix, const nn::ParamVisitor<T>& v) const {
        for (std::size_t i = 0; i < convs_.size(); ++i)
            convs_[i].visit(prefix + ".conv" + std::to_string(i), v);
        for (std::size_t i = 0; i < glps_.size(); ++i)
            glps_[i].visit(prefix + ".glp" + std::to_string(i), v);
    }

    const std::vector<int>& widths() const { return widths_; }
    const Glp<T>& glp(int i) const { return glps_[static_cast<std::size_t>(i)]; }

private:
    std::vector<int> widths_;
    std::vector<nn::Conv2d<T>> convs_;
    std::vector<Glp<T>> glps_;
};

}  // namespace mdiqa
