// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-dimension heads: cross-scale attention fusion over the pyramid, optional
// semantic feature injection, and a regressor that emits both the scalar score
// and the dimension feature vector used by the full-reference loss.

#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mdiqa/backbone.hpp"
#include "mdiqa/nn.hpp"

namespace mdiqa {

// Top-down scaled dot-product cross-attention: starting from the coarsest
// level, queries from the running fused map attend over the spatial positions
// of the next finer level. All levels must share one spatial size (post-GLP).
template <typename T>
struct Csam {
    nn::Conv2d<T> init_proj;                 // C_{L-1} -> d_h
    std::vector<nn::Conv2d<T>> q_projs;      // d_h -> d_h, one per finer level
    std::vector<nn::Conv2d<T>> k_projs;      // C_l -> d_h
    std::vector<nn::Conv2d<T>> v_projs;      // C_l -> d_h
    int d_h = 0;

    Csam() = default;
    Csam(const std::vector<int>& level_channels, int head_width, Rng& rng) : d_h(head_width) {
        const int L = static_cast<int>(level_channels.size());
        init_proj = nn::Conv2d<T>(level_channels[static_cast<std::size_t>(L - 1)], d_h, 1, 1, 0, rng);
        for (int l = 0; l < L - 1; ++l) {
            q_projs.emplace_back(d_h, d_h, 1, 1, 0, rng);
            k_projs.emplace_back(level_channels[static_cast<std::size_t>(l)], d_h, 1, 1, 0, rng);
            v_projs.emplace_back(level_channels[static_cast<std::size_t>(l)], d_h, 1, 1, 0, rng);
        }
    }

    // attn_out, when given, receives the (N,P,P) attention maps coarse-to-fine.
    ad::TP<T> forward(ad::Tape<T>& tape, const FeaturePyramid<T>& pyr,
                      std::vector<ad::TP<T>>* attn_out = nullptr) const {
        const int L = static_cast<int>(pyr.levels.size());
        if (L < 2) throw std::invalid_argument("csam: pyramid needs at least 2 levels");
        const int h = pyr.levels[0]->dim(2), w = pyr.levels[0]->dim(3);
        for (const auto& lv : pyr.levels)
            if (lv->dim(2) != h || lv->dim(3) != w)
                throw std::invalid_argument("csam: pyramid levels have mismatched spatial sizes");
        const int n = pyr.levels[0]->dim(0);
        const int p = h * w;
        const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d_h)));

        auto to_seq = [&](const ad::TP<T>& map) {  // (N,d,h,w) -> (N,P,d)
            return ad::transpose12(tape, ad::reshape(tape, map, {n, map->dim(1), p}));
        };

        auto fused = init_proj.forward(tape, pyr.levels[static_cast<std::size_t>(L - 1)]);
        for (int l = L - 2; l >= 0; --l) {
            auto q = to_seq(q_projs[static_cast<std::size_t>(l)].forward(tape, fused));
            auto k = to_seq(k_projs[static_cast<std::size_t>(l)].forward(
                tape, pyr.levels[static_cast<std::size_t>(l)]));
            auto v = to_seq(v_projs[static_cast<std::size_t>(l)].forward(
                tape, pyr.levels[static_cast<std::size_t>(l)]));
            auto logits = ad::scale(tape, ad::bmm(tape, q, ad::transpose12(tape, k)), inv_sqrt_d);
            auto attn = ad::softmax_last(tape, logits);
            if (attn_out) attn_out->push_back(attn);
            auto mixed = ad::bmm(tape, attn, v);  // (N,P,d)
            fused = ad::reshape(tape, ad::transpose12(tape, mixed), {n, d_h, h, w});
        }
        return fused;
    }

    void visit(const std::string& prefix, const nn::ParamVisitor<T>& v) const {
        init_proj.visit(prefix + ".init", v);
        for (std::size_t l = 0; l < q_projs.size(); ++l) {
            q_projs[l].visit(prefix + ".q" + std::to_string(l), v);
            k_projs[l].visit(prefix + ".k" + std::to_string(l), v);
            v_projs[l].visit(prefix + ".v" + std::to_string(l), v);
        }
    }
};

// Frozen external encoder contract: image in [0,1] -> fixed-width unit vector.
template <typename T>
class SemanticEncoder {
public:
    virtual ~SemanticEncoder() = default;
    virtual int width() const = 0;
    virtual ad::TP<T> encode(ad::Tape<T>& tape, const ad::TP<T>& images) const = 0;
    virtual void visit(const std::string& prefix, const nn::ParamVisitor<T>& v) const = 0;
};

// Desk-scale stand-in for a pretrained visual encoder: a small frozen conv net
// with unit-normalized output. A real CLIP encoder can be registered instead.
template <typename T>
class ToySemanticEncoder final : public SemanticEncoder<T> {
public:
    ToySemanticEncoder(int width, Rng& rng)
        : c1_(3, 8, 3, 4, 1, rng), c2_(8, 16, 3, 2, 1, rng), proj_(16, width, rng), width_(width) {
        const auto freeze = [](const std::string&, const ad::TP<T>& t) { t->req = false; };
        visit("sem", freeze);
    }

    int width() const override { return width_; }

    ad::TP<T> encode(ad::Tape<T>& tape, const ad::TP<T>& images) const override {
        auto x = ad::gelu(tape, c1_.forward(tape, images));
        x = ad::gelu(tape, c2_.forward(tape, x));
        auto pooled = ad::global_avg_pool(tape, x);
        return ad::l2norm_rows(tape, proj_.forward(tape, pooled));
    }

    void visit(const std::string& prefix, const nn::ParamVisitor<T>& v) const override {
        c1_.visit(prefix + ".c1", v);
        c2_.visit(prefix + ".c2", v);
        proj_.visit(prefix + ".proj", v);
    }

private:
    nn::Conv2d<T> c1_, c2_;
    nn::Linear<T> proj_;
    int width_;
};

template <typename T>
std::shared_ptr<SemanticEncoder<T>> make_semantic_encoder(const std::string& name, int width,
                                                          Rng& rng) {
    if (name == "none") return nullptr;
    if (name == "toy") return std::make_shared<ToySemanticEncoder<T>>(width, rng);
    throw std::invalid_argument("unknown semantic encoder: " + name);
}

// Position-wise residual MLP refining the fused map with a broadcast semantic
// vector. Disabled mode is an exact passthrough.
template <typename T>
struct SemanticInject {
    nn::Conv2d<T> fc1, fc2;

    SemanticInject() = default;
    SemanticInject(int d_h, int d_s, Rng& rng)
        : fc1(d_h + d_s, d_h, 1, 1, 0, rng), fc2(d_h, d_h, 1, 1, 0, rng) {}

    ad::TP<T> forward(ad::Tape<T>& tape, const ad::TP<T>& fused, const ad::TP<T>& sem,
                      bool enabled) const {
        if (!enabled) return fused;
        auto bmap = ad::broadcast_map(tape, sem, fused->dim(2), fused->dim(3));
        auto cat = ad::concat_channels(tape, {fused, bmap});
        auto hmid = ad::gelu(tape, fc1.forward(tape, cat));
        return ad::add(tape, fused, fc2.forward(tape, hmid));
    }

    void visit(const std::string& prefix, const nn::ParamVisitor<T>& v) const {
        fc1.visit(prefix + ".fc1", v);
        fc2.visit(prefix + ".fc2", v);
    }
};

// Global pooling + MLP. The hidden vector right before the final linear layer
// is the dimension feature compared by the full-reference loss.
template <typename T>
struct Regressor {
    nn::Linear<T> hidden;  // d_h -> d_g
    nn::Linear<T> out;     // d_g -> 1

    Regressor() = default;
    Regressor(int d_h, int d_g, Rng& rng) : hidden(d_h, d_g, rng), out(d_g, 1, rng) {}

    // -> (score (N), feature (N,d_g))
    std::pair<ad::TP<T>, ad::TP<T>> forward(ad::Tape<T>& tape, const ad::TP<T>& refined) const {
        auto pooled = ad::global_avg_pool(tape, refined);
        auto feat = ad::gelu(tape, hidden.forward(tape, pooled));
        auto score = ad::reshape(tape, out.forward(tape, feat), {refined->dim(0)});
        return {score, feat};
    }

    void visit(const std::string& prefix, const nn::ParamVisitor<T>& v) const {
        hidden.visit(prefix + ".hidden", v);
        out.visit(prefix + ".out", v);
    }
};

template <typename T>
struct DimensionHead {
    std::string name;
    Branch branch = Branch::technical;
    Csam<T> csam;
    SemanticInject<T> inject;
    Regressor<T> regressor;

    DimensionHead() = default;
    DimensionHead(std::string nm, Branch br, const std::vector<int>& level_channels, int d_h,
                  int d_s, int d_g, Rng& rng)
        : name(std::move(nm)),
          branch(br),
          csam(level_channels, d_h, rng),
          inject(d_h, d_s, rng),
          regressor(d_h, d_g, rng) {}

    std::pair<ad::TP<T>, ad::TP<T>> forward(ad::Tape<T>& tape, const FeaturePyramid<T>& pyr,
                                            const ad::TP<T>& sem, bool use_sem) const {
        auto fused = csam.forward(tape, pyr);
        auto refined = inject.forward(tape, fused, sem, use_sem);
        return regressor.forward(tape, refined);
    }

    void visit(const std::string& prefix, const nn::ParamVisitor<T>& v) const {
        csam.visit(prefix + ".csam", v);
        inject.visit(prefix + ".inject", v);
        regressor.visit(prefix + ".reg", v);
    }
};

}  // namespace mdiqa
