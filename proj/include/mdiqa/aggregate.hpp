// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0
//
// Image-adaptive weight branch, fusion stage, and the assembled model mapping
// an image batch to per-dimension scores, features, weights and the overall
// quality score.

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdiqa/config.hpp"
#include "mdiqa/heads.hpp"
#include "mdiqa/image.hpp"

namespace mdiqa {

// Small encoder emitting one positive weight per active dimension.
template <typename T>
struct WeightBranch {
    nn::Conv2d<T> c1, c2;
    nn::Linear<T> head;

    WeightBranch() = default;
    WeightBranch(int width, int dims, Rng& rng)
        : c1(3, width, 5, 4, 2, rng), c2(width, 2 * width, 3, 2, 1, rng),
          head(2 * width, dims, rng) {}

    ad::TP<T> forward(ad::Tape<T>& tape, const ad::TP<T>& images) const {
        auto x = ad::gelu(tape, c1.forward(tape, images));
        x = ad::gelu(tape, c2.forward(tape, x));
        auto pooled = ad::global_avg_pool(tape, x);
        return ad::softplus(tape, head.forward(tape, pooled));
    }

    void visit(const std::string& prefix, const nn::ParamVisitor<T>& v) const {
        c1.visit(prefix + ".c1", v);
        c2.visit(prefix + ".c2", v);
        head.visit(prefix + ".head", v);
    }
};

// Exactly three linear layers.
template <typename T>
struct FusionMlp {
    nn::Linear<T> l1, l2, l3;

    FusionMlp() = default;
    FusionMlp(int in, int hidden, Rng& rng)
        : l1(in, hidden, rng), l2(hidden, hidden, rng), l3(hidden, 1, rng) {}

    ad::TP<T> forward(ad::Tape<T>& tape, const ad::TP<T>& x) const {
        auto h1 = ad::gelu(tape, l1.forward(tape, x));
        auto h2 = ad::gelu(tape, l2.forward(tape, h1));
        return ad::reshape(tape, l3.forward(tape, h2), {x->dim(0)});
    }

    void visit(const std::string& prefix, const nn::ParamVisitor<T>& v) const {
        l1.visit(prefix + ".l1", v);
        l2.visit(prefix + ".l2", v);
        l3.visit(prefix + ".l3", v);
    }
};

// Graph-side outputs for a batch.
template <typename T>
struct QualityBatch {
    ad::TP<T> scores;                  // (N, D_active)
    std::vector<ad::TP<T>> features;   // per active dimension, (N, d_g)
    ad::TP<T> weights;                 // (N, D_active), override already applied
    ad::TP<T> overall;                 // (N)
};

// Plain inference result for one image.
struct QualityOutput {
    std::map<std::string, double> dim_scores;
    std::map<std::string, double> weights;
    double overall = 0.0;
};

struct ForwardOpts {
    bool use_semantic = true;
    bool weight_ones = false;
    const std::map<std::string, double>* ratio_override = nullptr;
};

template <typename T>
class Model {
public:
    explicit Model(const Config& cfg) : cfg_(validate_config(cfg)) {
        const auto& m = cfg_.model;
        const auto& reg = cfg_.registry;
        Rng rng(mix_seed({cfg_.seed, 0x30DE1ull}));
        if (m.use_technical) backbone_t_ = std::make_unique<Backbone<T>>(m.backbone_widths, rng);
        if (m.use_aesthetic) backbone_a_ = std::make_unique<Backbone<T>>(m.backbone_widths, rng);
        for (int i = 0; i < reg.count(); ++i) {
            const bool tech = reg.is_technical(i);
            if ((tech && !m.use_technical) || (!tech && !m.use_aesthetic)) continue;
            active_.push_back(i);
            heads_.emplace_back(reg.name(i), tech ? Branch::technical : Branch::aesthetic,
                                m.backbone_widths, m.head_width, m.semantic_width,
                                m.feature_width, rng);
        }
        Rng sem_rng(mix_seed({cfg_.seed, 0x5E4Aull}));
        encoder_ = make_semantic_encoder<T>(m.semantic_encoder, m.semantic_width, sem_rng);
        if (m.use_semantic_features && !encoder_)
            throw std::invalid_argument(
                "no semantic encoder registered while use_semantic_features=true");
        wbranch_ = WeightBranch<T>(m.weight_branch_width, dims(), rng);
        const int fusion_in =
            m.fusion_mode == "feature" ? dims() * m.feature_width : dims();
        fusion_ = FusionMlp<T>(fusion_in, m.fusion_hidden, rng);
    }

    int dims() const { return static_cast<int>(active_.size()); }
    const std::vector<int>& active_indices() const { return active_; }
    const Config& config() const { return cfg_; }
    const DimensionRegistry& registry() const { return cfg_.registry; }

    std::string active_name(int j) const { return cfg_.registry.name(active_[static_cast<std::size_t>(j)]); }

    const Backbone<T>* backbone(Branch b) const {
        return b == Branch::technical ? backbone_t_.get() : backbone_a_.get();
    }
    const std::vector<DimensionHead<T>>& heads() const { return heads_; }
    const WeightBranch<T>& weight_branch() const { return wbranch_; }
    const FusionMlp<T>& fusion() const { return fusion_; }
    const SemanticEncoder<T>* encoder() const { return encoder_.get(); }

    // Per-dimension scores for one branch only, no semantic injection — the
    // stage-1 training path. Returns scores (N, count) in head order plus the
    // registry indices they correspond to.
    std::pair<ad::TP<T>, std::vector<int>> branch_scores(ad::Tape<T>& tape,
                                                         const ad::TP<T>& images,
                                                         Branch branch) const {
        const Backbone<T>* bb = backbone(branch);
        if (!bb)
            throw std::invalid_argument(std::string("branch disabled by config: ") +
                                        branch_name(branch));
        auto pyr = bb->extract(tape, images, branch);
        std::vector<ad::TP<T>> scores;
        std::vector<int> idx;
        for (std::size_t h = 0; h < heads_.size(); ++h) {
            if (heads_[h].branch != branch) continue;
            scores.push_back(heads_[h].forward(tape, pyr, nullptr, false).first);
            idx.push_back(active_[h]);
        }
        return {ad::stack_cols(tape, scores), idx};
    }

    QualityBatch<T> forward(ad::Tape<T>& tape, const ad::TP<T>& images,
                            const ForwardOpts& opts = {}) const {
        const auto& m = cfg_.model;
        QualityBatch<T> out;
        const int n = images->dim(0);

        std::optional<FeaturePyramid<T>> pyr_t, pyr_a;
        if (backbone_t_) pyr_t = backbone_t_->extract(tape, images, Branch::technical);
        if (backbone_a_) pyr_a = backbone_a_->extract(tape, images, Branch::aesthetic);

        const bool inject = opts.use_semantic && m.use_semantic_features;
        ad::TP<T> sem;
        if (inject) sem = encoder_->encode(tape, images);

        std::vector<ad::TP<T>> scores;
        for (const auto& head : heads_) {
            const auto& pyr = head.branch == Branch::technical ? *pyr_t : *pyr_a;
            auto [score, feat] = head.forward(tape, pyr, sem, inject);
            scores.push_back(score);
            out.features.push_back(feat);
        }
        out.scores = ad::stack_cols(tape, scores);

        if (opts.weight_ones || !m.use_weight_branch) {
            auto ones = ad::make_tensor<T>({n, dims()}, false);
            ones->fill(T(1));
            out.weights = ones;
        } else {
            out.weights = wbranch_.forward(tape, images);
        }
        if (opts.ratio_override && !opts.ratio_override->empty())
            out.weights = ad::mul_rowvec_const(tape, out.weights, override_vector(*opts.ratio_override));

        out.overall = fuse(tape, out);
        return out;
    }

    // Maps weighted dimension outputs to the overall score. Scalar mode feeds
    // w (.) s to the 3-layer MLP; feature mode concatenates the weight-scaled
    // dimension features instead.
    ad::TP<T> fuse(ad::Tape<T>& tape, const QualityBatch<T>& partial) const {
        if (cfg_.model.fusion_mode == "feature") {
            if (static_cast<int>(partial.features.size()) != dims())
                throw std::invalid_argument(
                    "fuse: feature mode requires the per-dimension features");
            std::vector<ad::TP<T>> parts;
            for (int j = 0; j < dims(); ++j)
                parts.push_back(ad::mul_col(tape, partial.features[static_cast<std::size_t>(j)],
                                            ad::col(tape, partial.weights, j)));
            return fusion_.forward(tape, ad::concat_cols(tape, parts));
        }
        if (!partial.scores) throw std::invalid_argument("fuse: scalar mode requires scores");
        return fusion_.forward(tape, ad::mul(tape, partial.weights, partial.scores));
    }

    // Ratio override as a dense multiplier in active-dimension order; unknown
    // names are rejected.
    std::vector<T> override_vector(const std::map<std::string, double>& ratios) const {
        std::vector<T> mult(static_cast<std::size_t>(dims()), T(1));
        for (const auto& [name, lambda] : ratios) {
            if (lambda <= 0.0)
                throw std::invalid_argument("ratio override must be positive: " + name);
            bool found = false;
            for (int j = 0; j < dims(); ++j)
                if (active_name(j) == name) {
                    mult[static_cast<std::size_t>(j)] = static_cast<T>(lambda);
                    found = true;
                    break;
                }
            if (!found)
                throw std::invalid_argument("ratio override names unknown dimension: " + name);
        }
        return mult;
    }

    void visit(const nn::ParamVisitor<T>& v) const {
        if (backbone_t_) backbone_t_->visit("backbone_t", v);
        if (backbone_a_) backbone_a_->visit("backbone_a", v);
        for (std::size_t h = 0; h < heads_.size(); ++h)
            heads_[h].visit("head." + heads_[h].name, v);
        if (encoder_) encoder_->visit("sem", v);
        wbranch_.visit("wbranch", v);
        fusion_.visit("fusion", v);
    }

    std::vector<std::pair<std::string, ad::TP<T>>> named_params() const {
        std::vector<std::pair<std::string, ad::TP<T>>> out;
        visit([&](const std::string& name, const ad::TP<T>& t) { out.emplace_back(name, t); });
        return out;
    }

    // Marks parameters trainable per predicate; the semantic encoder always
    // stays frozen.
    template <typename Pred>
    void set_trainable(Pred pred) const {
        visit([&](const std::string& name, const ad::TP<T>& t) {
            const bool frozen_encoder = name.rfind("sem.", 0) == 0;
            t->req = !frozen_encoder && pred(name);
        });
    }

    void zero_grad() const {
        visit([](const std::string&, const ad::TP<T>& t) { t->zero_grad(); });
    }

private:
    Config cfg_;
    std::vector<int> active_;  // registry indices of active dimensions
    std::unique_ptr<Backbone<T>> backbone_t_, backbone_a_;
    std::vector<DimensionHead<T>> heads_;
    std::shared_ptr<SemanticEncoder<T>> encoder_;
    WeightBranch<T> wbranch_;
    FusionMlp<T> fusion_;
};

// Batch helper: stack images (all equal size) into an (N,3,H,W) tensor.
template <typename T>
ad::TP<T> images_to_tensor(const std::vector<ImageTensor>& images, bool requires_grad = false) {
    if (images.empty()) throw std::invalid_argument("images_to_tensor: empty batch");
    const int h = images[0].height, w = images[0].width;
    auto t = ad::make_tensor<T>({static_cast<int>(images.size()), 3, h, w}, requires_grad);
    std::size_t off = 0;
    for (const auto& img : images) {
        if (img.height != h || img.width != w)
            throw std::invalid_argument("images_to_tensor: images must share one size");
        for (std::size_t i = 0; i < img.pix.size(); ++i) t->v[off + i] = static_cast<T>(img.pix[i]);
        off += img.pix.size();
    }
    return t;
}

template <typename T>
ImageTensor tensor_to_image(const ad::TP<T>& t, int batch_index) {
    const int h = t->dim(2), w = t->dim(3);
    ImageTensor img(h, w);
    const std::size_t off = static_cast<std::size_t>(batch_index) * 3 * h * w;
    for (std::size_t i = 0; i < img.pix.size(); ++i)
        img.pix[i] = clamp01(static_cast<double>(t->v[off + i]));
    return img;
}

// Single-image inference to the plain result form.
template <typename T>
QualityOutput score_image(const Model<T>& model, const ImageTensor& image) {
    ad::Tape<T> tape;
    auto batch = images_to_tensor<T>({image});
    auto out = model.forward(tape, batch, {});
    QualityOutput q;
    for (int j = 0; j < model.dims(); ++j) {
        q.dim_scores[model.active_name(j)] = static_cast<double>(out.scores->v[static_cast<std::size_t>(j)]);
        q.weights[model.active_name(j)] = static_cast<double>(out.weights->v[static_cast<std::size_t>(j)]);
    }
    q.overall = static_cast<double>(out.overall->v[0]);
    return q;
}

}  // namespace mdiqa
