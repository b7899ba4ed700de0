// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0
//
// Toy convolutional restorer trained with an L1 base loss plus the tunable
// no-reference / full-reference losses, and the ratio sweep harness.

#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "mdiqa/data.hpp"
#include "mdiqa/losses.hpp"
#include "mdiqa/optim.hpp"
#include "mdiqa/train.hpp"

namespace mdiqa {

// Reapplies the data module's distortion families in canonical order.
inline ImageTensor degrade(const ImageTensor& clean, std::vector<DistortionSpec> specs,
                           std::uint64_t seed) {
    std::sort(specs.begin(), specs.end(), [](const DistortionSpec& a, const DistortionSpec& b) {
        return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    });
    for (std::size_t i = 1; i < specs.size(); ++i)
        if (specs[i].kind == specs[i - 1].kind)
            throw std::invalid_argument(std::string("duplicate distortion kind: ") +
                                        kind_name(specs[i].kind));
    ImageTensor out = clean;
    for (const auto& spec : specs)
        out = apply_distortion(out, spec, mix_seed({seed, static_cast<std::uint64_t>(spec.kind) + 1}));
    return out;
}

// 8-layer residual conv net; the final layer starts at zero so the restorer is
// the identity at initialization.
template <typename T>
class Restorer {
public:
    Restorer() = default;
    Restorer(int channels, Rng& rng) {
        convs_.emplace_back(3, channels, 3, 1, 1, rng);
        for (int i = 0; i < 6; ++i) convs_.emplace_back(channels, channels, 3, 1, 1, rng);
        convs_.emplace_back(channels, 3, 3, 1, 1, rng);
        convs_.back().w->fill(T(0));
        convs_.back().b->fill(T(0));
    }

    ad::TP<T> forward(ad::Tape<T>& tape, const ad::TP<T>& x) const {
        auto h = ad::gelu(tape, convs_[0].forward(tape, x));
        for (std::size_t i = 1; i + 1 < convs_.size(); ++i)
            h = ad::gelu(tape, convs_[i].forward(tape, h));
        return ad::add(tape, x, convs_.back().forward(tape, h));
    }

    void visit(const nn::ParamVisitor<T>& v) const {
        for (std::size_t i = 0; i < convs_.size(); ++i)
            convs_[i].visit("restorer.conv" + std::to_string(i), v);
    }

    std::vector<std::pair<std::string, ad::TP<T>>> named_params() const {
        std::vector<std::pair<std::string, ad::TP<T>>> out;
        visit([&](const std::string& name, const ad::TP<T>& t) { out.emplace_back(name, t); });
        return out;
    }

    void set_trainable(bool on) const {
        visit([on](const std::string&, const ad::TP<T>& t) { t->req = on; });
    }

    void zero_grad() const {
        visit([](const std::string&, const ad::TP<T>& t) { t->zero_grad(); });
    }

private:
    std::vector<nn::Conv2d<T>> convs_;
};

struct RestorationRun {
    RestorePlan plan;
    std::uint64_t seed = 1;

    void validate() const {
        if (plan.lambda_nr != 0.0 && plan.lambda_fr != 0.0)
            throw std::invalid_argument(
                "at most one of lambda_nr and lambda_fr may be nonzero per run");
        if (plan.lambda_org < 0.0 || plan.lambda_nr < 0.0 || plan.lambda_fr < 0.0)
            throw std::invalid_argument("loss coefficients must be non-negative");
        if (plan.batch_size < 1 || plan.iterations < 0)
            throw std::invalid_argument("restoration batch/iterations out of range");
    }
};

struct RestoreMetrics {
    double critic_overall = 0.0;
    std::map<std::string, double> critic_dims;
    double sharpness_proxy = 0.0;   // mean gradient-magnitude energy
    double noisiness_proxy = 0.0;   // mean high-frequency residual energy
    double l1_to_reference = 0.0;
};

template <typename T>
struct RestoreResult {
    Restorer<T> net;
    RestoreMetrics val_metrics;
    std::vector<ImageTensor> val_outputs;
};

namespace detail {

// Deterministic degraded/clean pair derived from (seed, tag, index).
inline std::pair<ImageTensor, ImageTensor> restoration_pair(const RestorePlan& plan,
                                                            std::uint64_t seed, std::uint64_t tag,
                                                            std::uint64_t index) {
    Rng rng(mix_seed({seed, tag, index, 0xC1EA0ull}));
    ImageTensor clean = synth_clean_image(plan.patch, plan.patch, rng);
    std::vector<DistortionSpec> specs;
    if (plan.blur_severity > 0.0) specs.push_back({DistortionKind::blur, plan.blur_severity});
    if (plan.noise_severity > 0.0) specs.push_back({DistortionKind::noise, plan.noise_severity});
    ImageTensor degraded = degrade(clean, specs, mix_seed({seed, tag, index, 0xDE64ull}));
    return {degraded, clean};
}

template <typename T>
RestoreMetrics eval_restorer(const Restorer<T>& net, const Model<T>& critic,
                             const RestorePlan& plan, std::uint64_t seed,
                             std::vector<ImageTensor>* outputs) {
    RestoreMetrics metrics;
    if (outputs) outputs->clear();
    const int count = std::max(1, plan.val_count);
    double l1 = 0.0;
    std::vector<double> overall;
    std::map<std::string, std::vector<double>> dims;
    double sharp = 0.0, noise = 0.0;
    for (int i = 0; i < count; ++i) {
        auto [degraded, clean] = restoration_pair(plan, seed, 0x7A1ull, static_cast<std::uint64_t>(i));
        ad::Tape<T> tape;
        auto x = images_to_tensor<T>({degraded});
        auto y = net.forward(tape, x);
        ImageTensor out = tensor_to_image(y, 0);
        if (outputs) outputs->push_back(out);
        const QualityOutput q = score_image(critic, out);
        overall.push_back(q.overall);
        for (const auto& [k, v] : q.dim_scores) dims[k].push_back(v);
        sharp += gradient_energy(out);
        noise += highfreq_energy(out);
        double acc = 0.0;
        for (std::size_t p = 0; p < out.pix.size(); ++p)
            acc += std::abs(static_cast<double>(out.pix[p]) - clean.pix[p]);
        l1 += acc / static_cast<double>(out.pix.size());
    }
    const double inv = 1.0 / count;
    for (double v : overall) metrics.critic_overall += v * inv;
    for (const auto& [k, vs] : dims) {
        double acc = 0.0;
        for (double v : vs) acc += v;
        metrics.critic_dims[k] = acc / static_cast<double>(vs.size());
    }
    metrics.sharpness_proxy = sharp * inv;
    metrics.noisiness_proxy = noise * inv;
    metrics.l1_to_reference = l1 * inv;
    return metrics;
}

}  // namespace detail

// Optimizes the restorer on synthetic degraded/clean pairs with
// lambda_org*L1 + lambda_nr*L_NR + lambda_fr*L_FR against a frozen critic.
template <typename T>
RestoreResult<T> train_restorer(const RestorationRun& run, const Model<T>& critic,
                                const LogSink& log = {}) {
    run.validate();
    const RestorePlan& plan = run.plan;
    critic.set_trainable([](const std::string&) { return false; });

    RestoreResult<T> result;
    Rng init_rng(mix_seed({run.seed, 0x4E57ull}));
    result.net = Restorer<T>(plan.restorer_channels, init_rng);
    result.net.set_trainable(true);

    AdamW<T> opt(result.net.named_params(), 0.0);
    for (long long step = 0; step < plan.iterations; ++step) {
        std::vector<ImageTensor> degraded_batch, clean_batch;
        for (int slot = 0; slot < plan.batch_size; ++slot) {
            auto [degraded, clean] = detail::restoration_pair(
                plan, run.seed, 0x7B2ull,
                static_cast<std::uint64_t>(step) * plan.batch_size + slot);
            degraded_batch.push_back(std::move(degraded));
            clean_batch.push_back(std::move(clean));
        }
        ad::Tape<T> tape;
        auto x = images_to_tensor<T>(degraded_batch);
        auto ref = images_to_tensor<T>(clean_batch);
        auto restored = result.net.forward(tape, x);

        auto loss = ad::scale(tape,
                              ad::mean(tape, ad::abs_op(tape, ad::sub(tape, restored, ref))),
                              static_cast<T>(plan.lambda_org));
        if (plan.lambda_nr != 0.0)
            loss = ad::add(tape, loss,
                           ad::scale(tape, nr_loss(tape, critic, restored, plan.ratios),
                                     static_cast<T>(plan.lambda_nr)));
        if (plan.lambda_fr != 0.0)
            loss = ad::add(tape, loss,
                           ad::scale(tape, fr_loss(tape, critic, restored, ref, plan.ratios),
                                     static_cast<T>(plan.lambda_fr)));

        result.net.zero_grad();
        critic.zero_grad();
        tape.backward(loss);
        opt.step(plan.learning_rate);
        if (log && (step % std::max(1, plan.log_every) == 0 || step + 1 == plan.iterations))
            log(step, static_cast<double>(loss->v[0]), plan.learning_rate);
    }

    result.val_metrics = detail::eval_restorer(result.net, critic, plan, run.seed, &result.val_outputs);
    return result;
}

// ---------------------------------------------------------------------------
// Ratio sweeps (Tables 5-6 shape)

struct SweepRow {
    std::string type;  // "NR", "FR" or "org"
    double ratio = 1.0;
    RestoreMetrics metrics;
};

struct SweepReport {
    std::string dimension;
    std::vector<SweepRow> rows;

    std::string to_csv() const {
        std::ostringstream os;
        std::vector<std::string> dims;
        if (!rows.empty())
            for (const auto& [k, v] : rows[0].metrics.critic_dims) dims.push_back(k);
        os << "type,ratio,critic_overall";
        for (const auto& d : dims) os << ",critic_" << d;
        os << ",sharpness_proxy,noisiness_proxy,l1_to_reference\n";
        char buf[40];
        for (const auto& r : rows) {
            os << r.type << ",";
            std::snprintf(buf, sizeof(buf), "%g", r.ratio);
            os << buf;
            std::snprintf(buf, sizeof(buf), ",%.6f", r.metrics.critic_overall);
            os << buf;
            for (const auto& d : dims) {
                std::snprintf(buf, sizeof(buf), ",%.6f", r.metrics.critic_dims.at(d));
                os << buf;
            }
            std::snprintf(buf, sizeof(buf), ",%.8f,%.8f,%.6f\n", r.metrics.sharpness_proxy,
                          r.metrics.noisiness_proxy, r.metrics.l1_to_reference);
            os << buf;
        }
        return os.str();
    }
};

// Trains one restorer per lambda with shared seeds (only the override varies)
// and reports critic scores plus the pixel-statistics proxies per run.
template <typename T>
SweepReport sweep_ratio(const RestorationRun& base, const std::string& dim,
                        const std::vector<double>& ratios, const Model<T>& critic,
                        const LogSink& log = {}) {
    base.validate();
    bool known = false;
    for (int j = 0; j < critic.dims(); ++j) known = known || critic.active_name(j) == dim;
    if (!known) throw std::invalid_argument("sweep_ratio: unknown dimension: " + dim);
    if (ratios.empty() || ratios.front() != 1.0)
        throw std::invalid_argument("sweep_ratio: ratios must start at 1.0");
    for (std::size_t i = 1; i < ratios.size(); ++i)
        if (ratios[i] <= ratios[i - 1])
            throw std::invalid_argument("sweep_ratio: ratios must be sorted ascending");

    SweepReport report;
    report.dimension = dim;
    const std::string type =
        base.plan.lambda_nr != 0.0 ? "NR" : (base.plan.lambda_fr != 0.0 ? "FR" : "org");
    for (double lambda : ratios) {
        RestorationRun run = base;
        run.plan.ratios[dim] = lambda;
        auto result = train_restorer(run, critic, log);
        report.rows.push_back({type, lambda, result.val_metrics});
    }
    return report;
}

}  // namespace mdiqa
