// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-stage training with parameter freezing, cosine schedules and resumable
// checkpoints. All randomness (batch order, augmentation) is derived from
// (seed, phase, epoch, step) coordinates, so resuming from a checkpoint
// reproduces the uninterrupted run bit-exactly.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "mdiqa/aggregate.hpp"
#include "mdiqa/checkpoint.hpp"
#include "mdiqa/data.hpp"
#include "mdiqa/losses.hpp"
#include "mdiqa/optim.hpp"

namespace mdiqa {

using LogSink = std::function<void(long long step, double loss, double lr)>;

namespace detail {

template <typename T>
ad::TP<T> batch_images(const std::vector<MultiDimSample>& data, const std::vector<int>& order,
                       int begin, int end, int crop, std::uint64_t seed_base) {
    std::vector<ImageTensor> imgs;
    imgs.reserve(static_cast<std::size_t>(end - begin));
    for (int k = begin; k < end; ++k)
        imgs.push_back(augment(data[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])].image,
                               crop, mix_seed({seed_base, static_cast<std::uint64_t>(k - begin)})));
    return images_to_tensor<T>(imgs);
}

template <typename T>
std::vector<std::pair<std::string, ad::TP<T>>> trainable_params(const Model<T>& model) {
    std::vector<std::pair<std::string, ad::TP<T>>> out;
    model.visit([&](const std::string& name, const ad::TP<T>& t) {
        if (t->req) out.emplace_back(name, t);
    });
    return out;
}

inline bool stage1_trainable(const std::string& name, Branch branch,
                             const std::vector<std::string>& branch_dims) {
    const char* bb = branch == Branch::technical ? "backbone_t." : "backbone_a.";
    if (name.rfind(bb, 0) == 0) return true;
    for (const auto& d : branch_dims) {
        const std::string prefix = "head." + d + ".";
        if (name.rfind(prefix, 0) == 0) return name.find(".inject.") == std::string::npos;
    }
    return false;
}

inline bool stage2_trainable(const std::string& name, bool finetune_regressor) {
    if (name.rfind("wbranch.", 0) == 0 || name.rfind("fusion.", 0) == 0) return true;
    if (name.find(".inject.") != std::string::npos) return true;
    if (finetune_regressor && name.find(".reg.") != std::string::npos) return true;
    return false;
}

}  // namespace detail

// Stage 1: backbones + heads (no semantic injection) against the masked sum of
// per-dimension hybrid losses. The technical and aesthetic branches train as
// separate phases with their own epoch counts.
template <typename T>
CheckpointData train_stage1(Model<T>& model, const std::vector<MultiDimSample>& data,
                            const CheckpointData* resume = nullptr, const LogSink& log = {},
                            long long max_steps = -1) {
    const Config& cfg = model.config();
    const Stage1Plan& plan = cfg.stage1;
    if (data.empty()) throw std::invalid_argument("train_stage1: empty dataset");
    bool any_label = false;
    for (const auto& s : data) any_label = any_label || !s.dim_labels.empty();
    if (!any_label) throw std::invalid_argument("train_stage1: dataset lacks dimension labels");
    if (resume && resume->stage != 1)
        throw std::invalid_argument("stage marker mismatch: cannot resume stage 1 from a stage-" +
                                    std::to_string(resume->stage) + " checkpoint");

    const int n = static_cast<int>(data.size());
    const int steps_per_epoch = (n + plan.batch_size - 1) / plan.batch_size;
    const long long start_step = resume ? resume->step : 0;

    struct Phase {
        Branch branch;
        int epochs;
        std::uint64_t id;
    };
    std::vector<Phase> phases;
    if (cfg.model.use_technical) phases.push_back({Branch::technical, plan.epochs_technical, 1});
    if (cfg.model.use_aesthetic) phases.push_back({Branch::aesthetic, plan.epochs_aesthetic, 2});

    long long global_step = 0;
    AdamW<T> opt;
    CheckpointData out;

    for (const auto& phase : phases) {
        std::vector<std::string> branch_dims;
        for (const auto& h : model.heads())
            if (h.branch == phase.branch) branch_dims.push_back(h.name);
        model.set_trainable([&](const std::string& nm) {
            return detail::stage1_trainable(nm, phase.branch, branch_dims);
        });

        const long long phase_start = global_step;
        const long long phase_total = static_cast<long long>(phase.epochs) * steps_per_epoch;
        opt = AdamW<T>(detail::trainable_params(model), plan.weight_decay);
        if (resume && start_step > phase_start && start_step < phase_start + phase_total) {
            restore_optimizer(*resume, opt);
            opt.set_timestep(start_step - phase_start);
        }

        for (int epoch = 0; epoch < phase.epochs; ++epoch) {
            std::vector<int> order(static_cast<std::size_t>(n));
            std::iota(order.begin(), order.end(), 0);
            Rng shuffle_rng(mix_seed({cfg.seed, 0xBA7C41ull, phase.id,
                                      static_cast<std::uint64_t>(epoch)}));
            shuffle_rng.shuffle(order.begin(), order.end());

            for (int sb = 0; sb < steps_per_epoch; ++sb, ++global_step) {
                if (global_step < start_step) continue;
                if (max_steps >= 0 && global_step >= max_steps) {
                    out = CheckpointData{};
                    out.config = cfg;
                    out.stage = 1;
                    out.step = global_step;
                    out.seed = cfg.seed;
                    store_model(out, model);
                    store_optimizer(out, opt);
                    return out;
                }
                const int begin = sb * plan.batch_size;
                const int end = std::min(n, begin + plan.batch_size);
                auto imgs = detail::batch_images<T>(
                    data, order, begin, end, plan.crop,
                    mix_seed({cfg.seed, 0xA6ull, phase.id, static_cast<std::uint64_t>(epoch),
                              static_cast<std::uint64_t>(sb)}));

                ad::Tape<T> tape;
                auto [scores, reg_idx] = model.branch_scores(tape, imgs, phase.branch);
                ad::TP<T> loss;
                for (std::size_t j = 0; j < reg_idx.size(); ++j) {
                    const std::string& dim = cfg.registry.name(reg_idx[j]);
                    auto label = ad::make_tensor<T>({end - begin}, false);
                    std::vector<std::uint8_t> mask(static_cast<std::size_t>(end - begin), 0);
                    int unmasked = 0;
                    for (int k = begin; k < end; ++k) {
                        const auto& s = data[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
                        const auto it = s.dim_labels.find(dim);
                        if (it != s.dim_labels.end()) {
                            label->v[static_cast<std::size_t>(k - begin)] = static_cast<T>(it->second);
                            mask[static_cast<std::size_t>(k - begin)] = 1;
                            ++unmasked;
                        }
                    }
                    if (unmasked == 0) continue;
                    auto term = hybrid_iqa_loss(tape, ad::col(tape, scores, static_cast<int>(j)),
                                                label, mask, static_cast<T>(cfg.alpha_nin));
                    loss = loss ? ad::add(tape, loss, term) : term;
                }
                if (!loss) continue;
                const double lr = scheduled_lr(plan.schedule, plan.learning_rate, plan.lr_floor,
                                               global_step - phase_start, phase_total);
                model.zero_grad();
                tape.backward(loss);
                opt.step(lr);
                if (log) log(global_step, static_cast<double>(loss->v[0]), lr);
            }
        }
    }

    out.config = cfg;
    out.stage = 1;
    out.step = global_step;
    out.seed = cfg.seed;
    store_model(out, model);
    store_optimizer(out, opt);
    return out;
}

// Stage 2: freezes backbones + CSAM, enables semantic injection, and trains
// the weight branch, fusion MLP, injection MLPs and (iff finetune_regressor)
// the head regressors against the hybrid loss on overall labels.
template <typename T>
CheckpointData train_stage2(Model<T>& model, const std::vector<MultiDimSample>& data,
                            const CheckpointData& from, const LogSink& log = {},
                            long long max_steps = -1) {
    const Config& cfg = model.config();
    const Stage2Plan& plan = cfg.stage2;
    if (data.empty()) throw std::invalid_argument("train_stage2: empty dataset");
    bool any_overall = false;
    for (const auto& s : data) any_overall = any_overall || s.overall_present;
    if (!any_overall) throw std::invalid_argument("train_stage2: dataset lacks overall labels");
    if (from.stage != 1 && from.stage != 2)
        throw std::invalid_argument("stage marker mismatch: checkpoint is stage " +
                                    std::to_string(from.stage) +
                                    ", expected a stage-1 (fresh) or stage-2 (resume) checkpoint");
    const bool resuming = from.stage == 2;
    const long long start_step = resuming ? from.step : 0;

    model.set_trainable([&](const std::string& nm) {
        return detail::stage2_trainable(nm, cfg.model.finetune_regressor);
    });

    const int n = static_cast<int>(data.size());
    const int steps_per_epoch = (n + plan.batch_size - 1) / plan.batch_size;
    const long long total = static_cast<long long>(plan.epochs) * steps_per_epoch;

    AdamW<T> opt(detail::trainable_params(model), plan.weight_decay);
    if (resuming && start_step > 0 && start_step < total) {
        restore_optimizer(from, opt);
        opt.set_timestep(start_step);
    }

    long long global_step = 0;
    for (int epoch = 0; epoch < plan.epochs; ++epoch) {
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(mix_seed({cfg.seed, 0xBA7C42ull, static_cast<std::uint64_t>(epoch)}));
        shuffle_rng.shuffle(order.begin(), order.end());

        for (int sb = 0; sb < steps_per_epoch; ++sb, ++global_step) {
            if (global_step < start_step) continue;
            if (max_steps >= 0 && global_step >= max_steps) {
                CheckpointData out;
                out.config = cfg;
                out.stage = 2;
                out.step = global_step;
                out.seed = cfg.seed;
                store_model(out, model);
                store_optimizer(out, opt);
                return out;
            }
            const int begin = sb * plan.batch_size;
            const int end = std::min(n, begin + plan.batch_size);
            auto imgs = detail::batch_images<T>(
                data, order, begin, end, plan.crop,
                mix_seed({cfg.seed, 0xA7ull, static_cast<std::uint64_t>(epoch),
                          static_cast<std::uint64_t>(sb)}));

            auto label = ad::make_tensor<T>({end - begin}, false);
            std::vector<std::uint8_t> mask(static_cast<std::size_t>(end - begin), 0);
            int unmasked = 0;
            for (int k = begin; k < end; ++k) {
                const auto& s = data[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
                if (s.overall_present) {
                    label->v[static_cast<std::size_t>(k - begin)] = static_cast<T>(s.overall_label);
                    mask[static_cast<std::size_t>(k - begin)] = 1;
                    ++unmasked;
                }
            }
            if (unmasked == 0) continue;

            ad::Tape<T> tape;
            auto out_batch = model.forward(tape, imgs, {});
            auto loss = hybrid_iqa_loss(tape, out_batch.overall, label, mask,
                                        static_cast<T>(cfg.alpha_nin));
            const double lr = scheduled_lr(plan.schedule, plan.learning_rate, plan.lr_floor,
                                           global_step, total);
            model.zero_grad();
            tape.backward(loss);
            opt.step(lr);
            if (log) log(global_step, static_cast<double>(loss->v[0]), lr);
        }
    }

    CheckpointData out;
    out.config = cfg;
    out.stage = 2;
    out.step = global_step;
    out.seed = cfg.seed;
    store_model(out, model);
    store_optimizer(out, opt);
    return out;
}

}  // namespace mdiqa
