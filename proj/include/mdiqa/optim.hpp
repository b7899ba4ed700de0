// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mdiqa/tensor.hpp"

namespace mdiqa {

// Cosine annealing from `peak` to `floor` over `total` steps.
inline double cosine_lr(double peak, double floor_lr, long long step, long long total) {
    if (total <= 0) return peak;
    const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
    return floor_lr + (peak - floor_lr) * 0.5 * (1.0 + std::cos(kPi * progress));
}

inline double scheduled_lr(const std::string& schedule, double peak, double floor_lr,
                           long long step, long long total) {
    if (schedule == "cosine") return cosine_lr(peak, floor_lr, step, total);
    if (schedule == "constant" || schedule == "none") return peak;
    throw std::invalid_argument("unknown lr schedule: " + schedule);
}

// Adam with decoupled weight decay (AdamW). weight_decay = 0 gives plain Adam.
// Moments are kept in the parameter precision so checkpointed state restores
// training bit-exactly.
template <typename T>
class AdamW {
public:
    struct Slot {
        std::string name;
        ad::TP<T> p;
        std::vector<T> m, v;
    };

    AdamW() = default;
    AdamW(std::vector<std::pair<std::string, ad::TP<T>>> params, double weight_decay)
        : weight_decay_(weight_decay) {
        for (auto& [name, p] : params) {
            Slot s;
            s.name = name;
            s.p = p;
            s.m.assign(p->v.size(), T(0));
            s.v.assign(p->v.size(), T(0));
            slots_.push_back(std::move(s));
        }
    }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (auto& s : slots_) {
            for (std::size_t i = 0; i < s.p->v.size(); ++i) {
                const double g = static_cast<double>(s.p->g[i]);
                const double m = beta1_ * static_cast<double>(s.m[i]) + (1.0 - beta1_) * g;
                const double v = beta2_ * static_cast<double>(s.v[i]) + (1.0 - beta2_) * g * g;
                s.m[i] = static_cast<T>(m);
                s.v[i] = static_cast<T>(v);
                const double mhat = static_cast<double>(s.m[i]) / bc1;
                const double vhat = static_cast<double>(s.v[i]) / bc2;
                const double p = static_cast<double>(s.p->v[i]);
                s.p->v[i] = static_cast<T>(p - lr * (mhat / (std::sqrt(vhat) + eps_) +
                                                     weight_decay_ * p));
            }
        }
    }

    void zero_grad() {
        for (auto& s : slots_) s.p->zero_grad();
    }

    long long timestep() const { return t_; }
    void set_timestep(long long t) { t_ = t; }
    std::vector<Slot>& slots() { return slots_; }
    const std::vector<Slot>& slots() const { return slots_; }

private:
    std::vector<Slot> slots_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    double weight_decay_ = 0.0;
    long long t_ = 0;
};

}  // namespace mdiqa
