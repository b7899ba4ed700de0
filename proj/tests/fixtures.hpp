// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mdiqa/aggregate.hpp"
#include "mdiqa/config.hpp"
#include "mdiqa/data.hpp"

namespace testutil {

// Two-level, narrow-width configuration for fast double-precision checks.
inline mdiqa::Config tiny_config() {
    mdiqa::Config c;
    c.model.backbone_widths = {4, 6};
    c.model.head_width = 6;
    c.model.feature_width = 5;
    c.model.semantic_width = 4;
    c.model.weight_branch_width = 4;
    c.model.fusion_hidden = 8;
    c.stage1.batch_size = 8;
    c.stage1.crop = 40;
    c.stage1.learning_rate = 1e-3;
    c.stage1.epochs_technical = 2;
    c.stage1.epochs_aesthetic = 1;
    c.stage2.batch_size = 8;
    c.stage2.crop = 40;
    c.stage2.learning_rate = 1e-3;
    c.stage2.epochs = 1;
    c.data.count = 24;
    c.data.size = 48;
    c.seed = 77;
    return c;
}

inline mdiqa::ImageTensor test_image(std::uint64_t seed, int n = 32) {
    mdiqa::Rng rng(seed);
    return mdiqa::synth_clean_image(n, n, rng);
}

template <typename T>
std::vector<T> param_bytes(const mdiqa::Model<T>& model, const std::string& prefix = "") {
    std::vector<T> out;
    model.visit([&](const std::string& name, const mdiqa::ad::TP<T>& t) {
        if (prefix.empty() || name.rfind(prefix, 0) == 0)
            out.insert(out.end(), t->v.begin(), t->v.end());
    });
    return out;
}

}  // namespace testutil
