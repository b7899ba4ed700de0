// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdlib>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdiqa/registry.hpp"

namespace mdiqa {

using json = nlohmann::json;

// Stage-1 plan: backbones + heads on per-dimension labels.
struct Stage1Plan {
    int batch_size = 16;
    int crop = 384;
    double learning_rate = 3e-5;
    double weight_decay = 1e-5;
    int epochs_technical = 8;
    int epochs_aesthetic = 4;
    std::string optimizer = "adamw";
    std::string schedule = "cosine";
    double lr_floor = 0.0;
};

// Stage-2 plan: weight branch + aggregation on overall labels.
struct Stage2Plan {
    int batch_size = 16;
    int crop = 384;
    double learning_rate = 1e-5;
    double weight_decay = 1e-5;
    int epochs = 5;
    std::string optimizer = "adamw";
    std::string schedule = "cosine";
    double lr_floor = 0.0;
};

// Restoration fine-tune plan.
struct RestorePlan {
    int batch_size = 12;
    double learning_rate = 3e-5;
    long long iterations = 60000;
    double lambda_org = 1.0;
    double lambda_nr = 1.0;
    double lambda_fr = 5.0;
    std::string optimizer = "adam";
    std::map<std::string, double> ratios;  // dimension name -> lambda multiplier
    // Desk-scale knobs (restorer topology, degradation recipe, logging cadence).
    int patch = 64;
    int restorer_channels = 16;
    int log_every = 50;
    int val_count = 12;
    double blur_severity = 0.5;
    double noise_severity = 0.4;
};

struct ModelConfig {
    std::vector<int> backbone_widths = {32, 64, 128};  // one pyramid level per entry
    int head_width = 64;         // channels of the fused per-head maps
    int feature_width = 64;      // width of the per-dimension feature vector
    int semantic_width = 64;     // width of the injected semantic vector
    int weight_branch_width = 16;
    int fusion_hidden = 64;
    bool use_weight_branch = true;
    bool finetune_regressor = true;
    bool use_semantic_features = true;
    bool use_technical = true;
    bool use_aesthetic = true;
    std::string fusion_mode = "scalar";    // "scalar" | "feature"
    std::string semantic_encoder = "toy";  // plug-in name, see heads.hpp
};

struct DataPlan {
    std::string source = "synthetic";  // "synthetic" | "manifest"
    std::string manifest;
    int count = 1000;
    int size = 96;
    double severity_max = 0.9;
    double kind_prob = 0.5;  // probability a distortion family is applied
    double holdout = 0.2;     // held-out fraction during training
};

struct Config {
    DimensionRegistry registry = default_registry();
    ModelConfig model;
    Stage1Plan stage1;
    Stage2Plan stage2;
    RestorePlan restore;
    DataPlan data;
    double alpha_nin = 1.0;
    std::uint64_t seed = 17;
};

// ---------------------------------------------------------------------------
// JSON (de)serialization. Missing keys fall back to defaults so partial config
// files stay valid; round-tripping a Config through JSON is lossless.

namespace detail {

template <typename T>
void get_to_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace detail

inline json to_json(const Stage1Plan& p) {
    return {{"batch_size", p.batch_size},     {"crop", p.crop},
            {"learning_rate", p.learning_rate}, {"weight_decay", p.weight_decay},
            {"epochs_technical", p.epochs_technical}, {"epochs_aesthetic", p.epochs_aesthetic},
            {"optimizer", p.optimizer},       {"schedule", p.schedule},
            {"lr_floor", p.lr_floor}};
}

inline void from_json_into(const json& j, Stage1Plan& p) {
    detail::get_to_if(j, "batch_size", p.batch_size);
    detail::get_to_if(j, "crop", p.crop);
    detail::get_to_if(j, "learning_rate", p.learning_rate);
    detail::get_to_if(j, "weight_decay", p.weight_decay);
    detail::get_to_if(j, "epochs_technical", p.epochs_technical);
    detail::get_to_if(j, "epochs_aesthetic", p.epochs_aesthetic);
    detail::get_to_if(j, "optimizer", p.optimizer);
    detail::get_to_if(j, "schedule", p.schedule);
    detail::get_to_if(j, "lr_floor", p.lr_floor);
}

inline json to_json(const Stage2Plan& p) {
    return {{"batch_size", p.batch_size},     {"crop", p.crop},
            {"learning_rate", p.learning_rate}, {"weight_decay", p.weight_decay},
            {"epochs", p.epochs},             {"optimizer", p.optimizer},
            {"schedule", p.schedule},         {"lr_floor", p.lr_floor}};
}

inline void from_json_into(const json& j, Stage2Plan& p) {
    detail::get_to_if(j, "batch_size", p.batch_size);
    detail::get_to_if(j, "crop", p.crop);
    detail::get_to_if(j, "learning_rate", p.learning_rate);
    detail::get_to_if(j, "weight_decay", p.weight_decay);
    detail::get_to_if(j, "epochs", p.epochs);
    detail::get_to_if(j, "optimizer", p.optimizer);
    detail::get_to_if(j, "schedule", p.schedule);
    detail::get_to_if(j, "lr_floor", p.lr_floor);
}

inline json to_json(const RestorePlan& p) {
    return {{"batch_size", p.batch_size},
            {"learning_rate", p.learning_rate},
            {"iterations", p.iterations},
            {"lambda_org", p.lambda_org},
            {"lambda_nr", p.lambda_nr},
            {"lambda_fr", p.lambda_fr},
            {"optimizer", p.optimizer},
            {"ratios", p.ratios},
            {"patch", p.patch},
            {"restorer_channels", p.restorer_channels},
            {"log_every", p.log_every},
            {"val_count", p.val_count},
            {"blur_severity", p.blur_severity},
            {"noise_severity", p.noise_severity}};
}

inline void from_json_into(const json& j, RestorePlan& p) {
    detail::get_to_if(j, "batch_size", p.batch_size);
    detail::get_to_if(j, "learning_rate", p.learning_rate);
    detail::get_to_if(j, "iterations", p.iterations);
    detail::get_to_if(j, "lambda_org", p.lambda_org);
    detail::get_to_if(j, "lambda_nr", p.lambda_nr);
    detail::get_to_if(j, "lambda_fr", p.lambda_fr);
    detail::get_to_if(j, "optimizer", p.optimizer);
    detail::get_to_if(j, "ratios", p.ratios);
    detail::get_to_if(j, "patch", p.patch);
    detail::get_to_if(j, "restorer_channels", p.restorer_channels);
    detail::get_to_if(j, "log_every", p.log_every);
    detail::get_to_if(j, "val_count", p.val_count);
    detail::get_to_if(j, "blur_severity", p.blur_severity);
    detail::get_to_if(j, "noise_severity", p.noise_severity);
}

inline json to_json(const ModelConfig& m) {
    return {{"backbone_widths", m.backbone_widths},
            {"head_width", m.head_width},
            {"feature_width", m.feature_width},
            {"semantic_width", m.semantic_width},
            {"weight_branch_width", m.weight_branch_width},
            {"fusion_hidden", m.fusion_hidden},
            {"use_weight_branch", m.use_weight_branch},
            {"finetune_regressor", m.finetune_regressor},
            {"use_semantic_features", m.use_semantic_features},
            {"use_technical", m.use_technical},
            {"use_aesthetic", m.use_aesthetic},
            {"fusion_mode", m.fusion_mode},
            {"semantic_encoder", m.semantic_encoder}};
}

inline void from_json_into(const json& j, ModelConfig& m) {
    detail::get_to_if(j, "backbone_widths", m.backbone_widths);
    detail::get_to_if(j, "head_width", m.head_width);
    detail::get_to_if(j, "feature_width", m.feature_width);
    detail::get_to_if(j, "semantic_width", m.semantic_width);
    detail::get_to_if(j, "weight_branch_width", m.weight_branch_width);
    detail::get_to_if(j, "fusion_hidden", m.fusion_hidden);
    detail::get_to_if(j, "use_weight_branch", m.use_weight_branch);
    detail::get_to_if(j, "finetune_regressor", m.finetune_regressor);
    detail::get_to_if(j, "use_semantic_features", m.use_semantic_features);
    detail::get_to_if(j, "use_technical", m.use_technical);
    detail::get_to_if(j, "use_aesthetic", m.use_aesthetic);
    detail::get_to_if(j, "fusion_mode", m.fusion_mode);
    detail::get_to_if(j, "semantic_encoder", m.semantic_encoder);
}

inline json to_json(const DataPlan& d) {
    return {{"source", d.source},         {"manifest", d.manifest},
            {"count", d.count},           {"size", d.size},
            {"severity_max", d.severity_max}, {"kind_prob", d.kind_prob},
            {"holdout", d.holdout}};
}

inline void from_json_into(const json& j, DataPlan& d) {
    detail::get_to_if(j, "source", d.source);
    detail::get_to_if(j, "manifest", d.manifest);
    detail::get_to_if(j, "count", d.count);
    detail::get_to_if(j, "size", d.size);
    detail::get_to_if(j, "severity_max", d.severity_max);
    detail::get_to_if(j, "kind_prob", d.kind_prob);
    detail::get_to_if(j, "holdout", d.holdout);
}

inline json to_json(const Config& c) {
    return {{"registry", {{"technical", c.registry.technical}, {"aesthetic", c.registry.aesthetic}}},
            {"model", to_json(c.model)},
            {"stage1", to_json(c.stage1)},
            {"stage2", to_json(c.stage2)},
            {"restore", to_json(c.restore)},
            {"data", to_json(c.data)},
            {"alpha_nin", c.alpha_nin},
            {"seed", c.seed}};
}

inline Config config_from_json(const json& j) {
    Config c;
    if (j.contains("registry")) {
        const auto& r = j.at("registry");
        detail::get_to_if(r, "technical", c.registry.technical);
        detail::get_to_if(r, "aesthetic", c.registry.aesthetic);
    }
    if (j.contains("model")) from_json_into(j.at("model"), c.model);
    if (j.contains("stage1")) from_json_into(j.at("stage1"), c.stage1);
    if (j.contains("stage2")) from_json_into(j.at("stage2"), c.stage2);
    if (j.contains("restore")) from_json_into(j.at("restore"), c.restore);
    if (j.contains("data")) from_json_into(j.at("data"), c.data);
    detail::get_to_if(j, "alpha_nin", c.alpha_nin);
    detail::get_to_if(j, "seed", c.seed);
    return c;
}

// Fills defaults (already done by construction) and rejects contradictions.
inline Config validate_config(Config cfg) {
    cfg.registry.validate();
    if (!cfg.model.use_technical && !cfg.model.use_aesthetic)
        throw std::invalid_argument("no dimensions enabled: use_technical and use_aesthetic are both false");
    if (cfg.model.backbone_widths.size() < 2)
        throw std::invalid_argument("backbone_widths must define at least 2 pyramid levels");
    for (int w : cfg.model.backbone_widths)
        if (w <= 0) throw std::invalid_argument("backbone widths must be positive");
    if (cfg.model.fusion_mode != "scalar" && cfg.model.fusion_mode != "feature")
        throw std::invalid_argument("fusion_mode must be \"scalar\" or \"feature\", got \"" +
                                    cfg.model.fusion_mode + "\"");
    if (cfg.model.head_width <= 0 || cfg.model.feature_width <= 0 ||
        cfg.model.semantic_width <= 0 || cfg.model.weight_branch_width <= 0 ||
        cfg.model.fusion_hidden <= 0)
        throw std::invalid_argument("model widths must be positive");
    if (cfg.data.source != "synthetic" && cfg.data.source != "manifest")
        throw std::invalid_argument("data.source must be \"synthetic\" or \"manifest\"");
    if (cfg.alpha_nin < 0.0) throw std::invalid_argument("alpha_nin must be non-negative");
    for (const auto& [name, lambda] : cfg.restore.ratios) {
        if (!cfg.registry.contains(name))
            throw std::invalid_argument("ratio override names unknown dimension: " + name);
        if (lambda <= 0.0) throw std::invalid_argument("ratio override must be positive: " + name);
    }
    return cfg;
}

// Paper-scale stage plans as one JSON document (golden-file surface).
inline json full_scale_plan() {
    const Config c;  // defaults are the full-scale values
    json j;
    j["stage1"] = {{"batch_size", c.stage1.batch_size},
                   {"crop", c.stage1.crop},
                   {"learning_rate", c.stage1.learning_rate},
                   {"weight_decay", c.stage1.weight_decay},
                   {"epochs_technical", c.stage1.epochs_technical},
                   {"epochs_aesthetic", c.stage1.epochs_aesthetic},
                   {"optimizer", c.stage1.optimizer},
                   {"schedule", c.stage1.schedule}};
    j["stage2"] = {{"batch_size", c.stage2.batch_size},
                   {"crop", c.stage2.crop},
                   {"learning_rate", c.stage2.learning_rate},
                   {"weight_decay", c.stage2.weight_decay},
                   {"epochs", c.stage2.epochs},
                   {"optimizer", c.stage2.optimizer},
                   {"schedule", c.stage2.schedule}};
    j["restore"] = {{"batch_size", c.restore.batch_size},
                    {"learning_rate", c.restore.learning_rate},
                    {"iterations", c.restore.iterations},
                    {"lambda_org", c.restore.lambda_org},
                    {"lambda_nr", c.restore.lambda_nr},
                    {"lambda_fr", c.restore.lambda_fr},
                    {"optimizer", c.restore.optimizer}};
    return j;
}

// Desk-scale preset: small widths and schedules sized for synthetic data on a
// laptop CPU. Shipped as configs/desk.json.
inline Config desk_config() {
    Config c;
    c.model.backbone_widths = {24, 32, 48};
    c.model.head_width = 48;
    c.model.feature_width = 32;
    c.model.semantic_width = 16;
    c.model.weight_branch_width = 16;
    c.model.fusion_hidden = 48;
    c.stage1.batch_size = 16;
    c.stage1.crop = 80;
    c.stage1.learning_rate = 2e-3;
    c.stage1.weight_decay = 1e-5;
    c.stage1.epochs_technical = 40;
    c.stage1.epochs_aesthetic = 25;
    c.stage2.batch_size = 16;
    c.stage2.crop = 80;
    c.stage2.learning_rate = 1e-3;
    c.stage2.weight_decay = 1e-5;
    c.stage2.epochs = 15;
    c.restore.batch_size = 4;
    c.restore.learning_rate = 1e-3;
    c.restore.iterations = 300;
    c.restore.patch = 64;
    c.restore.restorer_channels = 16;
    c.data.count = 1000;
    c.data.size = 96;
    return c;
}

// MDIQA_DETERMINISTIC=1 pins execution to the deterministic kernel set. The
// built-in kernels are already deterministic (fixed reduction order, no data
// races), so this currently only records the request.
inline bool deterministic_mode() {
    const char* v = std::getenv("MDIQA_DETERMINISTIC");
    return v != nullptr && v[0] == '1';
}

}  // namespace mdiqa
