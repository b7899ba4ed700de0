// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0
//
// mdiqa command line: gen-data / train / eval / score / restore / sweep.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mdiqa/mdiqa.hpp"

namespace fs = std::filesystem;
using namespace mdiqa;

namespace {

Config load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j = json::parse(in);
    return validate_config(config_from_json(j));
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
}

RatioOverride parse_ratio_flags(const std::vector<std::string>& flags) {
    RatioOverride ratios;
    for (const auto& f : flags) {
        const auto eq = f.find('=');
        if (eq == std::string::npos || eq == 0)
            throw std::runtime_error("bad --ratio value (expected dim=lambda): " + f);
        char* end = nullptr;
        const double lambda = std::strtod(f.c_str() + eq + 1, &end);
        if (end == nullptr || *end != '\0')
            throw std::runtime_error("bad --ratio value (expected dim=lambda): " + f);
        ratios[f.substr(0, eq)] = lambda;
    }
    return ratios;
}

std::vector<MultiDimSample> load_training_data(const Config& cfg, const std::string& data_flag) {
    if (!data_flag.empty()) return load_manifest(data_flag, cfg.registry);
    if (cfg.data.source == "manifest") {
        if (cfg.data.manifest.empty())
            throw std::runtime_error("config data.source is \"manifest\" but data.manifest is empty");
        return load_manifest(cfg.data.manifest, cfg.registry);
    }
    return make_synthetic_dataset(cfg.data, mix_seed({cfg.seed, 0xDA7Aull}), cfg.registry);
}

LogSink jsonl_logger(std::ostream& os, std::ofstream* file) {
    return [&os, file](long long step, double loss, double lr) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "{\"step\":%lld,\"loss\":%.8g,\"lr\":%.8g}", step, loss, lr);
        os << buf << "\n";
        if (file && file->is_open()) (*file) << buf << "\n";
    };
}

json quality_to_json(const QualityOutput& q) {
    json j;
    j["overall"] = q.overall;
    j["weights"] = q.weights;
    j["dims"] = q.dim_scores;
    return j;
}

int run_gen_data(const std::string& cfg_path, int n, int size, std::optional<std::uint64_t> seed,
                 const std::string& out_dir) {
    Config cfg = cfg_path.empty() ? validate_config(Config{}) : load_config_file(cfg_path);
    if (n > 0) cfg.data.count = n;
    if (size > 0) cfg.data.size = size;
    if (seed) cfg.seed = *seed;
    auto samples = make_synthetic_dataset(cfg.data, mix_seed({cfg.seed, 0xDA7Aull}), cfg.registry);
    const std::string manifest = save_dataset(out_dir, samples, cfg.registry);
    std::cout << "wrote " << samples.size() << " samples to " << out_dir << "\n"
              << "manifest: " << manifest << "\n";
    return 0;
}

int run_train(int stage, const std::string& cfg_path, const std::string& data_flag,
              const std::string& resume_path, const std::string& out_path,
              std::optional<std::uint64_t> seed) {
    Config cfg = load_config_file(cfg_path);
    if (seed) cfg.seed = *seed;
    Model<float> model(cfg);
    auto data = load_training_data(cfg, data_flag);

    std::optional<CheckpointData> resume;
    if (!resume_path.empty()) {
        resume = load_checkpoint(resume_path);
        restore_model(*resume, model);
    }

    auto log = jsonl_logger(std::cout, nullptr);
    CheckpointData out;
    if (stage == 1) {
        out = train_stage1(model, data, resume ? &*resume : nullptr, log);
    } else {
        if (!resume)
            throw std::runtime_error("train --stage 2 requires --resume with a stage-1 checkpoint");
        out = train_stage2(model, data, *resume, log);
    }
    save_checkpoint(out_path, out);
    std::cout << "checkpoint: " << out_path << "\n";
    return 0;
}

int run_eval(const std::string& manifest, const std::string& ckpt_path, int splits, double holdout,
             std::optional<std::uint64_t> seed, const std::string& out_dir) {
    CheckpointData ckpt = load_checkpoint(ckpt_path);
    if (seed) ckpt.config.seed = *seed;
    Model<float> model(ckpt.config);
    restore_model(ckpt, model);
    auto samples = load_manifest(manifest, model.registry());
    EvalReport report = evaluate(model, samples, splits, holdout, ckpt.config.seed);
    fs::create_directories(out_dir);
    const std::string json_path = (fs::path(out_dir) / "report.json").string();
    const std::string csv_path = (fs::path(out_dir) / "report.csv").string();
    write_text(json_path, report.to_json().dump(2) + "\n");
    write_text(csv_path, report.to_csv());
    std::cout << json_path << "\n" << csv_path << "\n";
    return 0;
}

int run_score(const std::string& image_path, const std::string& ckpt_path) {
    CheckpointData ckpt = load_checkpoint(ckpt_path);
    Model<float> model(ckpt.config);
    restore_model(ckpt, model);
    const ImageTensor img = read_image(image_path);
    img.validate();
    std::cout << quality_to_json(score_image(model, img)).dump(2) << "\n";
    return 0;
}

int run_restore(const std::string& cfg_path, const std::string& critic_path,
                const std::vector<std::string>& ratio_flags, const std::string& variant,
                std::optional<std::uint64_t> seed, const std::string& out_dir) {
    Config cfg = load_config_file(cfg_path);
    if (seed) cfg.seed = *seed;
    CheckpointData ckpt = load_checkpoint(critic_path);
    Model<float> critic(ckpt.config);
    restore_model(ckpt, critic);

    RestorationRun run;
    run.plan = cfg.restore;
    run.seed = cfg.seed;
    for (const auto& [k, v] : parse_ratio_flags(ratio_flags)) run.plan.ratios[k] = v;
    if (variant == "org") {
        run.plan.lambda_nr = 0.0;
        run.plan.lambda_fr = 0.0;
    } else if (variant == "nr") {
        run.plan.lambda_fr = 0.0;
        if (run.plan.lambda_nr == 0.0) run.plan.lambda_nr = 1.0;
    } else if (variant == "fr") {
        run.plan.lambda_nr = 0.0;
        if (run.plan.lambda_fr == 0.0) run.plan.lambda_fr = 5.0;
    }

    fs::create_directories(out_dir);
    std::ofstream log_file((fs::path(out_dir) / "train_log.jsonl").string());
    auto result = train_restorer(run, critic, jsonl_logger(std::cout, &log_file));

    for (std::size_t i = 0; i < result.val_outputs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "restored_%04zu.png", i);
        write_png((fs::path(out_dir) / name).string(), result.val_outputs[i]);
    }
    json metrics;
    metrics["critic_overall"] = result.val_metrics.critic_overall;
    metrics["critic_dims"] = result.val_metrics.critic_dims;
    metrics["sharpness_proxy"] = result.val_metrics.sharpness_proxy;
    metrics["noisiness_proxy"] = result.val_metrics.noisiness_proxy;
    metrics["l1_to_reference"] = result.val_metrics.l1_to_reference;
    write_text((fs::path(out_dir) / "metrics.json").string(), metrics.dump(2) + "\n");

    CheckpointData rckpt;
    rckpt.config = cfg;
    rckpt.stage = 3;
    rckpt.step = run.plan.iterations;
    rckpt.seed = run.seed;
    result.net.visit([&](const std::string& name, const ad::TP<float>& t) {
        std::vector<float> vals(t->v.begin(), t->v.end());
        rckpt.tensors["param/" + name] = {t->shape, std::move(vals)};
    });
    save_checkpoint((fs::path(out_dir) / "restorer.ckpt").string(), rckpt);

    std::cout << "restored " << result.val_outputs.size() << " validation images to " << out_dir
              << "\n"
              << "critic overall: " << result.val_metrics.critic_overall << "\n";
    return 0;
}

int run_sweep(const std::string& cfg_path, const std::string& critic_path, const std::string& dim,
              const std::string& ratios_csv, const std::string& variant,
              std::optional<std::uint64_t> seed, const std::string& out_dir) {
    Config cfg = load_config_file(cfg_path);
    if (seed) cfg.seed = *seed;
    CheckpointData ckpt = load_checkpoint(critic_path);
    Model<float> critic(ckpt.config);
    restore_model(ckpt, critic);

    std::vector<double> ratios;
    std::stringstream ss(ratios_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == nullptr || *end != '\0')
            throw std::runtime_error("bad --ratios entry: " + tok);
        ratios.push_back(v);
    }

    RestorationRun base;
    base.plan = cfg.restore;
    base.seed = cfg.seed;
    if (variant == "nr") {
        base.plan.lambda_fr = 0.0;
        if (base.plan.lambda_nr == 0.0) base.plan.lambda_nr = 1.0;
    } else if (variant == "fr") {
        base.plan.lambda_nr = 0.0;
        if (base.plan.lambda_fr == 0.0) base.plan.lambda_fr = 5.0;
    }

    auto report = sweep_ratio(base, dim, ratios, critic, {});
    fs::create_directories(out_dir);
    const std::string csv_path = (fs::path(out_dir) / ("sweep_" + dim + ".csv")).string();
    write_text(csv_path, report.to_csv());
    std::cout << csv_path << "\n" << report.to_csv();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MDIQA: multi-dimensional image quality assessment"};
    app.require_subcommand(1);
    (void)deterministic_mode();  // MDIQA_DETERMINISTIC; kernels are deterministic either way

    std::string cfg_path, data_flag, resume_path, out_path, manifest, ckpt_path, image_path;
    std::string dim, ratios_csv, variant = "config";
    std::vector<std::string> ratio_flags;
    int stage = 1, n = 0, size = 0, splits = 10;
    double holdout = 0.2;
    std::optional<std::uint64_t> seed;
    std::uint64_t seed_raw = 0;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed_raw, "override config seeds globally")
            ->each([&](const std::string&) { seed = seed_raw; });
    };

    auto* gen = app.add_subcommand("gen-data", "generate synthetic labeled samples + manifest");
    gen->add_option("--config", cfg_path, "config file (JSON)");
    gen->add_option("--n", n, "sample count");
    gen->add_option("--size", size, "image size in px");
    gen->add_option("--out", out_path, "output directory")->required();
    add_seed(gen);

    auto* train = app.add_subcommand("train", "run stage-1 or stage-2 training");
    train->add_option("--stage", stage, "training stage")->check(CLI::IsMember({1, 2}))->required();
    train->add_option("--config", cfg_path, "config file (JSON)")->required();
    train->add_option("--data", data_flag, "manifest path (overrides config data source)");
    train->add_option("--resume", resume_path, "checkpoint to resume from / stage-1 input");
    train->add_option("--out", out_path, "output checkpoint path")->required();
    add_seed(train);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    eval_cmd->add_option("--manifest", manifest, "manifest path")->required();
    eval_cmd->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
    eval_cmd->add_option("--splits", splits, "number of repeated splits");
    eval_cmd->add_option("--holdout", holdout, "held-out fraction per split");
    eval_cmd->add_option("--out", out_path, "report directory")->default_val("eval_report");
    add_seed(eval_cmd);

    auto* score = app.add_subcommand("score", "score one image, JSON on stdout");
    score->add_option("--image", image_path, "image file (PNG or PPM)")->required();
    score->add_option("--ckpt", ckpt_path, "model checkpoint")->required();

    auto* restore_cmd = app.add_subcommand("restore", "train the toy restorer against a critic");
    restore_cmd->add_option("--config", cfg_path, "config file (JSON)")->required();
    restore_cmd->add_option("--critic", ckpt_path, "frozen critic checkpoint")->required();
    restore_cmd->add_option("--ratio", ratio_flags, "dimension weight override dim=lambda");
    restore_cmd->add_option("--variant", variant, "loss variant: org, nr, fr, or config")
        ->check(CLI::IsMember({"org", "nr", "fr", "config"}));
    restore_cmd->add_option("--out", out_path, "output directory")->default_val("restore_out");
    add_seed(restore_cmd);

    auto* sweep = app.add_subcommand("sweep", "ratio sweep over one dimension");
    sweep->add_option("--config", cfg_path, "config file (JSON)")->required();
    sweep->add_option("--critic", ckpt_path, "frozen critic checkpoint")->required();
    sweep->add_option("--dim", dim, "dimension to sweep")->required();
    sweep->add_option("--ratios", ratios_csv, "comma-separated lambdas, ascending from 1.0")
        ->required();
    sweep->add_option("--variant", variant, "loss variant: nr, fr, or config")
        ->check(CLI::IsMember({"nr", "fr", "config"}));
    sweep->add_option("--out", out_path, "output directory")->default_val("sweep_out");
    add_seed(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (gen->parsed()) return run_gen_data(cfg_path, n, size, seed, out_path);
        if (train->parsed())
            return run_train(stage, cfg_path, data_flag, resume_path, out_path, seed);
        if (eval_cmd->parsed())
            return run_eval(manifest, ckpt_path, splits, holdout, seed, out_path);
        if (score->parsed()) return run_score(image_path, ckpt_path);
        if (restore_cmd->parsed())
            return run_restore(cfg_path, ckpt_path, ratio_flags, variant, seed, out_path);
        if (sweep->parsed())
            return run_sweep(cfg_path, ckpt_path, dim, ratios_csv, variant, seed, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
