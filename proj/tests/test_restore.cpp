// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "mdiqa/restore.hpp"

using namespace mdiqa;

namespace {

Config restore_test_config() {
    Config cfg = testutil::tiny_config();
    cfg.restore.patch = 32;
    cfg.restore.restorer_channels = 6;
    cfg.restore.batch_size = 2;
    cfg.restore.iterations = 2;
    cfg.restore.val_count = 2;
    cfg.restore.learning_rate = 1e-3;
    return cfg;
}

}  // namespace

TEST_CASE("restoration run enforces the one-variant invariant", "[restore]") {
    RestorationRun run;
    run.plan.lambda_nr = 1.0;
    run.plan.lambda_fr = 5.0;
    CHECK_THROWS_WITH(run.validate(),
                      Catch::Matchers::ContainsSubstring("at most one"));
    run.plan.lambda_fr = 0.0;
    CHECK_NOTHROW(run.validate());
}

TEST_CASE("identity-initialized restorer passes inputs through unchanged", "[restore]") {
    Rng rng(1);
    Restorer<double> net(6, rng);
    const ImageTensor clean = testutil::test_image(2);
    const ImageTensor degraded = apply_blur(clean, 0.5);
    ad::Tape<double> tape;
    auto x = images_to_tensor<double>({degraded});
    auto y = net.forward(tape, x);
    CHECK(y->v == x->v);
}

TEST_CASE("degrade is deterministic and identity at severity zero", "[restore]") {
    const ImageTensor clean = testutil::test_image(3);
    const auto a = degrade(clean, {{DistortionKind::blur, 0.4}, {DistortionKind::noise, 0.3}}, 9);
    const auto b = degrade(clean, {{DistortionKind::blur, 0.4}, {DistortionKind::noise, 0.3}}, 9);
    CHECK(a.pix == b.pix);
    const auto c = degrade(clean, {{DistortionKind::blur, 0.0}, {DistortionKind::noise, 0.0}}, 9);
    CHECK(c.pix == clean.pix);
    CHECK_THROWS_AS(degrade(clean, {{DistortionKind::blur, 0.2}, {DistortionKind::blur, 0.3}}, 9),
                    std::invalid_argument);
}

TEST_CASE("pixel proxies move the right way under blur and noise", "[restore]") {
    const ImageTensor clean = testutil::test_image(4, 64);
    const ImageTensor blurred = apply_blur(clean, 0.5);
    const ImageTensor noisy = apply_noise(clean, 0.5, 7);
    CHECK(gradient_energy(blurred) < gradient_energy(clean));
    CHECK(highfreq_energy(noisy) > highfreq_energy(clean));
}

TEST_CASE("critic parameters are bit-identical across a restoration run", "[restore]") {
    const Config cfg = restore_test_config();
    Model<float> critic(cfg);
    const auto before = testutil::param_bytes(critic);

    RestorationRun run;
    run.plan = cfg.restore;
    run.plan.lambda_nr = 1.0;
    run.plan.lambda_fr = 0.0;
    run.seed = 5;
    auto result = train_restorer(run, critic);
    CHECK(testutil::param_bytes(critic) == before);
    CHECK(result.val_outputs.size() == 2);

    // FR variant too
    run.plan.lambda_nr = 0.0;
    run.plan.lambda_fr = 5.0;
    train_restorer(run, critic);
    CHECK(testutil::param_bytes(critic) == before);
}

TEST_CASE("a lambda of 1.0 reproduces the base run exactly", "[restore]") {
    const Config cfg = restore_test_config();
    Model<float> critic(cfg);
    RestorationRun base;
    base.plan = cfg.restore;
    base.plan.lambda_nr = 1.0;
    base.plan.lambda_fr = 0.0;
    base.seed = 11;

    auto plain = train_restorer(base, critic);
    RestorationRun unit = base;
    unit.plan.ratios["sharpness"] = 1.0;
    auto with_unit = train_restorer(unit, critic);
    CHECK(plain.val_metrics.critic_overall == with_unit.val_metrics.critic_overall);
    CHECK(plain.val_metrics.sharpness_proxy == with_unit.val_metrics.sharpness_proxy);
}

TEST_CASE("restorer training is deterministic given seeds", "[restore]") {
    const Config cfg = restore_test_config();
    Model<float> critic(cfg);
    RestorationRun run;
    run.plan = cfg.restore;
    run.plan.lambda_nr = 0.0;
    run.plan.lambda_fr = 0.0;
    run.seed = 13;
    auto a = train_restorer(run, critic);
    auto b = train_restorer(run, critic);
    for (std::size_t i = 0; i < a.val_outputs.size(); ++i)
        CHECK(a.val_outputs[i].pix == b.val_outputs[i].pix);
}

TEST_CASE("sweep validates its grid and dimension", "[restore]") {
    const Config cfg = restore_test_config();
    Model<float> critic(cfg);
    RestorationRun base;
    base.plan = cfg.restore;
    base.plan.lambda_nr = 1.0;
    base.plan.lambda_fr = 0.0;
    CHECK_THROWS_WITH(sweep_ratio(base, "bokeh", {1.0, 2.0}, critic),
                      Catch::Matchers::ContainsSubstring("unknown dimension"));
    CHECK_THROWS_WITH(sweep_ratio(base, "sharpness", {2.0, 3.0}, critic),
                      Catch::Matchers::ContainsSubstring("start at 1.0"));
    CHECK_THROWS_WITH(sweep_ratio(base, "sharpness", {1.0, 3.0, 2.0}, critic),
                      Catch::Matchers::ContainsSubstring("ascending"));
}

TEST_CASE("sweep emits one row per ratio in table form", "[restore]") {
    const Config cfg = restore_test_config();
    Model<float> critic(cfg);
    RestorationRun base;
    base.plan = cfg.restore;
    base.plan.iterations = 1;
    base.plan.lambda_nr = 1.0;
    base.plan.lambda_fr = 0.0;
    base.seed = 17;
    const auto report = sweep_ratio(base, "noisiness", {1.0, 1.5}, critic);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].type == "NR");
    CHECK(report.rows[0].ratio == 1.0);
    CHECK(report.rows[1].ratio == 1.5);
    const std::string csv = report.to_csv();
    CHECK(csv.find("type,ratio,critic_overall") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("critic_noisiness") != std::string::npos);
}
