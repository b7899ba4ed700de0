// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "fixtures.hpp"
#include "helpers.hpp"
#include "mdiqa/backbone.hpp"

using namespace mdiqa;

TEST_CASE("pyramid stride arithmetic and spatial unification", "[backbone]") {
    Rng rng(1);
    Backbone<double> bb({4, 6, 8}, rng);
    ad::Tape<double> tape;
    auto img = ad::make_tensor<double>({1, 3, 96, 96}, false);
    for (auto& v : img->v) v = rng.uniform(0.0, 1.0);
    auto pyr = bb.extract(tape, img, Branch::technical);
    REQUIRE(pyr.levels.size() == 3);
    CHECK(pyr.pre_glp_sizes ==
          std::vector<std::pair<int, int>>{{24, 24}, {12, 12}, {6, 6}});
    for (std::size_t l = 0; l < 3; ++l) {
        CHECK(pyr.levels[l]->dim(2) == 6);
        CHECK(pyr.levels[l]->dim(3) == 6);
        CHECK(pyr.levels[l]->dim(1) == std::vector<int>{4, 6, 8}[l]);
    }
    // strictly decreasing pre-GLP sizes
    for (std::size_t l = 1; l < 3; ++l)
        CHECK(pyr.pre_glp_sizes[l].first < pyr.pre_glp_sizes[l - 1].first);
}

TEST_CASE("zero image produces finite outputs", "[backbone]") {
    Rng rng(2);
    Backbone<double> bb({4, 6}, rng);
    ad::Tape<double> tape;
    auto img = ad::make_tensor<double>({1, 3, 32, 32}, false);
    auto pyr = bb.extract(tape, img, Branch::technical);
    for (const auto& lv : pyr.levels)
        for (double v : lv->v) CHECK(std::isfinite(v));
}

TEST_CASE("inference is deterministic", "[backbone]") {
    Rng rng(3);
    Backbone<double> bb({4, 6}, rng);
    auto img = ad::make_tensor<double>({2, 3, 32, 32}, false);
    Rng prng(4);
    for (auto& v : img->v) v = prng.uniform(0.0, 1.0);
    ad::Tape<double> t1, t2;
    auto a = bb.extract(t1, img, Branch::technical);
    auto b = bb.extract(t2, img, Branch::technical);
    for (std::size_t l = 0; l < a.levels.size(); ++l) CHECK(a.levels[l]->v == b.levels[l]->v);
}

TEST_CASE("undersized input is rejected naming the minimum", "[backbone]") {
    Rng rng(5);
    Backbone<double> bb({4, 6, 8}, rng);  // min input 32
    ad::Tape<double> tape;
    auto img = ad::make_tensor<double>({1, 3, 16, 16}, false);
    try {
        bb.extract(tape, img, Branch::technical);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("32") != std::string::npos);
    }
}

TEST_CASE("glp with saturated gate equals plain average pooling", "[backbone]") {
    Rng rng(6);
    Glp<double> glp(2, rng);
    glp.gate.w->fill(0.0);
    glp.gate.b->fill(50.0);  // sigmoid(50) == 1.0 in double
    auto x = ad::make_tensor<double>({1, 2, 4, 4}, false);
    Rng prng(7);
    for (auto& v : x->v) v = prng.uniform(-1.0, 1.0);
    ad::Tape<double> tape;
    auto gated = glp.forward(tape, x, 2, 2);
    auto plain = ad::adaptive_avg_pool(tape, x, 2, 2);
    CHECK(gated->v == plain->v);
}

TEST_CASE("glp constant window matches the closed form", "[backbone]") {
    Rng rng(8);
    Glp<double> glp(1, rng);
    const double w = 0.3, b = -0.1, c = 0.7;
    glp.gate.w->v = {w};
    glp.gate.b->v = {b};
    auto x = ad::make_tensor<double>({1, 1, 4, 4}, false);
    x->fill(c);
    ad::Tape<double> tape;
    auto out = glp.forward(tape, x, 2, 2);
    const double gate = 1.0 / (1.0 + std::exp(-(w * c + b)));
    for (double v : out->v) CHECK(v == Catch::Approx(c * gate).epsilon(1e-12));
}

TEST_CASE("glp gradients match finite differences", "[backbone]") {
    Rng rng(9);
    Glp<double> glp(2, rng);
    auto x = ad::make_tensor<double>({1, 2, 4, 4}, true);
    Rng prng(10);
    for (auto& v : x->v) v = prng.uniform(-1.0, 1.0);

    std::vector<double> probe(8);
    Rng wrng(11);
    for (auto& p : probe) p = wrng.uniform(-1.0, 1.0);
    auto eval = [&] {
        ad::Tape<double> tape;
        auto out = glp.forward(tape, x, 2, 2);
        return ad::sum(tape, ad::mul_const(tape, out, probe))->v[0];
    };

    for (const auto& leaf : {x, glp.gate.w, glp.gate.b}) {
        ad::Tape<double> tape;
        auto out = glp.forward(tape, x, 2, 2);
        auto loss = ad::sum(tape, ad::mul_const(tape, out, probe));
        x->zero_grad();
        glp.gate.w->zero_grad();
        glp.gate.b->zero_grad();
        tape.backward(loss);
        const auto analytic = leaf->g;
        const auto fd = testutil::finite_diff(leaf, eval);
        INFO("leaf numel " << leaf->numel());
        CHECK(testutil::grad_rel_err(analytic, fd) < 1e-4);
    }
}

TEST_CASE("technical and aesthetic backbones have disjoint parameters", "[backbone]") {
    Model<double> model(testutil::tiny_config());
    std::set<const void*> tech, aes;
    model.visit([&](const std::string& name, const ad::TP<double>& t) {
        if (name.rfind("backbone_t.", 0) == 0) tech.insert(t.get());
        if (name.rfind("backbone_a.", 0) == 0) aes.insert(t.get());
    });
    CHECK(!tech.empty());
    CHECK(tech.size() == aes.size());
    for (const void* p : tech) CHECK(aes.count(p) == 0);
}
