// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mdiqa/data.hpp"

using namespace mdiqa;
namespace fs = std::filesystem;

namespace {

ImageTensor checkerboard(int n, float a = 0.2f, float b = 0.8f) {
    ImageTensor img(n, n);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) img.at(c, y, x) = ((x / 8 + y / 8) % 2) ? a : b;
    return img;
}

ImageTensor sample_clean(std::uint64_t seed = 5, int n = 64) {
    Rng rng(seed);
    return synth_clean_image(n, n, rng);
}

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mdiqa_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("severity zero is the identity for every kind", "[data]") {
    const ImageTensor clean = sample_clean();
    for (int k = 0; k < 5; ++k) {
        const auto out = apply_distortion(clean, {static_cast<DistortionKind>(k), 0.0}, 123);
        CHECK(out.pix == clean.pix);
    }
}

TEST_CASE("empty spec list keeps technical labels at 1 and clean aesthetics", "[data]") {
    const ImageTensor clean = sample_clean();
    const auto s = generate_synthetic_sample(clean, {}, 7);
    CHECK(s.image.pix == clean.pix);
    const auto reg = default_registry();
    for (const auto& d : reg.technical) CHECK(s.dim_labels.at(d) == 1.0);
    CHECK(s.dim_labels.at("composition") == Catch::Approx(composition_stat(clean)));
    CHECK(s.dim_labels.at("light") == Catch::Approx(light_stat(clean)));
    CHECK(s.dim_labels.at("color") == Catch::Approx(color_stat(clean)));
    CHECK(s.dim_labels.at("content") == Catch::Approx(content_stat(clean)));
    double mean = 0;
    for (const auto& [k, v] : s.dim_labels) mean += v;
    CHECK(s.overall_label == Catch::Approx(mean / 9.0));
}

TEST_CASE("blur 0.5 sets sharpness to 0.5 and leaves other technical labels", "[data]") {
    const auto s = generate_synthetic_sample(sample_clean(), {{DistortionKind::blur, 0.5}}, 3);
    CHECK(s.dim_labels.at("sharpness") == 0.5);
    CHECK(s.dim_labels.at("noisiness") == 1.0);
    CHECK(s.dim_labels.at("brightness") == 1.0);
    CHECK(s.dim_labels.at("contrast") == 1.0);
    CHECK(s.dim_labels.at("colorfulness") == 1.0);
}

TEST_CASE("duplicate kinds are rejected naming the kind", "[data]") {
    const ImageTensor clean = sample_clean();
    try {
        generate_synthetic_sample(clean, {{DistortionKind::noise, 0.2}, {DistortionKind::noise, 0.4}}, 1);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("noise") != std::string::npos);
    }
}

TEST_CASE("seeded noise field regenerates exactly", "[data]") {
    const ImageTensor clean = checkerboard(64, 0.4f, 0.6f);
    const auto a = generate_synthetic_sample(clean, {{DistortionKind::noise, 0.3}}, 77);
    const auto b = generate_synthetic_sample(clean, {{DistortionKind::noise, 0.3}}, 77);
    CHECK(a.image.pix == b.image.pix);
    const auto c = generate_synthetic_sample(clean, {{DistortionKind::noise, 0.3}}, 78);
    CHECK(a.image.pix != c.image.pix);
    // mid-gray board + sigma=0.075: clamping is rare, the recovered field must
    // be zero-mean unit-variance
    const double sigma = 0.25 * 0.3;
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < clean.pix.size(); ++i) {
        const double g = (a.image.pix[i] - clean.pix[i]) / sigma;
        mean += g;
        var += g * g;
    }
    mean /= static_cast<double>(clean.pix.size());
    var = var / static_cast<double>(clean.pix.size()) - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(var == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("label monotonicity in severity for every kind", "[data]") {
    const ImageTensor clean = sample_clean();
    const auto reg = default_registry();
    for (int k = 0; k < 5; ++k) {
        const auto kind = static_cast<DistortionKind>(k);
        const std::string dim = reg.technical[static_cast<std::size_t>(technical_index_for(kind))];
        double prev = 2.0;
        for (double sev : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const auto s = generate_synthetic_sample(clean, {{kind, sev}}, 9);
            const double label = s.dim_labels.at(dim);
            CHECK(label < prev);
            prev = label;
        }
    }
}

TEST_CASE("aesthetic stats hit their closed forms on crafted images", "[data]") {
    ImageTensor flat(32, 32);
    for (auto& p : flat.pix) p = 0.5f;
    CHECK(light_stat(flat) == Catch::Approx(1.0));
    CHECK(color_stat(flat) == Catch::Approx(0.0));
    CHECK(content_stat(flat) == Catch::Approx(0.0));  // one-bin histogram
    CHECK(composition_stat(flat) == Catch::Approx(1.0));  // flat: centroid convention

    ImageTensor dark(32, 32);
    for (auto& p : dark.pix) p = 0.0f;
    CHECK(light_stat(dark) == Catch::Approx(0.0));

    // centered symmetric pattern keeps the edge centroid at the center
    const ImageTensor board = checkerboard(64);
    CHECK(composition_stat(board) == Catch::Approx(1.0).margin(1e-6));

    // maximally colorful pixel: one channel 1, others 0 -> color_stat 1
    ImageTensor sat(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) sat.at(0, y, x) = 1.0f;
    CHECK(color_stat(sat) == Catch::Approx(1.0));
}

TEST_CASE("augment determinism and identity crop", "[data]") {
    const ImageTensor img = sample_clean(11, 128);
    SECTION("same seed gives bit-identical crops") {
        const auto a = augment(img, 96, 42);
        const auto b = augment(img, 96, 42);
        CHECK(a.pix == b.pix);
        CHECK(a.height == 96);
        CHECK(a.width == 96);
    }
    SECTION("full-size crop with flip disabled is the identity") {
        const auto a = augment(img, 128, 42, /*hflip=*/false);
        CHECK(a.pix == img.pix);
    }
    SECTION("undersized images are reflect-padded then cropped") {
        const ImageTensor small = sample_clean(12, 64);
        const auto a = augment(small, 96, 5);
        CHECK(a.height == 96);
        CHECK(a.width == 96);
        for (float p : a.pix) CHECK((p >= 0.f && p <= 1.f));
    }
}

TEST_CASE("manifest round-trip preserves labels to 1e-9", "[data]") {
    const auto dir = temp_dir("roundtrip");
    DataPlan plan;
    plan.count = 6;
    plan.size = 48;
    auto samples = make_synthetic_dataset(plan, 21);
    const auto manifest = save_dataset(dir.string(), samples);
    const auto loaded = load_manifest(manifest);
    REQUIRE(loaded.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(loaded[i].overall_label == Catch::Approx(samples[i].overall_label).margin(1e-9));
        for (const auto& [k, v] : samples[i].dim_labels)
            CHECK(loaded[i].dim_labels.at(k) == Catch::Approx(v).margin(1e-9));
        CHECK(loaded[i].source == SampleSource::manifest);
        CHECK(loaded[i].image.height == 48);
    }
    fs::remove_all(dir);
}

TEST_CASE("manifest range normalization and masking", "[data]") {
    const auto dir = temp_dir("ranges");
    write_png((dir / "a.png").string(), checkerboard(32));
    write_png((dir / "b.png").string(), checkerboard(32));
    write_png((dir / "c.png").string(), checkerboard(32));
    {
        std::ofstream m(dir / "manifest.csv");
        m << "path,overall,sharpness\n";
        m << "#range,1:5,0:10\n";
        m << "a.png,5,10\n";
        m << "b.png,1,\n";
        m << "c.png,3,5\n";
    }
    const auto loaded = load_manifest((dir / "manifest.csv").string());
    REQUIRE(loaded.size() == 3);
    CHECK(loaded[0].overall_label == 1.0);
    CHECK(loaded[0].dim_labels.at("sharpness") == 1.0);
    CHECK(loaded[1].overall_label == 0.0);
    CHECK(loaded[1].dim_labels.count("sharpness") == 0);  // masked
    CHECK(loaded[2].overall_label == 0.5);
    CHECK(loaded[2].dim_labels.at("sharpness") == 0.5);
    const auto [vals, mask] = labels_in_order(loaded[1], default_registry());
    CHECK(mask[0] == 0);
    fs::remove_all(dir);
}

TEST_CASE("manifest errors carry row numbers and column names", "[data]") {
    const auto dir = temp_dir("errors");
    write_png((dir / "a.png").string(), checkerboard(32));
    SECTION("malformed row") {
        std::ofstream(dir / "m.csv") << "path,overall\n#range,1:5\na.png,junk\n";
        try {
            load_manifest((dir / "m.csv").string());
            FAIL("expected error");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("row 3") != std::string::npos);
        }
    }
    SECTION("wrong field count") {
        std::ofstream(dir / "m.csv") << "path,overall\n#range,1:5\na.png,2,9\n";
        try {
            load_manifest((dir / "m.csv").string());
            FAIL("expected error");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("row 3") != std::string::npos);
        }
    }
    SECTION("label outside declared range names the column") {
        std::ofstream(dir / "m.csv") << "path,overall,noisiness\n#range,1:5,0:1\na.png,2,1.5\n";
        try {
            load_manifest((dir / "m.csv").string());
            FAIL("expected error");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("noisiness") != std::string::npos);
        }
    }
    SECTION("unknown dimension column") {
        std::ofstream(dir / "m.csv") << "path,overall,bokeh\n#range,1:5,0:1\na.png,2,0.5\n";
        CHECK_THROWS_WITH(load_manifest((dir / "m.csv").string()),
                          Catch::Matchers::ContainsSubstring("bokeh"));
    }
    fs::remove_all(dir);
}

TEST_CASE("image io png round trip", "[data]") {
    const auto dir = temp_dir("imageio");
    const ImageTensor img = sample_clean(3, 48);
    write_png((dir / "x.png").string(), img);
    const auto back = read_image((dir / "x.png").string());
    REQUIRE(back.height == img.height);
    REQUIRE(back.width == img.width);
    // 8-bit quantization error is at most 1/510 + rounding
    for (std::size_t i = 0; i < img.pix.size(); ++i)
        CHECK(std::abs(back.pix[i] - img.pix[i]) < 1.0 / 255.0);
    fs::remove_all(dir);
}

TEST_CASE("image invariants are enforced", "[data]") {
    ImageTensor tiny(8, 8);
    CHECK_THROWS_AS(tiny.validate(), std::invalid_argument);
    ImageTensor bad(32, 32);
    bad.pix[0] = 1.5f;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("synthetic dataset determinism", "[data]") {
    DataPlan plan;
    plan.count = 3;
    plan.size = 48;
    const auto a = make_synthetic_dataset(plan, 5);
    const auto b = make_synthetic_dataset(plan, 5);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image.pix == b[i].image.pix);
        CHECK(a[i].overall_label == b[i].overall_label);
    }
}
