// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multi-dimension labeled data with analytically known ground truth,
// manifest ingestion for externally annotated datasets, and training-time
// augmentation. All operations are pure functions of (inputs, seed).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdiqa/config.hpp"
#include "mdiqa/image.hpp"
#include "mdiqa/image_io.hpp"
#include "mdiqa/registry.hpp"
#include "mdiqa/rng.hpp"

namespace mdiqa {

// Canonical application order is the enum order.
enum class DistortionKind { blur = 0, noise, contrast, brightness, colorshift };

inline const char* kind_name(DistortionKind k) {
    switch (k) {
        case DistortionKind::blur: return "blur";
        case DistortionKind::noise: return "noise";
        case DistortionKind::contrast: return "contrast";
        case DistortionKind::brightness: return "brightness";
        case DistortionKind::colorshift: return "colorshift";
    }
    throw std::invalid_argument("invalid distortion kind");
}

inline DistortionKind kind_from_name(const std::string& s) {
    if (s == "blur") return DistortionKind::blur;
    if (s == "noise") return DistortionKind::noise;
    if (s == "contrast") return DistortionKind::contrast;
    if (s == "brightness") return DistortionKind::brightness;
    if (s == "colorshift") return DistortionKind::colorshift;
    throw std::invalid_argument("unknown distortion kind: " + s);
}

struct DistortionSpec {
    DistortionKind kind = DistortionKind::blur;
    double severity = 0.0;  // in [0,1]; 0 is the identity transform

    void validate() const {
        if (!(severity >= 0.0 && severity <= 1.0))
            throw std::invalid_argument(std::string("distortion severity outside [0,1] for ") +
                                        kind_name(kind));
    }
};

// Index into the technical list of the dimension each kind degrades:
// blur->sharpness, noise->noisiness, contrast->contrast, brightness->brightness,
// colorshift->colorfulness (positional under the default registry order).
inline int technical_index_for(DistortionKind k) {
    switch (k) {
        case DistortionKind::blur: return 0;
        case DistortionKind::noise: return 1;
        case DistortionKind::contrast: return 3;
        case DistortionKind::brightness: return 2;
        case DistortionKind::colorshift: return 4;
    }
    throw std::invalid_argument("invalid distortion kind");
}

enum class SampleSource { synthetic, manifest };

struct MultiDimSample {
    ImageTensor image;
    std::map<std::string, double> dim_labels;  // present labels only, all in [0,1]
    double overall_label = 0.0;
    bool overall_present = true;
    SampleSource source = SampleSource::synthetic;
};

// Ordered (labels, mask) views following the registry index layout.
inline std::pair<std::vector<double>, std::vector<std::uint8_t>> labels_in_order(
    const MultiDimSample& s, const DimensionRegistry& reg) {
    std::vector<double> vals(static_cast<std::size_t>(reg.count()), 0.0);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(reg.count()), 0);
    for (int i = 0; i < reg.count(); ++i) {
        auto it = s.dim_labels.find(reg.name(i));
        if (it != s.dim_labels.end()) {
            vals[static_cast<std::size_t>(i)] = it->second;
            mask[static_cast<std::size_t>(i)] = 1;
        }
    }
    return {vals, mask};
}

// ---------------------------------------------------------------------------
// Distortion families. Each is the identity at severity 0, monotone in
// severity, and clamps its output to [0,1].

namespace detail {

inline int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

}  // namespace detail

// Gaussian blur with std 4*severity px, symmetric border handling.
inline ImageTensor apply_blur(const ImageTensor& img, double severity) {
    if (severity <= 0.0) return img;
    const double sigma = 4.0 * severity;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double norm = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        norm += k[static_cast<std::size_t>(i + radius)];
    }
    for (double& v : k) v /= norm;

    ImageTensor tmp(img.height, img.width), out(img.height, img.width);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[static_cast<std::size_t>(i + radius)] *
                           img.at(c, y, detail::reflect_index(x + i, img.width));
                tmp.at(c, y, x) = static_cast<float>(acc);
            }
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[static_cast<std::size_t>(i + radius)] *
                           tmp.at(c, detail::reflect_index(y + i, img.height), x);
                out.at(c, y, x) = clamp01(acc);
            }
    }
    return out;
}

// Additive Gaussian noise with std 0.25*severity, seeded unit-variance field.
inline ImageTensor apply_noise(const ImageTensor& img, double severity, std::uint64_t seed) {
    if (severity <= 0.0) return img;
    const double sigma = 0.25 * severity;
    Rng rng(seed);
    ImageTensor out(img.height, img.width);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(c, y, x) = clamp01(img.at(c, y, x) + sigma * rng.normal());
    return out;
}

// Linear blend toward the global image mean.
inline ImageTensor apply_contrast(const ImageTensor& img, double severity) {
    if (severity <= 0.0) return img;
    const double m = mean_pixel(img);
    ImageTensor out(img.height, img.width);
    for (std::size_t i = 0; i < img.pix.size(); ++i)
        out.pix[i] = clamp01((1.0 - severity) * img.pix[i] + severity * m);
    return out;
}

// Additive shift of magnitude 0.4*severity, direction drawn from the seed.
inline ImageTensor apply_brightness(const ImageTensor& img, double severity, std::uint64_t seed) {
    if (severity <= 0.0) return img;
    Rng rng(seed);
    const double shift = (rng.coin() ? 1.0 : -1.0) * 0.4 * severity;
    ImageTensor out(img.height, img.width);
    for (std::size_t i = 0; i < img.pix.size(); ++i) out.pix[i] = clamp01(img.pix[i] + shift);
    return out;
}

// Per-channel gain in [1 - 0.5*severity, 1 + 0.5*severity]; gain magnitudes
// are kept in a narrow band away from 1 so the severity stays observable.
inline ImageTensor apply_colorshift(const ImageTensor& img, double severity, std::uint64_t seed) {
    if (severity <= 0.0) return img;
    Rng rng(seed);
    double gain[3];
    for (double& gc : gain) {
        const double sign = rng.coin() ? 1.0 : -1.0;
        gc = 1.0 + sign * 0.5 * severity * rng.uniform(0.75, 0.9);
    }
    ImageTensor out(img.height, img.width);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) out.at(c, y, x) = clamp01(img.at(c, y, x) * gain[c]);
    return out;
}

inline ImageTensor apply_distortion(const ImageTensor& img, const DistortionSpec& spec,
                                    std::uint64_t seed) {
    spec.validate();
    switch (spec.kind) {
        case DistortionKind::blur: return apply_blur(img, spec.severity);
        case DistortionKind::noise: return apply_noise(img, spec.severity, seed);
        case DistortionKind::contrast: return apply_contrast(img, spec.severity);
        case DistortionKind::brightness: return apply_brightness(img, spec.severity, seed);
        case DistortionKind::colorshift: return apply_colorshift(img, spec.severity, seed);
    }
    throw std::invalid_argument("invalid distortion kind");
}

// ---------------------------------------------------------------------------
// Synthetic sample generation

// Aesthetic label formulas, positional over the registry's aesthetic list:
// composition, light, color, content. Computed on the clean image.
inline double aesthetic_label(const ImageTensor& clean, int aesthetic_index) {
    switch (aesthetic_index) {
        case 0: return composition_stat(clean);
        case 1: return light_stat(clean);
        case 2: return color_stat(clean);
        case 3: return content_stat(clean);
        default:
            throw std::invalid_argument(
                "synthetic aesthetic labels are defined for at most 4 dimensions");
    }
}

inline MultiDimSample generate_synthetic_sample(const ImageTensor& clean,
                                                std::vector<DistortionSpec> specs,
                                                std::uint64_t seed,
                                                const DimensionRegistry& reg = default_registry()) {
    clean.validate();
    reg.validate();
    if (reg.technical_count() < 5)
        throw std::invalid_argument("synthetic generation requires the 5 technical dimensions");
    if (reg.aesthetic_count() > 4)
        throw std::invalid_argument(
            "synthetic aesthetic labels are defined for at most 4 dimensions");
    for (const auto& s : specs) s.validate();

    std::sort(specs.begin(), specs.end(), [](const DistortionSpec& a, const DistortionSpec& b) {
        return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    });
    for (std::size_t i = 1; i < specs.size(); ++i)
        if (specs[i].kind == specs[i - 1].kind)
            throw std::invalid_argument(std::string("duplicate distortion kind: ") +
                                        kind_name(specs[i].kind));

    MultiDimSample out;
    out.source = SampleSource::synthetic;

    std::vector<double> tech(static_cast<std::size_t>(reg.technical_count()), 1.0);
    ImageTensor img = clean;
    for (const auto& spec : specs) {
        img = apply_distortion(img, spec, mix_seed({seed, static_cast<std::uint64_t>(spec.kind) + 1}));
        tech[static_cast<std::size_t>(technical_index_for(spec.kind))] = 1.0 - spec.severity;
    }
    out.image = std::move(img);

    double total = 0.0;
    for (int i = 0; i < reg.technical_count(); ++i) {
        out.dim_labels[reg.technical[static_cast<std::size_t>(i)]] = tech[static_cast<std::size_t>(i)];
        total += tech[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < reg.aesthetic_count(); ++i) {
        const double v = aesthetic_label(clean, i);
        out.dim_labels[reg.aesthetic[static_cast<std::size_t>(i)]] = v;
        total += v;
    }
    out.overall_label = total / reg.count();
    out.overall_present = true;
    return out;
}

// ---------------------------------------------------------------------------
// Procedural clean images. Channel means are equalized and the luminance std
// is pinned to a narrow band so distortion severities remain identifiable from
// the distorted image (the labels are exact functions of the severities).

inline ImageTensor synth_clean_image(int h, int w, Rng& rng) {
    ImageTensor img(h, w);
    double amp[3], fx1[3], fy1[3], ph1[3], amp2[3], fx2[3], fy2[3], ph2[3];
    for (int c = 0; c < 3; ++c) {
        amp[c] = rng.uniform(0.08, 0.22);
        fx1[c] = rng.uniform(0.5, 3.0);
        fy1[c] = rng.uniform(0.5, 3.0);
        ph1[c] = rng.uniform(0.0, 2.0 * kPi);
        amp2[c] = rng.uniform(0.02, 0.10);
        fx2[c] = rng.uniform(3.0, 9.0);
        fy2[c] = rng.uniform(3.0, 9.0);
        ph2[c] = rng.uniform(0.0, 2.0 * kPi);
    }
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double u = static_cast<double>(x) / w, v = static_cast<double>(y) / h;
                double p = 0.5;
                p += amp[c] * std::sin(2.0 * kPi * (fx1[c] * u + fy1[c] * v) + ph1[c]);
                p += amp2[c] * std::sin(2.0 * kPi * (fx2[c] * u + fy2[c] * v) + ph2[c]);
                img.at(c, y, x) = static_cast<float>(p);
            }

    // A few colored shapes for edge structure and histogram variety.
    const int shapes = 1 + rng.uniform_int(4);
    for (int s = 0; s < shapes; ++s) {
        const bool ellipse = rng.coin();
        const double cy = rng.uniform(0.15, 0.85) * h, cx = rng.uniform(0.15, 0.85) * w;
        const double ry = rng.uniform(0.06, 0.28) * h, rx = rng.uniform(0.06, 0.28) * w;
        double col[3] = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
        const double alpha = rng.uniform(0.4, 0.9);
        const int y0 = std::max(0, static_cast<int>(cy - ry)), y1 = std::min(h - 1, static_cast<int>(cy + ry));
        const int x0 = std::max(0, static_cast<int>(cx - rx)), x1 = std::min(w - 1, static_cast<int>(cx + rx));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                if (ellipse) {
                    const double dy = (y - cy) / ry, dx = (x - cx) / rx;
                    if (dy * dy + dx * dx > 1.0) continue;
                }
                for (int c = 0; c < 3; ++c)
                    img.at(c, y, x) =
                        static_cast<float>((1.0 - alpha) * img.at(c, y, x) + alpha * col[c]);
            }
    }

    // Equalize channel means to a common target, then pin the luminance std.
    const double target_mean = rng.uniform(0.45, 0.55);
    for (int c = 0; c < 3; ++c) {
        double m = 0.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) m += img.at(c, y, x);
        m /= static_cast<double>(h) * w;
        const double dlt = target_mean - m;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) img.at(c, y, x) = static_cast<float>(img.at(c, y, x) + dlt);
    }
    double var = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double d = luminance(img, y, x) - target_mean;
            var += d * d;
        }
    var /= static_cast<double>(h) * w;
    const double target_std = rng.uniform(0.16, 0.22);
    const double k = var > 1e-12 ? target_std / std::sqrt(var) : 1.0;
    for (float& p : img.pix)
        p = clamp01(target_mean + (static_cast<double>(p) - target_mean) * k);
    return img;
}

inline std::vector<MultiDimSample> make_synthetic_dataset(
    const DataPlan& plan, std::uint64_t seed, const DimensionRegistry& reg = default_registry()) {
    std::vector<MultiDimSample> out;
    out.reserve(static_cast<std::size_t>(plan.count));
    constexpr int kKinds = 5;
    for (int i = 0; i < plan.count; ++i) {
        Rng rng(mix_seed({seed, 0xC1EA0ull, static_cast<std::uint64_t>(i)}));
        const ImageTensor clean = synth_clean_image(plan.size, plan.size, rng);
        std::vector<DistortionSpec> specs;
        for (int k = 0; k < kKinds; ++k)
            if (rng.uniform() < plan.kind_prob)
                specs.push_back({static_cast<DistortionKind>(k), rng.uniform(0.0, plan.severity_max)});
        out.push_back(generate_synthetic_sample(
            clean, specs, mix_seed({seed, 0x5A3D1ull, static_cast<std::uint64_t>(i)}), reg));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Augmentation

// Symmetric reflect padding up to at least (th, tw), centered.
inline ImageTensor reflect_pad(const ImageTensor& img, int th, int tw) {
    if (img.height >= th && img.width >= tw) return img;
    const int nh = std::max(th, img.height), nw = std::max(tw, img.width);
    const int top = (nh - img.height) / 2, left = (nw - img.width) / 2;
    ImageTensor out(nh, nw);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < nh; ++y)
            for (int x = 0; x < nw; ++x)
                out.at(c, y, x) = img.at(c, detail::reflect_index(y - top, img.height),
                                         detail::reflect_index(x - left, img.width));
    return out;
}

inline ImageTensor crop_at(const ImageTensor& img, int oy, int ox, int ch, int cw) {
    ImageTensor out(ch, cw);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x) out.at(c, y, x) = img.at(c, oy + y, ox + x);
    return out;
}

// Random crop plus optional horizontal flip; bit-identical for a given seed.
inline ImageTensor augment(const ImageTensor& img, int crop, std::uint64_t seed, bool hflip = true) {
    if (crop <= 0) throw std::invalid_argument("augment: crop must be positive");
    const ImageTensor padded = reflect_pad(img, crop, crop);
    Rng rng(seed);
    const int oy = rng.uniform_int(padded.height - crop + 1);
    const int ox = rng.uniform_int(padded.width - crop + 1);
    ImageTensor out = crop_at(padded, oy, ox, crop, crop);
    if (hflip && rng.coin()) {
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < crop; ++y)
                for (int x = 0; x < crop / 2; ++x)
                    std::swap(out.at(c, y, x), out.at(c, y, crop - 1 - x));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest I/O
//
// UTF-8 CSV. Header `path,overall,<dim1>,...`, second header
// `#range,<lo:hi>,...` declaring per-column label ranges, then one row per
// sample. Empty cell = missing label. Image paths are relative to the
// manifest file. Cells must not themselves contain commas.

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, bool& ok) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    ok = end != nullptr && *end == '\0' && end != s.c_str();
    return v;
}

}  // namespace detail

inline std::vector<MultiDimSample> load_manifest(const std::string& path,
                                                 const DimensionRegistry& reg = default_registry()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    const auto base = std::filesystem::path(path).parent_path();

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("manifest is empty: " + path);
    const auto header = detail::split_csv(line);
    if (header.size() < 2 || header[0] != "path" || header[1] != "overall")
        throw std::runtime_error("manifest header must start with `path,overall`: " + path);
    std::vector<std::string> dim_cols(header.begin() + 2, header.end());
    for (const auto& d : dim_cols)
        if (!reg.contains(d))
            throw std::runtime_error("manifest column names unknown dimension: " + d);

    if (!std::getline(in, line)) throw std::runtime_error("manifest missing #range header: " + path);
    const auto ranges_raw = detail::split_csv(line);
    if (ranges_raw.size() != header.size() || ranges_raw[0] != "#range")
        throw std::runtime_error("manifest second row must be a #range header: " + path);
    std::vector<std::pair<double, double>> ranges;
    for (std::size_t i = 1; i < ranges_raw.size(); ++i) {
        const auto sep = ranges_raw[i].find(':');
        bool ok_lo = false, ok_hi = false;
        const double lo = sep == std::string::npos
                              ? 0.0
                              : detail::parse_double(ranges_raw[i].substr(0, sep), ok_lo);
        const double hi = sep == std::string::npos
                              ? 0.0
                              : detail::parse_double(ranges_raw[i].substr(sep + 1), ok_hi);
        if (!ok_lo || !ok_hi || !(hi > lo))
            throw std::runtime_error("bad range declaration for column `" + header[i] +
                                     "`: " + ranges_raw[i]);
        ranges.emplace_back(lo, hi);
    }

    std::vector<MultiDimSample> out;
    int lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = detail::split_csv(line);
        if (cells.size() != header.size())
            throw std::runtime_error("manifest row " + std::to_string(lineno) + ": expected " +
                                     std::to_string(header.size()) + " fields, got " +
                                     std::to_string(cells.size()));
        if (cells[0].empty())
            throw std::runtime_error("manifest row " + std::to_string(lineno) + ": empty image path");
        MultiDimSample s;
        s.source = SampleSource::manifest;
        s.image = read_image((base / cells[0]).string());
        for (std::size_t i = 1; i < cells.size(); ++i) {
            if (cells[i].empty()) {
                if (i == 1) s.overall_present = false;
                continue;
            }
            bool ok = false;
            const double v = detail::parse_double(cells[i], ok);
            if (!ok)
                throw std::runtime_error("manifest row " + std::to_string(lineno) +
                                         ": malformed number `" + cells[i] + "`");
            const auto [lo, hi] = ranges[i - 1];
            if (v < lo || v > hi)
                throw std::runtime_error("label outside declared range in column `" + header[i] +
                                         "` (row " + std::to_string(lineno) + ")");
            const double norm = (v - lo) / (hi - lo);
            if (i == 1) {
                s.overall_label = norm;
                s.overall_present = true;
            } else {
                s.dim_labels[header[i]] = norm;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

// Writes images plus a normalized manifest (all ranges 0:1) into `dir`.
inline std::string save_dataset(const std::string& dir, const std::vector<MultiDimSample>& samples,
                                const DimensionRegistry& reg = default_registry(),
                                const std::string& manifest_name = "manifest.csv") {
    std::filesystem::create_directories(dir);
    const auto manifest_path = (std::filesystem::path(dir) / manifest_name).string();
    std::ofstream out(manifest_path);
    if (!out) throw std::runtime_error("cannot write manifest: " + manifest_path);

    out << "path,overall";
    for (const auto& d : reg.all()) out << "," << d;
    out << "\n#range";
    for (int i = 0; i < reg.count() + 1; ++i) out << ",0:1";
    out << "\n";

    char buf[64];
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "img_%06zu.png", i);
        const std::string img_name = buf;
        write_png((std::filesystem::path(dir) / img_name).string(), samples[i].image);
        out << img_name;
        if (samples[i].overall_present) {
            std::snprintf(buf, sizeof(buf), "%.12g", samples[i].overall_label);
            out << "," << buf;
        } else {
            out << ",";
        }
        for (const auto& d : reg.all()) {
            auto it = samples[i].dim_labels.find(d);
            if (it == samples[i].dim_labels.end()) {
                out << ",";
            } else {
                std::snprintf(buf, sizeof(buf), "%.12g", it->second);
                out << "," << buf;
            }
        }
        out << "\n";
    }
    return manifest_path;
}

}  // namespace mdiqa
