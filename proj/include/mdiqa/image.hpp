// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdiqa {

// 3-channel planar (CHW) image, values in [0,1].
struct ImageTensor {
    int height = 0;
    int width = 0;
    std::vector<float> pix;  // 3 * height * width

    ImageTensor() = default;
    ImageTensor(int h, int w) : height(h), width(w), pix(static_cast<std::size_t>(3) * h * w, 0.f) {}

    float& at(int c, int y, int x) {
        return pix[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return pix[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    std::size_t numel() const { return pix.size(); }

    void validate() const {
        if (height < 32 || width < 32)
            throw std::invalid_argument("ImageTensor: size " + std::to_string(height) + "x" +
                                        std::to_string(width) + " below the 32x32 minimum");
        if (pix.size() != static_cast<std::size_t>(3) * height * width)
            throw std::invalid_argument("ImageTensor: buffer size does not match dimensions");
        for (float p : pix)
            if (!std::isfinite(p) || p < 0.f || p > 1.f)
                throw std::invalid_argument("ImageTensor: pixel outside [0,1] or non-finite");
    }
};

inline float clamp01(double x) {
    return static_cast<float>(std::min(1.0, std::max(0.0, x)));
}

// Plain average of the three channels.
inline double luminance(const ImageTensor& img, int y, int x) {
    return (static_cast<double>(img.at(0, y, x)) + img.at(1, y, x) + img.at(2, y, x)) / 3.0;
}

inline double mean_luminance(const ImageTensor& img) {
    double acc = 0.0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) acc += luminance(img, y, x);
    return acc / (static_cast<double>(img.height) * img.width);
}

inline double mean_pixel(const ImageTensor& img) {
    double acc = 0.0;
    for (float p : img.pix) acc += p;
    return acc / static_cast<double>(img.pix.size());
}

// Mean squared gradient magnitude of luminance (central differences, interior
// pixels). Used as the sharpness proxy in sweep reports.
inline double gradient_energy(const ImageTensor& img) {
    if (img.height < 3 || img.width < 3) return 0.0;
    double acc = 0.0;
    for (int y = 1; y + 1 < img.height; ++y)
        for (int x = 1; x + 1 < img.width; ++x) {
            const double gx = 0.5 * (luminance(img, y, x + 1) - luminance(img, y, x - 1));
            const double gy = 0.5 * (luminance(img, y + 1, x) - luminance(img, y - 1, x));
            acc += gx * gx + gy * gy;
        }
    return acc / (static_cast<double>(img.height - 2) * (img.width - 2));
}

// Mean squared residual of luminance after a fixed 3x3 box smoothing. Used as
// the noisiness proxy in sweep reports.
inline double highfreq_energy(const ImageTensor& img) {
    if (img.height < 3 || img.width < 3) return 0.0;
    double acc = 0.0;
    for (int y = 1; y + 1 < img.height; ++y)
        for (int x = 1; x + 1 < img.width; ++x) {
            double box = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) box += luminance(img, y + dy, x + dx);
            box /= 9.0;
            const double r = luminance(img, y, x) - box;
            acc += r * r;
        }
    return acc / (static_cast<double>(img.height - 2) * (img.width - 2));
}

// 1 - normalized centroid offset of edge energy from the image center.
inline double composition_stat(const ImageTensor& img) {
    double total = 0.0, cy = 0.0, cx = 0.0;
    for (int y = 1; y + 1 < img.height; ++y)
        for (int x = 1; x + 1 < img.width; ++x) {
            const double gx = 0.5 * (luminance(img, y, x + 1) - luminance(img, y, x - 1));
            const double gy = 0.5 * (luminance(img, y + 1, x) - luminance(img, y - 1, x));
            const double e = gx * gx + gy * gy;
            total += e;
            cy += e * y;
            cx += e * x;
        }
    const double mid_y = (img.height - 1) / 2.0, mid_x = (img.width - 1) / 2.0;
    if (total <= 0.0) return 1.0;  // flat image: centroid at center by convention
    cy /= total;
    cx /= total;
    const double off = std::hypot(cy - mid_y, cx - mid_x);
    const double max_off = std::hypot(mid_y, mid_x);
    return std::min(1.0, std::max(0.0, 1.0 - off / max_off));
}

// 1 - |mean luminance - 0.5| * 2
inline double light_stat(const ImageTensor& img) {
    return std::min(1.0, std::max(0.0, 1.0 - std::abs(mean_luminance(img) - 0.5) * 2.0));
}

// RMS of the per-pixel cross-channel standard deviation, normalized by the
// maximum attainable value sqrt(2)/3 for values in [0,1].
inline double color_stat(const ImageTensor& img) {
    double acc = 0.0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double r = img.at(0, y, x), g = img.at(1, y, x), b = img.at(2, y, x);
            const double m = (r + g + b) / 3.0;
            acc += ((r - m) * (r - m) + (g - m) * (g - m) + (b - m) * (b - m)) / 3.0;
        }
    const double rms = std::sqrt(acc / (static_cast<double>(img.height) * img.width));
    const double max_rms = std::sqrt(2.0) / 3.0;
    return std::min(1.0, std::max(0.0, rms / max_rms));
}

// Normalized entropy of a fixed 32-bin luminance histogram.
inline double content_stat(const ImageTensor& img) {
    constexpr int kBins = 32;
    std::vector<double> hist(kBins, 0.0);
    const double n = static_cast<double>(img.height) * img.width;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            int b = static_cast<int>(luminance(img, y, x) * kBins);
            b = std::min(kBins - 1, std::max(0, b));
            hist[static_cast<std::size_t>(b)] += 1.0;
        }
    double ent = 0.0;
    for (double h : hist)
        if (h > 0.0) {
            const double p = h / n;
            ent -= p * std::log(p);
        }
    return std::min(1.0, std::max(0.0, ent / std::log(static_cast<double>(kBins))));
}

}  // namespace mdiqa
