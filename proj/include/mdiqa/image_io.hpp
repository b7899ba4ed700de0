// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0
//
// Raster I/O: PNG via libpng (8- and 16-bit, gray/RGB/RGBA) and binary PPM.
// Everything decodes to ImageTensor in [0,1]; writers quantize to 8-bit.

#pragma once

#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "mdiqa/image.hpp"

namespace mdiqa {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline ImageTensor read_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot open image file: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png reader allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png info allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("failed to decode PNG: " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    if (bit_depth == 16) png_set_swap(png);  // libpng serves big-endian 16-bit
    png_read_update_info(png, info);

    const int out_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<unsigned char> data(rowbytes * h);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = data.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    ImageTensor img(static_cast<int>(h), static_cast<int>(w));
    if (out_depth == 8) {
        for (png_uint_32 y = 0; y < h; ++y)
            for (png_uint_32 x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c)
                    img.at(c, static_cast<int>(y), static_cast<int>(x)) =
                        static_cast<float>(data[y * rowbytes + 3 * x + c] / 255.0);
    } else if (out_depth == 16) {
        for (png_uint_32 y = 0; y < h; ++y)
            for (png_uint_32 x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c) {
                    const unsigned char* p = &data[y * rowbytes + 6 * x + 2 * c];
                    const unsigned v = static_cast<unsigned>(p[0]) | (static_cast<unsigned>(p[1]) << 8);
                    img.at(c, static_cast<int>(y), static_cast<int>(x)) =
                        static_cast<float>(v / 65535.0);
                }
    } else {
        throw std::runtime_error("unsupported PNG bit depth in " + path);
    }
    return img;
}

inline ImageTensor read_ppm(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot open image file: " + path);
    char magic[3] = {};
    int w = 0, h = 0, maxval = 0;
    if (std::fscanf(f.get(), "%2s %d %d %d", magic, &w, &h, &maxval) != 4 ||
        std::strcmp(magic, "P6") != 0 || w <= 0 || h <= 0 || (maxval != 255 && maxval != 65535))
        throw std::runtime_error("unsupported PPM header in " + path);
    std::fgetc(f.get());  // single whitespace after maxval
    ImageTensor img(h, w);
    if (maxval == 255) {
        std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
        for (int y = 0; y < h; ++y) {
            if (std::fread(row.data(), 1, row.size(), f.get()) != row.size())
                throw std::runtime_error("truncated PPM data in " + path);
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c)
                    img.at(c, y, x) = static_cast<float>(row[3 * x + c] / 255.0);
        }
    } else {
        std::vector<unsigned char> row(static_cast<std::size_t>(w) * 6);
        for (int y = 0; y < h; ++y) {
            if (std::fread(row.data(), 1, row.size(), f.get()) != row.size())
                throw std::runtime_error("truncated PPM data in " + path);
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c) {
                    const unsigned v = (static_cast<unsigned>(row[6 * x + 2 * c]) << 8) |
                                       row[6 * x + 2 * c + 1];
                    img.at(c, y, x) = static_cast<float>(v / 65535.0);
                }
        }
    }
    return img;
}

}  // namespace detail

inline ImageTensor read_image(const std::string& path) {
    detail::FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot open image file: " + path);
    unsigned char sig[8] = {};
    const std::size_t got = std::fread(sig, 1, 8, f.get());
    f.reset();
    if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) return detail::read_png(path);
    if (got >= 2 && sig[0] == 'P' && sig[1] == '6') return detail::read_ppm(path);
    throw std::runtime_error("unrecognized image format: " + path);
}

inline void write_png(const std::string& path, const ImageTensor& img) {
    detail::FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("cannot open file for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png writer allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png info allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed to encode PNG: " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = img.at(c, y, x);
                row[3 * x + c] = static_cast<unsigned char>(
                    std::min(255.0, std::max(0.0, v * 255.0 + 0.5)));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline void write_image(const std::string& path, const ImageTensor& img) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".ppm") {
        detail::FilePtr f(std::fopen(path.c_str(), "wb"));
        if (!f) throw std::runtime_error("cannot open file for writing: " + path);
        std::fprintf(f.get(), "P6\n%d %d\n255\n", img.width, img.height);
        std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < 3; ++c)
                    row[3 * x + c] = static_cast<unsigned char>(
                        std::min(255.0, std::max(0.0, img.at(c, y, x) * 255.0 + 0.5)));
            if (std::fwrite(row.data(), 1, row.size(), f.get()) != row.size())
                throw std::runtime_error("short write to " + path);
        }
        return;
    }
    write_png(path, img);
}

}  // namespace mdiqa
