#pragma once
// Minimal 8-bit grayscale PNG writer for quick visual checks of 2-D arrays.
// Values are linearly rescaled so the minimum maps to black and the maximum
// to white.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "mtd/core.hpp"

namespace mtd {

inline void write_png_gray(const std::string& path, const std::vector<double>& img,
                           int h, int w) {
    if (h < 1 || w < 1 || img.size() != static_cast<std::size_t>(h) * w)
        throw validation_error("png: image dimensions do not match the data");
    double lo = *std::min_element(img.begin(), img.end());
    double hi = *std::max_element(img.begin(), img.end());
    double span = hi > lo ? hi - lo : 1.0;
    std::vector<unsigned char> bytes(img.size());
    for (std::size_t i = 0; i < img.size(); ++i)
        bytes[i] = static_cast<unsigned char>(
            std::lround(255.0 * (img[i] - lo) / span));

    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw artifact_error("cannot open for writing: " + path);
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(f);
        throw artifact_error("png write failed: " + path);
    }
    png_init_io(png, f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < h; ++r)
        png_write_row(png, bytes.data() + static_cast<std::size_t>(r) * w);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
}

}  // namespace mtd
