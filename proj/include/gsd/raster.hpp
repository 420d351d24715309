// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsd {

/// H x W x C grid of doubles, row-major with channels innermost, plus a
/// per-pixel coverage flag.
struct Raster {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> coverage;

    Raster() = default;
    Raster(int h, int w, int c, bool covered = false)
        : height(h), width(w), channels(c),
          values(static_cast<std::size_t>(h) * w * c, 0.0),
          coverage(static_cast<std::size_t>(h) * w, covered ? 1 : 0) {
        if (h <= 0 || w <= 0 || c <= 0) {
            throw std::invalid_argument("raster dimensions must be positive");
        }
    }

    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
    std::size_t pixel(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

    double& at(int x, int y, int c) { return values[pixel(x, y) * channels + c]; }
    double at(int x, int y, int c) const { return values[pixel(x, y) * channels + c]; }

    std::span<double> px(std::size_t p) { return {values.data() + p * channels, static_cast<std::size_t>(channels)}; }
    std::span<const double> px(std::size_t p) const {
        return {values.data() + p * channels, static_cast<std::size_t>(channels)};
    }

    bool covered(std::size_t p) const { return coverage[p] != 0; }
    std::size_t covered_count() const {
        std::size_t n = 0;
        for (auto c : coverage) n += c != 0;
        return n;
    }

    bool same_shape(const Raster& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

struct NoiseMap2D : Raster {
    using Raster::Raster;
};

struct GradientMap : Raster {
    using Raster::Raster;
};

/// Rendered color image z.
struct Image : Raster {
    using Raster::Raster;
};

template <class T>
concept RasterType = std::derived_from<T, Raster>;

inline void require_same_shape(const Raster& a, const Raster& b, const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
    }
}

}  // namespace gsd
