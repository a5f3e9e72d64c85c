#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"

namespace armorbench {

// One image plus its ground-truth label. Pixels are channel-planar float32
// (R plane, G plane, B plane, each row-major) with every value in [0,1].
struct ImageSample {
    std::int64_t id = 0;
    int label = 0;
    int channels = 3;
    int height = 0;
    int width = 0;
    std::vector<float> pixels;

    std::size_t pixel_count() const { return pixels.size(); }

    float& at(int c, int y, int x) {
        return pixels[static_cast<std::size_t>((c * height + y) * width + x)];
    }
    float at(int c, int y, int x) const {
        return pixels[static_cast<std::size_t>((c * height + y) * width + x)];
    }
};

inline void check_same_shape(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw ShapeError(std::string(what) + ": size mismatch, " + std::to_string(a) + " vs " +
                         std::to_string(b));
}

inline double linf_distance(std::span<const float> a, std::span<const float> b) {
    check_same_shape(a.size(), b.size(), "linf_distance");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

inline double l2_distance(std::span<const float> a, std::span<const float> b) {
    check_same_shape(a.size(), b.size(), "l2_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

inline void assert_pixels_in_unit_range(const ImageSample& s) {
    for (float p : s.pixels)
        if (!(p >= 0.0f && p <= 1.0f))
            throw InputError("sample " + std::to_string(s.id) + ": pixel " + std::to_string(p) +
                             " outside [0,1]");
}

// Hue in [0,1) -> saturated RGB, used by the synthetic pattern generator.
inline void hue_to_rgb(double hue, double& r, double& g, double& b) {
    const double h = (hue - std::floor(hue)) * 6.0;
    const int sector = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    switch (sector) {
        case 0: r = 1.0; g = f; b = 0.0; break;
        case 1: r = 1.0 - f; g = 1.0; b = 0.0; break;
        case 2: r = 0.0; g = 1.0; b = f; break;
        case 3: r = 0.0; g = 1.0 - f; b = 1.0; break;
        case 4: r = f; g = 0.0; b = 1.0; break;
        default: r = 1.0; g = 0.0; b = 1.0 - f; break;
    }
}

}  // namespace armorbench
