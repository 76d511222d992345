// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

namespace srum {

// Axis-aligned pixel rectangle, half-open: [x0, x1) x [y0, y1).
struct BBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    long long area() const { return static_cast<long long>(width()) * height(); }

    bool valid_for(int raster_height, int raster_width) const {
        return 0 <= x0 && x0 < x1 && x1 <= raster_width && 0 <= y0 && y0 < y1 &&
               y1 <= raster_height;
    }

    bool operator==(const BBox&) const = default;
};

inline void require_valid(const BBox& b, int raster_height, int raster_width) {
    if (!b.valid_for(raster_height, raster_width)) {
        throw std::invalid_argument("bbox out of bounds or empty");
    }
}

inline double iou(const BBox& a, const BBox& b) {
    const int ix0 = a.x0 > b.x0 ? a.x0 : b.x0;
    const int iy0 = a.y0 > b.y0 ? a.y0 : b.y0;
    const int ix1 = a.x1 < b.x1 ? a.x1 : b.x1;
    const int iy1 = a.y1 < b.y1 ? a.y1 : b.y1;
    if (ix0 >= ix1 || iy0 >= iy1) {
        return 0.0;
    }
    const double inter = static_cast<double>(ix1 - ix0) * (iy1 - iy0);
    const double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
    return inter / uni;
}

} // namespace srum
