#pragma once

#include <algorithm>
#include <vector>

#include "thermo/annotations.hpp"

namespace thermo {

/// A predicted face region.
struct Detection {
    PixelBBox bbox;
    double confidence = 0.0;
    int class_id = 0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Intersection over union of two pixel rectangles; 0 when disjoint.
inline double iou(const PixelBBox& a, const PixelBBox& b) {
    const long long iw = std::max(0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const long long ih = std::max(0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const long long inter = iw * ih;
    if (inter == 0) return 0.0;
    const long long uni = a.area() + b.area() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline bool sorted_by_confidence(const std::vector<Detection>& dets) {
    return std::is_sorted(dets.begin(), dets.end(),
                          [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
}

inline void sort_by_confidence(std::vector<Detection>& dets) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
}

}  // namespace thermo
