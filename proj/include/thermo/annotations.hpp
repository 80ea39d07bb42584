#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "thermo/error.hpp"
#include "thermo/text_util.hpp"

namespace thermo {

/// Slack allowed when a normalized box overflows [0, 1] by float arithmetic.
inline constexpr double kBoxEpsilon = 1e-6;

/// YOLO-format box: center and extent normalized by frame dimensions.
struct NormBBox {
    int class_id = 0;
    double cx = 0.5;
    double cy = 0.5;
    double w = 0.0;
    double h = 0.0;

    friend bool operator==(const NormBBox&, const NormBBox&) = default;
};

/// Pixel rectangle with inclusive (x1, y1) and exclusive (x2, y2) corners.
struct PixelBBox {
    int x1 = 0;
    int y1 = 0;
    int x2 = 0;
    int y2 = 0;

    int width() const { return x2 - x1; }
    int height() const { return y2 - y1; }
    long long area() const { return static_cast<long long>(width()) * height(); }
    bool valid() const { return x1 < x2 && y1 < y2; }
    bool within(int frame_w, int frame_h) const {
        return valid() && x1 >= 0 && y1 >= 0 && x2 <= frame_w && y2 <= frame_h;
    }
    bool contains(double x, double y) const { return x >= x1 && x < x2 && y >= y1 && y < y2; }

    friend bool operator==(const PixelBBox&, const PixelBBox&) = default;
};

struct GroundTruthLabel {
    NormBBox bbox;

    friend bool operator==(const GroundTruthLabel&, const GroundTruthLabel&) = default;
};

/// Returns an empty string when the box satisfies every normalized-box invariant,
/// otherwise a description of the first violation.
inline std::string check_norm_bbox(const NormBBox& b) {
    if (b.class_id < 0) return "negative class id";
    if (!(b.cx >= 0.0 && b.cx <= 1.0) || !(b.cy >= 0.0 && b.cy <= 1.0)) return "center outside [0,1]";
    if (!(b.w > 0.0 && b.w <= 1.0) || !(b.h > 0.0 && b.h <= 1.0)) return "extent outside (0,1]";
    if (b.cx - b.w / 2 < -kBoxEpsilon || b.cx + b.w / 2 > 1.0 + kBoxEpsilon) return "box overflows horizontally";
    if (b.cy - b.h / 2 < -kBoxEpsilon || b.cy + b.h / 2 > 1.0 + kBoxEpsilon) return "box overflows vertically";
    return {};
}

inline NormBBox parse_yolo_line(std::string_view line) {
    const auto fields = text::split_ws(text::trim(line));
    if (fields.size() != 5) {
        fail_data("yolo label: expected 5 fields, got " + std::to_string(fields.size()) + " in '" +
                  std::string(line) + "'");
    }
    const auto cls = text::to_int(fields[0]);
    if (!cls) fail_data("yolo label: non-integer class '" + std::string(fields[0]) + "'");
    NormBBox b;
    b.class_id = static_cast<int>(*cls);
    double* coords[] = {&b.cx, &b.cy, &b.w, &b.h};
    for (std::size_t i = 0; i < 4; ++i) {
        const auto v = text::to_double(fields[i + 1]);
        if (!v || !std::isfinite(*v)) fail_data("yolo label: non-numeric token '" + std::string(fields[i + 1]) + "'");
        *coords[i] = *v;
    }
    if (auto why = check_norm_bbox(b); !why.empty()) {
        fail_data("yolo label: out-of-range value (" + why + ") in '" + std::string(line) + "'");
    }
    return b;
}

/// Parses a whole label file body. Blank lines are ignored; an empty body is a null label.
inline std::vector<GroundTruthLabel> parse_yolo_text(std::string_view body) {
    std::vector<GroundTruthLabel> out;
    for (const auto& line : text::lines(body)) {
        if (text::trim(line).empty()) continue;
        out.push_back({parse_yolo_line(line)});
    }
    return out;
}

inline std::string serialize_yolo(const std::vector<NormBBox>& labels) {
    std::string out;
    for (const auto& b : labels) {
        out += std::to_string(b.class_id);
        for (double v : {b.cx, b.cy, b.w, b.h}) {
            out += ' ';
            out += text::fixed(v, 6);
        }
        out += '\n';
    }
    return out;
}

inline std::string serialize_yolo(const std::vector<GroundTruthLabel>& labels) {
    std::vector<NormBBox> boxes;
    boxes.reserve(labels.size());
    for (const auto& l : labels) boxes.push_back(l.bbox);
    return serialize_yolo(boxes);
}

inline std::vector<GroundTruthLabel> load_labels(const std::filesystem::path& path) {
    return parse_yolo_text(text::read_file(path));
}

inline void save_labels(const std::filesystem::path& path, const std::vector<GroundTruthLabel>& labels) {
    text::write_file_atomic(path, serialize_yolo(labels));
}

/// Half-up rounding used for all sub-pixel decisions.
inline long long round_half_up(double v) { return static_cast<long long>(std::floor(v + 0.5)); }

inline PixelBBox denormalize(const NormBBox& b, int frame_w, int frame_h) {
    if (frame_w <= 0 || frame_h <= 0) fail_data("denormalize: frame dimensions must be positive");
    const auto clamp_to = [](long long v, int hi) { return static_cast<int>(std::clamp<long long>(v, 0, hi)); };
    PixelBBox p;
    p.x1 = clamp_to(round_half_up((b.cx - b.w / 2) * frame_w), frame_w);
    p.x2 = clamp_to(round_half_up((b.cx + b.w / 2) * frame_w), frame_w);
    p.y1 = clamp_to(round_half_up((b.cy - b.h / 2) * frame_h), frame_h);
    p.y2 = clamp_to(round_half_up((b.cy + b.h / 2) * frame_h), frame_h);
    if (!p.valid()) fail_data("denormalize: box collapses to zero area");
    return p;
}

inline NormBBox normalize(const PixelBBox& p, int frame_w, int frame_h, int class_id) {
    if (frame_w <= 0 || frame_h <= 0) fail_data("normalize: frame dimensions must be positive");
    if (!p.within(frame_w, frame_h)) fail_data("normalize: box outside frame");
    NormBBox b;
    b.class_id = class_id;
    b.cx = (p.x1 + p.x2) / (2.0 * frame_w);
    b.cy = (p.y1 + p.y2) / (2.0 * frame_h);
    b.w = static_cast<double>(p.width()) / frame_w;
    b.h = static_cast<double>(p.height()) / frame_h;
    return b;
}

}  // namespace thermo
