#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "thermo/annotations.hpp"
#include "thermo/error.hpp"
#include "thermo/frame.hpp"
#include "thermo/keyvalue.hpp"
#include "thermo/random.hpp"
#include "thermo/regression.hpp"

namespace thermo {

/// temperature_c = intercept + slope * pixel
struct CalibrationLaw {
    double intercept = 20.0;
    double slope = 0.1;

    double temperature(double pixel) const { return intercept + slope * pixel; }
    double pixel_for(double temperature_c) const { return (temperature_c - intercept) / slope; }
};

struct FaceSpec {
    int cx = 0;  // center pixel
    int cy = 0;
    int ax = 8;  // ellipse radii in pixels
    int ay = 10;
    double temperature_c = 36.6;
};

struct SceneSpec {
    int width = kNativeWidth;
    int height = kNativeHeight;
    int background_level = 40;
    int noise_amplitude = 5;  // uniform integer noise in [-a, a]
    std::vector<FaceSpec> faces;
    CalibrationLaw law;
    std::uint64_t seed = 1;
};

struct Scene {
    ThermalFrame frame;
    std::vector<GroundTruthLabel> labels;
    std::vector<double> temperatures;  // assigned truth, label order
    std::vector<PixelBBox> boxes;      // tight ellipse bounds, label order
    std::vector<int> peaks;            // rendered peak intensity, label order
};

inline PixelBBox face_bbox(const FaceSpec& f) { return {f.cx - f.ax, f.cy - f.ay, f.cx + f.ax + 1, f.cy + f.ay + 1}; }

/// Peak intensity that the law maps back to the face temperature.
inline int peak_intensity(const SceneSpec& spec, const FaceSpec& f) {
    const double p = spec.law.pixel_for(f.temperature_c);
    if (!std::isfinite(p)) fail_data("scene: calibration law is not invertible");
    const long long peak = round_half_up(p);
    if (peak <= spec.background_level + spec.noise_amplitude || peak > 255) {
        fail_data("scene: temperature " + text::exact(f.temperature_c) + " C maps to intensity " + std::to_string(peak) +
                  ", outside (" + std::to_string(spec.background_level + spec.noise_amplitude) + ", 255]");
    }
    return static_cast<int>(peak);
}

inline void validate_scene(const SceneSpec& spec) {
    if (spec.width <= 0 || spec.height <= 0) fail_data("scene: dimensions must be positive");
    if (spec.background_level < 0 || spec.background_level > 255) fail_data("scene: background outside [0,255]");
    if (spec.noise_amplitude < 0) fail_data("scene: negative noise amplitude");
    for (const auto& f : spec.faces) {
        if (f.ax < 1 || f.ay < 1) fail_data("scene: face radii must be at least 1 pixel");
        if (!face_bbox(f).within(spec.width, spec.height)) fail_data("scene: face extends outside the frame");
        peak_intensity(spec, f);
    }
}

/// Renders each face as an elliptical Gaussian bump (sigma = radius / 2,
/// clipped to the ellipse) whose center pixel equals the inverted law
/// intensity, over uniform background noise. Overlaps combine by max.
inline Scene generate(const SceneSpec& spec) {
    validate_scene(spec);
    Scene scene;
    scene.frame = ThermalFrame(spec.width, spec.height, 1);
    Rng rng(spec.seed);
    for (auto& px : scene.frame.pixels()) {
        const auto v = spec.background_level + rng.between(-spec.noise_amplitude, spec.noise_amplitude);
        px = static_cast<std::uint8_t>(std::clamp<long long>(v, 0, 255));
    }
    for (const auto& f : spec.faces) {
        const int peak = peak_intensity(spec, f);
        const auto box = face_bbox(f);
        const double rise = peak - spec.background_level;
        for (int y = box.y1; y < box.y2; ++y) {
            for (int x = box.x1; x < box.x2; ++x) {
                const double nx = static_cast<double>(x - f.cx) / f.ax;
                const double ny = static_cast<double>(y - f.cy) / f.ay;
                const double r2n = nx * nx + ny * ny;
                if (r2n > 1.0) continue;
                const double v = spec.background_level + rise * std::exp(-2.0 * r2n);
                const auto iv = static_cast<std::uint8_t>(std::clamp<long long>(round_half_up(v), 0, peak));
                auto& dst = scene.frame.at(x, y);
                dst = std::max(dst, iv);
            }
        }
        scene.boxes.push_back(box);
        scene.labels.push_back({normalize(box, spec.width, spec.height, 0)});
        scene.temperatures.push_back(f.temperature_c);
        scene.peaks.push_back(peak);
    }
    return scene;
}

struct LayoutParams {
    int faces = 3;
    double temp_min = 35.5;
    double temp_max = 37.8;
    int jitter = 2;
};

/// Places faces on a near-square grid with one face per cell, so neighbouring
/// ellipses never touch. Radii scale with the cell size.
inline std::vector<FaceSpec> grid_layout(int width, int height, const LayoutParams& p, Rng& rng) {
    if (p.faces < 0) fail_data("layout: negative face count");
    if (p.faces == 0) return {};
    if (!(p.temp_min <= p.temp_max)) fail_data("layout: temp_min exceeds temp_max");
    int cols = static_cast<int>(std::ceil(std::sqrt(p.faces * static_cast<double>(width) / height)));
    cols = std::clamp(cols, 1, p.faces);
    const int rows = (p.faces + cols - 1) / cols;
    const int cell_w = width / cols, cell_h = height / rows;
    const int ax = std::max(2, static_cast<int>(cell_w * 0.28));
    const int ay = std::max(2, static_cast<int>(cell_h * 0.30));
    if (2 * (ax + p.jitter) + 3 > cell_w || 2 * (ay + p.jitter) + 3 > cell_h) {
        fail_data("layout: " + std::to_string(p.faces) + " faces do not fit in " + std::to_string(width) + "x" +
                  std::to_string(height));
    }
    std::vector<FaceSpec> faces;
    for (int i = 0; i < p.faces; ++i) {
        const int col = i % cols, row = i / cols;
        FaceSpec f;
        f.ax = ax;
        f.ay = ay;
        f.cx = col * cell_w + cell_w / 2 + static_cast<int>(rng.between(-p.jitter, p.jitter));
        f.cy = row * cell_h + cell_h / 2 + static_cast<int>(rng.between(-p.jitter, p.jitter));
        // One decimal, as a thermometer would read.
        f.temperature_c = std::round(rng.uniform(p.temp_min, p.temp_max) * 10.0) / 10.0;
        faces.push_back(f);
    }
    return faces;
}

/// A sequence description: either fixed faces or a per-frame grid layout.
struct SequenceSpec {
    SceneSpec base;
    int frames = 1;
    std::optional<LayoutParams> layout;
};

inline std::uint64_t frame_seed(std::uint64_t seed, std::uint64_t frame) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (frame + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline SceneSpec frame_spec(const SequenceSpec& seq, int frame) {
    SceneSpec spec = seq.base;
    spec.seed = frame_seed(seq.base.seed, static_cast<std::uint64_t>(frame));
    if (seq.layout) {
        Rng rng(spec.seed ^ 0x5bd1e995ull);
        spec.faces = grid_layout(spec.width, spec.height, *seq.layout, rng);
    }
    return spec;
}

/// Parses the `[scene]`, optional `[layout]` and repeatable `[face]` sections.
inline SequenceSpec parse_sequence_spec(std::string_view body) {
    const auto doc = parse_kv(body);
    SequenceSpec seq;
    auto& s = seq.base;
    if (const auto* sec = doc.find("scene")) {
        s.width = static_cast<int>(sec->get_int("width", s.width));
        s.height = static_cast<int>(sec->get_int("height", s.height));
        s.background_level = static_cast<int>(sec->get_int("background", s.background_level));
        s.noise_amplitude = static_cast<int>(sec->get_int("noise", s.noise_amplitude));
        s.seed = static_cast<std::uint64_t>(sec->get_int("seed", static_cast<long long>(s.seed)));
        s.law.intercept = sec->get_double("law_intercept", s.law.intercept);
        s.law.slope = sec->get_double("law_slope", s.law.slope);
        seq.frames = static_cast<int>(sec->get_int("frames", seq.frames));
    }
    if (const auto* sec = doc.find("layout")) {
        LayoutParams p;
        p.faces = static_cast<int>(sec->get_int("faces", p.faces));
        p.temp_min = sec->get_double("temp_min", p.temp_min);
        p.temp_max = sec->get_double("temp_max", p.temp_max);
        p.jitter = static_cast<int>(sec->get_int("jitter", p.jitter));
        seq.layout = p;
    }
    for (const auto* sec : doc.find_all("face")) {
        FaceSpec f;
        f.cx = static_cast<int>(sec->get_int("cx", f.cx));
        f.cy = static_cast<int>(sec->get_int("cy", f.cy));
        f.ax = static_cast<int>(sec->get_int("ax", f.ax));
        f.ay = static_cast<int>(sec->get_int("ay", f.ay));
        f.temperature_c = sec->get_double("temperature", f.temperature_c);
        s.faces.push_back(f);
    }
    if (seq.layout && !s.faces.empty()) fail_data("scene spec: use either [layout] or [face] sections, not both");
    if (seq.frames < 1) fail_data("scene spec: frames must be at least 1");
    validate_scene(frame_spec(seq, 0));
    return seq;
}

/// Body-temperature statistics of the contact-thermometer ground truth.
struct CalibrationStats {
    double mean_c = 36.6;
    double sd_c = 2.26;
    double min_c = 25.8;
    double max_c = 38.8;
    double cold_fraction = 0.1;  // share of low-temperature reference readings
    double cold_max_c = 33.0;
};

/// Draws calibration samples: temperatures from a truncated normal plus a cold
/// tail; pixels from the inverse law plus Gaussian noise.
inline std::vector<CalibrationSample> generate_calibration_set(std::size_t n, const CalibrationLaw& law,
                                                               std::uint64_t seed, double pixel_noise_sd = 1.0,
                                                               const CalibrationStats& stats = {}) {
    if (n < 10) fail_data("calibration set: need at least 10 samples");
    Rng rng(seed);
    std::vector<CalibrationSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double t;
        if (rng.uniform01() < stats.cold_fraction) {
            t = rng.uniform(stats.min_c, stats.cold_max_c);
        } else {
            do {
                t = rng.normal(stats.mean_c, stats.sd_c);
            } while (t < stats.min_c || t > stats.max_c);
        }
        const double p = std::clamp(law.pixel_for(t) + rng.normal(0.0, pixel_noise_sd), 0.0, 255.0);
        out.push_back({p, t});
    }
    return out;
}

}  // namespace thermo
