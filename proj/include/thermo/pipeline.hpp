#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "thermo/annotations.hpp"
#include "thermo/detection.hpp"
#include "thermo/detectors.hpp"
#include "thermo/error.hpp"
#include "thermo/frame.hpp"
#include "thermo/overlay.hpp"
#include "thermo/regression.hpp"
#include "thermo/text_util.hpp"

namespace thermo {

/// Area of the native 160x120 frame the minimum-box-area default refers to.
inline constexpr double kNativeArea = static_cast<double>(kNativeWidth) * kNativeHeight;

struct PipelineConfig {
    DetectorConfig detector;
    double min_bbox_area = 100.0;  // px^2 at native resolution, scaled by frame area
    bool overlay = true;
    int decimals = 1;
    double fever_threshold_c = 38.0;

    double effective_min_area(int frame_w, int frame_h) const {
        return std::max(1.0, min_bbox_area * (static_cast<double>(frame_w) * frame_h / kNativeArea));
    }

    void validate() const {
        detector.validate();
        if (!(min_bbox_area >= 1.0)) fail_usage("minimum bbox area must be at least 1");
        if (decimals < 0 || decimals > 6) fail_usage("temperature decimals must lie in [0,6]");
    }
};

struct TempReading {
    std::uint64_t frame_index = 0;
    PixelBBox bbox;
    int max_pixel = 0;
    double temperature_c = 0.0;
    bool flagged = false;
};

struct FrameOutput {
    ThermalFrame annotated;  // always 3-channel
    std::vector<TempReading> readings;
    std::size_t detections = 0;  // detector output before the area filter
};

/// Hottest intensity inside [x1,x2) x [y1,y2) of a single-channel frame.
inline int extract_max_pixel(const ThermalFrame& gray, const PixelBBox& roi) {
    if (gray.channels() != 1) fail_data("extract_max_pixel: expected a single-channel frame");
    if (!roi.within(gray.width(), gray.height())) fail_data("extract_max_pixel: ROI outside the frame");
    int best = 0;
    for (int y = roi.y1; y < roi.y2; ++y) {
        for (int x = roi.x1; x < roi.x2; ++x) best = std::max<int>(best, gray.at(x, y));
    }
    return best;
}

inline std::vector<Detection> filter_min_area(std::vector<Detection> dets, double min_area) {
    std::erase_if(dets, [&](const Detection& d) { return static_cast<double>(d.bbox.area()) < min_area; });
    return dets;
}

/// Draws every reading's box and temperature label onto a 3-channel copy.
inline ThermalFrame render_overlay(const ThermalFrame& frame, const std::vector<TempReading>& readings, int decimals) {
    ThermalFrame out = frame.channels() == 3 ? frame : replicate_channels(frame);
    for (const auto& r : readings) draw_box(out, r.bbox, kBoxColor);
    for (const auto& r : readings) {
        const auto label = temperature_label(r.temperature_c, decimals);
        const auto [x, y] = label_origin(r.bbox, text_width(label), out.width(), out.height());
        draw_text(out, x, y, label, kTextColor);
    }
    return out;
}

/// Detect, drop small boxes, read the hottest pixel per box, map it to a
/// temperature, and annotate. Three-channel input is converted to gray first.
inline FrameOutput process_frame(const ThermalFrame& frame, const PipelineConfig& cfg, Detector& detector,
                                 const FittedRegressor& model) {
    const ThermalFrame gray = frame.channels() == 3 ? bgr_to_grayscale(frame) : frame;
    std::vector<Detection> dets;
    try {
        dets = detector.detect(gray);
    } catch (const Error& e) {
        throw Error(e.kind(), "frame " + std::to_string(frame.frame_index) + ": " + e.what());
    }
    FrameOutput out;
    out.detections = dets.size();
    dets = filter_min_area(std::move(dets), cfg.effective_min_area(gray.width(), gray.height()));
    for (const auto& d : dets) {
        TempReading r;
        r.frame_index = frame.frame_index;
        r.bbox = d.bbox;
        r.max_pixel = extract_max_pixel(gray, d.bbox);
        r.temperature_c = model.predict(r.max_pixel);
        r.flagged = r.temperature_c > cfg.fever_threshold_c;
        out.readings.push_back(r);
    }
    out.annotated = cfg.overlay ? render_overlay(gray, out.readings, cfg.decimals) : replicate_channels(gray);
    return out;
}

// ---- streaming -------------------------------------------------------------

/// One pull from a frame source: a decoded frame, or the reason it could not be read.
struct StreamItem {
    std::uint64_t index = 0;
    std::optional<ThermalFrame> frame;
    std::string error;
};

using FrameSource = std::function<std::optional<StreamItem>()>;

/// Yields files in order, decoding lazily; unreadable files become error items.
inline FrameSource path_source(std::vector<std::filesystem::path> paths) {
    return [paths = std::move(paths), next = std::size_t{0}]() mutable -> std::optional<StreamItem> {
        if (next >= paths.size()) return std::nullopt;
        StreamItem item;
        item.index = next;
        const auto& p = paths[next++];
        try {
            item.frame = load_frame(p);
            item.frame->frame_index = item.index;
        } catch (const Error& e) {
            item.error = e.what();
        }
        return item;
    };
}

inline FrameSource directory_source(const std::filesystem::path& dir) {
    return path_source(list_frames(dir));
}

/// One path per line; blank lines are skipped.
inline FrameSource list_source(std::istream& in) {
    std::vector<std::filesystem::path> paths;
    for (std::string line; std::getline(in, line);) {
        const auto t = text::trim(line);
        if (!t.empty()) paths.emplace_back(std::string(t));
    }
    return path_source(std::move(paths));
}

inline FrameSource memory_source(std::vector<ThermalFrame> frames) {
    return [frames = std::move(frames), next = std::size_t{0}]() mutable -> std::optional<StreamItem> {
        if (next >= frames.size()) return std::nullopt;
        StreamItem item;
        item.index = next;
        item.frame = std::move(frames[next++]);
        item.frame->frame_index = item.index;
        return item;
    };
}

inline std::string reading_log_header() { return "frame_index,x1,y1,x2,y2,max_pixel,temperature_c,flagged"; }

inline std::string reading_log_row(const TempReading& r) {
    return std::to_string(r.frame_index) + "," + std::to_string(r.bbox.x1) + "," + std::to_string(r.bbox.y1) + "," +
           std::to_string(r.bbox.x2) + "," + std::to_string(r.bbox.y2) + "," + std::to_string(r.max_pixel) + "," +
           text::exact(r.temperature_c) + "," + (r.flagged ? "1" : "0");
}

/// CSV reading log, flushed after every frame so a crash loses at most the
/// frame in flight.
class ReadingLog {
public:
    explicit ReadingLog(const std::filesystem::path& path) : path_(path), out_(path, std::ios::trunc) {
        if (!out_) fail_runtime("cannot open reading log '" + path.string() + "'");
        out_ << reading_log_header() << '\n';
        commit();
    }

    void append(const std::vector<TempReading>& readings) {
        for (const auto& r : readings) out_ << reading_log_row(r) << '\n';
        commit();
    }

private:
    void commit() {
        out_.flush();
        if (!out_) fail_runtime("write error on reading log '" + path_.string() + "'");
    }

    std::filesystem::path path_;
    std::ofstream out_;
};

struct StreamOptions {
    std::filesystem::path out_dir;   // numbered annotated frames; empty disables
    std::filesystem::path log_path;  // reading CSV; empty disables
    std::ostream* errors = nullptr;  // one line per skipped frame
    std::function<void(const FrameOutput&)> on_frame;
};

struct StreamSummary {
    std::size_t frames = 0;  // processed successfully
    std::size_t readings = 0;
    std::size_t flagged = 0;
    std::size_t errors = 0;  // skipped frames
    double mean_latency_ms = 0.0;
    double max_latency_ms = 0.0;

    std::string to_text() const {
        return "frames=" + std::to_string(frames) + "\nreadings=" + std::to_string(readings) +
               "\nflagged=" + std::to_string(flagged) + "\nerrors=" + std::to_string(errors) +
               "\nmean_latency_ms=" + text::fixed(mean_latency_ms, 3) + "\nmax_latency_ms=" +
               text::fixed(max_latency_ms, 3) + "\n";
    }
};

inline std::string output_frame_name(std::uint64_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "out_%06llu.ppm", static_cast<unsigned long long>(index));
    return buf;
}

/// Processes frames strictly in source order. A frame that fails to decode or
/// detect is reported and skipped; log and output I/O failures abort the run.
/// Latency covers processing and output writing, not decoding.
inline StreamSummary run_stream(const FrameSource& source, const PipelineConfig& cfg, Detector& detector,
                                const FittedRegressor& model, const StreamOptions& opts = {}) {
    cfg.validate();
    std::optional<ReadingLog> log;
    if (!opts.log_path.empty()) log.emplace(opts.log_path);
    if (!opts.out_dir.empty()) std::filesystem::create_directories(opts.out_dir);

    StreamSummary summary;
    double total_ms = 0.0;
    const auto report = [&](std::uint64_t index, const std::string& why) {
        ++summary.errors;
        if (opts.errors) *opts.errors << "frame " << index << " skipped: " << why << '\n';
    };
    while (auto item = source()) {
        if (!item->frame) {
            report(item->index, item->error);
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        FrameOutput out;
        try {
            out = process_frame(*item->frame, cfg, detector, model);
        } catch (const Error& e) {
            report(item->index, e.what());
            continue;
        }
        if (log) log->append(out.readings);
        if (!opts.out_dir.empty()) save_frame(opts.out_dir / output_frame_name(item->index), out.annotated);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        if (opts.on_frame) opts.on_frame(out);

        ++summary.frames;
        summary.readings += out.readings.size();
        summary.flagged += static_cast<std::size_t>(
            std::count_if(out.readings.begin(), out.readings.end(), [](const TempReading& r) { return r.flagged; }));
        total_ms += ms;
        summary.max_latency_ms = std::max(summary.max_latency_ms, ms);
    }
    if (summary.frames > 0) summary.mean_latency_ms = total_ms / static_cast<double>(summary.frames);
    return summary;
}

}  // namespace thermo
