#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "thermo/annotations.hpp"
#include "thermo/detection.hpp"
#include "thermo/error.hpp"
#include "thermo/frame.hpp"

namespace thermo {

enum class DetectorKind { Replay, Blob, External };

struct BlobParams {
    int intensity_threshold = 200;
    long long min_blob_area = 64;
    double max_aspect_ratio = 2.5;
};

struct DetectorConfig {
    DetectorKind kind = DetectorKind::Blob;
    double confidence_threshold = 0.25;
    double nms_iou_threshold = 0.45;
    BlobParams blob;
    std::string external_command;

    void validate() const {
        if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
            fail_usage("confidence threshold must lie in [0,1]");
        }
        if (!(nms_iou_threshold > 0.0 && nms_iou_threshold < 1.0)) fail_usage("NMS IoU threshold must lie in (0,1)");
        if (blob.intensity_threshold < 0 || blob.intensity_threshold > 255) {
            fail_usage("blob intensity threshold must lie in [0,255]");
        }
        if (blob.min_blob_area < 1) fail_usage("minimum blob area must be at least 1");
        if (!(blob.max_aspect_ratio >= 1.0)) fail_usage("maximum aspect ratio must be at least 1");
        if (kind == DetectorKind::External && external_command.empty()) fail_usage("external detector needs a command");
    }
};

/// Face detector contract: output sorted by descending confidence, thresholded,
/// and NMS-clean.
class Detector {
public:
    virtual ~Detector() = default;
    virtual std::vector<Detection> detect(const ThermalFrame& frame) = 0;
};

/// Greedy suppression: walk by descending confidence and keep a box only if its
/// IoU with every kept box is below the threshold.
inline std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
    sort_by_confidence(dets);
    std::vector<Detection> kept;
    kept.reserve(dets.size());
    for (const auto& d : dets) {
        const bool clear = std::all_of(kept.begin(), kept.end(),
                                       [&](const Detection& k) { return iou(k.bbox, d.bbox) < iou_threshold; });
        if (clear) kept.push_back(d);
    }
    return kept;
}

/// Threshold, sort and suppress: the shared tail of every detector.
inline std::vector<Detection> finalize_detections(std::vector<Detection> dets, const DetectorConfig& cfg) {
    std::erase_if(dets, [&](const Detection& d) { return d.confidence < cfg.confidence_threshold; });
    return nms(std::move(dets), cfg.nms_iou_threshold);
}

/// Per-component summary produced by connected-component labeling.
struct Blob {
    PixelBBox bbox;
    long long area = 0;
    double mean_intensity = 0.0;
};

/// 8-connected components of pixels with intensity >= threshold, in raster
/// order of each component's first pixel.
inline std::vector<Blob> connected_blobs(const ThermalFrame& gray, int threshold) {
    const int w = gray.width(), h = gray.height();
    std::vector<std::int32_t> label(static_cast<std::size_t>(w) * h, -1);
    std::vector<Blob> blobs;
    std::vector<std::pair<int, int>> stack;
    for (int y0 = 0; y0 < h; ++y0) {
        for (int x0 = 0; x0 < w; ++x0) {
            const auto idx0 = static_cast<std::size_t>(y0) * w + x0;
            if (label[idx0] >= 0 || gray.at(x0, y0) < threshold) continue;
            const auto id = static_cast<std::int32_t>(blobs.size());
            Blob blob{{x0, y0, x0 + 1, y0 + 1}, 0, 0.0};
            double sum = 0.0;
            label[idx0] = id;
            stack.assign(1, {x0, y0});
            while (!stack.empty()) {
                const auto [x, y] = stack.back();
                stack.pop_back();
                ++blob.area;
                sum += gray.at(x, y);
                blob.bbox.x1 = std::min(blob.bbox.x1, x);
                blob.bbox.y1 = std::min(blob.bbox.y1, y);
                blob.bbox.x2 = std::max(blob.bbox.x2, x + 1);
                blob.bbox.y2 = std::max(blob.bbox.y2, y + 1);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const auto nidx = static_cast<std::size_t>(ny) * w + nx;
                        if (label[nidx] >= 0 || gray.at(nx, ny) < threshold) continue;
                        label[nidx] = id;
                        stack.emplace_back(nx, ny);
                    }
                }
            }
            blob.mean_intensity = sum / static_cast<double>(blob.area);
            blobs.push_back(blob);
        }
    }
    return blobs;
}

/// Warm-region baseline: binarize, label components, drop small or elongated
/// ones. Confidence is mean component intensity / 255. No thresholding or NMS
/// is applied here.
inline std::vector<Detection> blob_detect(const ThermalFrame& gray, const BlobParams& params) {
    if (gray.channels() != 1) fail_data("blob_detect: expected a single-channel frame");
    std::vector<Detection> out;
    for (const auto& blob : connected_blobs(gray, params.intensity_threshold)) {
        if (blob.area < params.min_blob_area) continue;
        const double lo = std::min(blob.bbox.width(), blob.bbox.height());
        const double hi = std::max(blob.bbox.width(), blob.bbox.height());
        if (hi / lo > params.max_aspect_ratio) continue;
        out.push_back({blob.bbox, blob.mean_intensity / 255.0, 0});
    }
    return out;
}

class BlobDetector final : public Detector {
public:
    explicit BlobDetector(DetectorConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

    std::vector<Detection> detect(const ThermalFrame& frame) override {
        return finalize_detections(blob_detect(frame, cfg_.blob), cfg_);
    }

private:
    DetectorConfig cfg_;
};

/// Replays ground-truth labels as confidence-1.0 detections, keyed by frame
/// source id. Overlapping labels are all emitted: suppression would discard
/// genuine annotations in dense scenes.
class ReplayDetector final : public Detector {
public:
    ReplayDetector() = default;

    void add(const std::string& source_id, std::vector<GroundTruthLabel> labels) {
        labels_[source_id] = std::move(labels);
    }

    static ReplayDetector from_dataset(const std::vector<DatasetItem>& items) {
        ReplayDetector r;
        for (const auto& item : items) r.add(item.frame.source_id, item.labels);
        return r;
    }

    std::vector<Detection> detect(const ThermalFrame& frame) override {
        const auto it = labels_.find(frame.source_id);
        if (it == labels_.end()) return {};
        std::vector<Detection> out;
        out.reserve(it->second.size());
        for (const auto& label : it->second) {
            out.push_back({denormalize(label.bbox, frame.width(), frame.height()), 1.0, label.bbox.class_id});
        }
        return out;
    }

private:
    std::map<std::string, std::vector<GroundTruthLabel>> labels_;
};

}  // namespace thermo
