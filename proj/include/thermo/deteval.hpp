#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "thermo/annotations.hpp"
#include "thermo/detection.hpp"
#include "thermo/error.hpp"
#include "thermo/text_util.hpp"

namespace thermo {

/// TP/FP flags for a confidence-ordered detection list against one GT set.
struct MatchResult {
    std::vector<bool> tp_flags;
    std::size_t num_gt = 0;

    std::size_t true_positives() const {
        return static_cast<std::size_t>(std::count(tp_flags.begin(), tp_flags.end(), true));
    }
};

/// Greedy matching: each detection, in confidence order, claims the unclaimed
/// ground truth with the highest IoU (lowest index on ties) when that IoU
/// reaches the threshold.
inline MatchResult match_greedy(const std::vector<Detection>& dets, const std::vector<PixelBBox>& gts,
                                double iou_threshold) {
    if (!sorted_by_confidence(dets)) fail_data("match_greedy: detections must be sorted by descending confidence");
    MatchResult result;
    result.num_gt = gts.size();
    result.tp_flags.reserve(dets.size());
    std::vector<bool> claimed(gts.size(), false);
    for (const auto& d : dets) {
        double best = -1.0;
        std::size_t best_j = gts.size();
        for (std::size_t j = 0; j < gts.size(); ++j) {
            if (claimed[j]) continue;
            const double v = iou(d.bbox, gts[j]);
            if (v > best) {
                best = v;
                best_j = j;
            }
        }
        const bool tp = best_j < gts.size() && best >= iou_threshold;
        if (tp) claimed[best_j] = true;
        result.tp_flags.push_back(tp);
    }
    return result;
}

/// All-points interpolated AP: area under the monotone precision envelope.
///
/// `match.tp_flags` must already be in descending-confidence order; the
/// confidences are used only to validate that alignment. With no ground truth
/// the AP is 0 if anything was detected and 1 otherwise.
inline double average_precision(const MatchResult& match, const std::vector<double>& confidences) {
    if (confidences.size() != match.tp_flags.size()) fail_data("average_precision: flags and confidences misaligned");
    if (!std::is_sorted(confidences.begin(), confidences.end(), std::greater<>())) {
        fail_data("average_precision: confidences must be in descending order");
    }
    const auto n = match.tp_flags.size();
    if (match.num_gt == 0) return n == 0 ? 1.0 : 0.0;

    std::vector<double> precision(n), recall(n);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        tp += match.tp_flags[i] ? 1 : 0;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(match.num_gt);
    }
    for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (recall[i] > prev_recall) {
            ap += (recall[i] - prev_recall) * precision[i];
            prev_recall = recall[i];
        }
    }
    return ap;
}

struct ThresholdAp {
    double iou_threshold = 0.0;
    double ap = 0.0;
};

struct DetectionEvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double map_50 = 0.0;
    double map_50_95 = 0.0;
    std::vector<ThresholdAp> per_threshold;
    std::size_t num_images = 0;
    std::size_t num_gt = 0;
    std::size_t num_detections = 0;
};

/// {0.50, 0.55, ..., 0.95}, each computed from an integer percentage.
inline std::vector<double> coco_thresholds() {
    std::vector<double> t;
    for (int pct = 50; pct <= 95; pct += 5) t.push_back(pct / 100.0);
    return t;
}

namespace detail {

struct PooledAp {
    double ap = 0.0;
    std::size_t tp = 0;
    std::size_t num_dets = 0;
    std::size_t num_gt = 0;
};

inline PooledAp pooled_ap(const std::vector<std::vector<Detection>>& dets_per_image,
                          const std::vector<std::vector<PixelBBox>>& gts_per_image, double iou_threshold) {
    struct Scored {
        double confidence;
        bool tp;
    };
    std::vector<Scored> pool;
    PooledAp out;
    for (std::size_t i = 0; i < dets_per_image.size(); ++i) {
        auto dets = dets_per_image[i];
        sort_by_confidence(dets);
        const auto m = match_greedy(dets, gts_per_image[i], iou_threshold);
        out.num_gt += m.num_gt;
        for (std::size_t k = 0; k < dets.size(); ++k) pool.push_back({dets[k].confidence, m.tp_flags[k]});
    }
    // Stable: ties keep image order, then within-image order.
    std::stable_sort(pool.begin(), pool.end(), [](const Scored& a, const Scored& b) { return a.confidence > b.confidence; });
    MatchResult pooled;
    pooled.num_gt = out.num_gt;
    std::vector<double> confidences;
    for (const auto& s : pool) {
        pooled.tp_flags.push_back(s.tp);
        confidences.push_back(s.confidence);
    }
    out.ap = average_precision(pooled, confidences);
    out.tp = pooled.true_positives();
    out.num_dets = pool.size();
    return out;
}

}  // namespace detail

/// Pools every image's detections into one confidence-ranked list per IoU
/// threshold (matching stays per image). Detections below
/// `confidence_threshold` are dropped before anything is computed.
/// Precision and recall are reported at IoU 0.5.
inline DetectionEvalReport map_over_thresholds(const std::vector<std::vector<Detection>>& dets_per_image,
                                               const std::vector<std::vector<PixelBBox>>& gts_per_image,
                                               const std::vector<double>& thresholds = coco_thresholds(),
                                               double confidence_threshold = 0.0) {
    if (dets_per_image.size() != gts_per_image.size()) fail_data("map_over_thresholds: images misaligned");
    if (thresholds.empty()) fail_usage("map_over_thresholds: no IoU thresholds");
    for (double t : thresholds) {
        if (!(t > 0.0 && t <= 1.0)) fail_usage("map_over_thresholds: IoU threshold outside (0,1]");
    }
    std::vector<std::vector<Detection>> kept(dets_per_image.size());
    for (std::size_t i = 0; i < dets_per_image.size(); ++i) {
        for (const auto& d : dets_per_image[i]) {
            if (d.confidence >= confidence_threshold) kept[i].push_back(d);
        }
    }

    DetectionEvalReport report;
    report.num_images = kept.size();
    double sum = 0.0;
    for (double t : thresholds) {
        const auto p = detail::pooled_ap(kept, gts_per_image, t);
        report.per_threshold.push_back({t, p.ap});
        sum += p.ap;
    }
    report.map_50_95 = sum / static_cast<double>(thresholds.size());

    const auto at50 = detail::pooled_ap(kept, gts_per_image, 0.5);
    report.map_50 = at50.ap;
    report.num_gt = at50.num_gt;
    report.num_detections = at50.num_dets;
    report.precision = at50.num_dets == 0 ? 0.0 : static_cast<double>(at50.tp) / static_cast<double>(at50.num_dets);
    report.recall = at50.num_gt == 0 ? 0.0 : static_cast<double>(at50.tp) / static_cast<double>(at50.num_gt);
    return report;
}

inline std::string report_csv_header() { return "dataset,precision,recall,map50,map5095"; }

inline std::string report_csv_row(const std::string& dataset, const DetectionEvalReport& r) {
    return dataset + "," + text::fixed(r.precision, 6) + "," + text::fixed(r.recall, 6) + "," +
           text::fixed(r.map_50, 6) + "," + text::fixed(r.map_50_95, 6);
}

inline std::string report_text(const std::string& dataset, const DetectionEvalReport& r) {
    std::string out;
    out += "dataset=" + dataset + "\n";
    out += "images=" + std::to_string(r.num_images) + "\n";
    out += "ground_truth=" + std::to_string(r.num_gt) + "\n";
    out += "detections=" + std::to_string(r.num_detections) + "\n";
    out += "precision=" + text::fixed(r.precision, 6) + "\n";
    out += "recall=" + text::fixed(r.recall, 6) + "\n";
    out += "map50=" + text::fixed(r.map_50, 6) + "\n";
    out += "map5095=" + text::fixed(r.map_50_95, 6) + "\n";
    for (const auto& t : r.per_threshold) {
        out += "ap@" + text::fixed(t.iou_threshold, 2) + "=" + text::fixed(t.ap, 6) + "\n";
    }
    return out;
}

}  // namespace thermo
