#pragma once

// Workflow entry points behind the `thermo` command line tool. Each command is
// a plain function of an options struct so it can be driven from tests.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "thermo/thermo.hpp"

namespace thermo::cli {

namespace fs = std::filesystem;

/// Exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kRuntimeAbort = 4 };

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Usage: return kUsage;
        case ErrorKind::Data: return kDataError;
        case ErrorKind::Runtime: return kRuntimeAbort;
    }
    return kRuntimeAbort;
}

/// "WxH" -> (W, H)
inline std::pair<int, int> parse_dims(const std::string& s) {
    const auto parts = text::split(s, 'x');
    const auto w = parts.size() == 2 ? text::to_int(parts[0]) : std::nullopt;
    const auto h = parts.size() == 2 ? text::to_int(parts[1]) : std::nullopt;
    if (!w || !h || *w <= 0 || *h <= 0 || *w > 1 << 16 || *h > 1 << 16) {
        fail_usage("invalid dimensions '" + s + "', expected WxH with positive integers");
    }
    return {static_cast<int>(*w), static_cast<int>(*h)};
}

/// "replay" | "blob" | "external:<command line>"
inline void parse_detector(const std::string& s, DetectorConfig& cfg) {
    if (s == "replay") {
        cfg.kind = DetectorKind::Replay;
    } else if (s == "blob") {
        cfg.kind = DetectorKind::Blob;
    } else if (s.rfind("external:", 0) == 0 && s.size() > 9) {
        cfg.kind = DetectorKind::External;
        cfg.external_command = s.substr(9);
    } else {
        fail_usage("unknown detector '" + s + "', expected replay, blob or external:<command>");
    }
}

inline std::unique_ptr<Detector> build_detector(const DetectorConfig& cfg, const std::vector<DatasetItem>* labeled) {
    if (cfg.kind == DetectorKind::Replay) {
        if (!labeled) fail_usage("the replay detector needs a labeled dataset");
        return std::make_unique<ReplayDetector>(ReplayDetector::from_dataset(*labeled));
    }
    return make_detector(cfg);
}

inline void write_item(const fs::path& dir, const std::string& stem, const DatasetItem& item) {
    save_frame(dir / (stem + (item.frame.channels() == 1 ? ".pgm" : ".ppm")), item.frame);
    save_labels(dir / (stem + ".txt"), item.labels);
}

// ---- prepare -----------------------------------------------------------------

struct PrepareOptions {
    fs::path src;
    std::optional<fs::path> labels;  // defaults to src
    fs::path out;
    std::optional<std::pair<int, int>> resize;
    bool augment_hflip = false;
    double augment_fraction = 1.0;  // share of items that receive a flipped copy
    std::vector<fs::path> combine;  // extra frame+label directories merged in
    std::uint64_t seed = 0;
};

struct PrepareResult {
    std::size_t items = 0;      // written in total, augmented copies included
    std::size_t augmented = 0;
};

/// Resize, augment and/or merge datasets into `out`. Flipped copies carry a
/// `_hf` stem suffix; every frame gets a label file, empty for null labels.
inline PrepareResult cmd_prepare(const PrepareOptions& o) {
    if (!(o.augment_fraction >= 0.0 && o.augment_fraction <= 1.0)) fail_usage("--augment-fraction must lie in [0,1]");
    if (o.resize && (o.resize->first <= 0 || o.resize->second <= 0)) fail_usage("--resize needs positive dimensions");
    std::vector<std::pair<fs::path, fs::path>> sources{{o.src, o.labels.value_or(o.src)}};
    for (const auto& c : o.combine) sources.emplace_back(c, c);
    fs::create_directories(o.out);
    for (const auto& [frames, labels] : sources) {
        if (fs::exists(frames) && fs::equivalent(frames, o.out)) fail_usage("output directory must differ from inputs");
    }

    PrepareResult result;
    std::set<std::string> stems;
    Rng rng(o.seed);
    for (const auto& [frames, labels] : sources) {
        for (auto& item : pair_frames_with_labels(frames, labels)) {
            const auto stem = fs::path(item.frame.source_id).stem().string();
            if (!stems.insert(stem).second) fail_data("combined datasets share the stem '" + stem + "'");
            if (o.resize) item.frame = resize(item.frame, o.resize->first, o.resize->second);
            write_item(o.out, stem, item);
            ++result.items;
            if (o.augment_hflip && rng.uniform01() < o.augment_fraction) {
                const auto flipped_stem = stem + "_hf";
                if (!stems.insert(flipped_stem).second) fail_data("augmented stem '" + flipped_stem + "' collides");
                write_item(o.out, flipped_stem, horizontal_flip(item));
                ++result.items;
                ++result.augmented;
            }
        }
    }
    return result;
}

// ---- calibrate -----------------------------------------------------------------

struct CalibrateOptions {
    fs::path samples_csv;
    std::optional<fs::path> grids;
    int folds = 5;
    std::optional<fs::path> guard_set;  // frames + labels of a known-healthy population
    double ceiling_c = 38.0;
    fs::path out_model;
    std::optional<fs::path> report;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

struct CalibrateResult {
    CrossValReport report;
    Selection selection;
    PersistedModel persisted;
};

/// Max pixel of every labeled ROI in a dataset directory.
inline std::vector<double> screening_pixels(const fs::path& dir) {
    std::vector<double> out;
    for (const auto& item : pair_frames_with_labels(dir, dir)) {
        const auto gray = item.frame.channels() == 3 ? bgr_to_grayscale(item.frame) : item.frame;
        for (const auto& l : item.labels) {
            out.push_back(extract_max_pixel(gray, denormalize(l.bbox, gray.width(), gray.height())));
        }
    }
    return out;
}

inline std::string format_selection(const Selection& sel) {
    std::string out;
    for (const auto& c : sel.considered) {
        out += "candidate " + c.entry.spec.label() + " guard=" + (c.guard.passed ? "pass" : "fail");
        if (!c.guard.passed) {
            out += " offending=" + std::to_string(c.guard.offending.size()) +
                   " worst_c=" + text::fixed(std::max_element(c.guard.offending.begin(), c.guard.offending.end(),
                                                              [](const auto& a, const auto& b) { return a.second < b.second; })
                                                 ->second,
                                             3);
        }
        out += "\n";
    }
    const auto& m = sel.model;
    out += "selected=" + m.spec.label() + "\n";
    out += "cv_mse=" + text::fixed(sel.provenance.mean_mse, 6) + "\n";
    out += "cv_r2=" + (std::isnan(sel.provenance.mean_r2) ? std::string("nan") : text::fixed(sel.provenance.mean_r2, 6)) + "\n";
    if (is_linear_family(m.kind())) {
        out += "intercept=" + text::exact(m.intercept) + "\nslope=" + text::exact(m.slope) + "\n";
    }
    out += "train_mse=" + text::fixed(m.diagnostics.train_mse, 6) + "\n";
    return out;
}

/// Grid search under k-fold CV, then the plausibility guard, then the refit
/// deployment model is persisted.
inline CalibrateResult cmd_calibrate(const CalibrateOptions& o) {
    if (o.folds < 2) fail_usage("--folds must be at least 2");
    if (o.out_model.empty()) fail_usage("--out is required");
    const auto samples = load_calibration_csv(o.samples_csv);
    const auto grid = o.grids ? parse_grid(text::read_file(*o.grids)) : default_grid();

    CalibrateResult result;
    result.report = grid_search(samples, grid, o.folds, o.seed, o.threads);
    if (o.guard_set) {
        const auto pixels = screening_pixels(*o.guard_set);
        if (pixels.empty()) fail_data("guard set '" + o.guard_set->string() + "' contains no labeled faces");
        result.selection = select_model(result.report, samples, pixels, o.ceiling_c);
    } else {
        result.selection = select_model(result.report, samples, [&](const FittedRegressor&) {
            GuardResult g;
            g.ceiling_c = o.ceiling_c;
            return g;
        });
    }
    result.persisted = make_persisted(result.selection, samples);
    if (!o.guard_set) result.persisted.guard = "unchecked";
    save_model(o.out_model, result.persisted);
    if (o.report) {
        text::write_file_atomic(*o.report, format_cv_report(result.report) + format_selection(result.selection));
    }
    return result;
}

// ---- eval-detector -------------------------------------------------------------

struct EvalOptions {
    fs::path dataset;
    std::optional<fs::path> labels;
    DetectorConfig detector;
    std::string name;  // dataset column of the CSV row; defaults to the directory name
    std::optional<fs::path> out_csv;
    std::optional<fs::path> out_text;
};

inline DetectionEvalReport cmd_eval_detector(const EvalOptions& o) {
    o.detector.validate();
    const auto items = pair_frames_with_labels(o.dataset, o.labels.value_or(o.dataset));
    auto detector = build_detector(o.detector, &items);
    std::vector<std::vector<Detection>> dets;
    std::vector<std::vector<PixelBBox>> gts;
    for (const auto& item : items) {
        const auto gray = item.frame.channels() == 3 ? bgr_to_grayscale(item.frame) : item.frame;
        dets.push_back(detector->detect(gray));
        auto& g = gts.emplace_back();
        for (const auto& l : item.labels) g.push_back(denormalize(l.bbox, gray.width(), gray.height()));
    }
    const auto report = map_over_thresholds(dets, gts, coco_thresholds(), o.detector.confidence_threshold);
    auto name = o.name.empty() ? fs::absolute(o.dataset).lexically_normal().filename().string() : o.name;
    if (name.empty()) name = fs::absolute(o.dataset).lexically_normal().parent_path().filename().string();
    if (o.out_csv) text::write_file_atomic(*o.out_csv, report_csv_header() + "\n" + report_csv_row(name, report) + "\n");
    if (o.out_text) text::write_file_atomic(*o.out_text, report_text(name, report));
    return report;
}

// ---- run -------------------------------------------------------------------------

struct RunOptions {
    std::string source;  // frame directory, a file listing frame paths, or "-" for paths on stdin
    fs::path model;
    PipelineConfig pipeline;
    fs::path out_dir;
    fs::path log;
    std::istream* stdin_stream = &std::cin;
    std::ostream* errors = &std::cerr;
};

inline StreamSummary cmd_run(const RunOptions& o) {
    o.pipeline.validate();
    const auto persisted = load_model(o.model);  // fails before any frame is touched

    FrameSource source;
    std::optional<std::vector<DatasetItem>> labeled;
    if (o.source == "-") {
        source = list_source(*o.stdin_stream);
    } else if (fs::is_directory(o.source)) {
        source = directory_source(o.source);
        if (o.pipeline.detector.kind == DetectorKind::Replay) labeled = pair_frames_with_labels(o.source, o.source);
    } else if (fs::is_regular_file(o.source)) {
        std::ifstream list(o.source);
        source = list_source(list);
    } else {
        fail_data("frame source '" + o.source + "' does not exist");
    }
    auto detector = build_detector(o.pipeline.detector, labeled ? &*labeled : nullptr);
    StreamOptions opts;
    opts.out_dir = o.out_dir;
    opts.log_path = o.log;
    opts.errors = o.errors;
    return run_stream(source, o.pipeline, *detector, persisted.model, opts);
}

// ---- synth -----------------------------------------------------------------------

struct SynthOptions {
    fs::path spec;
    fs::path out;
    std::optional<std::uint64_t> seed;  // overrides the spec's seed
    std::size_t calibration_samples = 0;
};

struct SynthResult {
    std::size_t frames = 0;
    std::size_t faces = 0;
};

inline std::string frame_stem(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%06zu", i);
    return buf;
}

/// Writes `frame_NNNNNN.pgm` + `.txt` per frame, `truth.csv`, and optionally a
/// calibration CSV drawn from the same law.
inline SynthResult cmd_synth(const SynthOptions& o) {
    auto seq = parse_sequence_spec(text::read_file(o.spec));
    if (o.seed) seq.base.seed = *o.seed;
    fs::create_directories(o.out);
    SynthResult result;
    std::string truth = "frame,face_id,x1,y1,x2,y2,temperature_c,peak_pixel\n";
    for (int i = 0; i < seq.frames; ++i) {
        const auto scene = generate(frame_spec(seq, i));
        const auto stem = frame_stem(static_cast<std::size_t>(i));
        save_frame(o.out / (stem + ".pgm"), scene.frame);
        save_labels(o.out / (stem + ".txt"), scene.labels);
        for (std::size_t f = 0; f < scene.boxes.size(); ++f) {
            const auto& b = scene.boxes[f];
            truth += std::to_string(i) + "," + std::to_string(f) + "," + std::to_string(b.x1) + "," +
                     std::to_string(b.y1) + "," + std::to_string(b.x2) + "," + std::to_string(b.y2) + "," +
                     text::exact(scene.temperatures[f]) + "," + std::to_string(scene.peaks[f]) + "\n";
        }
        ++result.frames;
        result.faces += scene.boxes.size();
    }
    text::write_file_atomic(o.out / "truth.csv", truth);
    if (o.calibration_samples > 0) {
        const auto samples = generate_calibration_set(o.calibration_samples, seq.base.law, seq.base.seed);
        save_calibration_csv(o.out / "calibration.csv", samples);
    }
    return result;
}

}  // namespace thermo::cli
