// thermo: dataset preparation, calibration, detector evaluation, monitoring
// and synthetic scene generation from one binary.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "thermo/commands.hpp"

namespace fs = std::filesystem;
using namespace thermo;

namespace {

struct DetectorFlags {
    std::string spec = "blob";
    double confidence = 0.25;
    double nms = 0.45;
    int blob_threshold = 200;
    long long blob_min_area = 64;
    double blob_max_aspect = 2.5;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--detector", spec, "replay | blob | external:<command>")->capture_default_str();
        cmd.add_option("--confidence", confidence, "Minimum detection confidence")->capture_default_str();
        cmd.add_option("--nms", nms, "NMS IoU threshold")->capture_default_str();
        cmd.add_option("--blob-threshold", blob_threshold, "Blob binarization level")->capture_default_str();
        cmd.add_option("--blob-min-area", blob_min_area, "Smallest blob kept, in pixels")->capture_default_str();
        cmd.add_option("--blob-max-aspect", blob_max_aspect, "Largest blob aspect ratio")->capture_default_str();
    }

    DetectorConfig config() const {
        DetectorConfig cfg;
        cli::parse_detector(spec, cfg);
        cfg.confidence_threshold = confidence;
        cfg.nms_iou_threshold = nms;
        cfg.blob.intensity_threshold = blob_threshold;
        cfg.blob.min_blob_area = blob_min_area;
        cfg.blob.max_aspect_ratio = blob_max_aspect;
        cfg.validate();
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Thermal face temperature monitoring toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags are accepted after the subcommand too
    app.set_config("--config", "", "key=value config file with [subcommand] sections");
    std::optional<std::uint64_t> seed;
    int verbosity = 0;
    app.add_option("--seed", seed, "Seed for every randomized step");
    app.add_flag("-v,--verbose", verbosity, "More diagnostics on stderr");

    // prepare
    auto* prepare = app.add_subcommand("prepare", "Resize, augment and combine frame+label datasets");
    cli::PrepareOptions prep;
    std::string prep_labels, prep_resize;
    prepare->add_option("src", prep.src, "Frame directory")->required();
    prepare->add_option("out", prep.out, "Output directory")->required();
    prepare->add_option("--labels", prep_labels, "Label directory (defaults to src)");
    prepare->add_option("--resize", prep_resize, "Target size WxH");
    prepare->add_flag("--augment-hflip", prep.augment_hflip, "Add horizontally flipped copies");
    prepare->add_option("--augment-fraction", prep.augment_fraction, "Share of items that get a flipped copy")
        ->capture_default_str();
    prepare->add_option("--combine", prep.combine, "Further datasets to merge in");

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "Select and persist a pixel-to-temperature model");
    cli::CalibrateOptions cal;
    std::string cal_grids, cal_guard, cal_report;
    calibrate->add_option("samples", cal.samples_csv, "CSV with max_pixel,temperature_c")->required();
    calibrate->add_option("--grids", cal_grids, "Hyperparameter grid file");
    calibrate->add_option("--folds", cal.folds, "Cross-validation folds")->capture_default_str();
    calibrate->add_option("--guard-set", cal_guard, "Frames+labels of a healthy population");
    calibrate->add_option("--ceiling", cal.ceiling_c, "Plausibility ceiling in C")->capture_default_str();
    calibrate->add_option("--out", cal.out_model, "Model file to write")->required();
    calibrate->add_option("--report", cal_report, "Ranked cross-validation report");
    calibrate->add_option("--threads", cal.threads, "Worker threads (0 = all cores)");

    // eval-detector
    auto* eval = app.add_subcommand("eval-detector", "Score a detector against labeled frames");
    cli::EvalOptions ev;
    DetectorFlags ev_det;
    std::string ev_labels, ev_csv, ev_text;
    eval->add_option("dataset", ev.dataset, "Frame directory")->required();
    eval->add_option("--labels", ev_labels, "Label directory (defaults to dataset)");
    eval->add_option("--name", ev.name, "Dataset name in the report");
    eval->add_option("--csv", ev_csv, "CSV report path");
    eval->add_option("--report", ev_text, "Text report path");
    ev_det.add_to(*eval);

    // run
    auto* run = app.add_subcommand("run", "Monitor a frame stream");
    cli::RunOptions rn;
    DetectorFlags rn_det;
    std::string rn_out, rn_log;
    run->add_option("source", rn.source, "Frame directory, list file, or - for paths on stdin")->required();
    run->add_option("--model", rn.model, "Calibrated model file")->required();
    run->add_option("--out", rn_out, "Directory for annotated frames");
    run->add_option("--log", rn_log, "Reading log CSV");
    run->add_option("--min-area", rn.pipeline.min_bbox_area, "Minimum box area at 160x120")->capture_default_str();
    run->add_option("--decimals", rn.pipeline.decimals, "Temperature decimals on the overlay")->capture_default_str();
    run->add_option("--fever", rn.pipeline.fever_threshold_c, "Flag readings above this")->capture_default_str();
    bool no_overlay = false;
    run->add_flag("--no-overlay", no_overlay, "Write frames without annotations");
    rn_det.add_to(*run);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic thermal dataset");
    cli::SynthOptions sy;
    synth->add_option("spec", sy.spec, "Scene spec file")->required();
    synth->add_option("--out", sy.out, "Output directory")->required();
    synth->add_option("--calibration-samples", sy.calibration_samples, "Also write calibration.csv with N samples");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? cli::kOk : cli::kUsage;
    }

    try {
        if (prepare->parsed()) {
            if (!prep_labels.empty()) prep.labels = prep_labels;
            if (!prep_resize.empty()) prep.resize = cli::parse_dims(prep_resize);
            prep.seed = seed.value_or(0);
            const auto r = cli::cmd_prepare(prep);
            std::cout << "items=" << r.items << "\naugmented=" << r.augmented << "\n";
        } else if (calibrate->parsed()) {
            if (!cal_grids.empty()) cal.grids = cal_grids;
            if (!cal_guard.empty()) cal.guard_set = cal_guard;
            if (!cal_report.empty()) cal.report = cal_report;
            cal.seed = seed.value_or(0);
            const auto r = cli::cmd_calibrate(cal);
            if (verbosity > 0) std::cout << format_cv_report(r.report);
            std::cout << cli::format_selection(r.selection);
        } else if (eval->parsed()) {
            if (!ev_labels.empty()) ev.labels = ev_labels;
            if (!ev_csv.empty()) ev.out_csv = ev_csv;
            if (!ev_text.empty()) ev.out_text = ev_text;
            ev.detector = ev_det.config();
            const auto report = cli::cmd_eval_detector(ev);
            std::cout << report_text(ev.name.empty() ? ev.dataset.filename().string() : ev.name, report);
        } else if (run->parsed()) {
            rn.out_dir = rn_out;
            rn.log = rn_log;
            rn.pipeline.overlay = !no_overlay;
            rn.pipeline.detector = rn_det.config();
            std::cout << cli::cmd_run(rn).to_text();
        } else if (synth->parsed()) {
            sy.seed = seed;
            const auto r = cli::cmd_synth(sy);
            std::cout << "frames=" << r.frames << "\nfaces=" << r.faces << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::exit_code_for(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kRuntimeAbort;
    }
    return cli::kOk;
}
