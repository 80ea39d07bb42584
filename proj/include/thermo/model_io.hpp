#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "thermo/crossval.hpp"
#include "thermo/error.hpp"
#include "thermo/keyvalue.hpp"
#include "thermo/regression.hpp"
#include "thermo/text_util.hpp"

namespace thermo {

inline constexpr int kModelFormatVersion = 1;

// ---- calibration CSV -------------------------------------------------------

inline std::vector<CalibrationSample> parse_calibration_csv(std::string_view body) {
    const auto rows = text::lines(body);
    if (rows.empty() || text::trim(rows.front()) != "max_pixel,temperature_c") {
        fail_data("calibration csv: expected header 'max_pixel,temperature_c'");
    }
    std::vector<CalibrationSample> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (text::trim(rows[i]).empty()) continue;
        const auto cells = text::split(rows[i], ',');
        const auto p = cells.size() == 2 ? text::to_double(cells[0]) : std::nullopt;
        const auto t = cells.size() == 2 ? text::to_double(cells[1]) : std::nullopt;
        if (!p || !t) fail_data("calibration csv: bad row " + std::to_string(i + 1) + ": '" + rows[i] + "'");
        CalibrationSample s{*p, *t};
        validate_sample(s);
        out.push_back(s);
    }
    return out;
}

inline std::string format_calibration_csv(std::span<const CalibrationSample> samples) {
    std::string out = "max_pixel,temperature_c\n";
    for (const auto& s : samples) out += text::exact(s.max_pixel) + "," + text::exact(s.temperature_c) + "\n";
    return out;
}

inline std::vector<CalibrationSample> load_calibration_csv(const std::filesystem::path& path) {
    return parse_calibration_csv(text::read_file(path));
}

inline void save_calibration_csv(const std::filesystem::path& path, std::span<const CalibrationSample> samples) {
    text::write_file_atomic(path, format_calibration_csv(samples));
}

/// FNV-1a 64 over the exact decimal text of every sample.
inline std::uint64_t training_digest(std::span<const CalibrationSample> samples) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    const auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& s : samples) mix(text::exact(s.max_pixel) + "," + text::exact(s.temperature_c) + ";");
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---- persisted model document ----------------------------------------------

struct PersistedModel {
    FittedRegressor model;
    std::size_t train_samples = 0;
    std::string train_digest;  // 16 hex digits
    std::optional<double> cv_mse;
    std::optional<double> cv_r2;
    int cv_folds = 0;
    std::string guard = "unchecked";  // pass | fail | unchecked
    double guard_ceiling_c = 38.0;
    std::size_t guard_offending = 0;
};

inline PersistedModel make_persisted(const Selection& sel, std::span<const CalibrationSample> samples) {
    PersistedModel pm;
    pm.model = sel.model;
    pm.train_samples = samples.size();
    pm.train_digest = hex64(training_digest(samples));
    pm.cv_mse = sel.provenance.mean_mse;
    if (!std::isnan(sel.provenance.mean_r2)) pm.cv_r2 = sel.provenance.mean_r2;
    pm.cv_folds = sel.provenance.n_folds;
    pm.guard = sel.guard.passed ? "pass" : "fail";
    pm.guard_ceiling_c = sel.guard.ceiling_c;
    pm.guard_offending = sel.guard.offending.size();
    return pm;
}

/// Versioned key=value text. Reals are written in shortest round-trip form so a
/// reload reproduces every coefficient bit for bit.
inline std::string format_model(const PersistedModel& pm) {
    const auto& m = pm.model;
    const auto& hp = m.spec.hp;
    std::string out = "# thermo pixel-to-temperature model\n";
    out += "format=thermo-model\n";
    out += "version=" + std::to_string(kModelFormatVersion) + "\n";
    out += "kind=" + to_string(m.kind()) + "\n";
    out += "label=" + m.spec.label() + "\n";
    out += "lambda=" + text::exact(hp.lambda) + "\n";
    out += "mix=" + text::exact(hp.mix) + "\n";
    out += "k=" + std::to_string(hp.k) + "\n";
    out += "max_depth=" + std::to_string(hp.max_depth) + "\n";
    out += "min_samples_leaf=" + std::to_string(hp.min_samples_leaf) + "\n";
    out += "intercept=" + text::exact(m.intercept) + "\n";
    out += "slope=" + text::exact(m.slope) + "\n";
    out += "train_samples=" + std::to_string(pm.train_samples) + "\n";
    out += "train_digest=" + pm.train_digest + "\n";
    out += "train_mse=" + text::exact(m.diagnostics.train_mse) + "\n";
    if (!std::isnan(m.diagnostics.train_r2)) out += "train_r2=" + text::exact(m.diagnostics.train_r2) + "\n";
    out += "iterations=" + std::to_string(m.diagnostics.iterations) + "\n";
    out += "cv_folds=" + std::to_string(pm.cv_folds) + "\n";
    if (pm.cv_mse) out += "cv_mse=" + text::exact(*pm.cv_mse) + "\n";
    if (pm.cv_r2) out += "cv_r2=" + text::exact(*pm.cv_r2) + "\n";
    out += "guard=" + pm.guard + "\n";
    out += "guard_ceiling_c=" + text::exact(pm.guard_ceiling_c) + "\n";
    out += "guard_offending=" + std::to_string(pm.guard_offending) + "\n";
    for (const auto& s : m.neighbors) out += "neighbor=" + text::exact(s.max_pixel) + "," + text::exact(s.temperature_c) + "\n";
    for (const auto& n : m.tree) {
        out += "node=" + text::exact(n.threshold) + "," + std::to_string(n.left) + "," + std::to_string(n.right) + "," +
               text::exact(n.value) + "\n";
    }
    return out;
}

inline PersistedModel parse_model(std::string_view body) {
    const auto doc = parse_kv(body);
    if (doc.sections.size() != 1 || !doc.sections[0].name.empty()) fail_data("model: unexpected section headers");
    const auto& kv = doc.sections[0];
    if (kv.get("format") != "thermo-model") fail_data("model: not a thermo-model document");
    if (kv.get_int("version", -1) != kModelFormatVersion) fail_data("model: unsupported version");
    const auto kind = kv.get("kind");
    if (!kind) fail_data("model: missing kind");

    PersistedModel pm;
    auto& m = pm.model;
    m.spec.kind = parse_model_kind(*kind);
    m.spec.hp.lambda = kv.get_double("lambda", 0.0);
    m.spec.hp.mix = kv.get_double("mix", 0.5);
    m.spec.hp.k = static_cast<int>(kv.get_int("k", 5));
    m.spec.hp.max_depth = static_cast<int>(kv.get_int("max_depth", 3));
    m.spec.hp.min_samples_leaf = static_cast<int>(kv.get_int("min_samples_leaf", 1));
    m.intercept = kv.get_double("intercept", 0.0);
    m.slope = kv.get_double("slope", 0.0);
    m.diagnostics.train_mse = kv.get_double("train_mse", 0.0);
    m.diagnostics.train_r2 = kv.get_double("train_r2", std::numeric_limits<double>::quiet_NaN());
    m.diagnostics.iterations = static_cast<int>(kv.get_int("iterations", 0));
    pm.train_samples = static_cast<std::size_t>(kv.get_int("train_samples", 0));
    pm.train_digest = kv.get("train_digest").value_or("");
    pm.cv_folds = static_cast<int>(kv.get_int("cv_folds", 0));
    if (kv.get("cv_mse")) pm.cv_mse = kv.get_double("cv_mse", 0.0);
    if (kv.get("cv_r2")) pm.cv_r2 = kv.get_double("cv_r2", 0.0);
    pm.guard = kv.get("guard").value_or("unchecked");
    pm.guard_ceiling_c = kv.get_double("guard_ceiling_c", 38.0);
    pm.guard_offending = static_cast<std::size_t>(kv.get_int("guard_offending", 0));

    for (const auto& v : kv.get_all("neighbor")) {
        const auto cells = text::split(v, ',');
        const auto p = cells.size() == 2 ? text::to_double(cells[0]) : std::nullopt;
        const auto t = cells.size() == 2 ? text::to_double(cells[1]) : std::nullopt;
        if (!p || !t) fail_data("model: bad neighbor '" + v + "'");
        m.neighbors.push_back({*p, *t});
    }
    for (const auto& v : kv.get_all("node")) {
        const auto cells = text::split(v, ',');
        if (cells.size() != 4) fail_data("model: bad node '" + v + "'");
        const auto thr = text::to_double(cells[0]);
        const auto l = text::to_int(cells[1]);
        const auto r = text::to_int(cells[2]);
        const auto val = text::to_double(cells[3]);
        if (!thr || !l || !r || !val) fail_data("model: bad node '" + v + "'");
        m.tree.push_back({*thr, static_cast<int>(*l), static_cast<int>(*r), *val});
    }

    if (m.kind() == ModelKind::Knn &&
        (m.spec.hp.k < 1 || static_cast<std::size_t>(m.spec.hp.k) > m.neighbors.size())) {
        fail_data("model: knn k inconsistent with stored neighbors");
    }
    if (m.kind() == ModelKind::DecisionTree) {
        if (m.tree.empty()) fail_data("model: decision tree has no nodes");
        const auto n = static_cast<int>(m.tree.size());
        for (int i = 0; i < n; ++i) {
            const auto& node = m.tree[static_cast<std::size_t>(i)];
            const bool leaf = node.left < 0 && node.right < 0;
            const bool inner = node.left > i && node.left < n && node.right > i && node.right < n;
            if (!leaf && !inner) fail_data("model: malformed decision tree");
        }
    }
    return pm;
}

inline void save_model(const std::filesystem::path& path, const PersistedModel& pm) {
    text::write_file_atomic(path, format_model(pm));
}

inline PersistedModel load_model(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail_data("model file '" + path.string() + "' does not exist");
    return parse_model(text::read_file(path));
}

/// Human-readable ranking, one line per grid point.
inline std::string format_cv_report(const CrossValReport& report) {
    std::string out = "# rank model cv_mse cv_r2\n";
    out += "# n=" + std::to_string(report.n) + " mean_temperature_c=" + text::fixed(report.mean_temperature, 4) +
           " folds=" + std::to_string(report.k_folds) + " seed=" + std::to_string(report.seed) + "\n";
    for (std::size_t i = 0; i < report.entries.size(); ++i) {
        const auto& e = report.entries[i];
        out += std::to_string(i + 1) + " " + e.spec.label() + " " + text::fixed(e.mean_mse, 6) + " " +
               (std::isnan(e.mean_r2) ? std::string("nan") : text::fixed(e.mean_r2, 6)) + "\n";
    }
    return out;
}

/// Grid file: one `[kind]` section per model family with comma-separated value lists.
inline std::vector<ModelSpec> parse_grid(std::string_view body) {
    const auto doc = parse_kv(body);
    std::vector<ModelSpec> grid;
    for (const auto& sec : doc.sections) {
        if (sec.name.empty()) {
            if (!sec.entries.empty()) fail_data("grid: entries outside any [model] section");
            continue;
        }
        const auto kind = parse_model_kind(sec.name);
        const auto list = [&](const char* key, std::vector<double> fallback) {
            auto v = sec.get_doubles(key);
            return v.empty() ? fallback : v;
        };
        switch (kind) {
            case ModelKind::Linear:
                grid.push_back({kind, {}});
                break;
            case ModelKind::Ridge:
            case ModelKind::Lasso:
                for (double l : list("lambda", {1.0})) grid.push_back({kind, {.lambda = l}});
                break;
            case ModelKind::ElasticNet:
                for (double l : list("lambda", {1.0})) {
                    for (double mix : list("mix", {0.5})) grid.push_back({kind, {.lambda = l, .mix = mix}});
                }
                break;
            case ModelKind::Knn:
                for (double k : list("k", {5})) grid.push_back({kind, {.k = static_cast<int>(k)}});
                break;
            case ModelKind::DecisionTree:
                for (double d : list("max_depth", {3})) {
                    for (double leaf : list("min_samples_leaf", {1})) {
                        grid.push_back({kind, {.max_depth = static_cast<int>(d), .min_samples_leaf = static_cast<int>(leaf)}});
                    }
                }
                break;
        }
    }
    if (grid.empty()) fail_data("grid: no model sections");
    return grid;
}

}  // namespace thermo
