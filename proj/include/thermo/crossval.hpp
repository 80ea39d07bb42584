#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "thermo/error.hpp"
#include "thermo/random.hpp"
#include "thermo/regression.hpp"

namespace thermo {

/// Seeded shuffle of [0, n) cut into k contiguous folds whose sizes differ by at
/// most one (the first n % k folds carry the extra element).
inline std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, int k_folds, std::uint64_t seed) {
    if (k_folds < 2 || static_cast<std::size_t>(k_folds) > n) {
        fail_usage("k_folds must lie in [2, " + std::to_string(n) + "], got " + std::to_string(k_folds));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    const auto k = static_cast<std::size_t>(k_folds);
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                        order.begin() + static_cast<std::ptrdiff_t>(pos + size));
        pos += size;
    }
    return folds;
}

/// Cross-validated score of one grid point.
struct CvEntry {
    ModelSpec spec;
    double mean_mse = 0.0;
    double mean_r2 = std::numeric_limits<double>::quiet_NaN();  // mean over folds where R^2 is defined
    int n_folds = 0;
    std::size_t grid_index = 0;
};

struct CrossValReport {
    std::vector<CvEntry> entries;  // ranked best first
    std::size_t n = 0;             // sample count
    double mean_temperature = 0.0;
    int k_folds = 0;
    std::uint64_t seed = 0;
};

/// Fits on k-1 folds and scores MSE and R^2 on the held-out fold, k times.
/// Folds whose truth is constant (e.g. single-sample folds) contribute to the
/// MSE mean but not to the R^2 mean.
inline CvEntry k_fold_cv(std::span<const CalibrationSample> samples, const ModelSpec& spec, int k_folds,
                         std::uint64_t seed) {
    const auto folds = fold_partition(samples.size(), k_folds, seed);
    CvEntry entry;
    entry.spec = spec;
    entry.n_folds = k_folds;
    double mse_sum = 0.0, r2_sum = 0.0;
    int r2_count = 0;
    std::vector<bool> held(samples.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::fill(held.begin(), held.end(), false);
        for (auto i : folds[f]) held[i] = true;
        std::vector<CalibrationSample> train, test;
        for (std::size_t i = 0; i < samples.size(); ++i) (held[i] ? test : train).push_back(samples[i]);

        FittedRegressor model;
        try {
            model = fit(spec, train);
        } catch (const Error& e) {
            fail_data("fold underflow: " + spec.label() + " cannot be fit on fold " + std::to_string(f) +
                      " training split (" + e.what() + ")");
        }
        std::vector<double> truth;
        for (const auto& s : test) truth.push_back(s.temperature_c);
        const auto pred = model.predict(test);
        mse_sum += mse(truth, pred);
        const bool constant = std::all_of(truth.begin(), truth.end(), [&](double t) { return t == truth.front(); });
        if (truth.size() >= 2 && !constant) {
            r2_sum += r2(truth, pred);
            ++r2_count;
        }
    }
    entry.mean_mse = mse_sum / static_cast<double>(folds.size());
    if (r2_count > 0) entry.mean_r2 = r2_sum / r2_count;
    return entry;
}

/// Ascending MSE, then descending R^2 (undefined R^2 last), then grid order.
inline bool cv_rank_less(const CvEntry& a, const CvEntry& b) {
    if (a.mean_mse != b.mean_mse) return a.mean_mse < b.mean_mse;
    const bool an = std::isnan(a.mean_r2), bn = std::isnan(b.mean_r2);
    if (an != bn) return bn;
    if (!an && a.mean_r2 != b.mean_r2) return a.mean_r2 > b.mean_r2;
    return a.grid_index < b.grid_index;
}

/// Default hyperparameter grid, in evaluation order.
inline std::vector<ModelSpec> default_grid() {
    std::vector<ModelSpec> g;
    g.push_back({ModelKind::Linear, {}});
    const double lambdas[] = {0, 0.01, 0.1, 1, 10, 100};
    for (double l : lambdas) g.push_back({ModelKind::Ridge, {.lambda = l}});
    for (double l : lambdas) g.push_back({ModelKind::Lasso, {.lambda = l}});
    for (double l : lambdas) {
        for (double mix : {0.25, 0.5, 0.75}) g.push_back({ModelKind::ElasticNet, {.lambda = l, .mix = mix}});
    }
    for (int k : {1, 3, 5, 7}) g.push_back({ModelKind::Knn, {.k = k}});
    for (int depth : {1, 2, 3, 4}) {
        for (int leaf : {1, 3, 5}) {
            g.push_back({ModelKind::DecisionTree, {.max_depth = depth, .min_samples_leaf = leaf}});
        }
    }
    return g;
}

/// Evaluates every grid point (in parallel when `threads` > 1) and ranks the
/// results. Ranking is independent of scheduling.
inline CrossValReport grid_search(std::span<const CalibrationSample> samples, const std::vector<ModelSpec>& grid,
                                  int k_folds, std::uint64_t seed, unsigned threads = 0) {
    if (grid.empty()) fail_usage("grid_search: empty grid");
    for (const auto& s : samples) validate_sample(s);
    CrossValReport report;
    report.n = samples.size();
    report.k_folds = k_folds;
    report.seed = seed;
    for (const auto& s : samples) report.mean_temperature += s.temperature_c;
    if (!samples.empty()) report.mean_temperature /= static_cast<double>(samples.size());
    fold_partition(samples.size(), k_folds, seed);  // validates k before any work

    std::vector<CvEntry> entries(grid.size());
    std::vector<std::exception_ptr> errors(grid.size());
    const auto run = [&](std::size_t i) {
        try {
            entries[i] = k_fold_cv(samples, grid[i], k_folds, seed);
            entries[i].grid_index = i;
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(grid.size()));
    if (threads <= 1) {
        for (std::size_t i = 0; i < grid.size(); ++i) run(i);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < grid.size(); i += threads) run(i);
            });
        }
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::sort(entries.begin(), entries.end(), cv_rank_less);
    report.entries = std::move(entries);
    return report;
}

struct GuardResult {
    bool passed = true;
    double ceiling_c = 38.0;
    std::vector<std::pair<double, double>> offending;  // (pixel, predicted C)
};

/// Fails when any prediction on a known-healthy screening population exceeds the ceiling.
inline GuardResult plausibility_guard(const FittedRegressor& model, std::span<const double> screening_pixels,
                                      double ceiling_c = 38.0) {
    if (screening_pixels.empty()) fail_data("plausibility_guard: empty screening set");
    GuardResult g;
    g.ceiling_c = ceiling_c;
    for (double p : screening_pixels) {
        const double t = model.predict(p);
        if (t > ceiling_c) g.offending.emplace_back(p, t);
    }
    g.passed = g.offending.empty();
    return g;
}

struct CandidateVerdict {
    CvEntry entry;
    GuardResult guard;
};

struct Selection {
    FittedRegressor model;      // refit on every sample
    CvEntry provenance;
    GuardResult guard;
    std::vector<CandidateVerdict> considered;  // rank order, up to and including the winner
};

using GuardFn = std::function<GuardResult(const FittedRegressor&)>;

/// Walks the ranking, refits each candidate on all samples, and returns the
/// first one the guard accepts.
inline Selection select_model(const CrossValReport& report, std::span<const CalibrationSample> samples,
                              const GuardFn& guard) {
    Selection sel;
    for (const auto& entry : report.entries) {
        auto model = fit(entry.spec, samples);
        auto verdict = guard(model);
        sel.considered.push_back({entry, verdict});
        if (verdict.passed) {
            sel.model = std::move(model);
            sel.provenance = entry;
            sel.guard = std::move(verdict);
            return sel;
        }
    }
    fail_data("no viable model: every candidate failed the plausibility guard");
}

inline Selection select_model(const CrossValReport& report, std::span<const CalibrationSample> samples,
                              std::span<const double> screening_pixels, double ceiling_c = 38.0) {
    return select_model(report, samples,
                        [&](const FittedRegressor& m) { return plausibility_guard(m, screening_pixels, ceiling_c); });
}

}  // namespace thermo
