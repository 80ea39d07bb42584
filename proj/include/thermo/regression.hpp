#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "thermo/error.hpp"
#include "thermo/text_util.hpp"

namespace thermo {

/// One calibration point: the hottest ROI pixel and the contact-thermometer reading.
struct CalibrationSample {
    double max_pixel = 0.0;
    double temperature_c = 0.0;

    friend bool operator==(const CalibrationSample&, const CalibrationSample&) = default;
};

inline void validate_sample(const CalibrationSample& s) {
    if (!(s.max_pixel >= 0.0 && s.max_pixel <= 255.0)) fail_data("calibration sample: max_pixel outside [0,255]");
    if (!(s.temperature_c >= 0.0 && s.temperature_c <= 60.0)) {
        fail_data("calibration sample: temperature outside [0,60] C");
    }
}

enum class ModelKind { Linear, Ridge, Lasso, ElasticNet, Knn, DecisionTree };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Linear: return "linear";
        case ModelKind::Ridge: return "ridge";
        case ModelKind::Lasso: return "lasso";
        case ModelKind::ElasticNet: return "elastic_net";
        case ModelKind::Knn: return "knn";
        case ModelKind::DecisionTree: return "decision_tree";
    }
    return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
    for (auto k : {ModelKind::Linear, ModelKind::Ridge, ModelKind::Lasso, ModelKind::ElasticNet, ModelKind::Knn,
                   ModelKind::DecisionTree}) {
        if (to_string(k) == s) return k;
    }
    fail_data("unknown model kind '" + std::string(s) + "'");
}

inline bool is_linear_family(ModelKind k) {
    return k == ModelKind::Linear || k == ModelKind::Ridge || k == ModelKind::Lasso || k == ModelKind::ElasticNet;
}

struct Hyperparams {
    double lambda = 0.0;        // ridge, lasso, elastic net
    double mix = 0.5;           // elastic net L1 share
    int k = 5;                  // knn
    int max_depth = 3;          // tree
    int min_samples_leaf = 1;   // tree

    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// A model family plus one hyperparameter point.
struct ModelSpec {
    ModelKind kind = ModelKind::Linear;
    Hyperparams hp;

    std::string label() const {
        switch (kind) {
            case ModelKind::Linear: return "linear";
            case ModelKind::Ridge: return "ridge(lambda=" + text::exact(hp.lambda) + ")";
            case ModelKind::Lasso: return "lasso(lambda=" + text::exact(hp.lambda) + ")";
            case ModelKind::ElasticNet:
                return "elastic_net(lambda=" + text::exact(hp.lambda) + ",mix=" + text::exact(hp.mix) + ")";
            case ModelKind::Knn: return "knn(k=" + std::to_string(hp.k) + ")";
            case ModelKind::DecisionTree:
                return "decision_tree(max_depth=" + std::to_string(hp.max_depth) +
                       ",min_samples_leaf=" + std::to_string(hp.min_samples_leaf) + ")";
        }
        return "?";
    }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct TreeNode {
    double threshold = 0.0;  // go left when pixel <= threshold
    int left = -1;           // -1 marks a leaf
    int right = -1;
    double value = 0.0;      // leaf prediction (node mean for inner nodes)

    bool leaf() const { return left < 0; }

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct FitDiagnostics {
    double train_mse = 0.0;
    double train_r2 = std::numeric_limits<double>::quiet_NaN();  // NaN when training truth is constant
    int iterations = 0;
};

/// A trained pixel -> temperature mapping.
struct FittedRegressor {
    ModelSpec spec;
    double intercept = 0.0;  // linear family, degrees C
    double slope = 0.0;      // linear family, degrees C per intensity unit
    std::vector<CalibrationSample> neighbors;  // knn, training order
    std::vector<TreeNode> tree;                // decision tree, root at 0
    FitDiagnostics diagnostics;

    ModelKind kind() const { return spec.kind; }

    double predict(double pixel) const {
        switch (spec.kind) {
            case ModelKind::Linear:
            case ModelKind::Ridge:
            case ModelKind::Lasso:
            case ModelKind::ElasticNet:
                return intercept + slope * pixel;
            case ModelKind::Knn:
                return predict_knn(pixel);
            case ModelKind::DecisionTree:
                return predict_tree(pixel);
        }
        return std::numeric_limits<double>::quiet_NaN();
    }

    std::vector<double> predict(std::span<const CalibrationSample> samples) const {
        std::vector<double> out;
        out.reserve(samples.size());
        for (const auto& s : samples) out.push_back(predict(s.max_pixel));
        return out;
    }

    /// A fixed linear law, e.g. an exactly known synthetic calibration.
    static FittedRegressor linear(double intercept, double slope) {
        FittedRegressor r;
        r.spec.kind = ModelKind::Linear;
        r.intercept = intercept;
        r.slope = slope;
        return r;
    }

private:
    double predict_knn(double pixel) const {
        struct Near {
            double dist, pixel;
            std::size_t order;
            double temp;
        };
        std::vector<Near> all;
        all.reserve(neighbors.size());
        for (std::size_t i = 0; i < neighbors.size(); ++i) {
            all.push_back({std::abs(neighbors[i].max_pixel - pixel), neighbors[i].max_pixel, i,
                           neighbors[i].temperature_c});
        }
        const auto k = static_cast<std::size_t>(spec.hp.k);
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                          [](const Near& a, const Near& b) {
                              if (a.dist != b.dist) return a.dist < b.dist;
                              if (a.pixel != b.pixel) return a.pixel < b.pixel;
                              return a.order < b.order;
                          });
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) sum += all[i].temp;
        return sum / static_cast<double>(k);
    }

    double predict_tree(double pixel) const {
        std::size_t i = 0;
        while (!tree[i].leaf()) i = static_cast<std::size_t>(pixel <= tree[i].threshold ? tree[i].left : tree[i].right);
        return tree[i].value;
    }
};

/// Mean squared error in squared degrees.
inline double mse(std::span<const double> truth, std::span<const double> pred) {
    if (truth.size() != pred.size()) fail_data("mse: length mismatch");
    if (truth.empty()) fail_data("mse: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = truth[i] - pred[i];
        sum += d * d;
    }
    return sum / static_cast<double>(truth.size());
}

/// Coefficient of determination.
inline double r2(std::span<const double> truth, std::span<const double> pred) {
    if (truth.size() != pred.size()) fail_data("r2: length mismatch");
    if (truth.size() < 2) fail_data("r2: need at least two values");
    const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    if (ss_tot == 0.0) fail_data("r2: constant truth has zero variance");
    return 1.0 - ss_res / ss_tot;
}

namespace detail {

struct Moments {
    double mean_p = 0.0, mean_t = 0.0;
    double sxx = 0.0, sxy = 0.0;
};

inline Moments moments(std::span<const CalibrationSample> s) {
    Moments m;
    const auto n = static_cast<double>(s.size());
    for (const auto& x : s) {
        m.mean_p += x.max_pixel;
        m.mean_t += x.temperature_c;
    }
    m.mean_p /= n;
    m.mean_t /= n;
    for (const auto& x : s) {
        const double dp = x.max_pixel - m.mean_p;
        m.sxx += dp * dp;
        m.sxy += dp * (x.temperature_c - m.mean_t);
    }
    return m;
}

inline void require_samples(std::span<const CalibrationSample> s, std::size_t min, const char* who) {
    if (s.size() < min) fail_data(std::string(who) + ": need at least " + std::to_string(min) + " samples");
    for (const auto& x : s) validate_sample(x);
}

inline void fill_diagnostics(FittedRegressor& r, std::span<const CalibrationSample> s) {
    std::vector<double> truth;
    truth.reserve(s.size());
    for (const auto& x : s) truth.push_back(x.temperature_c);
    const auto pred = r.predict(s);
    r.diagnostics.train_mse = mse(truth, pred);
    const bool constant = std::all_of(truth.begin(), truth.end(), [&](double t) { return t == truth.front(); });
    r.diagnostics.train_r2 = constant || truth.size() < 2 ? std::numeric_limits<double>::quiet_NaN() : r2(truth, pred);
}

}  // namespace detail

inline FittedRegressor fit_ols(std::span<const CalibrationSample> samples) {
    detail::require_samples(samples, 2, "fit_ols");
    const auto m = detail::moments(samples);
    if (m.sxx == 0.0) fail_data("fit_ols: all max_pixel values identical (singular design)");
    FittedRegressor r;
    r.spec.kind = ModelKind::Linear;
    r.slope = m.sxy / m.sxx;
    r.intercept = m.mean_t - r.slope * m.mean_p;
    detail::fill_diagnostics(r, samples);
    return r;
}

/// Closed-form ridge on centered data; the intercept is not penalized.
/// Objective: sum of squared residuals + lambda * slope^2.
inline FittedRegressor fit_ridge(std::span<const CalibrationSample> samples, double lambda) {
    if (!(lambda >= 0.0)) fail_data("fit_ridge: lambda must be non-negative");
    detail::require_samples(samples, 2, "fit_ridge");
    const auto m = detail::moments(samples);
    if (m.sxx + lambda == 0.0) fail_data("fit_ridge: all max_pixel values identical and lambda is 0 (singular design)");
    FittedRegressor r;
    r.spec = {ModelKind::Ridge, {}};
    r.spec.hp.lambda = lambda;
    r.slope = m.sxy / (m.sxx + lambda);
    r.intercept = m.mean_t - r.slope * m.mean_p;
    detail::fill_diagnostics(r, samples);
    return r;
}

inline double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

/// Raised when coordinate descent stops on the iteration cap.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, FittedRegressor last)
        : Error(ErrorKind::Runtime, what), last_iterate(std::move(last)) {}

    FittedRegressor last_iterate;
};

struct CoordinateDescentOptions {
    double tolerance = 1e-8;
    int max_iterations = 10000;
};

/// Elastic net by coordinate descent on centered data, intercept unpenalized.
/// Objective: 1/2 * SSR + lambda * (mix * |slope| + (1 - mix) / 2 * slope^2),
/// so mix = 0 is ridge and mix = 1 is lasso with the same lambda.
///
/// `objective_trace`, when given, receives the objective after every sweep;
/// the fit throws if it ever increases.
inline FittedRegressor fit_elastic_net(std::span<const CalibrationSample> samples, double lambda, double mix,
                                       CoordinateDescentOptions opts = {},
                                       std::vector<double>* objective_trace = nullptr) {
    if (!(lambda >= 0.0)) fail_data("fit_elastic_net: lambda must be non-negative");
    if (!(mix >= 0.0 && mix <= 1.0)) fail_data("fit_elastic_net: mix must lie in [0,1]");
    detail::require_samples(samples, 2, "fit_elastic_net");

    const auto m = detail::moments(samples);
    const double l1 = lambda * mix;
    const double l2 = lambda * (1.0 - mix);
    if (m.sxx + l2 == 0.0) fail_data("fit_elastic_net: all max_pixel values identical (singular design)");

    std::vector<double> xc, yc;
    xc.reserve(samples.size());
    yc.reserve(samples.size());
    for (const auto& s : samples) {
        xc.push_back(s.max_pixel - m.mean_p);
        yc.push_back(s.temperature_c - m.mean_t);
    }
    const auto objective = [&](double b) {
        double ssr = 0.0;
        for (std::size_t i = 0; i < xc.size(); ++i) ssr += (yc[i] - b * xc[i]) * (yc[i] - b * xc[i]);
        return 0.5 * ssr + l1 * std::abs(b) + 0.5 * l2 * b * b;
    };

    FittedRegressor r;
    r.spec.kind = ModelKind::ElasticNet;
    r.spec.hp.lambda = lambda;
    r.spec.hp.mix = mix;

    double beta = 0.0;
    std::vector<double> residual = yc;
    double prev_obj = objective(beta);
    if (objective_trace) objective_trace->assign(1, prev_obj);
    bool converged = false;
    int it = 0;
    while (it < opts.max_iterations) {
        ++it;
        // Correlation of the coordinate with its partial residual.
        double rho = 0.0;
        for (std::size_t i = 0; i < xc.size(); ++i) rho += xc[i] * (residual[i] + beta * xc[i]);
        const double next = soft_threshold(rho, l1) / (m.sxx + l2);
        const double change = std::abs(next - beta);
        for (std::size_t i = 0; i < xc.size(); ++i) residual[i] -= (next - beta) * xc[i];
        beta = next;
        const double obj = objective(beta);
        if (objective_trace) objective_trace->push_back(obj);
        if (obj > prev_obj + 1e-12 * std::max(1.0, std::abs(prev_obj))) {
            fail_runtime("fit_elastic_net: objective increased during coordinate descent");
        }
        prev_obj = obj;
        if (change < opts.tolerance) {
            converged = true;
            break;
        }
    }
    r.slope = beta;
    r.intercept = m.mean_t - beta * m.mean_p;
    r.diagnostics.iterations = it;
    detail::fill_diagnostics(r, samples);
    if (!converged) {
        throw NonConvergence("fit_elastic_net: no convergence after " + std::to_string(it) + " iterations", r);
    }
    return r;
}

inline FittedRegressor fit_lasso(std::span<const CalibrationSample> samples, double lambda,
                                 CoordinateDescentOptions opts = {}) {
    auto r = fit_elastic_net(samples, lambda, 1.0, opts);
    r.spec.kind = ModelKind::Lasso;
    return r;
}

inline FittedRegressor fit_knn(std::span<const CalibrationSample> samples, int k) {
    detail::require_samples(samples, 1, "fit_knn");
    if (k < 1 || static_cast<std::size_t>(k) > samples.size()) {
        fail_data("fit_knn: k=" + std::to_string(k) + " outside [1, " + std::to_string(samples.size()) + "]");
    }
    FittedRegressor r;
    r.spec.kind = ModelKind::Knn;
    r.spec.hp.k = k;
    r.neighbors.assign(samples.begin(), samples.end());
    detail::fill_diagnostics(r, samples);
    return r;
}

namespace detail {

struct TreeBuilder {
    std::span<const CalibrationSample> samples;
    int max_depth;
    int min_leaf;
    std::vector<TreeNode> nodes;

    static double sse(const std::vector<std::size_t>& idx, std::span<const CalibrationSample> s, double& mean) {
        mean = 0.0;
        for (auto i : idx) mean += s[i].temperature_c;
        mean /= static_cast<double>(idx.size());
        double e = 0.0;
        for (auto i : idx) e += (s[i].temperature_c - mean) * (s[i].temperature_c - mean);
        return e;
    }

    int build(std::vector<std::size_t> idx, int depth) {
        double mean = 0.0;
        const double node_sse = sse(idx, samples, mean);
        const int id = static_cast<int>(nodes.size());
        nodes.push_back({0.0, -1, -1, mean});
        if (depth >= max_depth || node_sse == 0.0 || idx.size() < 2 * static_cast<std::size_t>(min_leaf)) return id;

        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return samples[a].max_pixel < samples[b].max_pixel; });
        // Prefix sums make every candidate split O(1).
        const auto n = idx.size();
        std::vector<double> sum(n + 1, 0.0), sq(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = samples[idx[i]].temperature_c;
            sum[i + 1] = sum[i] + t;
            sq[i + 1] = sq[i] + t * t;
        }
        double best = node_sse;
        std::size_t best_cut = 0;
        for (std::size_t cut = static_cast<std::size_t>(min_leaf); cut + static_cast<std::size_t>(min_leaf) <= n; ++cut) {
            if (samples[idx[cut - 1]].max_pixel == samples[idx[cut]].max_pixel) continue;
            const double nl = static_cast<double>(cut), nr = static_cast<double>(n - cut);
            const double sl = sum[cut], sr = sum[n] - sum[cut];
            const double e = (sq[cut] - sl * sl / nl) + (sq[n] - sq[cut] - sr * sr / nr);
            if (e < best - 1e-12) {
                best = e;
                best_cut = cut;
            }
        }
        if (best_cut == 0) return id;

        const double threshold = 0.5 * (samples[idx[best_cut - 1]].max_pixel + samples[idx[best_cut]].max_pixel);
        std::vector<std::size_t> left(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(best_cut));
        std::vector<std::size_t> right(idx.begin() + static_cast<std::ptrdiff_t>(best_cut), idx.end());
        const int l = build(std::move(left), depth + 1);
        const int r = build(std::move(right), depth + 1);
        nodes[static_cast<std::size_t>(id)].threshold = threshold;
        nodes[static_cast<std::size_t>(id)].left = l;
        nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }
};

}  // namespace detail

/// CART regression tree on the single pixel feature.
inline FittedRegressor fit_tree(std::span<const CalibrationSample> samples, int max_depth, int min_samples_leaf) {
    if (max_depth < 0) fail_data("fit_tree: max_depth must be non-negative");
    if (min_samples_leaf < 1) fail_data("fit_tree: min_samples_leaf must be at least 1");
    detail::require_samples(samples, 1, "fit_tree");
    if (samples.size() < 2 * static_cast<std::size_t>(min_samples_leaf)) {
        fail_data("fit_tree: need at least 2 * min_samples_leaf samples");
    }
    detail::TreeBuilder b{samples, max_depth, min_samples_leaf, {}};
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    b.build(std::move(idx), 0);
    FittedRegressor r;
    r.spec.kind = ModelKind::DecisionTree;
    r.spec.hp.max_depth = max_depth;
    r.spec.hp.min_samples_leaf = min_samples_leaf;
    r.tree = std::move(b.nodes);
    detail::fill_diagnostics(r, samples);
    return r;
}

/// Dispatches on the spec's model kind.
inline FittedRegressor fit(const ModelSpec& spec, std::span<const CalibrationSample> samples) {
    switch (spec.kind) {
        case ModelKind::Linear: return fit_ols(samples);
        case ModelKind::Ridge: return fit_ridge(samples, spec.hp.lambda);
        case ModelKind::Lasso: return fit_lasso(samples, spec.hp.lambda);
        case ModelKind::ElasticNet: return fit_elastic_net(samples, spec.hp.lambda, spec.hp.mix);
        case ModelKind::Knn: return fit_knn(samples, spec.hp.k);
        case ModelKind::DecisionTree: return fit_tree(samples, spec.hp.max_depth, spec.hp.min_samples_leaf);
    }
    fail_data("fit: unknown model kind");
}

}  // namespace thermo
