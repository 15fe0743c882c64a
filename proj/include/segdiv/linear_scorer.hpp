#pragma once

// Max-margin linear scorer (hinge loss + lambda * ||w||^2) trained by
// deterministic full-batch subgradient descent, with lambda picked by 5-fold
// cross-validated average precision.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "segdiv/error.hpp"
#include "segdiv/evaluation.hpp"
#include "segdiv/features.hpp"
#include "segdiv/random.hpp"

namespace segdiv {

struct LinearScorer {
    std::vector<double> weights;
    double bias = 0.0;
    double lambda = 0.0;
    bool quadratic = false; // weights live on the degree-2 expansion
};

/// [v, v_i * v_j for i <= j]
inline FeatureVector expand_quadratic(std::span<const double> v) {
    FeatureVector out(v.begin(), v.end());
    out.reserve(v.size() + v.size() * (v.size() + 1) / 2);
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = i; j < v.size(); ++j) {
            out.push_back(v[i] * v[j]);
        }
    }
    return out;
}

/// Unambiguity score w.v + b; higher means more confidently unambiguous.
inline double score(const LinearScorer& scorer, std::span<const double> v) {
    FeatureVector expanded;
    if (scorer.quadratic) {
        expanded = expand_quadratic(v);
        v = expanded;
    }
    if (v.size() != scorer.weights.size()) {
        throw error(errc::dimension_mismatch, "feature length " + std::to_string(v.size()) + ", scorer expects " +
                                                  std::to_string(scorer.weights.size()));
    }
    double acc = scorer.bias;
    for (std::size_t i = 0; i < v.size(); ++i) {
        acc += scorer.weights[i] * v[i];
    }
    return acc;
}

struct TrainerConfig {
    std::vector<double> lambda_grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    std::size_t iterations = 1000;
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    bool quadratic = false;
};

struct CrossValidationResult {
    double lambda = 0.0;
    double mean_average_precision = 0.0;
    std::size_t folds_scored = 0;
};

struct TrainedScorer {
    LinearScorer scorer;
    std::vector<CrossValidationResult> cross_validation;
    std::vector<std::size_t> fold_of; // fold index per training sample
};

inline constexpr std::size_t min_training_samples = 10;

/// Fits one lambda on the given samples. The bias is carried as an extra
/// constant feature (so it is regularised with w). Iterates follow the
/// Pegasos schedule eta_t = 1 / (2 lambda t) with projection onto the ball of
/// radius 1/sqrt(lambda); the returned model averages the second half of the
/// iterates.
inline LinearScorer fit_linear(std::span<const FeatureVector> x, std::span<const int> y, double lambda,
                               std::size_t iterations) {
    const std::size_t d = x.front().size();
    const std::size_t n = x.size();
    std::vector<double> w(d + 1, 0.0);
    std::vector<double> avg(d + 1, 0.0);
    std::vector<double> grad(d + 1, 0.0);
    const double radius = 1.0 / std::sqrt(lambda);
    const std::size_t average_from = iterations / 2;
    std::size_t averaged = 0;

    for (std::size_t t = 1; t <= iterations; ++t) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double margin = w[d];
            for (std::size_t j = 0; j < d; ++j) {
                margin += w[j] * x[i][j];
            }
            if (y[i] * margin < 1.0) {
                for (std::size_t j = 0; j < d; ++j) {
                    grad[j] += y[i] * x[i][j];
                }
                grad[d] += y[i];
            }
        }
        const double eta = 1.0 / (2.0 * lambda * static_cast<double>(t));
        const double shrink = 1.0 - 2.0 * lambda * eta; // = 1 - 1/t
        const double step = eta / static_cast<double>(n);
        double norm2 = 0.0;
        for (std::size_t j = 0; j <= d; ++j) {
            w[j] = shrink * w[j] + step * grad[j];
            norm2 += w[j] * w[j];
        }
        const double norm = std::sqrt(norm2);
        if (norm > radius) {
            const double s = radius / norm;
            for (auto& v : w) {
                v *= s;
            }
        }
        if (t > average_from) {
            ++averaged;
            for (std::size_t j = 0; j <= d; ++j) {
                avg[j] += (w[j] - avg[j]) / static_cast<double>(averaged);
            }
        }
    }
    LinearScorer out;
    out.weights.assign(avg.begin(), avg.begin() + static_cast<std::ptrdiff_t>(d));
    out.bias = avg[d];
    out.lambda = lambda;
    return out;
}

/// Stratified fold assignment: samples are visited in a seeded random order
/// and dealt round-robin within each class.
inline std::vector<std::size_t> assign_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
    std::vector<std::size_t> fold_of(labels.size(), 0);
    std::size_t next_pos = 0;
    std::size_t next_neg = 0;
    for (std::size_t i : seeded_permutation(labels.size(), seed)) {
        fold_of[i] = labels[i] > 0 ? next_pos++ % folds : next_neg++ % folds;
    }
    return fold_of;
}

/// Labels: +1 unambiguous, -1 ambiguous.
inline TrainedScorer train_scorer(std::span<const FeatureVector> features, std::span<const int> labels,
                                  const TrainerConfig& config = {}) {
    if (features.size() != labels.size()) {
        throw error(errc::dimension_mismatch, "feature and label counts differ");
    }
    if (features.size() < min_training_samples) {
        throw error(errc::too_few_samples, "need at least 10 samples, got " + std::to_string(features.size()));
    }
    if (config.lambda_grid.empty() || config.folds < 2) {
        throw error(errc::empty_input, "lambda grid must be non-empty and folds >= 2");
    }
    bool has_pos = false;
    bool has_neg = false;
    for (int l : labels) {
        if (l != 1 && l != -1) {
            throw error(errc::parse_error, "labels must be +1 or -1");
        }
        (l > 0 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) {
        throw error(errc::single_class, "training data contains a single class");
    }
    for (const auto& f : features) {
        if (f.size() != features.front().size()) {
            throw error(errc::dimension_mismatch, "feature vectors differ in length");
        }
    }

    std::vector<FeatureVector> x;
    x.reserve(features.size());
    for (const auto& f : features) {
        x.push_back(config.quadratic ? expand_quadratic(f) : f);
    }

    TrainedScorer out;
    out.fold_of = assign_folds(labels, config.folds, config.seed);

    double best_ap = -1.0;
    double best_lambda = config.lambda_grid.front();
    for (double lambda : config.lambda_grid) {
        if (!(lambda > 0.0)) {
            throw error(errc::parse_error, "lambda must be positive");
        }
        double ap_sum = 0.0;
        std::size_t scored = 0;
        for (std::size_t fold = 0; fold < config.folds; ++fold) {
            std::vector<FeatureVector> tx;
            std::vector<int> ty;
            std::vector<double> vs;
            std::vector<bool> vpos;
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (out.fold_of[i] == fold) {
                    continue;
                }
                tx.push_back(x[i]);
                ty.push_back(labels[i]);
            }
            const bool train_pos = std::find(ty.begin(), ty.end(), 1) != ty.end();
            const bool train_neg = std::find(ty.begin(), ty.end(), -1) != ty.end();
            if (!train_pos || !train_neg) {
                continue;
            }
            const auto model = fit_linear(tx, ty, lambda, config.iterations);
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (out.fold_of[i] == fold) {
                    vs.push_back(score(model, x[i]));
                    vpos.push_back(labels[i] > 0);
                }
            }
            const auto pos = std::count(vpos.begin(), vpos.end(), true);
            if (pos == 0 || pos == static_cast<std::ptrdiff_t>(vpos.size())) {
                continue;
            }
            ap_sum += average_precision(vs, vpos);
            ++scored;
        }
        const double mean_ap = scored > 0 ? ap_sum / static_cast<double>(scored) : 0.0;
        out.cross_validation.push_back({lambda, mean_ap, scored});
        if (mean_ap > best_ap) {
            best_ap = mean_ap;
            best_lambda = lambda;
        }
    }
    out.scorer = fit_linear(x, labels, best_lambda, config.iterations);
    out.scorer.quadratic = config.quadratic;
    return out;
}

} // namespace segdiv
