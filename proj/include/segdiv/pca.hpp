#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "segdiv/error.hpp"
#include "segdiv/features.hpp"

namespace segdiv {

inline constexpr std::size_t max_pca_dims = 100;

/// Components are orthonormal, ordered by decreasing explained variance, and
/// signed so that each component's largest-magnitude entry is positive.
struct PcaModel {
    std::vector<double> mean;
    std::vector<std::vector<double>> basis;
    std::vector<double> explained_variance;

    [[nodiscard]] std::size_t input_dims() const noexcept { return mean.size(); }
    [[nodiscard]] std::size_t output_dims() const noexcept { return basis.size(); }
};

inline PcaModel fit_pca(std::span<const FeatureVector> vectors, std::size_t target) {
    if (vectors.size() < 2) {
        throw error(errc::too_few_samples, "PCA needs at least two vectors");
    }
    const std::size_t dims = vectors.front().size();
    for (const auto& v : vectors) {
        if (v.size() != dims) {
            throw error(errc::dimension_mismatch, "feature vectors differ in length");
        }
    }
    const std::size_t limit = std::min({dims, vectors.size() - 1, max_pca_dims});
    if (target > limit) {
        throw error(errc::target_too_large,
                    "target " + std::to_string(target) + " exceeds " + std::to_string(limit));
    }

    const auto n = static_cast<Eigen::Index>(vectors.size());
    const auto d = static_cast<Eigen::Index>(dims);
    Eigen::MatrixXd data(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            data(i, j) = vectors[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    const Eigen::RowVectorXd mean = data.colwise().mean();
    data.rowwise() -= mean;
    const Eigen::MatrixXd cov = (data.transpose() * data) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw error(errc::parse_error, "covariance eigen-decomposition failed");
    }

    PcaModel model;
    model.mean.assign(mean.data(), mean.data() + d);
    // Eigen returns eigenvalues in ascending order.
    for (std::size_t k = 0; k < target; ++k) {
        const Eigen::Index col = d - 1 - static_cast<Eigen::Index>(k);
        Eigen::VectorXd comp = solver.eigenvectors().col(col);
        Eigen::Index arg = 0;
        comp.cwiseAbs().maxCoeff(&arg);
        if (comp(arg) < 0.0) {
            comp = -comp;
        }
        model.basis.emplace_back(comp.data(), comp.data() + d);
        model.explained_variance.push_back(std::max(0.0, solver.eigenvalues()(col)));
    }
    return model;
}

inline FeatureVector project(const PcaModel& model, std::span<const double> v) {
    if (v.size() != model.input_dims()) {
        throw error(errc::dimension_mismatch, "vector length " + std::to_string(v.size()) + ", model expects " +
                                                  std::to_string(model.input_dims()));
    }
    FeatureVector out(model.output_dims(), 0.0);
    for (std::size_t k = 0; k < model.basis.size(); ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) {
            acc += (v[j] - model.mean[j]) * model.basis[k][j];
        }
        out[k] = acc;
    }
    return out;
}

inline FeatureVector reconstruct(const PcaModel& model, std::span<const double> coords) {
    if (coords.size() != model.output_dims()) {
        throw error(errc::dimension_mismatch, "coordinate count does not match the model");
    }
    FeatureVector out = model.mean;
    for (std::size_t k = 0; k < coords.size(); ++k) {
        for (std::size_t j = 0; j < out.size(); ++j) {
            out[j] += coords[k] * model.basis[k][j];
        }
    }
    return out;
}

} // namespace segdiv
