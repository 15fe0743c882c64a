#pragma once

// JSON persistence for the built-in ambiguity model (PCA projection plus
// linear scorer).

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "segdiv/error.hpp"
#include "segdiv/features.hpp"
#include "segdiv/image.hpp"
#include "segdiv/linear_scorer.hpp"
#include "segdiv/pca.hpp"

namespace segdiv {

struct AmbiguityModel {
    PcaModel pca;
    LinearScorer scorer;
    std::vector<CrossValidationResult> cross_validation;
};

inline double score_image(const AmbiguityModel& model, const GrayImage& image) {
    return score(model.scorer, project(model.pca, extract_features(image)));
}

inline nlohmann::ordered_json to_json(const AmbiguityModel& m) {
    nlohmann::ordered_json cv = nlohmann::ordered_json::array();
    for (const auto& c : m.cross_validation) {
        cv.push_back({{"lambda", c.lambda}, {"mean_average_precision", c.mean_average_precision},
                      {"folds_scored", c.folds_scored}});
    }
    return {{"features", {{"canvas", hog::canvas}, {"cells", hog::cells}, {"bins", hog::bins}}},
            {"pca", {{"mean", m.pca.mean}, {"basis", m.pca.basis}, {"explained_variance", m.pca.explained_variance}}},
            {"scorer",
             {{"weights", m.scorer.weights},
              {"bias", m.scorer.bias},
              {"lambda", m.scorer.lambda},
              {"quadratic", m.scorer.quadratic}}},
            {"cross_validation", cv}};
}

inline AmbiguityModel ambiguity_model_from_json(const nlohmann::json& j) {
    AmbiguityModel m;
    try {
        const auto& f = j.at("features");
        if (f.at("canvas").get<int>() != hog::canvas || f.at("cells").get<int>() != hog::cells ||
            f.at("bins").get<int>() != hog::bins) {
            throw error(errc::dimension_mismatch, "model was trained on a different feature layout");
        }
        const auto& p = j.at("pca");
        m.pca.mean = p.at("mean").get<std::vector<double>>();
        m.pca.basis = p.at("basis").get<std::vector<std::vector<double>>>();
        m.pca.explained_variance = p.at("explained_variance").get<std::vector<double>>();
        const auto& s = j.at("scorer");
        m.scorer.weights = s.at("weights").get<std::vector<double>>();
        m.scorer.bias = s.at("bias").get<double>();
        m.scorer.lambda = s.at("lambda").get<double>();
        m.scorer.quadratic = s.at("quadratic").get<bool>();
        for (const auto& c : j.value("cross_validation", nlohmann::json::array())) {
            m.cross_validation.push_back({c.at("lambda").get<double>(), c.at("mean_average_precision").get<double>(),
                                          c.at("folds_scored").get<std::size_t>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw error(errc::parse_error, std::string("model: ") + e.what());
    }
    for (const auto& row : m.pca.basis) {
        if (row.size() != m.pca.mean.size()) {
            throw error(errc::dimension_mismatch, "PCA basis rows must match the mean length");
        }
    }
    return m;
}

inline void write_model(const std::filesystem::path& path, const AmbiguityModel& model) {
    detail::write_file(path, to_json(model).dump(2) + "\n");
}

inline AmbiguityModel read_model(const std::filesystem::path& path) {
    try {
        return ambiguity_model_from_json(nlohmann::json::parse(detail::slurp(path)));
    } catch (const nlohmann::json::exception& e) {
        throw error(errc::parse_error, path.string() + ": " + e.what());
    }
}

} // namespace segdiv
