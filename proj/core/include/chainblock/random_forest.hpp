#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chainblock/features.hpp"

namespace chainblock {

// Binary CART tree. Internal nodes send `row[feature] <= threshold` left;
// leaves hold the fraction of ad-labelled training rows that reached them.
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double leaf_value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double evaluate(std::span<const double> row) const;
    std::size_t depth() const;
};

struct ForestConfig {
    std::size_t n_trees = 100;
    std::size_t max_depth = 0;  // 0 = grow until pure
    std::uint64_t seed = 1;
    std::size_t folds = 5;
    double recall_floor = 0.5;
    // 0 = floor(sqrt(number of features))
    std::size_t max_features = 0;
    // Feature names left out of the model (ablation studies).
    std::vector<std::string> excluded_features;
};

inline constexpr int kForestFormatVersion = 1;

struct ForestModel {
    std::vector<DecisionTree> trees;
    double decision_threshold = 0.5;
    std::vector<std::string> feature_names;  // column order of every row
    int version = kForestFormatVersion;
    ForestConfig config;

    std::size_t n_trees() const { return trees.size(); }

    // Self-describing JSON dump, feature names embedded.
    std::string to_json() const;
    // Throws ModelError on malformed files or feature names this build does
    // not know.
    static ForestModel from_json(std::string_view text);
};

struct CrossValidation {
    double precision = 0.0;  // mean over folds with at least one positive prediction
    double recall = 0.0;     // mean over folds with at least one positive example
    std::vector<double> fold_precision;
    std::vector<double> fold_recall;
    double threshold = 0.5;
};

struct TrainResult {
    ForestModel model;
    CrossValidation cv;
    std::vector<std::string> warnings;
};

// Fits trees on an already-built matrix. Exposed for tests and benchmarks.
std::vector<DecisionTree> fit_trees(const std::vector<std::vector<double>>& rows, const std::vector<bool>& labels,
                                    const ForestConfig& config);

// Stratified k-fold CV picks the decision threshold with the best precision
// whose pooled recall is at least `recall_floor`; the final model is then
// trained on all rows. Throws TrainingError on single-class or degenerate
// input.
TrainResult train_forest(const std::vector<LabeledExample>& data, const ForestConfig& config);

struct Prediction {
    double probability = 0.0;
    bool is_ad = false;
};

// Mean leaf value over all trees; ad iff probability >= threshold.
Prediction predict(const ForestModel& model, const FeatureVector& fv);
double predict_row(const ForestModel& model, std::span<const double> row);

}  // namespace chainblock
