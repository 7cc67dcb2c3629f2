#include "chainblock/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "chainblock/error.hpp"
#include <nlohmann/json.hpp>

namespace chainblock {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// std::uniform_int_distribution is implementation-defined; this keeps
// trained models identical across standard libraries.
std::size_t bounded(std::mt19937_64& rng, std::size_t n) {
    const std::uint64_t range = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
    while (true) {
        std::uint64_t x = rng();
        if (x < limit) return static_cast<std::size_t>(x % range);
    }
}

template <class T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[bounded(rng, i)]);
}

double gini(double pos, double total) {
    if (total <= 0) return 0.0;
    double p = pos / total;
    return 2.0 * p * (1.0 - p);
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = std::numeric_limits<double>::infinity();
};

class TreeGrower {
public:
    TreeGrower(const std::vector<std::vector<double>>& rows, const std::vector<bool>& labels,
               const ForestConfig& config, std::size_t mtry, std::uint64_t seed)
        : rows_(rows), labels_(labels), config_(config), mtry_(mtry), rng_(seed) {}

    DecisionTree grow() {
        const std::size_t n = rows_.size();
        std::vector<std::size_t> sample(n);
        for (auto& s : sample) s = bounded(rng_, n);

        DecisionTree tree;
        struct Pending {
            std::int32_t node;
            std::vector<std::size_t> indices;
            std::size_t depth;
        };
        tree.nodes.emplace_back();
        std::vector<Pending> stack;
        stack.push_back({0, std::move(sample), 1});
        while (!stack.empty()) {
            Pending work = std::move(stack.back());
            stack.pop_back();

            std::size_t positives = 0;
            for (std::size_t i : work.indices) positives += labels_[i] ? 1 : 0;
            const double fraction = static_cast<double>(positives) / static_cast<double>(work.indices.size());

            bool pure = positives == 0 || positives == work.indices.size();
            bool depth_capped = config_.max_depth != 0 && work.depth >= config_.max_depth;
            std::optional<Split> split;
            if (!pure && !depth_capped && work.indices.size() >= 2) split = best_split(work.indices);
            if (!split) {
                tree.nodes[work.node].feature = -1;
                tree.nodes[work.node].leaf_value = fraction;
                continue;
            }

            std::vector<std::size_t> left;
            std::vector<std::size_t> right;
            for (std::size_t i : work.indices) {
                (rows_[i][split->feature] <= split->threshold ? left : right).push_back(i);
            }
            auto left_id = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            auto right_id = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            TreeNode& node = tree.nodes[work.node];
            node.feature = split->feature;
            node.threshold = split->threshold;
            node.left = left_id;
            node.right = right_id;
            node.leaf_value = fraction;
            stack.push_back({right_id, std::move(right), work.depth + 1});
            stack.push_back({left_id, std::move(left), work.depth + 1});
        }
        return tree;
    }

private:
    std::optional<Split> best_split(const std::vector<std::size_t>& indices) {
        const std::size_t n_features = rows_.front().size();
        std::vector<std::size_t> order(n_features);
        std::iota(order.begin(), order.end(), 0);
        shuffle(order, rng_);

        Split best;
        std::vector<std::pair<double, bool>> column(indices.size());
        double total_pos = 0;
        for (std::size_t i : indices) total_pos += labels_[i] ? 1 : 0;
        const double total = static_cast<double>(indices.size());

        // Keep drawing past mtry only while every drawn feature was constant.
        for (std::size_t k = 0; k < n_features; ++k) {
            if (k >= mtry_ && best.feature >= 0) break;
            const std::size_t f = order[k];
            for (std::size_t j = 0; j < indices.size(); ++j) column[j] = {rows_[indices[j]][f], labels_[indices[j]]};
            std::sort(column.begin(), column.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            double left_pos = 0;
            for (std::size_t j = 0; j + 1 < column.size(); ++j) {
                left_pos += column[j].second ? 1 : 0;
                if (!(column[j].first < column[j + 1].first)) continue;
                const double left_n = static_cast<double>(j + 1);
                const double right_n = total - left_n;
                const double impurity =
                    (left_n * gini(left_pos, left_n) + right_n * gini(total_pos - left_pos, right_n)) / total;
                if (impurity < best.impurity) {
                    best.feature = static_cast<int>(f);
                    best.threshold = column[j].first + (column[j + 1].first - column[j].first) / 2.0;
                    // Guard against the midpoint rounding onto the right value.
                    if (!(best.threshold < column[j + 1].first)) best.threshold = column[j].first;
                    best.impurity = impurity;
                }
            }
        }
        if (best.feature < 0) return std::nullopt;
        return best;
    }

    const std::vector<std::vector<double>>& rows_;
    const std::vector<bool>& labels_;
    const ForestConfig& config_;
    std::size_t mtry_;
    std::mt19937_64 rng_;
};

struct Metrics {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    std::optional<double> precision() const {
        if (tp + fp == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    std::optional<double> recall() const {
        if (tp + fn == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
};

Metrics score(const std::vector<double>& probabilities, const std::vector<bool>& labels, double threshold) {
    Metrics m;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        bool predicted = probabilities[i] >= threshold;
        if (predicted && labels[i]) ++m.tp;
        if (predicted && !labels[i]) ++m.fp;
        if (!predicted && labels[i]) ++m.fn;
    }
    return m;
}

// Midpoints between consecutive distinct scores give every distinct
// partition once; the lowest score is included so "everything positive"
// is a candidate.
double choose_threshold(const std::vector<double>& probabilities, const std::vector<bool>& labels,
                        double recall_floor) {
    std::vector<double> values(probabilities);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> candidates{values.front()};
    for (std::size_t i = 0; i + 1 < values.size(); ++i) candidates.push_back((values[i] + values[i + 1]) / 2.0);

    double best_threshold = values.front();
    double best_precision = -1;
    double best_recall = -1;
    for (double t : candidates) {
        Metrics m = score(probabilities, labels, t);
        double p = m.precision().value_or(0.0);
        double r = m.recall().value_or(0.0);
        if (r < recall_floor) continue;
        if (p > best_precision || (p == best_precision && r > best_recall)) {
            best_precision = p;
            best_recall = r;
            best_threshold = t;
        }
    }
    return best_threshold;
}

std::size_t resolve_mtry(const ForestConfig& config, std::size_t n_features) {
    if (config.max_features != 0) return std::min(config.max_features, n_features);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_features)))));
}

}  // namespace

double DecisionTree::evaluate(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const TreeNode& node = nodes[i];
        i = static_cast<std::size_t>(row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                                   : node.right);
    }
    return nodes[i].leaf_value;
}

std::size_t DecisionTree::depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 1}};
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        if (!nodes[i].is_leaf()) {
            stack.push_back({static_cast<std::size_t>(nodes[i].left), d + 1});
            stack.push_back({static_cast<std::size_t>(nodes[i].right), d + 1});
        }
    }
    return best;
}

std::vector<DecisionTree> fit_trees(const std::vector<std::vector<double>>& rows, const std::vector<bool>& labels,
                                    const ForestConfig& config) {
    if (rows.empty()) throw TrainingError("no training rows");
    if (config.n_trees == 0) throw TrainingError("n_trees must be positive");
    const std::size_t mtry = resolve_mtry(config, rows.front().size());
    std::vector<DecisionTree> trees;
    trees.reserve(config.n_trees);
    for (std::size_t t = 0; t < config.n_trees; ++t) {
        TreeGrower grower(rows, labels, config, mtry, splitmix64(config.seed * 1000003ull + t));
        trees.push_back(grower.grow());
    }
    return trees;
}

TrainResult train_forest(const std::vector<LabeledExample>& data, const ForestConfig& config) {
    TrainResult result;
    std::set<std::string> excluded(config.excluded_features.begin(), config.excluded_features.end());
    for (const auto& name : excluded) {
        if (!feature_value(FeatureVector{}, name)) throw TrainingError("cannot exclude unknown feature '" + name + "'");
    }
    std::vector<std::string> names;
    for (const auto& name : feature_names()) {
        if (!excluded.count(name)) names.push_back(name);
    }
    if (names.empty()) throw TrainingError("every feature is excluded");

    std::vector<std::vector<double>> rows;
    std::vector<bool> labels;
    rows.reserve(data.size());
    for (const auto& ex : data) {
        rows.push_back(feature_row(ex.features, names));
        labels.push_back(ex.is_ad);
    }
    std::size_t positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
    if (positives == 0 || positives == labels.size()) {
        throw TrainingError("training data must contain both ad and not_ad examples");
    }
    const std::size_t folds = std::max<std::size_t>(2, config.folds);
    if (data.size() < folds) throw TrainingError("need at least one example per fold");

    std::size_t constant = 0;
    for (std::size_t f = 0; f < names.size(); ++f) {
        bool same = std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return r[f] == rows.front()[f]; });
        if (same) {
            ++constant;
            result.warnings.push_back("feature '" + names[f] + "' is constant");
        }
    }
    if (constant == names.size()) throw TrainingError("every feature is constant; nothing to learn");

    // Stratified fold assignment.
    std::mt19937_64 rng(splitmix64(config.seed ^ 0xC0FFEEull));
    std::vector<std::size_t> pos_idx;
    std::vector<std::size_t> neg_idx;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos_idx : neg_idx).push_back(i);
    shuffle(pos_idx, rng);
    shuffle(neg_idx, rng);
    std::vector<std::size_t> fold_of(labels.size());
    for (std::size_t k = 0; k < pos_idx.size(); ++k) fold_of[pos_idx[k]] = k % folds;
    for (std::size_t k = 0; k < neg_idx.size(); ++k) fold_of[neg_idx[k]] = (pos_idx.size() + k) % folds;

    std::vector<double> oof(labels.size(), 0.0);
    for (std::size_t fold = 0; fold < folds; ++fold) {
        std::vector<std::vector<double>> train_rows;
        std::vector<bool> train_labels;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (fold_of[i] == fold) continue;
            train_rows.push_back(rows[i]);
            train_labels.push_back(labels[i]);
        }
        ForestConfig fold_config = config;
        fold_config.seed = splitmix64(config.seed + 7919ull * (fold + 1));
        ForestModel fold_model;
        fold_model.trees = fit_trees(train_rows, train_labels, fold_config);
        fold_model.feature_names = names;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (fold_of[i] == fold) oof[i] = predict_row(fold_model, rows[i]);
        }
    }

    const double threshold = choose_threshold(oof, labels, config.recall_floor);
    result.cv.threshold = threshold;
    double p_sum = 0;
    std::size_t p_n = 0;
    double r_sum = 0;
    std::size_t r_n = 0;
    for (std::size_t fold = 0; fold < folds; ++fold) {
        std::vector<double> probs;
        std::vector<bool> labs;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (fold_of[i] != fold) continue;
            probs.push_back(oof[i]);
            labs.push_back(labels[i]);
        }
        Metrics m = score(probs, labs, threshold);
        if (auto p = m.precision()) {
            result.cv.fold_precision.push_back(*p);
            p_sum += *p;
            ++p_n;
        }
        if (auto r = m.recall()) {
            result.cv.fold_recall.push_back(*r);
            r_sum += *r;
            ++r_n;
        }
    }
    result.cv.precision = p_n ? p_sum / static_cast<double>(p_n) : 0.0;
    result.cv.recall = r_n ? r_sum / static_cast<double>(r_n) : 0.0;

    result.model.trees = fit_trees(rows, labels, config);
    result.model.feature_names = names;
    result.model.decision_threshold = threshold;
    result.model.config = config;
    return result;
}

double predict_row(const ForestModel& model, std::span<const double> row) {
    if (row.size() != model.feature_names.size()) {
        throw ModelError("row has " + std::to_string(row.size()) + " features, model expects " +
                         std::to_string(model.feature_names.size()));
    }
    if (model.trees.empty()) throw ModelError("model has no trees");
    double sum = 0.0;
    for (const auto& tree : model.trees) sum += tree.evaluate(row);
    return sum / static_cast<double>(model.trees.size());
}

Prediction predict(const ForestModel& model, const FeatureVector& fv) {
    std::vector<double> row = feature_row(fv, model.feature_names);
    Prediction out;
    out.probability = predict_row(model, row);
    out.is_ad = out.probability >= model.decision_threshold;
    return out;
}

std::string ForestModel::to_json() const {
    nlohmann::ordered_json j;
    j["format"] = "chainblock-forest";
    j["version"] = version;
    j["features"] = feature_names;
    j["decision_threshold"] = decision_threshold;
    j["config"] = {{"n_trees", config.n_trees},
                   {"max_depth", config.max_depth},
                   {"seed", config.seed},
                   {"folds", config.folds},
                   {"recall_floor", config.recall_floor},
                   {"max_features", config.max_features},
                   {"excluded_features", config.excluded_features}};
    nlohmann::ordered_json trees_json = nlohmann::ordered_json::array();
    for (const auto& tree : trees) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const auto& node : tree.nodes) {
            if (node.is_leaf()) {
                nodes.push_back({{"value", node.leaf_value}});
            } else {
                nodes.push_back({{"feature", node.feature},
                                 {"threshold", node.threshold},
                                 {"left", node.left},
                                 {"right", node.right}});
            }
        }
        trees_json.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees_json);
    return j.dump();
}

ForestModel ForestModel::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ModelError(std::string("model file is not JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "chainblock-forest") throw ModelError("not a chainblock forest model");
        ForestModel model;
        model.version = j.at("version").get<int>();
        if (model.version != kForestFormatVersion) {
            throw ModelError("unsupported model version " + std::to_string(model.version));
        }
        model.feature_names = j.at("features").get<std::vector<std::string>>();
        for (const auto& name : model.feature_names) {
            if (!feature_value(FeatureVector{}, name)) {
                throw ModelError("model feature '" + name + "' is not known to this build");
            }
        }
        model.decision_threshold = j.at("decision_threshold").get<double>();
        if (!std::isfinite(model.decision_threshold)) throw ModelError("decision_threshold must be finite");
        if (j.contains("config")) {
            const auto& c = j["config"];
            model.config.n_trees = c.value("n_trees", model.config.n_trees);
            model.config.max_depth = c.value("max_depth", model.config.max_depth);
            model.config.seed = c.value("seed", model.config.seed);
            model.config.folds = c.value("folds", model.config.folds);
            model.config.recall_floor = c.value("recall_floor", model.config.recall_floor);
            model.config.max_features = c.value("max_features", model.config.max_features);
            model.config.excluded_features = c.value("excluded_features", std::vector<std::string>{});
        }
        const auto n_features = static_cast<int>(model.feature_names.size());
        for (const auto& tree_json : j.at("trees")) {
            DecisionTree tree;
            for (const auto& node_json : tree_json) {
                TreeNode node;
                if (node_json.contains("value")) {
                    node.leaf_value = node_json.at("value").get<double>();
                    if (!(node.leaf_value >= 0.0 && node.leaf_value <= 1.0)) {
                        throw ModelError("leaf value outside [0,1]");
                    }
                } else {
                    node.feature = node_json.at("feature").get<int>();
                    node.threshold = node_json.at("threshold").get<double>();
                    node.left = node_json.at("left").get<std::int32_t>();
                    node.right = node_json.at("right").get<std::int32_t>();
                    if (node.feature < 0 || node.feature >= n_features) {
                        throw ModelError("split references undeclared feature index " + std::to_string(node.feature));
                    }
                }
                tree.nodes.push_back(node);
            }
            if (tree.nodes.empty()) throw ModelError("empty tree");
            const auto size = static_cast<std::int32_t>(tree.nodes.size());
            for (std::int32_t i = 0; i < size; ++i) {
                const TreeNode& node = tree.nodes[static_cast<std::size_t>(i)];
                if (node.is_leaf()) continue;
                // Children must come after their parent, which rules out cycles.
                if (node.left <= i || node.right <= i || node.left >= size || node.right >= size) {
                    throw ModelError("tree node " + std::to_string(i) + " has invalid children");
                }
            }
            model.trees.push_back(std::move(tree));
        }
        if (model.trees.empty()) throw ModelError("model has no trees");
        return model;
    } catch (const ModelError&) {
        throw;
    } catch (const std::exception& e) {
        throw ModelError(std::string("malformed model file: ") + e.what());
    }
}

}  // namespace chainblock
