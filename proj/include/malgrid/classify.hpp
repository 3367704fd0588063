#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace malgrid::classify {

using Matrix = Eigen::MatrixXd;

struct Dataset {
    Matrix X;
    std::vector<int> y;
    std::vector<std::string> class_names;
    std::vector<std::string> sample_ids;  ///< optional; enables order canonicalization in CV

    std::size_t size() const { return y.size(); }
    void validate() const;
};

// -- KNN --------------------------------------------------------------------

std::vector<int> knn_predict(const Dataset& train, const Matrix& query, int k);

// -- Random forest ----------------------------------------------------------

struct TreeNode {
    int feature = -1;  ///< -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;
    int predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    bool is_single_leaf() const { return nodes.size() == 1; }
};

struct ForestModel {
    std::vector<DecisionTree> trees;
    int n_classes = 0;
    std::vector<int> predict(const Matrix& query) const;
};

/// Gini impurity of a class-count histogram.
double gini(const std::vector<int>& counts, int total);

/// max_depth <= 0 means unlimited.
ForestModel rf_train(const Dataset& train, int n_trees, int max_depth, std::uint64_t seed);

// -- Cross-validation ---------------------------------------------------------

struct KnnSpec {
    int k = 5;
};
struct RfSpec {
    int n_trees = 100;
    int max_depth = 0;
};
/// Any train-then-predict procedure; used for scripted models in tests.
struct CustomSpec {
    std::string name;
    std::function<std::vector<int>(const Dataset& train, const Matrix& query, std::uint64_t seed)> fit_predict;
};
using ModelSpec = std::variant<KnnSpec, RfSpec, CustomSpec>;

std::string describe(const ModelSpec& spec);

struct Metrics {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::vector<double> per_class_precision;
    std::vector<double> per_class_recall;
    std::vector<double> per_class_f1;
};

/// confusion[true][predicted]; 0/0 per-class cases count as 0.
Metrics metrics_from_confusion(const std::vector<std::vector<long>>& confusion);

struct FoldRecord {
    int fold = 0;
    std::size_t n_test = 0;
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

struct ClassificationReport {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::vector<double> per_class_f1;
    std::vector<FoldRecord> per_fold;
    std::vector<std::vector<long>> confusion;
    std::vector<std::string> class_names;
    std::string model_desc;
    std::uint64_t seed = 0;
    int folds = 0;

    nlohmann::ordered_json to_json() const;
    /// One row in the `feature <- model | Accuracy | Precision | Recall | F1` layout.
    std::string table_row(std::string_view feature_name) const;
};

std::string table_header();

/// Stratified assignment of each row to a fold in [0, folds).
std::vector<int> stratified_folds(const std::vector<int>& y, int n_classes, int folds, std::uint64_t seed);

ClassificationReport cross_validate(const Dataset& ds, const ModelSpec& spec, int folds = 10, std::uint64_t seed = 0);

}  // namespace malgrid::classify
