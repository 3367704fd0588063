#include "malgrid/classify.hpp"

#include "malgrid/common.hpp"
#include "malgrid/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace malgrid::classify {

using ordered_json = nlohmann::ordered_json;

void Dataset::validate() const {
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw Error("dataset: X rows and y length differ");
    if (!sample_ids.empty() && sample_ids.size() != y.size()) throw Error("dataset: sample_ids length differs");
    for (int label : y)
        if (label < 0 || label >= static_cast<int>(class_names.size()))
            throw Error("dataset: label index outside class_names");
    if (!X.allFinite()) throw Error("dataset: non-finite features");
}

namespace {

int argmax_smallest(const std::vector<int>& votes) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(votes.size()); ++c)
        if (votes[c] > votes[best]) best = c;
    return best;
}

Dataset subset(const Dataset& ds, const std::vector<int>& rows) {
    Dataset out;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), ds.X.cols());
    out.y.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.X.row(static_cast<Eigen::Index>(i)) = ds.X.row(rows[i]);
        out.y.push_back(ds.y[rows[i]]);
        if (!ds.sample_ids.empty()) out.sample_ids.push_back(ds.sample_ids[rows[i]]);
    }
    out.class_names = ds.class_names;
    return out;
}

}  // namespace

std::vector<int> knn_predict(const Dataset& train, const Matrix& query, int k) {
    train.validate();
    const auto n = static_cast<int>(train.size());
    if (k < 1 || k % 2 == 0) throw Error("knn: k must be a positive odd integer");
    if (k > n) throw Error("knn: k exceeds the training set size");
    if (query.cols() != train.X.cols()) throw Error("knn: query dimension mismatch");

    std::vector<int> out(static_cast<std::size_t>(query.rows()));
    const int n_classes = static_cast<int>(train.class_names.size());
    parallel_for(out.size(), [&](std::size_t q) {
        std::vector<std::pair<double, int>> d(n);
        for (int i = 0; i < n; ++i) d[i] = {(train.X.row(i) - query.row(static_cast<Eigen::Index>(q))).squaredNorm(), i};
        std::partial_sort(d.begin(), d.begin() + k, d.end());
        std::vector<int> votes(n_classes, 0);
        for (int t = 0; t < k; ++t) ++votes[train.y[d[t].second]];
        out[q] = argmax_smallest(votes);
    });
    return out;
}

double gini(const std::vector<int>& counts, int total) {
    if (total <= 0) return 0.0;
    double s = 0.0;
    for (int c : counts) {
        const double p = static_cast<double>(c) / total;
        s += p * p;
    }
    return 1.0 - s;
}

int DecisionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int node = 0;
    while (nodes[node].feature >= 0) node = x(nodes[node].feature) <= nodes[node].threshold ? nodes[node].left : nodes[node].right;
    return nodes[node].label;
}

std::vector<int> ForestModel::predict(const Matrix& query) const {
    std::vector<int> out(static_cast<std::size_t>(query.rows()));
    for (Eigen::Index q = 0; q < query.rows(); ++q) {
        std::vector<int> votes(n_classes, 0);
        for (const auto& tree : trees) ++votes[tree.predict(query.row(q))];
        out[q] = argmax_smallest(votes);
    }
    return out;
}

namespace {

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Dataset& ds, int n_classes, int max_depth, Rng& rng)
        : ds_(ds), n_classes_(n_classes), max_depth_(max_depth), rng_(rng) {
        const auto d = static_cast<int>(ds.X.cols());
        features_per_node_ = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(d)))));
        feature_order_.resize(d);
    }

    DecisionTree build(std::vector<int> rows) {
        DecisionTree tree;
        grow(tree, std::move(rows), 0);
        return tree;
    }

private:
    int grow(DecisionTree& tree, std::vector<int> rows, int depth) {
        const int index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        std::vector<int> counts(n_classes_, 0);
        for (int r : rows) ++counts[ds_.y[r]];
        const int majority = argmax_smallest(counts);
        const bool pure = counts[majority] == static_cast<int>(rows.size());
        if (pure || rows.size() < 2 || (max_depth_ > 0 && depth >= max_depth_)) {
            tree.nodes[index].label = majority;
            return index;
        }

        const Split split = best_split(rows);
        if (split.feature < 0) {
            tree.nodes[index].label = majority;
            return index;
        }
        std::vector<int> left_rows, right_rows;
        for (int r : rows) (ds_.X(r, split.feature) <= split.threshold ? left_rows : right_rows).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        const int left = grow(tree, std::move(left_rows), depth + 1);
        const int right = grow(tree, std::move(right_rows), depth + 1);
        auto& node = tree.nodes[index];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = left;
        node.right = right;
        node.label = majority;
        return index;
    }

    // Draws features without replacement; keeps drawing past the sqrt(d)
    // budget only while no valid split has been found.
    Split best_split(const std::vector<int>& rows) {
        const int d = static_cast<int>(feature_order_.size());
        std::iota(feature_order_.begin(), feature_order_.end(), 0);
        Split best;
        const int n = static_cast<int>(rows.size());
        std::vector<std::pair<double, int>> sorted(n);
        for (int t = 0; t < d; ++t) {
            if (t >= features_per_node_ && best.feature >= 0) break;
            const int pick = t + static_cast<int>(rng_.below(static_cast<std::uint64_t>(d - t)));
            std::swap(feature_order_[t], feature_order_[pick]);
            const int f = feature_order_[t];

            for (int i = 0; i < n; ++i) sorted[i] = {ds_.X(rows[i], f), ds_.y[rows[i]]};
            std::sort(sorted.begin(), sorted.end());
            if (sorted.front().first == sorted.back().first) continue;

            std::vector<int> left(n_classes_, 0), right(n_classes_, 0);
            for (const auto& s : sorted) ++right[s.second];
            for (int i = 0; i + 1 < n; ++i) {
                ++left[sorted[i].second];
                --right[sorted[i].second];
                if (sorted[i].first == sorted[i + 1].first) continue;
                const int nl = i + 1;
                const int nr = n - nl;
                const double impurity = (nl * gini(left, nl) + nr * gini(right, nr)) / n;
                if (best.feature < 0 || impurity < best.impurity) {
                    best.feature = f;
                    best.impurity = impurity;
                    best.threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
                    // Midpoint can round up to the right value for adjacent doubles.
                    if (best.threshold >= sorted[i + 1].first) best.threshold = sorted[i].first;
                }
            }
        }
        return best;
    }

    const Dataset& ds_;
    int n_classes_;
    int max_depth_;
    Rng& rng_;
    int features_per_node_ = 1;
    std::vector<int> feature_order_;
};

}  // namespace

ForestModel rf_train(const Dataset& train, int n_trees, int max_depth, std::uint64_t seed) {
    train.validate();
    if (n_trees < 1) throw Error("random forest needs at least one tree");
    if (train.size() == 0) throw Error("random forest: empty training set");
    ForestModel model;
    model.n_classes = static_cast<int>(train.class_names.size());
    model.trees.resize(static_cast<std::size_t>(n_trees));
    const auto n = train.size();
    parallel_for(model.trees.size(), [&](std::size_t t) {
        Rng rng(mix_seed(seed, t));
        std::vector<int> rows(n);
        for (auto& r : rows) r = static_cast<int>(rng.below(n));
        TreeBuilder builder(train, model.n_classes, max_depth, rng);
        model.trees[t] = builder.build(std::move(rows));
    });
    return model;
}

std::string describe(const ModelSpec& spec) {
    struct Visitor {
        std::string operator()(const KnnSpec& s) const { return "KNN(k=" + std::to_string(s.k) + ")"; }
        std::string operator()(const RfSpec& s) const {
            return "RF(trees=" + std::to_string(s.n_trees) +
                   ", max_depth=" + (s.max_depth > 0 ? std::to_string(s.max_depth) : std::string("none")) +
                   ", features=sqrt(d))";
        }
        std::string operator()(const CustomSpec& s) const { return s.name; }
    };
    return std::visit(Visitor{}, spec);
}

Metrics metrics_from_confusion(const std::vector<std::vector<long>>& confusion) {
    const std::size_t k = confusion.size();
    if (k == 0) throw Error("empty confusion matrix");
    for (const auto& row : confusion)
        if (row.size() != k) throw Error("confusion matrix must be square");
    Metrics m;
    long total = 0;
    long correct = 0;
    std::vector<long> predicted(k, 0), support(k, 0);
    for (std::size_t t = 0; t < k; ++t)
        for (std::size_t p = 0; p < k; ++p) {
            total += confusion[t][p];
            support[t] += confusion[t][p];
            predicted[p] += confusion[t][p];
            if (t == p) correct += confusion[t][p];
        }
    m.accuracy = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        const double tp = static_cast<double>(confusion[c][c]);
        const double precision = predicted[c] > 0 ? tp / static_cast<double>(predicted[c]) : 0.0;
        const double recall = support[c] > 0 ? tp / static_cast<double>(support[c]) : 0.0;
        const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        m.per_class_precision.push_back(precision);
        m.per_class_recall.push_back(recall);
        m.per_class_f1.push_back(f1);
    }
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
    m.macro_precision = mean(m.per_class_precision);
    m.macro_recall = mean(m.per_class_recall);
    m.macro_f1 = mean(m.per_class_f1);
    return m;
}

std::vector<int> stratified_folds(const std::vector<int>& y, int n_classes, int folds, std::uint64_t seed) {
    if (folds < 2) throw Error("cross-validation needs at least 2 folds");
    std::vector<int> fold_of(y.size(), -1);
    std::size_t cursor = 0;
    for (int c = 0; c < n_classes; ++c) {
        std::vector<int> members;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] == c) members.push_back(static_cast<int>(i));
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(c)));
        rng.shuffle(members.begin(), members.end());
        for (int m : members) fold_of[m] = static_cast<int>(cursor++ % static_cast<std::size_t>(folds));
    }
    return fold_of;
}

ClassificationReport cross_validate(const Dataset& input, const ModelSpec& spec, int folds, std::uint64_t seed) {
    input.validate();

    // Canonical row order and compact class indices make the result
    // independent of input ordering and of unused class names.
    std::vector<int> order(input.size());
    std::iota(order.begin(), order.end(), 0);
    if (!input.sample_ids.empty())
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return input.sample_ids[a] < input.sample_ids[b]; });
    Dataset ds = subset(input, order);

    std::vector<int> counts(input.class_names.size(), 0);
    for (int label : ds.y) ++counts[label];
    std::vector<int> remap(counts.size(), -1);
    ds.class_names.clear();
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) continue;
        remap[c] = static_cast<int>(ds.class_names.size());
        ds.class_names.push_back(input.class_names[c]);
    }
    for (auto& label : ds.y) label = remap[label];
    const int n_classes = static_cast<int>(ds.class_names.size());
    if (n_classes < 2) throw Error("degenerate labels");

    int min_count = static_cast<int>(ds.size());
    for (int c : counts)
        if (c > 0) min_count = std::min(min_count, c);
    int used_folds = folds;
    std::string desc = describe(spec);
    if (min_count < folds) {
        used_folds = min_count;
        desc += " [folds reduced from " + std::to_string(folds) + " to " + std::to_string(used_folds) +
                " by smallest class size]";
    }
    if (used_folds < 2) throw Error("every class needs at least 2 samples for cross-validation");

    const auto fold_of = stratified_folds(ds.y, n_classes, used_folds, seed);

    ClassificationReport report;
    report.confusion.assign(n_classes, std::vector<long>(n_classes, 0));
    report.class_names = ds.class_names;
    report.model_desc = desc;
    report.seed = seed;
    report.folds = used_folds;

    for (int f = 0; f < used_folds; ++f) {
        std::vector<int> train_rows, test_rows;
        for (std::size_t i = 0; i < ds.size(); ++i) (fold_of[i] == f ? test_rows : train_rows).push_back(static_cast<int>(i));
        const Dataset train = subset(ds, train_rows);
        const Dataset test = subset(ds, test_rows);
        const std::uint64_t fold_seed = mix_seed(seed, 1000 + static_cast<std::uint64_t>(f));

        std::vector<int> predicted;
        if (const auto* knn = std::get_if<KnnSpec>(&spec)) {
            predicted = knn_predict(train, test.X, knn->k);
        } else if (const auto* rf = std::get_if<RfSpec>(&spec)) {
            predicted = rf_train(train, rf->n_trees, rf->max_depth, fold_seed).predict(test.X);
        } else {
            predicted = std::get<CustomSpec>(spec).fit_predict(train, test.X, fold_seed);
        }
        if (predicted.size() != test.size()) throw Error("model returned the wrong number of predictions");

        std::vector<std::vector<long>> fold_confusion(n_classes, std::vector<long>(n_classes, 0));
        for (std::size_t i = 0; i < test.size(); ++i) {
            if (predicted[i] < 0 || predicted[i] >= n_classes) throw Error("model predicted an unknown class");
            ++fold_confusion[test.y[i]][predicted[i]];
            ++report.confusion[test.y[i]][predicted[i]];
        }
        const auto fm = metrics_from_confusion(fold_confusion);
        report.per_fold.push_back({f, test.size(), fm.accuracy, fm.macro_precision, fm.macro_recall, fm.macro_f1});
    }

    const auto m = metrics_from_confusion(report.confusion);
    report.accuracy = m.accuracy;
    report.macro_precision = m.macro_precision;
    report.macro_recall = m.macro_recall;
    report.macro_f1 = m.macro_f1;
    report.per_class_f1 = m.per_class_f1;
    return report;
}

ordered_json ClassificationReport::to_json() const {
    ordered_json j;
    j["accuracy"] = accuracy;
    j["macro_precision"] = macro_precision;
    j["macro_recall"] = macro_recall;
    j["macro_f1"] = macro_f1;
    j["per_class_f1"] = per_class_f1;
    ordered_json folds_json = ordered_json::array();
    for (const auto& f : per_fold) {
        ordered_json r;
        r["fold"] = f.fold;
        r["n_test"] = f.n_test;
        r["accuracy"] = f.accuracy;
        r["macro_precision"] = f.macro_precision;
        r["macro_recall"] = f.macro_recall;
        r["macro_f1"] = f.macro_f1;
        folds_json.push_back(std::move(r));
    }
    j["per_fold"] = std::move(folds_json);
    j["confusion"] = confusion;
    j["class_names"] = class_names;
    j["model_desc"] = model_desc;
    j["seed"] = seed;
    j["folds"] = folds;
    return j;
}

std::string table_header() { return "Feature <- <model> | Accuracy | Precision | Recall | F1"; }

std::string ClassificationReport::table_row(std::string_view feature_name) const {
    std::string model = model_desc.substr(0, model_desc.find('('));
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s <- %s | %.3f | %.3f | %.3f | %.3f", std::string(feature_name).c_str(),
                  model.c_str(), accuracy, macro_precision, macro_recall, macro_f1);
    return buf;
}

}  // namespace malgrid::classify
