#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "crt/error.hpp"
#include "crt/rng.hpp"
#include "reg_internal.hpp"

namespace crt::detail {

namespace {

struct TreeNode {
    int feature = -1;  // -1 = leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

// Variance-reduction CART. Splits sweep sorted feature values with prefix
// sums; ties keep the first candidate in the (seeded) feature order, so a fit
// is fully determined by (data, seed, params).
class RegressionTree {
public:
    void fit(const FeatureMatrix& x, const std::vector<double>& y,
             std::vector<int> indices, int max_depth, int min_samples_leaf,
             int mtry, Rng& rng) {
        nodes_.clear();
        feature_pool_.resize(static_cast<std::size_t>(x.cols));
        std::iota(feature_pool_.begin(), feature_pool_.end(), 0);
        build(x, y, std::move(indices), 0, max_depth, min_samples_leaf, mtry, rng);
    }

    double predict(const double* row) const {
        int node = 0;
        while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
            const TreeNode& nd = nodes_[static_cast<std::size_t>(node)];
            node = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
        }
        return nodes_[static_cast<std::size_t>(node)].value;
    }

    void save(std::ostream& out) const {
        put_i32(out, static_cast<std::int32_t>(nodes_.size()));
        for (const auto& nd : nodes_) {
            put_i32(out, nd.feature);
            put_f64(out, nd.threshold);
            put_i32(out, nd.left);
            put_i32(out, nd.right);
            put_f64(out, nd.value);
        }
    }

    static RegressionTree load(std::istream& in) {
        RegressionTree t;
        const std::int32_t n = get_i32(in);
        t.nodes_.resize(static_cast<std::size_t>(n));
        for (auto& nd : t.nodes_) {
            nd.feature = get_i32(in);
            nd.threshold = get_f64(in);
            nd.left = get_i32(in);
            nd.right = get_i32(in);
            nd.value = get_f64(in);
        }
        return t;
    }

private:
    int build(const FeatureMatrix& x, const std::vector<double>& y,
              std::vector<int> idx, int depth, int max_depth, int min_leaf,
              int mtry, Rng& rng) {
        const int node_id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();

        double sum = 0.0, sum_sq = 0.0;
        for (int i : idx) {
            sum += y[static_cast<std::size_t>(i)];
            sum_sq += y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
        }
        const double n = static_cast<double>(idx.size());
        const double node_sse = sum_sq - sum * sum / n;
        nodes_[static_cast<std::size_t>(node_id)].value = sum / n;

        const bool depth_ok = max_depth <= 0 || depth < max_depth;
        if (!depth_ok || static_cast<int>(idx.size()) < 2 * min_leaf || node_sse <= 1e-14) {
            return node_id;
        }

        // draw the mtry candidate features for this node
        const int pool = static_cast<int>(feature_pool_.size());
        const int draws = std::min(mtry, pool);
        for (int k = 0; k < draws; ++k) {
            const int j = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(pool - k)));
            std::swap(feature_pool_[static_cast<std::size_t>(k)],
                      feature_pool_[static_cast<std::size_t>(j)]);
        }

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 1e-12;  // require a real improvement
        std::vector<std::pair<double, double>> vals(idx.size());
        for (int k = 0; k < draws; ++k) {
            const int f = feature_pool_[static_cast<std::size_t>(k)];
            for (std::size_t i = 0; i < idx.size(); ++i)
                vals[i] = {x.at(idx[i], f), y[static_cast<std::size_t>(idx[i])]};
            std::sort(vals.begin(), vals.end());
            if (vals.front().first == vals.back().first) continue;

            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                left_sum += vals[i].second;
                left_sq += vals[i].second * vals[i].second;
                const std::size_t nl = i + 1;
                const std::size_t nr = vals.size() - nl;
                if (vals[i].first == vals[i + 1].first) continue;  // no boundary here
                if (static_cast<int>(nl) < min_leaf || static_cast<int>(nr) < min_leaf)
                    continue;
                const double right_sum = sum - left_sum;
                const double right_sq = sum_sq - left_sq;
                const double sse = (left_sq - left_sum * left_sum / static_cast<double>(nl)) +
                                   (right_sq - right_sum * right_sum / static_cast<double>(nr));
                const double gain = node_sse - sse;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
                }
            }
        }

        if (best_feature < 0) return node_id;

        std::vector<int> left_idx, right_idx;
        left_idx.reserve(idx.size());
        right_idx.reserve(idx.size());
        for (int i : idx) {
            if (x.at(i, best_feature) <= best_threshold)
                left_idx.push_back(i);
            else
                right_idx.push_back(i);
        }
        if (left_idx.empty() || right_idx.empty()) return node_id;  // degenerate split
        idx.clear();
        idx.shrink_to_fit();

        nodes_[static_cast<std::size_t>(node_id)].feature = best_feature;
        nodes_[static_cast<std::size_t>(node_id)].threshold = best_threshold;
        const int left = build(x, y, std::move(left_idx), depth + 1, max_depth,
                               min_leaf, mtry, rng);
        nodes_[static_cast<std::size_t>(node_id)].left = left;
        const int right = build(x, y, std::move(right_idx), depth + 1, max_depth,
                                min_leaf, mtry, rng);
        nodes_[static_cast<std::size_t>(node_id)].right = right;
        return node_id;
    }

    std::vector<TreeNode> nodes_;
    std::vector<int> feature_pool_;
};

class ForestModel final : public Model {
public:
    ForestModel(std::vector<RegressionTree> trees) : trees_(std::move(trees)) {}

    double predict_raw(const double* x) const override {
        double s = 0.0;
        for (const auto& t : trees_) s += t.predict(x);
        return s / static_cast<double>(trees_.size());
    }

    void save_payload(std::ostream& out) const override {
        put_i32(out, static_cast<std::int32_t>(trees_.size()));
        for (const auto& t : trees_) t.save(out);
    }

private:
    std::vector<RegressionTree> trees_;
};

class BoostingModel final : public Model {
public:
    BoostingModel(double base, double learning_rate, std::vector<RegressionTree> trees)
        : base_(base), learning_rate_(learning_rate), trees_(std::move(trees)) {}

    double predict_raw(const double* x) const override {
        double s = base_;
        for (const auto& t : trees_) s += learning_rate_ * t.predict(x);
        return s;
    }

    void save_payload(std::ostream& out) const override {
        put_f64(out, base_);
        put_f64(out, learning_rate_);
        put_i32(out, static_cast<std::int32_t>(trees_.size()));
        for (const auto& t : trees_) t.save(out);
    }

private:
    double base_;
    double learning_rate_;
    std::vector<RegressionTree> trees_;
};

}  // namespace

std::unique_ptr<Model> train_forest(const FeatureMatrix& x, const std::vector<double>& y,
                                    std::uint64_t seed, const ForestParams& p) {
    if (p.n_trees < 1) throw Error("random forest: n_trees must be positive");
    const int n = x.rows;
    const int mtry =
        std::max(1, static_cast<int>(std::lround(p.feature_frac * x.cols)));
    std::vector<RegressionTree> trees(static_cast<std::size_t>(p.n_trees));
    for (int t = 0; t < p.n_trees; ++t) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
        std::vector<int> bootstrap(static_cast<std::size_t>(n));
        for (auto& i : bootstrap)
            i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        trees[static_cast<std::size_t>(t)].fit(x, y, std::move(bootstrap), p.max_depth,
                                               p.min_samples_leaf, mtry, rng);
    }
    return std::make_unique<ForestModel>(std::move(trees));
}

std::unique_ptr<Model> load_forest(std::istream& in) {
    const std::int32_t n = get_i32(in);
    std::vector<RegressionTree> trees;
    trees.reserve(static_cast<std::size_t>(n));
    for (std::int32_t i = 0; i < n; ++i) trees.push_back(RegressionTree::load(in));
    return std::make_unique<ForestModel>(std::move(trees));
}

std::unique_ptr<Model> train_boosting(const FeatureMatrix& x, const std::vector<double>& y,
                                      const BoostingParams& p) {
    if (p.n_estimators < 1) throw Error("gradient boosting: n_estimators must be positive");
    const int n = x.rows;
    double base = 0.0;
    for (double v : y) base += v;
    base /= static_cast<double>(n);

    std::vector<double> pred(static_cast<std::size_t>(n), base);
    std::vector<double> residual(static_cast<std::size_t>(n));
    std::vector<int> all_idx(static_cast<std::size_t>(n));
    std::iota(all_idx.begin(), all_idx.end(), 0);

    Rng rng(0);  // boosting uses every feature; no randomness consumed
    std::vector<RegressionTree> trees;
    trees.reserve(static_cast<std::size_t>(p.n_estimators));
    for (int m = 0; m < p.n_estimators; ++m) {
        for (int i = 0; i < n; ++i)
            residual[static_cast<std::size_t>(i)] =
                y[static_cast<std::size_t>(i)] - pred[static_cast<std::size_t>(i)];
        RegressionTree tree;
        tree.fit(x, residual, all_idx, p.max_depth, p.min_samples_leaf, x.cols, rng);
        for (int i = 0; i < n; ++i)
            pred[static_cast<std::size_t>(i)] += p.learning_rate * tree.predict(x.row(i));
        trees.push_back(std::move(tree));
    }
    return std::make_unique<BoostingModel>(base, p.learning_rate, std::move(trees));
}

std::unique_ptr<Model> load_boosting(std::istream& in) {
    const double base = get_f64(in);
    const double lr = get_f64(in);
    const std::int32_t n = get_i32(in);
    std::vector<RegressionTree> trees;
    trees.reserve(static_cast<std::size_t>(n));
    for (std::int32_t i = 0; i < n; ++i) trees.push_back(RegressionTree::load(in));
    return std::make_unique<BoostingModel>(base, lr, std::move(trees));
}

}  // namespace crt::detail
