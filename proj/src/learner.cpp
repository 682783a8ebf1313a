#include "hydrotwin/learner.hpp"

#include "hydrotwin/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hydrotwin {

std::vector<double> Matrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

void Matrix::push_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) fail(ErrorCode::dimension, "row width does not match matrix");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

void Dataset::validate() const {
    if (features.rows() == 0) fail(ErrorCode::empty_dataset, "dataset has no rows");
    if (features.rows() != targets.rows()) fail(ErrorCode::dimension, "feature and target row counts differ");
    if (!feature_names.empty() && feature_names.size() != features.cols())
        fail(ErrorCode::dimension, "feature names do not match feature columns");
    if (!target_names.empty() && target_names.size() != targets.cols())
        fail(ErrorCode::dimension, "target names do not match target columns");
    for (double v : features.data())
        if (!std::isfinite(v)) fail(ErrorCode::validation, "non-finite feature value");
    for (double v : targets.data())
        if (!std::isfinite(v)) fail(ErrorCode::validation, "non-finite target value");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    return {features.select_rows(indices), targets.select_rows(indices), feature_names, target_names};
}

void TrainConfig::validate() const {
    if (n_trees < 1) fail(ErrorCode::validation, "n_trees must be >= 1");
    if (max_depth < 0) fail(ErrorCode::validation, "max_depth must be >= 0");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
        fail(ErrorCode::validation, "learning_rate must lie in (0, 1]");
    if (min_samples_leaf < 1) fail(ErrorCode::validation, "min_samples_leaf must be >= 1");
}

int RegressionTree::leaf_index(std::span<const double> x) const {
    int n = 0;
    while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
        const auto& node = nodes[static_cast<std::size_t>(n)];
        n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return n;
}

double RegressionTree::predict(std::span<const double> x) const {
    return nodes[static_cast<std::size_t>(leaf_index(x))].value;
}

int RegressionTree::depth() const {
    std::vector<std::pair<int, int>> stack{{0, 0}};
    int deepest = 0;
    while (!stack.empty()) {
        auto [n, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        const auto& node = nodes[static_cast<std::size_t>(n)];
        if (!node.is_leaf()) {
            stack.emplace_back(node.left, d + 1);
            stack.emplace_back(node.right, d + 1);
        }
    }
    return deepest;
}

void RegressionTree::validate() const {
    if (nodes.empty()) fail(ErrorCode::validation, "tree has no nodes");
    const int count = static_cast<int>(nodes.size());
    for (const auto& node : nodes) {
        if (node.is_leaf()) {
            if (!std::isfinite(node.value)) fail(ErrorCode::validation, "non-finite leaf value");
        } else if (node.left <= 0 || node.right <= 0 || node.left >= count || node.right >= count) {
            fail(ErrorCode::validation, "internal node with missing child");
        }
    }
}

// ---------------------------------------------------------------------------
// CART builder. Feature orderings are computed once and partitioned stably
// down the tree, so each level costs O(n * d).
// ---------------------------------------------------------------------------

namespace {

using SortedColumns = std::vector<std::vector<std::size_t>>;

SortedColumns presort(const Matrix& x) {
    SortedColumns orders(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) {
        auto& order = orders[f];
        order.resize(x.rows());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
    }
    return orders;
}

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, std::span<const double> y, const TrainConfig& cfg)
        : x_(x), y_(y), cfg_(cfg), goes_left_(x.rows(), 0) {}

    RegressionTree build(const SortedColumns& orders, std::vector<double>* fitted) {
        fitted_ = fitted;
        tree_.nodes.clear();
        tree_.nodes.emplace_back();
        grow(0, orders, 0);
        return std::move(tree_);
    }

private:
    struct Split {
        bool found = false;
        std::size_t feature = 0;
        double threshold = 0.0;
        double gain = 0.0;
    };

    void make_leaf(int node, const std::vector<std::size_t>& rows) {
        double sum = 0.0;
        for (auto i : rows) sum += y_[i];
        const double value = sum / static_cast<double>(rows.size());
        tree_.nodes[static_cast<std::size_t>(node)] = TreeNode{-1, 0.0, -1, -1, value};
        if (fitted_)
            for (auto i : rows) (*fitted_)[i] = value;
    }

    Split best_split(const SortedColumns& orders, double mean) const {
        const auto& any = orders.front();
        const std::size_t n = any.size();
        const auto min_leaf = static_cast<std::size_t>(cfg_.min_samples_leaf);
        double sse = 0.0;
        for (auto i : any) sse += (y_[i] - mean) * (y_[i] - mean);

        Split best;
        for (std::size_t f = 0; f < orders.size(); ++f) {
            const auto& order = orders[f];
            double left_sum = 0.0;   // centred by the node mean, total is ~0
            for (std::size_t pos = 0; pos + 1 < n; ++pos) {
                left_sum += y_[order[pos]] - mean;
                const std::size_t n_left = pos + 1, n_right = n - n_left;
                if (n_left < min_leaf) continue;
                if (n_right < min_leaf) break;
                const double a = x_(order[pos], f), b = x_(order[pos + 1], f);
                if (!(a < b)) continue;
                const double right_sum = -left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                                    right_sum * right_sum / static_cast<double>(n_right);
                if (gain > best.gain) {
                    double mid = a + (b - a) / 2.0;
                    if (!(mid < b)) mid = a;
                    best = {true, f, mid, gain};
                }
            }
        }
        if (best.found && !(best.gain > 1e-12 * sse)) best.found = false;
        return best;
    }

    void grow(int node, const SortedColumns& orders, int depth) {
        const auto& rows = orders.front();
        const std::size_t n = rows.size();
        double lo = y_[rows.front()], hi = lo, sum = 0.0;
        for (auto i : rows) {
            lo = std::min(lo, y_[i]);
            hi = std::max(hi, y_[i]);
            sum += y_[i];
        }
        const bool constant = lo == hi;
        if (depth >= cfg_.max_depth || constant || n < 2 * static_cast<std::size_t>(cfg_.min_samples_leaf)) {
            make_leaf(node, rows);
            return;
        }
        const Split split = best_split(orders, sum / static_cast<double>(n));
        if (!split.found) {
            make_leaf(node, rows);
            return;
        }

        for (auto i : rows) goes_left_[i] = x_(i, split.feature) <= split.threshold ? 1 : 0;
        SortedColumns left(orders.size()), right(orders.size());
        for (std::size_t f = 0; f < orders.size(); ++f) {
            for (auto i : orders[f]) (goes_left_[i] ? left[f] : right[f]).push_back(i);
        }

        const int left_id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        const int right_id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        auto& parent = tree_.nodes[static_cast<std::size_t>(node)];
        parent.feature = static_cast<int>(split.feature);
        parent.threshold = split.threshold;
        parent.left = left_id;
        parent.right = right_id;
        parent.value = 0.0;

        grow(left_id, left, depth + 1);
        grow(right_id, right, depth + 1);
    }

    const Matrix& x_;
    std::span<const double> y_;
    const TrainConfig& cfg_;
    std::vector<char> goes_left_;
    std::vector<double>* fitted_ = nullptr;
    RegressionTree tree_;
};

} // namespace

RegressionTree fit_tree(const Matrix& features, std::span<const double> residuals, const TrainConfig& config) {
    config.validate();
    if (features.rows() == 0) fail(ErrorCode::empty_dataset, "cannot fit a tree on an empty dataset");
    if (residuals.size() != features.rows()) fail(ErrorCode::dimension, "residual count does not match rows");
    if (features.cols() == 0) fail(ErrorCode::dimension, "dataset has no feature columns");
    TreeBuilder builder(features, residuals, config);
    return builder.build(presort(features), nullptr);
}

GbtModel fit_gbt(const Dataset& data, const TrainConfig& config) {
    config.validate();
    data.validate();
    if (data.size() < 2) fail(ErrorCode::empty_dataset, "gradient boosting needs at least two rows");
    if (data.features.cols() == 0) fail(ErrorCode::dimension, "dataset has no feature columns");

    GbtModel model;
    model.config = config;
    model.n_features = data.features.cols();
    model.feature_names = data.feature_names;
    model.target_names = data.target_names;

    const auto orders = presort(data.features);
    const std::size_t n = data.size();
    for (std::size_t j = 0; j < data.targets.cols(); ++j) {
        const auto y = data.targets.column(j);
        GbtOutput out;
        out.init_value = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
        std::vector<double> current(n, out.init_value), residual(n), fitted(n);
        for (int round = 0; round < config.n_trees; ++round) {
            for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - current[i];
            TreeBuilder builder(data.features, residual, config);
            out.trees.push_back(builder.build(orders, &fitted));
            for (std::size_t i = 0; i < n; ++i) current[i] += config.learning_rate * fitted[i];
        }
        model.outputs.push_back(std::move(out));
    }
    return model;
}

KnnModel fit_knn(const Dataset& data, const KnnConfig& config) {
    data.validate();
    const std::size_t n = data.size();
    if (config.k < 1 || static_cast<std::size_t>(config.k) > n)
        fail(ErrorCode::validation, "k must satisfy 1 <= k <= n");

    KnnModel m;
    m.k = config.k;
    m.feature_names = data.feature_names;
    m.target_names = data.target_names;
    m.targets = data.targets;
    const std::size_t d = data.features.cols();
    m.mean.assign(d, 0.0);
    m.stddev.assign(d, 0.0);
    for (std::size_t f = 0; f < d; ++f) {
        const auto col = data.features.column(f);
        const double mu = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
        double ss = 0.0;
        for (double v : col) ss += (v - mu) * (v - mu);
        m.mean[f] = mu;
        const double sd = std::sqrt(ss / static_cast<double>(n));
        const bool constant = std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); });
        m.stddev[f] = constant ? 0.0 : sd;
    }
    m.standardized = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < d; ++f)
            m.standardized(i, f) = m.stddev[f] > 0.0 ? (data.features(i, f) - m.mean[f]) / m.stddev[f] : 0.0;
    return m;
}

namespace {

std::vector<double> predict_gbt(const GbtModel& m, std::span<const double> x) {
    std::vector<double> out;
    out.reserve(m.outputs.size());
    for (const auto& o : m.outputs) {
        double f = o.init_value;
        for (const auto& tree : o.trees) f += m.config.learning_rate * tree.predict(x);
        out.push_back(f);
    }
    return out;
}

std::vector<double> predict_knn(const KnnModel& m, std::span<const double> x) {
    const std::size_t n = m.standardized.rows(), d = m.standardized.cols();
    std::vector<double> z(d);
    for (std::size_t f = 0; f < d; ++f) z[f] = m.stddev[f] > 0.0 ? (x[f] - m.mean[f]) / m.stddev[f] : 0.0;

    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t f = 0; f < d; ++f) {
            if (m.stddev[f] == 0.0) continue;
            const double diff = m.standardized(i, f) - z[f];
            s += diff * diff;
        }
        dist[i] = {s, i};
    }
    const auto k = static_cast<std::size_t>(m.k);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

    std::vector<double> out(m.targets.cols(), 0.0);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += m.targets(dist[j].second, c);
    for (double& v : out) v /= static_cast<double>(k);
    return out;
}

std::vector<double> predict_oracle(const OracleModel& m, std::span<const double> x) {
    const OperatingPoint op{x[0], x[1], x[2]};
    return {true_energy(op, m.params), true_quality(op, m.params)};
}

} // namespace

std::size_t feature_count(const Model& model) {
    return std::visit(
        [](const auto& m) -> std::size_t {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, GbtModel>) return m.n_features;
            else if constexpr (std::is_same_v<M, KnnModel>) return m.standardized.cols();
            else return 3;
        },
        model);
}

std::size_t target_count(const Model& model) {
    return std::visit(
        [](const auto& m) -> std::size_t {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, GbtModel>) return m.outputs.size();
            else if constexpr (std::is_same_v<M, KnnModel>) return m.targets.cols();
            else return 2;
        },
        model);
}

std::string model_kind(const Model& model) {
    switch (model.index()) {
    case 0: return "gbt";
    case 1: return "knn";
    default: return "oracle";
    }
}

std::vector<double> predict_row(const Model& model, std::span<const double> x) {
    if (x.size() != feature_count(model))
        fail(ErrorCode::dimension, "query has " + std::to_string(x.size()) + " features; model expects " +
                                       std::to_string(feature_count(model)));
    return std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, GbtModel>) return predict_gbt(m, x);
            else if constexpr (std::is_same_v<M, KnnModel>) return predict_knn(m, x);
            else return predict_oracle(m, x);
        },
        model);
}

Matrix predict(const Model& model, const Matrix& features) {
    if (features.cols() != feature_count(model) && features.rows() > 0)
        fail(ErrorCode::dimension, "feature matrix width does not match model");
    Matrix out(features.rows(), target_count(model));
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const auto p = predict_row(model, features.row(i));
        std::copy(p.begin(), p.end(), out.row(i).begin());
    }
    return out;
}

std::vector<OutputMetrics> evaluate(const Model& model, const Dataset& test) {
    if (test.size() == 0) fail(ErrorCode::empty_dataset, "cannot evaluate on an empty test set");
    if (test.targets.cols() != target_count(model)) fail(ErrorCode::dimension, "target count does not match model");
    const Matrix pred = predict(model, test.features);
    const std::size_t n = test.size();
    std::vector<OutputMetrics> out;
    for (std::size_t j = 0; j < test.targets.cols(); ++j) {
        double sse = 0.0, mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += test.targets(i, j);
        mean /= static_cast<double>(n);
        double sst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = test.targets(i, j) - pred(i, j);
            sse += e * e;
            sst += (test.targets(i, j) - mean) * (test.targets(i, j) - mean);
        }
        OutputMetrics m;
        m.name = j < test.target_names.size() ? test.target_names[j] : "y" + std::to_string(j);
        m.rmse = std::sqrt(sse / static_cast<double>(n));
        if (sst > 0.0) m.r2 = 1.0 - sse / sst;
        out.push_back(std::move(m));
    }
    return out;
}

Model fit_model(const Dataset& data, const LearnerSpec& spec) {
    return std::visit(
        [&](const auto& cfg) -> Model {
            using C = std::decay_t<decltype(cfg)>;
            if constexpr (std::is_same_v<C, TrainConfig>) return fit_gbt(data, cfg);
            else return fit_knn(data, cfg);
        },
        spec);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

SelectionReport model_selection(const Dataset& data, const std::vector<Candidate>& candidates, int k_folds,
                                std::uint64_t seed) {
    data.validate();
    if (candidates.empty()) fail(ErrorCode::validation, "model selection needs at least one candidate");
    if (k_folds < 2) fail(ErrorCode::validation, "k_folds must be >= 2");
    const std::size_t n = data.size();
    if (n < static_cast<std::size_t>(k_folds)) fail(ErrorCode::validation, "fewer rows than folds");

    SelectionReport report;
    report.fold_of_row.assign(n, 0);
    const auto perm = seeded_permutation(n, seed);
    for (std::size_t pos = 0; pos < n; ++pos)
        report.fold_of_row[perm[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k_folds));

    const std::size_t outputs = data.targets.cols();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        std::vector<double> fold_rmse_sum(outputs, 0.0);
        for (int fold = 0; fold < k_folds; ++fold) {
            std::vector<std::size_t> train, test;
            for (std::size_t i = 0; i < n; ++i) (report.fold_of_row[i] == fold ? test : train).push_back(i);
            const Dataset test_set = data.subset(test);
            const Model model = fit_model(data.subset(train), candidates[c].spec);
            const auto metrics = evaluate(model, test_set);
            for (std::size_t j = 0; j < outputs; ++j) fold_rmse_sum[j] += metrics[j].rmse;
        }
        CandidateScore score;
        score.name = candidates[c].name;
        score.candidate_index = c;
        for (std::size_t j = 0; j < outputs; ++j)
            score.output_rmse.push_back(fold_rmse_sum[j] / static_cast<double>(k_folds));
        score.mean_rmse = std::accumulate(score.output_rmse.begin(), score.output_rmse.end(), 0.0) /
                          static_cast<double>(outputs);
        report.ranking.push_back(std::move(score));
    }
    std::stable_sort(report.ranking.begin(), report.ranking.end(),
                     [](const CandidateScore& a, const CandidateScore& b) { return a.mean_rmse < b.mean_rmse; });
    report.best_model = fit_model(data, candidates[report.ranking.front().candidate_index].spec);
    return report;
}

} // namespace hydrotwin
