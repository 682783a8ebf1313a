#pragma once

#include "hydrotwin/twin.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace hydrotwin {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::vector<double> column(std::size_t c) const;

    void push_row(std::span<const double> values);
    Matrix select_rows(std::span<const std::size_t> indices) const;
    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct Dataset {
    Matrix features;
    Matrix targets;
    std::vector<std::string> feature_names;
    std::vector<std::string> target_names;

    std::size_t size() const noexcept { return features.rows(); }
    void validate() const;
    Dataset subset(std::span<const std::size_t> indices) const;
};

struct TrainConfig {
    int n_trees = 200;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_samples_leaf = 1;
    std::uint64_t seed = 7;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TreeNode {
    int feature = -1;          // -1 marks a leaf
    double threshold = 0.0;    // x[feature] <= threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;        // leaf prediction

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// CART regression tree; node 0 is the root.
struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const;
    int leaf_index(std::span<const double> x) const;
    int depth() const;
    void validate() const;
    friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

RegressionTree fit_tree(const Matrix& features, std::span<const double> residuals, const TrainConfig& config);

struct GbtOutput {
    double init_value = 0.0;
    std::vector<RegressionTree> trees;
    friend bool operator==(const GbtOutput&, const GbtOutput&) = default;
};

struct GbtModel {
    TrainConfig config;
    std::size_t n_features = 0;
    std::vector<std::string> feature_names;
    std::vector<std::string> target_names;
    std::vector<GbtOutput> outputs;   // one independent ensemble per target

    friend bool operator==(const GbtModel&, const GbtModel&) = default;
};

GbtModel fit_gbt(const Dataset& data, const TrainConfig& config);

struct KnnConfig {
    int k = 5;
    friend bool operator==(const KnnConfig&, const KnnConfig&) = default;
};

struct KnnModel {
    int k = 5;
    std::vector<double> mean;
    std::vector<double> stddev;      // 0 marks a constant feature, ignored in distances
    Matrix standardized;             // training features after standardisation
    Matrix targets;
    std::vector<std::string> feature_names;
    std::vector<std::string> target_names;

    friend bool operator==(const KnnModel&, const KnnModel&) = default;
};

KnnModel fit_knn(const Dataset& data, const KnnConfig& config);

/// Noise-free ground-truth formulas exposed as a predictor over
/// (temp_setpoint_c, dry_solids_frac, cycle_minutes) -> (energy, quality).
struct OracleModel {
    GroundTruthParams params = GroundTruthParams::noiseless();
    friend bool operator==(const OracleModel& a, const OracleModel& b) {
        return a.params.e0 == b.params.e0 && a.params.a_temp == b.params.a_temp &&
               a.params.a_cycle == b.params.a_cycle && a.params.a_ds == b.params.a_ds &&
               a.params.a_interaction == b.params.a_interaction && a.params.b_temp == b.params.b_temp &&
               a.params.b_cycle == b.params.b_cycle;
    }
};

using Model = std::variant<GbtModel, KnnModel, OracleModel>;

std::size_t feature_count(const Model& model);
std::size_t target_count(const Model& model);
std::string model_kind(const Model& model);

std::vector<double> predict_row(const Model& model, std::span<const double> x);
Matrix predict(const Model& model, const Matrix& features);

struct OutputMetrics {
    std::string name;
    double rmse = 0.0;
    std::optional<double> r2;   // absent when the targets have zero variance
};

std::vector<OutputMetrics> evaluate(const Model& model, const Dataset& test);

using LearnerSpec = std::variant<TrainConfig, KnnConfig>;

struct Candidate {
    std::string name;
    LearnerSpec spec;
};

Model fit_model(const Dataset& data, const LearnerSpec& spec);

struct CandidateScore {
    std::string name;
    std::size_t candidate_index = 0;
    double mean_rmse = 0.0;                 // cross-validated, averaged over outputs
    std::vector<double> output_rmse;        // cross-validated per output
};

struct SelectionReport {
    std::vector<CandidateScore> ranking;    // best first
    std::vector<int> fold_of_row;
    Model best_model;                       // refit on all rows
};

SelectionReport model_selection(const Dataset& data, const std::vector<Candidate>& candidates, int k_folds,
                                std::uint64_t seed);

/// Deterministic Fisher-Yates permutation driven by mt19937_64 raw output.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

} // namespace hydrotwin
