#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "ppgscreen/matrix.hpp"

namespace ppgscreen {

/// Per-class loss multipliers, w_c = N / (2 * N_c).
struct ClassWeights {
  double w0 = 1.0;
  double w1 = 1.0;

  double operator()(int label) const { return label == 1 ? w1 : w0; }
};

/// Throws Error{EmptyClass} when either count is zero.
ClassWeights balanced_weights(std::size_t n0, std::size_t n1);

/// Per-feature standardization statistics.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> scale;     // 1 for constant features
  std::vector<bool> constant;

  /// Weighted mean and (population) standard deviation of each column.
  static Scaler fit(const Matrix& x, std::span<const double> sample_weights);

  std::vector<double> transform(std::span<const double> x) const;
};

// --- L1-penalized logistic regression --------------------------------------

struct LogRegOptions {
  double lambda = 1.0;
  double tolerance = 1e-6;  // max coordinate step per sweep
  int max_sweeps = 1000;
};

/// Weights live in standardized feature space; `scaler` maps raw inputs there.
struct LogRegModel {
  std::vector<double> weights;
  double intercept = 0.0;
  Scaler scaler;
  double penalty_strength = 0.0;
  int sweeps = 0;
  bool converged = false;
};

/// Minimizes sum_i s_i * logloss(y_i, sigmoid(w.z_i + b)) + lambda * |w|_1
/// with z the standardized inputs and s_i the class weight of sample i, by
/// cyclic coordinate descent (Newton step, soft-threshold, backtracking).
/// Throws Error{SingleClass} or Error{NonFinite}.
LogRegModel train_logreg(const Matrix& x, std::span<const int> y, const ClassWeights& weights,
                         const LogRegOptions& options = {});

/// Throws Error{LengthMismatch} when x has the wrong length.
double predict_logreg(const LogRegModel& model, std::span<const double> x);

// --- Gradient-boosted trees -------------------------------------------------

struct GbtOptions {
  int rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 30;
  double lambda = 1.0;  // L2 penalty on leaf scores
  int min_child_count = 1;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] < threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // -G / (H + lambda); the prediction when this is a leaf
  double gain = 0.0;
  std::size_t count = 0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double evaluate(std::span<const double> x) const;
  int depth() const;
};

struct GbtModel {
  std::vector<Tree> trees;
  double learning_rate = 0.1;
  int max_depth = 30;
  double lambda = 1.0;
  double base_score = 0.0;  // prior log-odds
  std::size_t feature_count = 0;
  /// Weighted training log-loss: entry 0 before any tree, entry r after r trees.
  std::vector<double> train_loss;
};

/// Exact greedy split search on gradient g = s(p - y), hessian h = s p(1-p).
/// Ties on gain go to the lowest feature index, then the lowest threshold.
Tree build_tree(const Matrix& x, std::span<const double> grad, std::span<const double> hess,
                const GbtOptions& options);

/// Throws Error{SingleClass} or Error{NonFinite}.
GbtModel train_gbt(const Matrix& x, std::span<const int> y, const ClassWeights& weights,
                   const GbtOptions& options = {});

/// sigmoid(base_score + learning_rate * sum of tree outputs)
double predict_gbt(const GbtModel& model, std::span<const double> x);

// --- Either model -----------------------------------------------------------

enum class ModelKind { LogisticRegression, GradientBoosting };

std::string_view to_string(ModelKind kind);

using TrainedModel = std::variant<LogRegModel, GbtModel>;

double predict(const TrainedModel& model, std::span<const double> x);

double sigmoid(double z);

}  // namespace ppgscreen
