#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "model_common.hpp"
#include "ppgscreen/error.hpp"
#include "ppgscreen/models.hpp"

namespace ppgscreen {

double Tree::evaluate(std::span<const double> x) const {
  int at = 0;
  while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
    const TreeNode& n = nodes[static_cast<std::size_t>(at)];
    at = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(at)].value;
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const TreeNode& n = nodes[i];
    deepest = std::max(deepest, level[i]);
    if (!n.is_leaf()) {
      level[static_cast<std::size_t>(n.left)] = level[i] + 1;
      level[static_cast<std::size_t>(n.right)] = level[i] + 1;
    }
  }
  return deepest;
}

namespace {

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const double> grad, std::span<const double> hess,
              const GbtOptions& options)
      : x_(x), grad_(grad), hess_(hess), options_(options), goes_left_(x.rows(), 0) {}

  Tree build() {
    const std::size_t n = x_.rows(), d = x_.cols();
    // Per-feature sample orders; each node owns the sorted subsequences of
    // its own samples so no re-sorting happens below the root.
    std::vector<std::vector<std::size_t>> sorted(d, std::vector<std::size_t>(n));
    for (std::size_t f = 0; f < d; ++f) {
      std::iota(sorted[f].begin(), sorted[f].end(), std::size_t{0});
      std::stable_sort(sorted[f].begin(), sorted[f].end(),
                       [&](std::size_t a, std::size_t b) { return x_(a, f) < x_(b, f); });
    }
    std::vector<std::size_t> members(n);
    std::iota(members.begin(), members.end(), std::size_t{0});
    tree_.nodes.emplace_back();
    grow(0, std::move(members), std::move(sorted), 0);
    return std::move(tree_);
  }

 private:
  double score(double g, double h) const { return g * g / (h + options_.lambda); }

  SplitCandidate best_split(const std::vector<std::vector<std::size_t>>& sorted, double g_total,
                            double h_total) const {
    SplitCandidate best;
    const double parent = score(g_total, h_total);
    const auto min_child = static_cast<std::size_t>(std::max(options_.min_child_count, 1));
    for (std::size_t f = 0; f < sorted.size(); ++f) {
      const auto& order = sorted[f];
      const std::size_t m = order.size();
      double gl = 0.0, hl = 0.0;
      for (std::size_t k = 0; k + 1 < m; ++k) {
        gl += grad_[order[k]];
        hl += hess_[order[k]];
        const double lo = x_(order[k], f);
        const double hi = x_(order[k + 1], f);
        if (!(lo < hi)) continue;
        if (k + 1 < min_child || m - (k + 1) < min_child) continue;
        const double gain = 0.5 * (score(gl, hl) + score(g_total - gl, h_total - hl) - parent);
        // Gains equal up to rounding count as ties and keep the earlier split.
        if (gain > best.gain + 1e-12 * std::abs(best.gain)) {
          double threshold = lo + (hi - lo) / 2.0;
          if (!(threshold > lo)) threshold = hi;
          best = {static_cast<int>(f), threshold, gain};
        }
      }
    }
    // Rounding noise must not split a node whose true gain is zero.
    if (best.feature >= 0 && !(best.gain > 1e-12 * std::max(parent, 1e-300))) best.feature = -1;
    return best;
  }

  void grow(std::size_t node_index, std::vector<std::size_t> members,
            std::vector<std::vector<std::size_t>> sorted, int depth) {
    double g = 0.0, h = 0.0;
    for (std::size_t i : members) {
      g += grad_[i];
      h += hess_[i];
    }
    {
      TreeNode& node = tree_.nodes[node_index];
      node.value = -g / (h + options_.lambda);
      node.count = members.size();
    }
    if (depth >= options_.max_depth ||
        members.size() < 2 * static_cast<std::size_t>(std::max(options_.min_child_count, 1))) {
      return;
    }
    const SplitCandidate split = best_split(sorted, g, h);
    if (split.feature < 0) return;

    const auto f = static_cast<std::size_t>(split.feature);
    std::vector<std::size_t> left_members, right_members;
    for (std::size_t i : members) {
      const bool left = x_(i, f) < split.threshold;
      goes_left_[i] = left ? 1 : 0;
      (left ? left_members : right_members).push_back(i);
    }
    std::vector<std::vector<std::size_t>> left_sorted(sorted.size()), right_sorted(sorted.size());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      left_sorted[k].reserve(left_members.size());
      right_sorted[k].reserve(right_members.size());
      for (std::size_t i : sorted[k]) (goes_left_[i] ? left_sorted[k] : right_sorted[k]).push_back(i);
      std::vector<std::size_t>().swap(sorted[k]);
    }

    const auto left_index = tree_.nodes.size();
    tree_.nodes.emplace_back();
    const auto right_index = tree_.nodes.size();
    tree_.nodes.emplace_back();
    TreeNode& node = tree_.nodes[node_index];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.gain = split.gain;
    node.left = static_cast<int>(left_index);
    node.right = static_cast<int>(right_index);

    grow(left_index, std::move(left_members), std::move(left_sorted), depth + 1);
    grow(right_index, std::move(right_members), std::move(right_sorted), depth + 1);
  }

  const Matrix& x_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  const GbtOptions& options_;
  std::vector<char> goes_left_;
  Tree tree_;
};

}  // namespace

Tree build_tree(const Matrix& x, std::span<const double> grad, std::span<const double> hess,
                const GbtOptions& options) {
  return TreeBuilder(x, grad, hess, options).build();
}

GbtModel train_gbt(const Matrix& x, std::span<const int> y, const ClassWeights& weights,
                   const GbtOptions& options) {
  detail::check_training_input(x, y);
  if (options.rounds < 0 || options.max_depth < 0 || !(options.learning_rate > 0.0) ||
      !(options.lambda >= 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "invalid boosting options");
  }
  const std::size_t n = x.rows();
  std::vector<double> s(n);
  double pos = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = weights(y[i]);
    (y[i] == 1 ? pos : neg) += s[i];
  }

  GbtModel model;
  model.learning_rate = options.learning_rate;
  model.max_depth = options.max_depth;
  model.lambda = options.lambda;
  model.feature_count = x.cols();
  model.base_score = std::log(pos / neg);

  std::vector<double> margin(n, model.base_score), grad(n), hess(n);
  auto loss = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += s[i] * detail::log_loss(margin[i], y[i]);
    return total;
  };
  model.train_loss.push_back(loss());

  for (int round = 0; round < options.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = s[i] * (p - y[i]);
      hess[i] = s[i] * p * (1.0 - p);
    }
    Tree tree = build_tree(x, grad, hess, options);
    for (std::size_t i = 0; i < n; ++i) margin[i] += options.learning_rate * tree.evaluate(x.row(i));
    model.trees.push_back(std::move(tree));
    model.train_loss.push_back(loss());
  }
  return model;
}

double predict_gbt(const GbtModel& model, std::span<const double> x) {
  if (x.size() != model.feature_count) {
    throw Error(ErrorKind::LengthMismatch, "expected " + std::to_string(model.feature_count) +
                                               " features, got " + std::to_string(x.size()));
  }
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += tree.evaluate(x);
  return sigmoid(model.base_score + model.learning_rate * sum);
}

}  // namespace ppgscreen
