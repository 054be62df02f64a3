#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dfd/mat.hpp"
#include "json.hpp"

namespace dfd {

// Second-order gradient-boosted regression trees with logistic loss, exact
// greedy splits, and L2 leaf regularization. Exactness over speed: the
// few-shot sets this detector sees are tens of points.
struct GBMConfig {
  int n_trees = 200;
  int max_depth = 3;
  double learning_rate = 0.1;   // eta
  double l2_reg = 1.0;          // lambda
  double min_split_gain = 0.0;  // gamma
  double min_child_hessian = 1e-3;

  void validate() const;
};

struct TreeNode {
  int feature = -1;          // -1 marks a leaf
  double threshold = 0.0;    // go left when x < threshold (NaN also goes left)
  int left = -1;
  int right = -1;
  double leaf_weight = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double eval(const double* x) const;
};

struct TrainedGBM {
  GBMConfig config;
  double base_margin = 0.0;
  size_t n_features = 0;
  std::vector<RegressionTree> trees;
  std::vector<double> training_loss;  // mean logistic loss after each tree

  double margin(const double* x, size_t dim) const;
  double predict_proba(const double* x, size_t dim) const;

  nlohmann::json to_json() const;
  static TrainedGBM from_json(const nlohmann::json& j);
};

// p = sigmoid(margin); returns (g, h) = (p - y, p (1 - p)).
std::pair<double, double> logistic_grad_hess(double margin, double y);

// Optimal leaf weight -G / (H + lambda).
double leaf_weight(double grad_sum, double hess_sum, double lambda);

struct SplitResult {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Exact greedy: best (feature, threshold) over the node's rows by gain
//   0.5 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma,
// requiring gain > 0 and both children's hessian mass >= min_child_hessian.
// Ties break toward the lower feature index, then the lower threshold.
std::optional<SplitResult> best_split(const Mat& x, const std::vector<double>& grad,
                                      const std::vector<double>& hess,
                                      const std::vector<int>& rows, const GBMConfig& config);

// labels in {0, 1}; both classes required. base margin = log(pos/neg).
TrainedGBM train_gbm(const Mat& x, const std::vector<int>& labels, const GBMConfig& config);

// Mean logistic loss of raw margins against labels.
double logistic_loss(const std::vector<double>& margins, const std::vector<int>& labels);

}  // namespace dfd
