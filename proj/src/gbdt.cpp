#include "dfd/gbdt.hpp"

#include <algorithm>
#include <cmath>

#include "dfd/error.hpp"

namespace dfd {

void GBMConfig::validate() const {
  if (n_trees < 1) fail(Errc::bad_config, "n_trees must be >= 1");
  if (max_depth < 1) fail(Errc::bad_config, "max_depth must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    fail(Errc::bad_config, "learning_rate must be in (0, 1]");
  if (l2_reg < 0.0) fail(Errc::bad_config, "l2_reg must be >= 0");
  if (min_split_gain < 0.0) fail(Errc::bad_config, "min_split_gain must be >= 0");
  if (min_child_hessian < 0.0) fail(Errc::bad_config, "min_child_hessian must be >= 0");
}

double RegressionTree::eval(const double* x) const {
  int i = 0;
  for (;;) {
    const TreeNode& n = nodes[static_cast<size_t>(i)];
    if (n.feature < 0) return n.leaf_weight;
    const double v = x[n.feature];
    i = (v < n.threshold || std::isnan(v)) ? n.left : n.right;
  }
}

double TrainedGBM::margin(const double* x, size_t dim) const {
  if (dim != n_features)
    fail(Errc::shape_mismatch, "feature dimension " + std::to_string(dim) +
                                   " does not match trained dimension " +
                                   std::to_string(n_features));
  double m = base_margin;
  for (const auto& t : trees) m += config.learning_rate * t.eval(x);
  return m;
}

double TrainedGBM::predict_proba(const double* x, size_t dim) const {
  return 1.0 / (1.0 + std::exp(-margin(x, dim)));
}

std::pair<double, double> logistic_grad_hess(double margin, double y) {
  const double p = 1.0 / (1.0 + std::exp(-margin));
  return {p - y, p * (1.0 - p)};
}

double leaf_weight(double grad_sum, double hess_sum, double lambda) {
  return -grad_sum / (hess_sum + lambda);
}

double logistic_loss(const std::vector<double>& margins, const std::vector<int>& labels) {
  double total = 0.0;
  for (size_t i = 0; i < margins.size(); ++i) {
    const double m = margins[i];
    // softplus(m) - y*m, computed without overflow
    const double sp = std::max(m, 0.0) + std::log1p(std::exp(-std::fabs(m)));
    total += sp - static_cast<double>(labels[i]) * m;
  }
  return total / static_cast<double>(margins.size());
}

std::optional<SplitResult> best_split(const Mat& x, const std::vector<double>& grad,
                                      const std::vector<double>& hess,
                                      const std::vector<int>& rows, const GBMConfig& config) {
  if (rows.empty()) fail(Errc::empty_input, "best_split on an empty node");
  if (rows.size() < 2) return std::nullopt;

  double g_total = 0.0, h_total = 0.0;
  for (int r : rows) {
    g_total += grad[static_cast<size_t>(r)];
    h_total += hess[static_cast<size_t>(r)];
  }
  const double lambda = config.l2_reg;
  const double parent_score = g_total * g_total / (h_total + lambda);

  std::optional<SplitResult> best;
  std::vector<std::pair<double, int>> order(rows.size());
  for (size_t f = 0; f < x.cols(); ++f) {
    for (size_t i = 0; i < rows.size(); ++i)
      order[i] = {x(static_cast<size_t>(rows[i]), f), rows[i]};
    std::sort(order.begin(), order.end());

    double g_left = 0.0, h_left = 0.0;
    for (size_t i = 0; i + 1 < order.size(); ++i) {
      g_left += grad[static_cast<size_t>(order[i].second)];
      h_left += hess[static_cast<size_t>(order[i].second)];
      if (order[i].first == order[i + 1].first) continue;  // no boundary here

      const double g_right = g_total - g_left;
      const double h_right = h_total - h_left;
      if (h_left < config.min_child_hessian || h_right < config.min_child_hessian) continue;

      const double gain = 0.5 * (g_left * g_left / (h_left + lambda) +
                                 g_right * g_right / (h_right + lambda) - parent_score) -
                          config.min_split_gain;
      if (gain <= 0.0) continue;

      const double threshold = 0.5 * (order[i].first + order[i + 1].first);
      const bool better =
          !best || gain > best->gain ||
          (gain == best->gain && (static_cast<int>(f) < best->feature ||
                                  (static_cast<int>(f) == best->feature &&
                                   threshold < best->threshold)));
      if (better) best = SplitResult{static_cast<int>(f), threshold, gain};
    }
  }
  return best;
}

namespace {

struct BuildNode {
  std::vector<int> rows;
  int depth = 0;
  int index = 0;  // position in tree.nodes
};

}  // namespace

TrainedGBM train_gbm(const Mat& x, const std::vector<int>& labels, const GBMConfig& config) {
  config.validate();
  if (x.rows() < 2) fail(Errc::empty_input, "need at least two training rows");
  if (labels.size() != x.rows()) fail(Errc::shape_mismatch, "labels do not match rows");

  size_t n_pos = 0;
  for (int y : labels)
    if (y == 1) ++n_pos;
  const size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) fail(Errc::single_class, "training labels are single-class");

  TrainedGBM model;
  model.config = config;
  model.n_features = x.cols();
  model.base_margin = std::log(static_cast<double>(n_pos) / static_cast<double>(n_neg));

  const size_t n = x.rows();
  std::vector<double> margins(n, model.base_margin);
  std::vector<double> grad(n), hess(n);

  for (int t = 0; t < config.n_trees; ++t) {
    for (size_t i = 0; i < n; ++i) {
      const auto gh = logistic_grad_hess(margins[i], static_cast<double>(labels[i]));
      grad[i] = gh.first;
      hess[i] = gh.second;
    }

    RegressionTree tree;
    tree.nodes.emplace_back();
    std::vector<BuildNode> stack;
    {
      BuildNode root;
      root.rows.resize(n);
      for (size_t i = 0; i < n; ++i) root.rows[i] = static_cast<int>(i);
      root.depth = 0;
      root.index = 0;
      stack.push_back(std::move(root));
    }

    while (!stack.empty()) {
      BuildNode node = std::move(stack.back());
      stack.pop_back();

      std::optional<SplitResult> split;
      if (node.depth < config.max_depth)
        split = best_split(x, grad, hess, node.rows, config);

      if (!split) {
        double g = 0.0, h = 0.0;
        for (int r : node.rows) {
          g += grad[static_cast<size_t>(r)];
          h += hess[static_cast<size_t>(r)];
        }
        const double w = leaf_weight(g, h, config.l2_reg);
        tree.nodes[static_cast<size_t>(node.index)] = TreeNode{-1, 0.0, -1, -1, w};
        for (int r : node.rows)
          margins[static_cast<size_t>(r)] += config.learning_rate * w;
        continue;
      }

      BuildNode left, right;
      left.depth = right.depth = node.depth + 1;
      for (int r : node.rows) {
        if (x(static_cast<size_t>(r), static_cast<size_t>(split->feature)) < split->threshold)
          left.rows.push_back(r);
        else
          right.rows.push_back(r);
      }
      left.index = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      right.index = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes[static_cast<size_t>(node.index)] =
          TreeNode{split->feature, split->threshold, left.index, right.index, 0.0};
      stack.push_back(std::move(right));
      stack.push_back(std::move(left));
    }

    model.trees.push_back(std::move(tree));
    model.training_loss.push_back(logistic_loss(margins, labels));
  }
  return model;
}

// ---- serialization -----------------------------------------------------------

nlohmann::json TrainedGBM::to_json() const {
  nlohmann::json j;
  j["format"] = "dfd-gbm-v1";
  j["config"] = {{"n_trees", config.n_trees},
                 {"max_depth", config.max_depth},
                 {"learning_rate", config.learning_rate},
                 {"l2_reg", config.l2_reg},
                 {"min_split_gain", config.min_split_gain},
                 {"min_child_hessian", config.min_child_hessian}};
  j["base_margin"] = base_margin;
  j["n_features"] = n_features;
  j["training_loss"] = training_loss;
  j["trees"] = nlohmann::json::array();
  for (const auto& t : trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes)
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"weight", n.leaf_weight}});
    j["trees"].push_back(std::move(nodes));
  }
  return j;
}

TrainedGBM TrainedGBM::from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "dfd-gbm-v1")
    fail(Errc::corrupt_file, "not a dfd-gbm-v1 document");
  TrainedGBM m;
  const auto& c = j.at("config");
  m.config.n_trees = c.at("n_trees").get<int>();
  m.config.max_depth = c.at("max_depth").get<int>();
  m.config.learning_rate = c.at("learning_rate").get<double>();
  m.config.l2_reg = c.at("l2_reg").get<double>();
  m.config.min_split_gain = c.at("min_split_gain").get<double>();
  m.config.min_child_hessian = c.at("min_child_hessian").get<double>();
  m.base_margin = j.at("base_margin").get<double>();
  m.n_features = j.at("n_features").get<size_t>();
  m.training_loss = j.at("training_loss").get<std::vector<double>>();
  for (const auto& tj : j.at("trees")) {
    RegressionTree t;
    for (const auto& nj : tj)
      t.nodes.push_back(TreeNode{nj.at("feature").get<int>(), nj.at("threshold").get<double>(),
                                 nj.at("left").get<int>(), nj.at("right").get<int>(),
                                 nj.at("weight").get<double>()});
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace dfd
