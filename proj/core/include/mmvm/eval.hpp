#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mmvm/matrix.hpp"

namespace mmvm::eval {

struct AurocResult {
  double value = 0.5;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

/// Mann-Whitney AUROC with midranks for tied scores. Labels are 0/1.
/// Throws DegenerateMetricError when only one class is present.
AurocResult auroc(std::span<const double> scores, std::span<const double> labels);

/// Unweighted mean of per-label AUROC over the labels where both classes are
/// present; `defined` receives how many labels contributed.
double macro_auroc(const Matrix& scores, const Matrix& labels, std::size_t* defined = nullptr);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // positive fraction of the training rows reaching the node
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(std::span<const double> x) const;
  std::size_t depth() const;
};

struct ForestConfig {
  std::size_t n_estimators = 100;
  std::size_t max_depth = 10;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct RandomForest {
  std::vector<DecisionTree> trees;
  std::size_t n_features = 0;
  ForestConfig config;
};

/// Bootstrap-aggregated Gini trees with ceil(sqrt(d)) candidate features per
/// node. Trees grow breadth-first and each tree's randomness comes from its
/// own seed derived from config.seed, so results do not depend on threads.
RandomForest rf_train(const Matrix& features, std::span<const double> labels,
                      const ForestConfig& config);

/// Mean leaf positive fraction over trees, one score per row.
std::vector<double> rf_predict(const RandomForest& forest, const Matrix& features);

/// `count` indices out of n, uniformly without replacement, returned sorted.
/// For a fixed seed smaller counts are subsets of larger ones.
std::vector<std::size_t> label_subsample(std::size_t n, std::size_t count, std::uint64_t seed);

}  // namespace mmvm::eval
