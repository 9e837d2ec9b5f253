#include "mmvm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "mmvm/error.hpp"
#include "mmvm/rng.hpp"

namespace mmvm::eval {

AurocResult auroc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) {
    throw ConformanceError("auroc: " + std::to_string(scores.size()) + " scores but " +
                           std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  AurocResult r;
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // ranks i+1 .. j share the midrank
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] > 0.5) {
        pos_rank_sum += midrank;
        ++r.n_pos;
      } else {
        ++r.n_neg;
      }
    }
    i = j;
  }
  if (r.n_pos == 0 || r.n_neg == 0) {
    throw DegenerateMetricError("auroc undefined: labels contain a single class");
  }
  const double np = static_cast<double>(r.n_pos), nn = static_cast<double>(r.n_neg);
  r.value = (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
  return r;
}

double macro_auroc(const Matrix& scores, const Matrix& labels, std::size_t* defined) {
  if (scores.rows != labels.rows || scores.cols != labels.cols) {
    throw ConformanceError("macro_auroc: score and label matrices differ in shape");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t l = 0; l < scores.cols; ++l) {
    const auto s = scores.column(l);
    const auto y = labels.column(l);
    try {
      total += auroc(s, y).value;
      ++count;
    } catch (const DegenerateMetricError&) {
    }
  }
  if (defined) *defined = count;
  if (count == 0) throw DegenerateMetricError("macro_auroc: no label has both classes");
  return total / static_cast<double>(count);
}

double DecisionTree::predict(std::span<const double> x) const {
  int i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[i].value;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

double gini(double pos, double total) {
  if (total <= 0.0) return 0.0;
  const double p = pos / total;
  return 2.0 * p * (1.0 - p);
}

DecisionTree grow_tree(const Matrix& x, std::span<const double> y, std::size_t max_depth,
                       std::uint64_t seed) {
  const std::size_t n = x.rows, d = x.cols;
  const std::size_t n_try = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
  Rng rng(seed);

  std::vector<std::size_t> rows(n);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (auto& r : rows) r = pick(rng);

  struct Pending {
    int node;
    std::vector<std::size_t> rows;
    std::size_t depth;
  };
  DecisionTree tree;
  tree.nodes.emplace_back();
  std::deque<Pending> queue;
  queue.push_back({0, std::move(rows), 0});

  std::vector<std::size_t> features(d);
  std::vector<std::pair<double, double>> column;  // (value, label)
  while (!queue.empty()) {
    Pending job = std::move(queue.front());
    queue.pop_front();
    const double total = static_cast<double>(job.rows.size());
    double pos = 0.0;
    for (std::size_t r : job.rows) pos += y[r];
    tree.nodes[job.node].value = total > 0 ? pos / total : 0.0;
    if (job.depth >= max_depth || job.rows.size() < 2 || pos == 0.0 || pos == total) continue;

    std::iota(features.begin(), features.end(), std::size_t{0});
    for (std::size_t i = 0; i < n_try; ++i) {
      std::uniform_int_distribution<std::size_t> f(i, d - 1);
      std::swap(features[i], features[f(rng)]);
    }

    Split best;
    best.impurity = gini(pos, total);
    for (std::size_t t = 0; t < n_try; ++t) {
      const std::size_t f = features[t];
      column.clear();
      for (std::size_t r : job.rows) column.emplace_back(x(r, f), y[r]);
      std::sort(column.begin(), column.end());
      double left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_pos += column[i].second;
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1), nr = total - nl;
        const double imp = (nl * gini(left_pos, nl) + nr * gini(pos - left_pos, nr)) / total;
        if (imp < best.impurity - 1e-12) {
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (column[i].first + column[i + 1].first);
          best.impurity = imp;
        }
      }
    }
    if (best.feature < 0) continue;

    std::vector<std::size_t> left, right;
    for (std::size_t r : job.rows) {
      (x(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(r);
    }
    const int li = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[job.node];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = li;
    node.right = li + 1;
    queue.push_back({li, std::move(left), job.depth + 1});
    queue.push_back({li + 1, std::move(right), job.depth + 1});
  }
  return tree;
}

}  // namespace

RandomForest rf_train(const Matrix& features, std::span<const double> labels,
                      const ForestConfig& config) {
  if (features.rows != labels.size()) {
    throw ConformanceError("rf_train: feature rows and label count differ");
  }
  if (features.rows < 2) throw ContractError("rf_train: need at least 2 rows");
  if (features.cols == 0) throw ContractError("rf_train: need at least one feature");
  if (config.n_estimators == 0) throw ContractError("rf_train: n_estimators must be positive");
  std::size_t pos = 0;
  for (double v : labels) {
    if (v != 0.0 && v != 1.0) throw ContractError("rf_train: labels must be 0 or 1");
    pos += v == 1.0 ? 1 : 0;
  }
  if (pos == 0 || pos == labels.size()) {
    throw ContractError("rf_train: labels contain a single class");
  }

  RandomForest forest;
  forest.n_features = features.cols;
  forest.config = config;
  forest.trees.resize(config.n_estimators);
  auto build = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t t = begin; t < config.n_estimators; t += stride) {
      forest.trees[t] = grow_tree(features, labels, config.max_depth, derive_seed(config.seed, "tree", t));
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(config.threads, 1, config.n_estimators);
  if (workers == 1) {
    build(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(build, w, workers);
  }
  return forest;
}

std::vector<double> rf_predict(const RandomForest& forest, const Matrix& features) {
  if (features.cols != forest.n_features) {
    throw ConformanceError("rf_predict: forest trained on " + std::to_string(forest.n_features) +
                           " features, got " + std::to_string(features.cols));
  }
  std::vector<double> out(features.rows, 0.0);
  const double inv = 1.0 / static_cast<double>(forest.trees.size());
  for (std::size_t r = 0; r < features.rows; ++r) {
    double s = 0.0;
    for (const auto& t : forest.trees) s += t.predict(features.row(r));
    out[r] = s * inv;
  }
  return out;
}

std::vector<std::size_t> label_subsample(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (count > n) {
    throw ContractError("label_subsample: asked for " + std::to_string(count) + " of " +
                        std::to_string(n) + " samples");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "label-subsample"));
  std::shuffle(perm.begin(), perm.end(), rng);
  perm.resize(count);
  std::sort(perm.begin(), perm.end());
  return perm;
}

}  // namespace mmvm::eval
