#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crules/dataset.hpp"

namespace crules {

/// Sparse nonnegative weights over training rows; entries sorted by row id.
/// When nonempty the weights sum to 1 (within float accumulation error).
struct WeightVector {
  std::vector<std::pair<int, double>> entries;

  double sum() const {
    double total = 0.0;
    for (const auto& [id, w] : entries) total += w;
    return total;
  }
  double at(int row) const {
    for (const auto& [id, w] : entries)
      if (id == row) return w;
    return 0.0;
  }
  bool operator==(const WeightVector& other) const { return entries == other.entries; }
};

WeightVector compress_weights(const std::vector<double>& dense);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<int> sample_ids;  // leaf: training rows routed here (sorted)
  std::vector<double> value;    // leaf: class frequencies, or {mean target}
  Hyperrectangle region;        // leaf: box accumulated along the path

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // preorder, root at index 0

  /// Leaf node id reached by x under `x_j <= t goes left` routing.
  int descend(std::span<const double> x) const;
  std::vector<int> leaf_ids() const;
};

struct ForestConfig {
  int n_trees = 20;
  int max_depth = 10;
  int min_leaf = -1;  // -1: 1 for classification, 5 for regression
  int mtry = -1;      // -1: sqrt(p) for classification, max(1, p/3) for regression
  bool bootstrap = true;
  bool mtry_per_tree = false;  // sample the feature subset once per tree instead of per node
  int n_jobs = 1;
  std::uint64_t seed = 0;
};

/// CART random forest. Trees are grown on bootstrap resamples, then every
/// leaf is re-populated with the full training set so that leaf values,
/// point weights and the projected/regional estimators all see the same rows.
class Forest {
 public:
  Forest(std::vector<Tree> trees, TaskKind task, int p, int n_train, int n_classes,
         std::uint64_t seed);

  static Forest train(const Dataset& ds, const ForestConfig& config);

  TaskKind task() const { return task_; }
  int p() const { return p_; }
  int n_train() const { return n_train_; }
  int n_classes() const { return n_classes_; }
  int n_trees() const { return static_cast<int>(trees_.size()); }
  std::uint64_t seed() const { return seed_; }
  const std::vector<Tree>& trees() const { return trees_; }

  /// Mean of per-tree leaf values: class-probability vector, or {value}.
  std::vector<double> predict(std::span<const double> x) const;
  double predict_value(std::span<const double> x) const;  // regression convenience
  int predict_class(std::span<const double> x) const;     // argmax, ties to lowest

  /// True iff the forest's outcome at x lies in the target set.
  bool prediction_in_target(std::span<const double> x, const TargetSet& target) const;

  WeightVector point_weights(std::span<const double> x) const;

  /// Internal split counts per feature, summed across trees.
  std::vector<long long> split_frequency() const;

  std::string to_json() const;
  static Forest from_json(const std::string& text);
  void save(const std::string& path) const;
  static Forest load(const std::string& path);

 private:
  std::vector<Tree> trees_;
  TaskKind task_;
  int p_;
  int n_train_;
  int n_classes_;  // 0 for regression
  std::uint64_t seed_;
};

}  // namespace crules
