#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crules/dataset.hpp"

namespace crules {

struct IsolationConfig {
  int n_trees = 100;
  int psi = 256;  // subsample size per tree, capped at n
  double contamination = 0.10;
  std::uint64_t seed = 0;
};

/// Isolation forest over random axis splits; anomaly score in (0,1), larger
/// means more isolated. The inlier threshold tau is the (1 - contamination)
/// quantile of the training scores.
class IsolationForest {
 public:
  struct Node {
    int feature = -1;  // -1 marks an external node
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int size = 0;  // external node: rows that stopped here
  };
  struct ITree {
    std::vector<Node> nodes;
  };

  static IsolationForest fit(const Dataset& ds, const IsolationConfig& config);

  double score(std::span<const double> x) const;
  double mean_path_length(std::span<const double> x) const;
  bool is_inlier(std::span<const double> x) const { return score(x) <= tau_; }

  double tau() const { return tau_; }
  void set_tau(double tau) { tau_ = tau; }
  int psi() const { return psi_; }
  int n_trees() const { return static_cast<int>(trees_.size()); }

  std::string to_json() const;
  static IsolationForest from_json(const std::string& text);
  void save(const std::string& path) const;
  static IsolationForest load(const std::string& path);

  /// Average path-length normalizer c(m); c(1) = 0, c(m) grows ~ 2 ln m.
  static double average_path_length(int m);

 private:
  std::vector<ITree> trees_;
  int psi_ = 0;
  double tau_ = 0.5;
};

}  // namespace crules
