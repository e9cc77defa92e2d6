#include "crules/projected.hpp"

#include <algorithm>
#include <cmath>

namespace crules {

namespace {

void check_pair(const Forest& forest, const Dataset& train) {
  if (train.n() != forest.n_train() || train.p() != forest.p())
    throw Error("dataset does not match the forest's training data");
}

/// Leaves reached when splits on dims outside `cond` send the query both ways.
std::vector<int> reached_leaves(const Tree& tree, const std::vector<bool>& in_cond,
                                std::span<const double> x) {
  std::vector<int> leaves;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const auto& node = tree.nodes[id];
    if (node.is_leaf()) {
      leaves.push_back(id);
    } else if (in_cond[node.feature]) {
      stack.push_back(x[node.feature] <= node.threshold ? node.left : node.right);
    } else {
      stack.push_back(node.right);
      stack.push_back(node.left);
    }
  }
  std::sort(leaves.begin(), leaves.end());
  return leaves;
}

Hyperrectangle projected_region(const Tree& tree, const std::vector<int>& leaves,
                                const std::vector<int>& cond) {
  Hyperrectangle region;
  for (int dim : cond) {
    Interval iv;
    for (int leaf : leaves) {
      const Interval leaf_iv = tree.nodes[leaf].region.interval(dim);
      iv.lo = std::max(iv.lo, leaf_iv.lo);
      iv.hi = std::min(iv.hi, leaf_iv.hi);
    }
    region.set(dim, iv.lo, iv.hi);
  }
  return region;
}

/// Flattened bounds of a projected region, keeping only dims that actually
/// constrain something (finite on at least one side).
struct BoundSet {
  std::vector<int> dims;
  std::vector<double> lo;
  std::vector<double> hi;

  explicit BoundSet(const Hyperrectangle& region) {
    for (const auto& [dim, iv] : region.intervals()) {
      if (std::isinf(iv.lo) && iv.lo < 0 && std::isinf(iv.hi) && iv.hi > 0) continue;
      dims.push_back(dim);
      lo.push_back(iv.lo);
      hi.push_back(iv.hi);
    }
  }

  bool contains(const Dataset& train, int row) const {
    for (std::size_t d = 0; d < dims.size(); ++d) {
      const double v = train.at(row, dims[d]);
      if (v < lo[d] || v > hi[d]) return false;
    }
    return true;
  }
};

}  // namespace

std::vector<int> complement(const std::vector<int>& S, int p) {
  std::vector<bool> in_s(p, false);
  for (int j : S) {
    if (j < 0 || j >= p) throw Error("feature index out of range: " + std::to_string(j));
    in_s[j] = true;
  }
  std::vector<int> out;
  for (int j = 0; j < p; ++j)
    if (!in_s[j]) out.push_back(j);
  return out;
}

ProjectedResult projected_weights(const Forest& forest, const Dataset& train,
                                  const std::vector<int>& cond, std::span<const double> x) {
  check_pair(forest, train);
  ProjectedResult result;
  const int n = train.n();

  if (cond.empty()) {
    result.weights.entries.reserve(n);
    for (int i = 0; i < n; ++i) result.weights.entries.emplace_back(i, 1.0 / n);
    return result;
  }

  std::vector<bool> in_cond(forest.p(), false);
  for (int j : cond) {
    if (j < 0 || j >= forest.p())
      throw Error("conditioning index out of range: " + std::to_string(j));
    in_cond[j] = true;
  }

  std::vector<double> dense(n, 0.0);
  int nonempty_trees = 0;
  for (const auto& tree : forest.trees()) {
    ProjectedCell cell;
    cell.reached_leaves = reached_leaves(tree, in_cond, x);
    cell.region = projected_region(tree, cell.reached_leaves, cond);
    const BoundSet bounds(cell.region);
    for (int i = 0; i < n; ++i)
      if (bounds.contains(train, i)) cell.member_rows.push_back(i);
    if (!cell.member_rows.empty()) ++nonempty_trees;
    result.cells.push_back(std::move(cell));
  }

  if (nonempty_trees == 0) return result;  // weights empty: no supporting rows anywhere

  for (const auto& cell : result.cells) {
    if (cell.member_rows.empty()) continue;
    const double w = 1.0 / (static_cast<double>(nonempty_trees) * cell.member_rows.size());
    for (int i : cell.member_rows) dense[i] += w;
  }
  result.weights = compress_weights(dense);
  return result;
}

namespace {

double indicator_average(const Forest& forest, const Dataset& train,
                         const std::vector<int>& cond, std::span<const double> x,
                         const TargetSet& target) {
  const int n = train.n();
  std::vector<char> hit(n);
  long long total_hits = 0;
  for (int i = 0; i < n; ++i) {
    hit[i] = target.contains(train.target(i)) ? 1 : 0;
    total_hits += hit[i];
  }
  if (cond.empty()) return static_cast<double>(total_hits) / n;

  std::vector<bool> in_cond(forest.p(), false);
  for (int j : cond) in_cond[j] = true;

  double acc = 0.0;
  int nonempty_trees = 0;
  for (const auto& tree : forest.trees()) {
    const auto leaves = reached_leaves(tree, in_cond, x);
    const BoundSet bounds(projected_region(tree, leaves, cond));
    long long members = 0, hits = 0;
    for (int i = 0; i < n; ++i) {
      if (!bounds.contains(train, i)) continue;
      ++members;
      hits += hit[i];
    }
    if (members > 0) {
      ++nonempty_trees;
      acc += static_cast<double>(hits) / static_cast<double>(members);
    }
  }
  if (nonempty_trees == 0) {
    // Off-sample query with no supporting rows in any tree: the conditioning
    // carries no information, fall back to the unconditional frequency.
    return static_cast<double>(total_hits) / n;
  }
  return acc / nonempty_trees;
}

}  // namespace

double cdp(const Forest& forest, const Dataset& train, std::span<const double> x,
           const std::vector<int>& S, const TargetSet& target) {
  check_pair(forest, train);
  return indicator_average(forest, train, complement(S, forest.p()), x, target);
}

double sdp(const Forest& forest, const Dataset& train, std::span<const double> x,
           const std::vector<int>& S, const TargetSet& target) {
  check_pair(forest, train);
  std::vector<int> cond = S;
  std::sort(cond.begin(), cond.end());
  cond.erase(std::unique(cond.begin(), cond.end()), cond.end());
  return indicator_average(forest, train, cond, x, target);
}

}  // namespace crules
