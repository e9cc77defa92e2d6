#include "crules/regional.hpp"

#include <algorithm>
#include <cmath>

namespace crules {

void Condition::set_point(int dim, double value) {
  kinds_[dim] = Kind::point;
  values_[dim] = value;
}

void Condition::set_region(int dim, double lo, double hi) {
  if (lo > hi) throw Error("condition interval has lo > hi");
  if (lo == hi) {  // degenerate interval behaves exactly like a point
    set_point(dim, lo);
    return;
  }
  kinds_[dim] = Kind::region;
  intervals_[dim] = Interval{lo, hi};
}

int Condition::constrained_count() const {
  int count = 0;
  for (auto k : kinds_)
    if (k != Kind::free) ++count;
  return count;
}

std::vector<int> Condition::filter_dims() const {
  std::vector<int> dims;
  for (int j = 0; j < p(); ++j)
    if (kinds_[j] == Kind::region) dims.push_back(j);
  return dims;
}

namespace {

std::vector<int> reached_leaves(const Tree& tree, const Condition& cond) {
  std::vector<int> leaves;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const auto& node = tree.nodes[id];
    if (node.is_leaf()) {
      leaves.push_back(id);
      continue;
    }
    switch (cond.kind(node.feature)) {
      case Condition::Kind::point:
        stack.push_back(cond.point(node.feature) <= node.threshold ? node.left : node.right);
        break;
      case Condition::Kind::region: {
        const Interval iv = cond.region(node.feature);
        if (iv.hi <= node.threshold) {
          stack.push_back(node.left);
        } else if (iv.lo > node.threshold) {
          stack.push_back(node.right);
        } else {  // lo <= t < hi: the split divides the query region
          stack.push_back(node.right);
          stack.push_back(node.left);
        }
        break;
      }
      case Condition::Kind::free:
        stack.push_back(node.right);
        stack.push_back(node.left);
        break;
    }
  }
  std::sort(leaves.begin(), leaves.end());
  return leaves;
}

bool row_passes(const Dataset& train, int row, const std::vector<int>& filter_dims,
                const Condition& cond) {
  for (int dim : filter_dims) {
    const Interval iv = cond.region(dim);
    const double v = train.at(row, dim);
    if (v < iv.lo || v > iv.hi) return false;
  }
  return true;
}

}  // namespace

std::optional<RegionalResult> regional_weights(const Forest& forest, const Dataset& train,
                                               const Condition& cond) {
  if (train.n() != forest.n_train() || train.p() != forest.p())
    throw Error("dataset does not match the forest's training data");
  if (cond.p() != forest.p()) throw Error("condition arity does not match the forest");

  const int n = train.n();
  const auto filter_dims = cond.filter_dims();

  RegionalResult result;
  std::vector<double> dense(n, 0.0);
  int nonempty_trees = 0;
  for (const auto& tree : forest.trees()) {
    RegionalTreeTrace trace;
    trace.reached_leaves = reached_leaves(tree, cond);
    for (int leaf : trace.reached_leaves) {
      for (int row : tree.nodes[leaf].sample_ids) {
        if (row_passes(train, row, filter_dims, cond)) trace.pooled_rows.push_back(row);
      }
    }
    std::sort(trace.pooled_rows.begin(), trace.pooled_rows.end());
    if (!trace.pooled_rows.empty()) ++nonempty_trees;
    result.leaf_mass += static_cast<long long>(trace.pooled_rows.size());
    result.traces.push_back(std::move(trace));
  }

  if (nonempty_trees == 0) return std::nullopt;

  for (const auto& trace : result.traces) {
    if (trace.pooled_rows.empty()) continue;
    const double w = 1.0 / (static_cast<double>(nonempty_trees) * trace.pooled_rows.size());
    for (int row : trace.pooled_rows) dense[row] += w;
  }
  result.weights = compress_weights(dense);
  return result;
}

std::optional<double> regional_indicator_average(const Forest& forest, const Dataset& train,
                                                 const Condition& cond, const TargetSet& target) {
  const auto result = regional_weights(forest, train, cond);
  if (!result) return std::nullopt;
  double acc = 0.0;
  int nonempty = 0;
  for (const auto& trace : result->traces) {
    if (trace.pooled_rows.empty()) continue;
    long long hits = 0;
    for (int row : trace.pooled_rows) hits += target.contains(train.target(row)) ? 1 : 0;
    acc += static_cast<double>(hits) / static_cast<double>(trace.pooled_rows.size());
    ++nonempty;
  }
  return acc / nonempty;
}

namespace {

Condition local_context(const Forest& forest, std::span<const double> x,
                        const std::vector<int>& S) {
  Condition cond(forest.p());
  std::vector<bool> in_s(forest.p(), false);
  for (int j : S) in_s[j] = true;
  for (int j = 0; j < forest.p(); ++j)
    if (!in_s[j]) cond.set_point(j, x[j]);
  return cond;
}

Condition region_context(const Forest& forest, const Hyperrectangle& region,
                         const std::vector<int>& S) {
  Condition cond(forest.p());
  std::vector<bool> in_s(forest.p(), false);
  for (int j : S) in_s[j] = true;
  for (const auto& [dim, iv] : region.intervals())
    if (!in_s[dim]) cond.set_region(dim, iv);
  return cond;
}

void add_rect(Condition& cond, const Hyperrectangle& rect, const std::vector<int>& S) {
  std::vector<bool> in_s(cond.p(), false);
  for (int j : S) in_s[j] = true;
  for (const auto& [dim, iv] : rect.intervals()) {
    if (!in_s[dim]) throw Error("rule rectangle constrains a feature outside S");
    if (std::isinf(iv.lo) && iv.lo < 0 && std::isinf(iv.hi) && iv.hi > 0) continue;
    cond.set_region(dim, iv);
  }
}

std::optional<CrpEstimate> crp_from_conditions(const Forest& forest, const Dataset& train,
                                               const Condition& full, const Condition& context,
                                               const TargetSet& target) {
  const auto conditioned = regional_weights(forest, train, full);
  if (!conditioned) return std::nullopt;
  const auto ctx = regional_weights(forest, train, context);

  CrpEstimate est;
  est.mass_conditioned = conditioned->leaf_mass;
  est.mass_context = ctx ? ctx->leaf_mass : 0;

  double acc = 0.0;
  int nonempty = 0;
  for (const auto& trace : conditioned->traces) {
    if (trace.pooled_rows.empty()) continue;
    long long hits = 0;
    for (int row : trace.pooled_rows) hits += target.contains(train.target(row)) ? 1 : 0;
    acc += static_cast<double>(hits) / static_cast<double>(trace.pooled_rows.size());
    ++nonempty;
  }
  est.probability = acc / nonempty;
  est.plausibility = est.mass_context > 0
                         ? static_cast<double>(est.mass_conditioned) / est.mass_context
                         : 0.0;
  return est;
}

}  // namespace

std::optional<CrpEstimate> crp_local(const Forest& forest, const Dataset& train,
                                     std::span<const double> x, const std::vector<int>& S,
                                     const Hyperrectangle& rect, const TargetSet& target) {
  Condition context = local_context(forest, x, S);
  Condition full = context;
  add_rect(full, rect, S);
  return crp_from_conditions(forest, train, full, context, target);
}

std::optional<double> cdp_rule(const Forest& forest, const Dataset& train,
                               const Hyperrectangle& region, const std::vector<int>& S,
                               const TargetSet& target) {
  const Condition cond = region_context(forest, region, S);
  if (cond.constrained_count() == 0) {
    long long hits = 0;
    for (int i = 0; i < train.n(); ++i) hits += target.contains(train.target(i)) ? 1 : 0;
    return static_cast<double>(hits) / train.n();
  }
  return regional_indicator_average(forest, train, cond, target);
}

std::optional<CrpEstimate> crp_rule(const Forest& forest, const Dataset& train,
                                    const Hyperrectangle& region, const std::vector<int>& S,
                                    const Hyperrectangle& rect, const TargetSet& target) {
  Condition context = region_context(forest, region, S);
  Condition full = context;
  add_rect(full, rect, S);
  return crp_from_conditions(forest, train, full, context, target);
}

}  // namespace crules
