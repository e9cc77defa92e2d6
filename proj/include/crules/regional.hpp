#pragma once

#include <optional>
#include <span>
#include <vector>

#include "crules/dataset.hpp"
#include "crules/forest.hpp"

namespace crules {

/// Mixed per-feature conditioning: fixed value, interval, or unconstrained.
/// A degenerate interval [v, v] routes and pools exactly like point(v).
class Condition {
 public:
  enum class Kind { free, point, region };

  explicit Condition(int p) : kinds_(p, Kind::free), values_(p, 0.0), intervals_(p) {}

  void set_point(int dim, double value);
  void set_region(int dim, double lo, double hi);
  void set_region(int dim, Interval iv) { set_region(dim, iv.lo, iv.hi); }
  void set_free(int dim) { kinds_[dim] = Kind::free; }

  int p() const { return static_cast<int>(kinds_.size()); }
  Kind kind(int dim) const { return kinds_[dim]; }
  double point(int dim) const { return values_[dim]; }
  Interval region(int dim) const { return intervals_[dim]; }
  int constrained_count() const;

  /// Dims whose interval can exclude rows (region with lo < hi).
  std::vector<int> filter_dims() const;

 private:
  std::vector<Kind> kinds_;
  std::vector<double> values_;
  std::vector<Interval> intervals_;
};

struct RegionalTreeTrace {
  std::vector<int> reached_leaves;  // node ids, sorted
  std::vector<int> pooled_rows;     // rows surviving the condition-box filter, sorted
};

struct RegionalResult {
  WeightVector weights;
  long long leaf_mass = 0;  // pooled row count summed over trees
  std::vector<RegionalTreeTrace> traces;
};

/// Regional-forest traversal: point conditions route as usual, interval
/// conditions go left when hi <= t, right when lo > t, and both ways when
/// the threshold falls inside [lo, hi). Rows of the reached leaves are
/// filtered by the non-degenerate interval constraints before pooling.
/// Returns nullopt when every tree pools zero rows (empty support).
/// An all-free condition is accepted and means conditioning on nothing.
std::optional<RegionalResult> regional_weights(const Forest& forest, const Dataset& train,
                                               const Condition& cond);

struct CrpEstimate {
  double probability = 0.0;
  double plausibility = 0.0;
  long long mass_conditioned = 0;  // pooled mass under the full condition
  long long mass_context = 0;      // pooled mass under the context-only condition
};

/// Counterfactual-rule probability for one instance: P(Y in target | X_S in
/// rect, X_complement = x_complement), with plausibility the pooled-mass
/// ratio of the constrained traversal to the context-only traversal.
std::optional<CrpEstimate> crp_local(const Forest& forest, const Dataset& train,
                                     std::span<const double> x, const std::vector<int>& S,
                                     const Hyperrectangle& rect, const TargetSet& target);

/// CDP for a region: condition on R's intervals over supp(R) minus S.
/// No constraints left means the unconditional target frequency.
std::optional<double> cdp_rule(const Forest& forest, const Dataset& train,
                               const Hyperrectangle& region, const std::vector<int>& S,
                               const TargetSet& target);

/// CRP for a region rule: rect intervals on S, R's intervals on the rest.
std::optional<CrpEstimate> crp_rule(const Forest& forest, const Dataset& train,
                                    const Hyperrectangle& region, const std::vector<int>& S,
                                    const Hyperrectangle& rect, const TargetSet& target);

/// Target-indicator average under a condition (shared by the crp/cdp ops).
std::optional<double> regional_indicator_average(const Forest& forest, const Dataset& train,
                                                 const Condition& cond, const TargetSet& target);

}  // namespace crules
