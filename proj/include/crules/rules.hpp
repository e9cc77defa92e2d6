#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crules/dataset.hpp"
#include "crules/forest.hpp"
#include "crules/regional.hpp"

namespace crules {

struct RuleRectangle {
  Hyperrectangle box;  // supported exactly on S (unsplit dims carry infinite bounds)
  double crp = 0.0;
  double plausibility = 0.0;
  std::vector<int> merged_from;  // indices into the possible-leaf list
};

struct RuleDiagnostics {
  int candidates = 0;
  int possible = 0;
  std::optional<Hyperrectangle> best_candidate;  // highest-crp candidate when rule is empty
  double best_candidate_crp = -1.0;
};

struct CounterfactualRule {
  enum class Scope { local, regional };

  Scope scope = Scope::local;
  std::vector<double> query;  // local scope
  Hyperrectangle region;      // regional scope
  std::vector<int> subset;    // S, sorted
  std::vector<RuleRectangle> rectangles;  // plausibility-descending, pairwise disjoint
  TargetSet target = TargetSet::for_class(0);
  double pi_c = 0.9;
  bool target_already_met = false;
  RuleDiagnostics diagnostics;

  bool empty() const { return rectangles.empty(); }
};

/// S-projections of every leaf holding at least one support row, deduplicated,
/// with unsplit S dims materialized as infinite intervals.
std::vector<Hyperrectangle> candidate_leaves(const Forest& forest,
                                             const std::vector<int>& support_rows,
                                             const std::vector<int>& S);

/// Fixpoint pairwise merge: two boxes combine when they agree on all but one
/// dim and overlap or share an endpoint there. The union of the output equals
/// the union of the input.
std::vector<Hyperrectangle> merge_rectangles(const std::vector<Hyperrectangle>& rects);

struct TracedRect {
  Hyperrectangle box;
  std::vector<int> sources;  // input indices merged into this box
};
std::vector<TracedRect> merge_rectangles_traced(const std::vector<Hyperrectangle>& rects);

CounterfactualRule build_local_rule(const Forest& forest, const Dataset& train,
                                    std::span<const double> x, const std::vector<int>& S,
                                    const TargetSet& target, double pi_c);

CounterfactualRule build_regional_rule(const Forest& forest, const Dataset& train,
                                       const Hyperrectangle& region, const std::vector<int>& S,
                                       const TargetSet& target, double pi_c);

/// {scope, S, rectangles, crp, plausibility, target, pi_c} plus category
/// labels for categorical dims (their code sets under each interval).
std::string rule_to_json(const CounterfactualRule& rule, const std::vector<FeatureSpec>& features);

}  // namespace crules
