#pragma once

#include <optional>
#include <span>
#include <vector>

#include "crules/dataset.hpp"
#include "crules/forest.hpp"

namespace crules {

/// Per-tree outcome of the projected traversal: the leaves reached when
/// splits outside the conditioning set are ignored, the intersection of
/// their regions projected onto the conditioning dims, and the training rows
/// whose conditioning coordinates fall in that intersection.
struct ProjectedCell {
  std::vector<int> reached_leaves;
  Hyperrectangle region;
  std::vector<int> member_rows;
};

struct ProjectedResult {
  WeightVector weights;
  std::vector<ProjectedCell> cells;  // one per tree; empty member_rows = skipped tree
};

/// Projected-forest weights conditioning on x restricted to `cond`.
/// cond empty means conditioning on nothing: uniform weights 1/n (cells left
/// empty in that case). Rows in a tree whose projected cell is empty
/// contribute nothing; normalization runs over non-empty trees.
ProjectedResult projected_weights(const Forest& forest, const Dataset& train,
                                  const std::vector<int>& cond, std::span<const double> x);

/// Counterfactual decision probability: chance the outcome lands in `target`
/// when the features in S are resampled and the complement is held at x.
/// Estimated as the target-indicator average under projected weights
/// conditioned on the complement of S.
double cdp(const Forest& forest, const Dataset& train, std::span<const double> x,
           const std::vector<int>& S, const TargetSet& target);

/// Same-decision probability: target-indicator average conditioning on S
/// itself. Satisfies sdp(x, complement(S)) == cdp(x, S) exactly.
double sdp(const Forest& forest, const Dataset& train, std::span<const double> x,
           const std::vector<int>& S, const TargetSet& target);

std::vector<int> complement(const std::vector<int>& S, int p);

}  // namespace crules
