#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "crules/dataset.hpp"
#include "crules/isolation.hpp"
#include "crules/rules.hpp"

namespace crules {

struct AnnealingConfig {
  int max_iter = 1000;  // total states visited; 1 means return the initialization
  double t0 = 1.0;
  double cooling = 0.95;
  std::uint64_t seed = 0;
};

struct Recourse {
  std::vector<double> x_cf;
  std::vector<int> changed;  // the sampled coordinates (the rule's S)
  double energy = 0.0;       // isolation-forest anomaly score of x_cf
  int rule_rect_index = 0;   // which rectangle of the rule was used
};

/// Diagnostics captured during annealing; used by the property tests.
struct AnnealingTrace {
  std::vector<double> best_energy;      // after every visited state
  std::vector<double> accepted_deltas;  // delta of every accepted move
  int proposals = 0;
};

/// Raised when a rule rectangle has no training rows to sample a coordinate
/// from (the rule is implausible).
class PoolError : public Error {
 public:
  PoolError(int rect_index, int feature, const std::string& message)
      : Error(message), rect_index(rect_index), feature(feature) {}
  int rect_index;
  int feature;
};

/// Draw a concrete counterfactual from a rule: initialize each S coordinate
/// from the marginal of rows inside the rectangle, then anneal subsets of S
/// toward low anomaly score, tracking the best state. Coordinates outside S
/// never change.
Recourse sample_recourse(std::span<const double> x, const std::vector<int>& S,
                         const CounterfactualRule& rule, const Dataset& train,
                         const IsolationForest& iforest, const AnnealingConfig& config,
                         AnnealingTrace* trace = nullptr);

/// Elementwise clamp of x onto the rectangle: max(lo, min(hi, x)) on the
/// supported dims, identity elsewhere. Categorical dims snap to the nearest
/// category code inside the interval.
std::vector<double> l1_project(std::span<const double> x, const Hyperrectangle& rect,
                               const std::vector<FeatureSpec>& features);

}  // namespace crules
