#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crules/dataset.hpp"
#include "crules/forest.hpp"
#include "crules/isolation.hpp"

namespace crules {

/// One prescribed recourse, paired with the query it answers.
struct EvalRecourse {
  std::vector<double> x;
  std::vector<double> x_cf;
  TargetSet target = TargetSet::for_class(0);
  int direction = -1;  // classification: the query's current class; -1 otherwise
};

/// Fraction of recourses whose model outcome lands in their target.
double accuracy(const Forest& model, const std::vector<EvalRecourse>& recourses);

/// Fraction scoring at or below the isolation forest's inlier threshold.
double plausibility(const IsolationForest& iforest, const std::vector<EvalRecourse>& recourses);

/// Mean number of coordinates changed.
double sparsity(const std::vector<EvalRecourse>& recourses);

/// Equal-frequency bin edges per continuous feature, fit on training data.
class CostBinner {
 public:
  CostBinner(const Dataset& train, int bins);
  int bin(int feature, double value) const;  // continuous features only
  int bins() const { return bins_; }

 private:
  std::vector<std::vector<double>> edges_;  // per feature; empty = categorical
  int bins_;
};

/// Mean per-instance cost: |bin shift| per changed continuous feature,
/// 1 per changed categorical feature.
double cost(const std::vector<EvalRecourse>& recourses, const CostBinner& binner,
            const std::vector<FeatureSpec>& features);

struct DirectionMetrics {
  double accuracy = 0.0;
  double plausibility = 0.0;
  double sparsity = 0.0;
  double cost = 0.0;
  int count = 0;
};

struct MetricReport {
  std::map<std::string, DirectionMetrics> directions;  // "pos", "neg", "all"
  int failed_instances = 0;      // no rule / no recourse produced
  int degenerate_instances = 0;  // target already met
  std::string config_fingerprint;

  std::string to_json() const;
  std::string to_table() const;  // Pos / Neg layout
};

/// Grouped metric report: positive class = 1 (recourses moving away from it
/// are the "pos" direction), negative class = 0.
MetricReport build_metric_report(const Forest& model, const IsolationForest& iforest,
                                 const std::vector<EvalRecourse>& recourses,
                                 const CostBinner& binner,
                                 const std::vector<FeatureSpec>& features);

/// Produces a recourse for a query row: (x_cf, changed dims), or nullopt.
using RecourseFn =
    std::function<std::optional<std::pair<std::vector<double>, std::vector<int>>>(int)>;

struct StabilityOptions {
  std::vector<double> sigmas{0.01, 0.025, 0.05};  // noise standard deviations
  int trials = 5;
  std::uint64_t seed = 0;
};

struct StabilityRow {
  double sigma = 0.0;
  double rate = 0.0;
  int denominator = 0;
};

/// Fraction of (query, trial) pairs where the prescribed action and its
/// Gaussian-perturbed version produce the same model outcome. Perturbation
/// touches only changed coordinates and clips to [0,1]; callers are expected
/// to work in min-max normalized space.
std::vector<StabilityRow> stability(const Forest& model, const Dataset& queries,
                                    const std::vector<int>& query_rows,
                                    const RecourseFn& recourse_fn, const TargetSet& target,
                                    const StabilityOptions& options);

}  // namespace crules
