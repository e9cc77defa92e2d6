#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crules/dataset.hpp"
#include "crules/forest.hpp"
#include "crules/projected.hpp"
#include "crules/regional.hpp"

namespace crules {

enum class SearchStrategy { exhaustive, path_sampled };

struct DivergentConfig {
  double pi = 0.9;
  int K = 10;
  SearchStrategy strategy = SearchStrategy::exhaustive;
  int sample_count = 2000;  // path_sampled: number of path subsets evaluated
  std::uint64_t seed = 0;
  std::vector<int> excluded_features;  // never enter the candidate pool
};

struct DivergentExplanation {
  std::vector<int> features;  // sorted ascending
  double cdp = 0.0;
  bool minimal = false;  // certified only by the exhaustive strategy
};

struct DivergentSearchResult {
  std::vector<DivergentExplanation> explanations;  // all share |S|; lexicographic order
  std::optional<DivergentExplanation> best_rejected;  // highest cdp when nothing reached pi
  int evaluated = 0;

  bool empty() const { return explanations.empty(); }
};

/// Top-K features by internal split count; zero-count features never appear.
/// Ties break toward the lower feature index. K larger than the number of
/// used features truncates (warning reported through the optional pointer).
std::vector<int> candidate_features(const Forest& forest, int K, std::string* warning = nullptr);

/// Minimal divergent explanations for one instance: smallest feature subsets
/// whose CDP reaches pi, searched over the top-K candidate features.
DivergentSearchResult minimal_divergent(const Forest& forest, const Dataset& train,
                                        std::span<const double> x, const TargetSet& target,
                                        const DivergentConfig& config);

/// Rule variant: objective is the region CDP of R.
DivergentSearchResult minimal_divergent_rule(const Forest& forest, const Dataset& train,
                                             const Hyperrectangle& region,
                                             const TargetSet& target,
                                             const DivergentConfig& config);

}  // namespace crules
