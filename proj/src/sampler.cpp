#include "crules/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "crules/rng.hpp"

namespace crules {

namespace {

/// Per-coordinate empirical pools {X_ij : X_i,S inside the rectangle}.
std::vector<std::vector<double>> value_pools(const Dataset& train, const std::vector<int>& S,
                                             const Hyperrectangle& rect, int rect_index) {
  std::vector<int> inside;
  for (int i = 0; i < train.n(); ++i)
    if (rect.contains(train.row(i))) inside.push_back(i);

  std::vector<std::vector<double>> pools(S.size());
  for (std::size_t d = 0; d < S.size(); ++d) {
    pools[d].reserve(inside.size());
    for (int i : inside) pools[d].push_back(train.at(i, S[d]));
    if (pools[d].empty())
      throw PoolError(rect_index, S[d],
                      "empty value pool for feature " + train.feature(S[d]).name +
                          " in rule rectangle " + std::to_string(rect_index) +
                          "; the rule has no data support");
  }
  return pools;
}

}  // namespace

Recourse sample_recourse(std::span<const double> x, const std::vector<int>& S,
                         const CounterfactualRule& rule, const Dataset& train,
                         const IsolationForest& iforest, const AnnealingConfig& config,
                         AnnealingTrace* trace) {
  if (rule.empty()) throw Error("cannot sample from an empty rule");
  if (config.max_iter < 1) throw Error("max_iter must be >= 1");
  if (S.empty()) throw Error("subset S is empty");

  // Highest-plausibility rectangle first; fall through on missing pools.
  int rect_index = -1;
  std::vector<std::vector<double>> pools;
  std::optional<PoolError> first_failure;
  for (std::size_t r = 0; r < rule.rectangles.size(); ++r) {
    try {
      pools = value_pools(train, S, rule.rectangles[r].box, static_cast<int>(r));
      rect_index = static_cast<int>(r);
      break;
    } catch (const PoolError& e) {
      if (!first_failure) first_failure = e;
    }
  }
  if (rect_index < 0) throw *first_failure;

  Rng rng(config.seed);
  std::vector<double> current(x.begin(), x.end());
  for (std::size_t d = 0; d < S.size(); ++d)
    current[S[d]] = pools[d][rng.uniform_index(pools[d].size())];

  double current_energy = iforest.score(current);
  std::vector<double> best = current;
  double best_energy = current_energy;
  if (trace) trace->best_energy.push_back(best_energy);

  double temperature = config.t0;
  std::vector<double> proposal = current;
  for (int it = 1; it < config.max_iter; ++it) {
    proposal = current;
    // Uniformly random nonempty subset of S (coordinate coin flips,
    // conditioned on at least one pick).
    std::vector<char> pick(S.size(), 0);
    bool any = false;
    while (!any)
      for (auto& b : pick) any |= (b = static_cast<char>(rng.next() & 1));
    for (std::size_t d = 0; d < S.size(); ++d)
      if (pick[d]) proposal[S[d]] = pools[d][rng.uniform_index(pools[d].size())];

    const double proposal_energy = iforest.score(proposal);
    const double delta = proposal_energy - current_energy;
    if (trace) ++trace->proposals;
    bool accept = false;
    if (delta < 0) {
      accept = true;
    } else if (delta > 0 && temperature > 0 &&
               std::exp(-delta / temperature) > rng.uniform()) {
      accept = true;
    }
    if (accept) {
      current.swap(proposal);
      current_energy = proposal_energy;
      if (trace) trace->accepted_deltas.push_back(delta);
      if (current_energy < best_energy) {
        best = current;
        best_energy = current_energy;
      }
    }
    if (trace) trace->best_energy.push_back(best_energy);
    temperature *= config.cooling;
  }

  Recourse recourse;
  recourse.x_cf = std::move(best);
  recourse.changed = S;
  std::sort(recourse.changed.begin(), recourse.changed.end());
  recourse.energy = best_energy;
  recourse.rule_rect_index = rect_index;
  return recourse;
}

std::vector<double> l1_project(std::span<const double> x, const Hyperrectangle& rect,
                               const std::vector<FeatureSpec>& features) {
  std::vector<double> out(x.begin(), x.end());
  for (const auto& [dim, iv] : rect.intervals()) {
    if (dim >= static_cast<int>(out.size())) throw Error("rectangle dim out of range");
    double v = std::max(iv.lo, std::min(iv.hi, out[dim]));
    if (dim < static_cast<int>(features.size()) && features[dim].is_categorical()) {
      // Snap to the nearest integer code inside the interval; ties go low.
      const double lo_code = std::ceil(iv.lo);
      const double hi_code = std::floor(iv.hi);
      if (lo_code > hi_code) throw Error("interval holds no category code");
      double code = std::floor(v + 0.5);
      if (code - v == 0.5) code = std::floor(v);  // tie toward the lower code
      code = std::max(lo_code, std::min(hi_code, code));
      v = code;
    }
    out[dim] = v;
  }
  return out;
}

}  // namespace crules
