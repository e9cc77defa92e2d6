#include "crules/divergent.hpp"

#include <algorithm>
#include <set>

#include "crules/rng.hpp"

namespace crules {

std::vector<int> candidate_features(const Forest& forest, int K, std::string* warning) {
  if (K < 1) throw Error("K must be >= 1");
  const auto counts = forest.split_frequency();
  std::vector<int> used;
  for (int j = 0; j < forest.p(); ++j)
    if (counts[j] > 0) used.push_back(j);
  std::stable_sort(used.begin(), used.end(),
                   [&](int a, int b) { return counts[a] > counts[b]; });
  if (K > static_cast<int>(used.size())) {
    if (warning)
      *warning = "K=" + std::to_string(K) + " exceeds the " + std::to_string(used.size()) +
                 " features used by the forest; truncated";
    K = static_cast<int>(used.size());
  }
  used.resize(K);
  return used;
}

namespace {

using Objective = std::function<std::optional<double>(const std::vector<int>&)>;

DivergentSearchResult search_subsets(const Forest& forest, const DivergentConfig& config,
                                     const Objective& objective) {
  std::string warning;
  std::vector<int> candidates = candidate_features(forest, config.K, &warning);
  if (!config.excluded_features.empty()) {
    std::erase_if(candidates, [&](int j) {
      return std::find(config.excluded_features.begin(), config.excluded_features.end(), j) !=
             config.excluded_features.end();
    });
  }
  std::sort(candidates.begin(), candidates.end());

  DivergentSearchResult result;
  auto consider = [&](const std::vector<int>& subset) -> std::optional<DivergentExplanation> {
    const auto value = objective(subset);
    ++result.evaluated;
    if (!value) return std::nullopt;
    DivergentExplanation expl{subset, *value, false};
    if (!result.best_rejected || *value > result.best_rejected->cdp)
      result.best_rejected = expl;
    if (*value >= config.pi) return expl;
    return std::nullopt;
  };

  if (config.strategy == SearchStrategy::exhaustive) {
    const int c = static_cast<int>(candidates.size());
    for (int size = 1; size <= c; ++size) {
      // Lexicographic combination enumeration over the sorted candidate set.
      std::vector<int> idx(size);
      for (int i = 0; i < size; ++i) idx[i] = i;
      while (true) {
        std::vector<int> subset(size);
        for (int i = 0; i < size; ++i) subset[i] = candidates[idx[i]];
        if (auto expl = consider(subset)) {
          expl->minimal = true;
          result.explanations.push_back(std::move(*expl));
        }
        int i = size - 1;
        while (i >= 0 && idx[i] == c - size + i) --i;
        if (i < 0) break;
        ++idx[i];
        for (int k = i + 1; k < size; ++k) idx[k] = idx[k - 1] + 1;
      }
      if (!result.explanations.empty()) break;  // smallest achieving size found
    }
  } else {
    // Subsets that appear along root-to-leaf decision paths; by construction
    // they combine variables the forest actually splits on together.
    std::set<std::vector<int>> path_sets;
    for (const auto& tree : forest.trees()) {
      std::vector<std::pair<int, std::vector<int>>> stack{{0, {}}};
      while (!stack.empty()) {
        auto [id, features] = std::move(stack.back());
        stack.pop_back();
        const auto& node = tree.nodes[id];
        if (node.is_leaf()) {
          std::sort(features.begin(), features.end());
          features.erase(std::unique(features.begin(), features.end()), features.end());
          if (!features.empty() && static_cast<int>(features.size()) <= config.K)
            path_sets.insert(std::move(features));
          continue;
        }
        auto with_feature = features;
        with_feature.push_back(node.feature);
        stack.emplace_back(node.left, with_feature);
        stack.emplace_back(node.right, std::move(with_feature));
      }
    }
    std::vector<std::vector<int>> pool(path_sets.begin(), path_sets.end());
    if (static_cast<int>(pool.size()) > config.sample_count) {
      Rng rng(config.seed);
      rng.shuffle(pool);
      pool.resize(config.sample_count);
      std::sort(pool.begin(), pool.end());
    }
    std::size_t best_size = 0;
    for (const auto& subset : pool) {
      if (!result.explanations.empty() && subset.size() > best_size) continue;
      if (auto expl = consider(subset)) {
        if (result.explanations.empty() || subset.size() < best_size) {
          result.explanations.clear();
          best_size = subset.size();
        }
        result.explanations.push_back(std::move(*expl));
      }
    }
  }

  std::sort(result.explanations.begin(), result.explanations.end(),
            [](const DivergentExplanation& a, const DivergentExplanation& b) {
              return a.features < b.features;
            });
  if (!result.explanations.empty()) result.best_rejected.reset();
  return result;
}

}  // namespace

DivergentSearchResult minimal_divergent(const Forest& forest, const Dataset& train,
                                        std::span<const double> x, const TargetSet& target,
                                        const DivergentConfig& config) {
  if (!(config.pi > 0.0 && config.pi <= 1.0)) throw Error("pi must lie in (0, 1]");
  return search_subsets(forest, config, [&](const std::vector<int>& subset) {
    return std::optional<double>(cdp(forest, train, x, subset, target));
  });
}

DivergentSearchResult minimal_divergent_rule(const Forest& forest, const Dataset& train,
                                             const Hyperrectangle& region,
                                             const TargetSet& target,
                                             const DivergentConfig& config) {
  if (!(config.pi > 0.0 && config.pi <= 1.0)) throw Error("pi must lie in (0, 1]");
  return search_subsets(forest, config, [&](const std::vector<int>& subset) {
    return cdp_rule(forest, train, region, subset, target);
  });
}

}  // namespace crules
