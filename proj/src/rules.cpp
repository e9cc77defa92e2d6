#include "crules/rules.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <json.hpp>

#include "crules/projected.hpp"

namespace crules {

using nlohmann::json;

namespace {

Hyperrectangle project_to_exact_support(const Hyperrectangle& region,
                                        const std::vector<int>& S) {
  Hyperrectangle out;
  for (int dim : S) out.set(dim, region.interval(dim));
  return out;
}

bool intervals_lower(const Hyperrectangle& a, const Hyperrectangle& b) {
  auto ia = a.intervals().begin();
  auto ib = b.intervals().begin();
  for (; ia != a.intervals().end() && ib != b.intervals().end(); ++ia, ++ib) {
    if (ia->first != ib->first) return ia->first < ib->first;
    if (ia->second.lo != ib->second.lo) return ia->second.lo < ib->second.lo;
    if (ia->second.hi != ib->second.hi) return ia->second.hi < ib->second.hi;
  }
  return a.intervals().size() < b.intervals().size();
}

/// Dims where the two boxes differ; stop early past two.
std::vector<int> differing_dims(const Hyperrectangle& a, const Hyperrectangle& b) {
  std::vector<int> dims;
  for (const auto& [dim, iv] : a.intervals()) {
    if (!(iv == b.interval(dim))) {
      dims.push_back(dim);
      if (dims.size() > 1) break;
    }
  }
  return dims;
}

}  // namespace

std::vector<Hyperrectangle> candidate_leaves(const Forest& forest,
                                             const std::vector<int>& support_rows,
                                             const std::vector<int>& S) {
  std::vector<bool> supported(forest.n_train(), false);
  for (int row : support_rows) supported[row] = true;

  std::vector<Hyperrectangle> candidates;
  for (const auto& tree : forest.trees()) {
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) continue;
      const bool holds_support = std::any_of(node.sample_ids.begin(), node.sample_ids.end(),
                                             [&](int row) { return supported[row]; });
      if (!holds_support) continue;
      Hyperrectangle projected = project_to_exact_support(node.region, S);
      if (std::find(candidates.begin(), candidates.end(), projected) == candidates.end())
        candidates.push_back(std::move(projected));
    }
  }
  std::sort(candidates.begin(), candidates.end(), intervals_lower);
  return candidates;
}

std::vector<TracedRect> merge_rectangles_traced(const std::vector<Hyperrectangle>& rects) {
  std::vector<TracedRect> work;
  work.reserve(rects.size());
  for (std::size_t i = 0; i < rects.size(); ++i)
    work.push_back(TracedRect{rects[i], {static_cast<int>(i)}});
  std::sort(work.begin(), work.end(),
            [](const TracedRect& a, const TracedRect& b) { return intervals_lower(a.box, b.box); });

  bool merged_any = true;
  while (merged_any) {
    merged_any = false;
    for (std::size_t i = 0; i < work.size() && !merged_any; ++i) {
      for (std::size_t j = i + 1; j < work.size() && !merged_any; ++j) {
        if (work[i].box.support() != work[j].box.support()) continue;
        const auto dims = differing_dims(work[i].box, work[j].box);
        if (dims.size() > 1) continue;
        if (dims.size() == 1) {
          const Interval a = work[i].box.interval(dims[0]);
          const Interval b = work[j].box.interval(dims[0]);
          if (a.lo > b.hi || b.lo > a.hi) continue;  // gap: neither overlap nor adjacency
          work[i].box.set(dims[0], std::min(a.lo, b.lo), std::max(a.hi, b.hi));
        }
        work[i].sources.insert(work[i].sources.end(), work[j].sources.begin(),
                               work[j].sources.end());
        std::sort(work[i].sources.begin(), work[i].sources.end());
        work.erase(work.begin() + j);
        merged_any = true;
      }
    }
  }
  std::sort(work.begin(), work.end(),
            [](const TracedRect& a, const TracedRect& b) { return intervals_lower(a.box, b.box); });
  return work;
}

std::vector<Hyperrectangle> merge_rectangles(const std::vector<Hyperrectangle>& rects) {
  std::vector<Hyperrectangle> out;
  for (auto& traced : merge_rectangles_traced(rects)) out.push_back(std::move(traced.box));
  return out;
}

namespace {

struct ScoredRect {
  Hyperrectangle box;
  CrpEstimate estimate;
  std::vector<int> sources;
};

using CrpFn = std::function<std::optional<CrpEstimate>(const Hyperrectangle&)>;

/// Shared tail of local/regional rule construction: filter candidates at
/// pi_c, merge neighbors, re-verify merged boxes (falling back to their
/// constituents when verification fails), order by plausibility.
void assemble_rule(CounterfactualRule& rule, const std::vector<Hyperrectangle>& candidates,
                   const CrpFn& crp_of) {
  rule.diagnostics.candidates = static_cast<int>(candidates.size());

  std::vector<ScoredRect> possible;
  for (const auto& candidate : candidates) {
    const auto est = crp_of(candidate);
    if (!est) continue;
    if (est->probability > rule.diagnostics.best_candidate_crp) {
      rule.diagnostics.best_candidate_crp = est->probability;
      rule.diagnostics.best_candidate = candidate;
    }
    if (est->probability >= rule.pi_c)
      possible.push_back(ScoredRect{candidate, *est, {}});
  }
  rule.diagnostics.possible = static_cast<int>(possible.size());
  if (possible.empty()) return;

  std::vector<Hyperrectangle> boxes;
  boxes.reserve(possible.size());
  for (const auto& s : possible) boxes.push_back(s.box);

  std::vector<ScoredRect> verified;
  for (auto& merged : merge_rectangles_traced(boxes)) {
    if (merged.sources.size() == 1) {
      auto single = possible[merged.sources[0]];
      single.sources = merged.sources;
      verified.push_back(std::move(single));
      continue;
    }
    const auto est = crp_of(merged.box);
    if (est && est->probability >= rule.pi_c) {
      verified.push_back(ScoredRect{std::move(merged.box), *est, std::move(merged.sources)});
    } else {
      for (int src : merged.sources) {  // merge admitted a weak region: split back
        auto part = possible[src];
        part.sources = {src};
        verified.push_back(std::move(part));
      }
    }
  }

  std::stable_sort(verified.begin(), verified.end(), [](const ScoredRect& a, const ScoredRect& b) {
    if (a.estimate.plausibility != b.estimate.plausibility)
      return a.estimate.plausibility > b.estimate.plausibility;
    return intervals_lower(a.box, b.box);
  });
  for (auto& s : verified) {
    rule.rectangles.push_back(
        RuleRectangle{std::move(s.box), s.estimate.probability, s.estimate.plausibility,
                      std::move(s.sources)});
  }
}

}  // namespace

CounterfactualRule build_local_rule(const Forest& forest, const Dataset& train,
                                    std::span<const double> x, const std::vector<int>& S,
                                    const TargetSet& target, double pi_c) {
  if (!(pi_c > 0.0 && pi_c <= 1.0)) throw Error("pi_c must lie in (0, 1]");
  CounterfactualRule rule;
  rule.scope = CounterfactualRule::Scope::local;
  rule.query.assign(x.begin(), x.end());
  rule.subset = S;
  std::sort(rule.subset.begin(), rule.subset.end());
  rule.target = target;
  rule.pi_c = pi_c;

  if (forest.prediction_in_target(x, target)) {
    rule.target_already_met = true;
    return rule;
  }

  const auto projected = projected_weights(forest, train, complement(rule.subset, forest.p()), x);
  std::vector<int> support;
  support.reserve(projected.weights.entries.size());
  for (const auto& [row, w] : projected.weights.entries) support.push_back(row);

  const auto candidates = candidate_leaves(forest, support, rule.subset);
  assemble_rule(rule, candidates, [&](const Hyperrectangle& box) {
    return crp_local(forest, train, x, rule.subset, box, target);
  });
  return rule;
}

CounterfactualRule build_regional_rule(const Forest& forest, const Dataset& train,
                                       const Hyperrectangle& region, const std::vector<int>& S,
                                       const TargetSet& target, double pi_c) {
  if (!(pi_c > 0.0 && pi_c <= 1.0)) throw Error("pi_c must lie in (0, 1]");
  CounterfactualRule rule;
  rule.scope = CounterfactualRule::Scope::regional;
  rule.region = region;
  rule.subset = S;
  std::sort(rule.subset.begin(), rule.subset.end());
  rule.target = target;
  rule.pi_c = pi_c;

  // Region already lands in the target with high probability: nothing to change.
  Condition whole_region(forest.p());
  for (const auto& [dim, iv] : region.intervals()) whole_region.set_region(dim, iv);
  if (whole_region.constrained_count() > 0) {
    const auto base = regional_indicator_average(forest, train, whole_region, target);
    if (base && *base >= pi_c) {
      rule.target_already_met = true;
      return rule;
    }
  }

  Condition context(forest.p());
  std::vector<bool> in_s(forest.p(), false);
  for (int j : rule.subset) in_s[j] = true;
  for (const auto& [dim, iv] : region.intervals())
    if (!in_s[dim]) context.set_region(dim, iv);

  std::vector<int> support;
  if (context.constrained_count() == 0) {
    support.resize(train.n());
    for (int i = 0; i < train.n(); ++i) support[i] = i;
  } else {
    const auto regional = regional_weights(forest, train, context);
    if (!regional) return rule;  // empty support: no compatible observations
    for (const auto& [row, w] : regional->weights.entries) support.push_back(row);
  }

  const auto candidates = candidate_leaves(forest, support, rule.subset);
  assemble_rule(rule, candidates, [&](const Hyperrectangle& box) {
    return crp_rule(forest, train, region, rule.subset, box, target);
  });
  return rule;
}

namespace {

json bound_json(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

}  // namespace

std::string rule_to_json(const CounterfactualRule& rule,
                         const std::vector<FeatureSpec>& features) {
  json out;
  out["scope"] = rule.scope == CounterfactualRule::Scope::local ? "local" : "regional";
  json names = json::array();
  for (int j : rule.subset) names.push_back(features[j].name);
  out["S"] = std::move(names);
  out["target"] = rule.target.is_class()
                      ? json(rule.target.class_label())
                      : json::array({bound_json(rule.target.lo()), bound_json(rule.target.hi())});
  out["pi_c"] = rule.pi_c;
  out["target_already_met"] = rule.target_already_met;
  if (rule.scope == CounterfactualRule::Scope::local) {
    out["query"] = rule.query;
  } else {
    json region = json::object();
    for (const auto& [dim, iv] : rule.region.intervals())
      region[features[dim].name] = json::array({bound_json(iv.lo), bound_json(iv.hi)});
    out["region"] = std::move(region);
  }

  json rects = json::array();
  for (const auto& r : rule.rectangles) {
    json box = json::object();
    json cats = json::object();
    for (const auto& [dim, iv] : r.box.intervals()) {
      box[features[dim].name] = json::array({bound_json(iv.lo), bound_json(iv.hi)});
      if (features[dim].is_categorical()) {
        json labels = json::array();
        for (std::size_t c = 0; c < features[dim].categories.size(); ++c)
          if (iv.contains(static_cast<double>(c))) labels.push_back(features[dim].categories[c]);
        cats[features[dim].name] = std::move(labels);
      }
    }
    json rect{{"intervals", std::move(box)},
              {"crp", r.crp},
              {"plausibility", r.plausibility}};
    if (!cats.empty()) rect["categories"] = std::move(cats);
    rects.push_back(std::move(rect));
  }
  out["rectangles"] = std::move(rects);
  if (rule.empty() && rule.diagnostics.best_candidate) {
    json best = json::object();
    for (const auto& [dim, iv] : rule.diagnostics.best_candidate->intervals())
      best[features[dim].name] = json::array({bound_json(iv.lo), bound_json(iv.hi)});
    out["diagnostics"] = json{{"candidates", rule.diagnostics.candidates},
                              {"possible", rule.diagnostics.possible},
                              {"best_candidate", std::move(best)},
                              {"best_candidate_crp", rule.diagnostics.best_candidate_crp}};
  }
  return out.dump();
}

}  // namespace crules
