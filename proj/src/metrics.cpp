#include "crules/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "crules/rng.hpp"

namespace crules {

using nlohmann::json;

double accuracy(const Forest& model, const std::vector<EvalRecourse>& recourses) {
  if (recourses.empty()) throw Error("accuracy over an empty recourse set");
  int hits = 0;
  for (const auto& rec : recourses)
    hits += model.prediction_in_target(rec.x_cf, rec.target) ? 1 : 0;
  return static_cast<double>(hits) / recourses.size();
}

double plausibility(const IsolationForest& iforest, const std::vector<EvalRecourse>& recourses) {
  if (recourses.empty()) throw Error("plausibility over an empty recourse set");
  int inliers = 0;
  for (const auto& rec : recourses) inliers += iforest.is_inlier(rec.x_cf) ? 1 : 0;
  return static_cast<double>(inliers) / recourses.size();
}

double sparsity(const std::vector<EvalRecourse>& recourses) {
  if (recourses.empty()) throw Error("sparsity over an empty recourse set");
  long long changed = 0;
  for (const auto& rec : recourses) {
    for (std::size_t j = 0; j < rec.x.size(); ++j)
      changed += rec.x[j] != rec.x_cf[j] ? 1 : 0;
  }
  return static_cast<double>(changed) / recourses.size();
}

CostBinner::CostBinner(const Dataset& train, int bins) : bins_(bins) {
  if (bins < 2) throw Error("cost binning needs at least 2 bins");
  edges_.resize(train.p());
  for (int j = 0; j < train.p(); ++j) {
    if (train.feature(j).is_categorical()) continue;
    const auto col = train.column(j);
    std::vector<double> sorted(col.begin(), col.end());
    std::sort(sorted.begin(), sorted.end());
    auto& edges = edges_[j];
    for (int b = 1; b < bins; ++b) {
      const std::size_t rank = static_cast<std::size_t>(
          std::llround(static_cast<double>(b) * sorted.size() / bins));
      edges.push_back(sorted[std::min(rank, sorted.size() - 1)]);
    }
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  }
}

int CostBinner::bin(int feature, double value) const {
  const auto& edges = edges_[feature];
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
}

double cost(const std::vector<EvalRecourse>& recourses, const CostBinner& binner,
            const std::vector<FeatureSpec>& features) {
  if (recourses.empty()) throw Error("cost over an empty recourse set");
  double total = 0.0;
  for (const auto& rec : recourses) {
    for (std::size_t j = 0; j < rec.x.size(); ++j) {
      if (rec.x[j] == rec.x_cf[j]) continue;
      if (features[j].is_categorical()) {
        total += 1.0;
      } else {
        total += std::abs(binner.bin(static_cast<int>(j), rec.x_cf[j]) -
                          binner.bin(static_cast<int>(j), rec.x[j]));
      }
    }
  }
  return total / recourses.size();
}

namespace {

DirectionMetrics metrics_for(const Forest& model, const IsolationForest& iforest,
                             const std::vector<EvalRecourse>& recs, const CostBinner& binner,
                             const std::vector<FeatureSpec>& features) {
  DirectionMetrics m;
  m.count = static_cast<int>(recs.size());
  if (recs.empty()) return m;
  m.accuracy = accuracy(model, recs);
  m.plausibility = plausibility(iforest, recs);
  m.sparsity = sparsity(recs);
  m.cost = cost(recs, binner, features);
  return m;
}

}  // namespace

MetricReport build_metric_report(const Forest& model, const IsolationForest& iforest,
                                 const std::vector<EvalRecourse>& recourses,
                                 const CostBinner& binner,
                                 const std::vector<FeatureSpec>& features) {
  MetricReport report;
  std::vector<EvalRecourse> pos, neg;
  for (const auto& rec : recourses) {
    if (rec.direction == 1)
      pos.push_back(rec);
    else if (rec.direction == 0)
      neg.push_back(rec);
  }
  report.directions["all"] = metrics_for(model, iforest, recourses, binner, features);
  if (!pos.empty() || !neg.empty()) {
    report.directions["pos"] = metrics_for(model, iforest, pos, binner, features);
    report.directions["neg"] = metrics_for(model, iforest, neg, binner, features);
  }
  return report;
}

std::string MetricReport::to_json() const {
  json dirs = json::object();
  for (const auto& [name, m] : directions) {
    dirs[name] = json{{"accuracy", m.accuracy},
                      {"plausibility", m.plausibility},
                      {"sparsity", m.sparsity},
                      {"cost", m.cost},
                      {"count", m.count}};
  }
  return json{{"directions", std::move(dirs)},
              {"failed_instances", failed_instances},
              {"degenerate_instances", degenerate_instances},
              {"config_fingerprint", config_fingerprint}}
      .dump(2);
}

std::string MetricReport::to_table() const {
  std::ostringstream out;
  auto get = [&](const std::string& name) {
    const auto it = directions.find(name);
    return it == directions.end() ? DirectionMetrics{} : it->second;
  };
  const auto pos = get("pos"), neg = get("neg"), all = get("all");
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "metric        Pos / Neg        overall (n=" << all.count << ")\n";
  out << "Accuracy      " << pos.accuracy << " / " << neg.accuracy << "      " << all.accuracy
      << "\n";
  out << "Plausibility  " << pos.plausibility << " / " << neg.plausibility << "      "
      << all.plausibility << "\n";
  out << "Sparsity      " << pos.sparsity << " / " << neg.sparsity << "      " << all.sparsity
      << "\n";
  out << "Cost          " << pos.cost << " / " << neg.cost << "      " << all.cost << "\n";
  out << "counts        " << pos.count << " / " << neg.count << "      failed=" << failed_instances
      << " degenerate=" << degenerate_instances << "\n";
  return out.str();
}

std::vector<StabilityRow> stability(const Forest& model, const Dataset& queries,
                                    const std::vector<int>& query_rows,
                                    const RecourseFn& recourse_fn, const TargetSet& target,
                                    const StabilityOptions& options) {
  if (options.trials < 1) throw Error("stability needs at least one trial");
  std::vector<StabilityRow> rows;

  struct Prepared {
    std::vector<double> x_cf;
    std::vector<int> changed;
  };
  std::vector<Prepared> prepared;
  for (int q : query_rows) {
    auto rec = recourse_fn(q);
    if (!rec) continue;
    prepared.push_back(Prepared{std::move(rec->first), std::move(rec->second)});
  }

  auto same_outcome = [&](std::span<const double> a, std::span<const double> b) {
    if (model.task() == TaskKind::classification)
      return model.predict_class(a) == model.predict_class(b);
    return target.contains(model.predict_value(a)) == target.contains(model.predict_value(b));
  };

  for (std::size_t s = 0; s < options.sigmas.size(); ++s) {
    const double sigma = options.sigmas[s];
    Rng rng(options.seed + 7919 * (s + 1));
    int same = 0, total = 0;
    for (const auto& rec : prepared) {
      for (int trial = 0; trial < options.trials; ++trial) {
        std::vector<double> perturbed = rec.x_cf;
        for (int j : rec.changed) {
          if (queries.feature(j).is_categorical()) continue;
          perturbed[j] = std::clamp(perturbed[j] + sigma * rng.normal(), 0.0, 1.0);
        }
        same += same_outcome(rec.x_cf, perturbed) ? 1 : 0;
        ++total;
      }
    }
    rows.push_back(StabilityRow{sigma, total > 0 ? static_cast<double>(same) / total : 0.0, total});
  }
  return rows;
}

}  // namespace crules
