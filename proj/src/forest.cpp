#include "crules/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "crules/rng.hpp"

namespace crules {

using nlohmann::json;

WeightVector compress_weights(const std::vector<double>& dense) {
  WeightVector out;
  for (std::size_t i = 0; i < dense.size(); ++i)
    if (dense[i] > 0.0) out.entries.emplace_back(static_cast<int>(i), dense[i]);
  return out;
}

int Tree::descend(std::span<const double> x) const {
  int node = 0;
  while (!nodes[node].is_leaf()) {
    const auto& n = nodes[node];
    node = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return node;
}

std::vector<int> Tree::leaf_ids() const {
  std::vector<int> ids;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].is_leaf()) ids.push_back(static_cast<int>(i));
  return ids;
}

namespace {

struct GrowContext {
  const Dataset& ds;
  const ForestConfig& cfg;
  int min_leaf;
  int mtry;
  int n_classes;
  Rng rng;
  std::vector<int> tree_features;  // per-tree candidate set when mtry_per_tree
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

double gini_from_counts(const std::vector<int>& counts, int total) {
  if (total == 0) return 0.0;
  double acc = 0.0;
  for (int c : counts) {
    const double f = static_cast<double>(c) / total;
    acc += f * f;
  }
  return 1.0 - acc;
}

std::vector<int> sample_features(Rng& rng, int p, int mtry) {
  std::vector<int> all(p);
  std::iota(all.begin(), all.end(), 0);
  for (int i = 0; i < mtry; ++i) {
    const int j = i + static_cast<int>(rng.uniform_index(p - i));
    std::swap(all[i], all[j]);
  }
  all.resize(mtry);
  std::sort(all.begin(), all.end());
  return all;
}

/// Best axis-aligned split of `rows`; ties broken by lowest feature index,
/// then lowest threshold (guaranteed by the ascending scan + strict improvement).
SplitChoice find_split(GrowContext& ctx, const std::vector<int>& rows) {
  const auto& ds = ctx.ds;
  const bool classify = ds.task() == TaskKind::classification;
  const int m = static_cast<int>(rows.size());

  std::vector<int> candidates = ctx.cfg.mtry_per_tree
                                    ? ctx.tree_features
                                    : sample_features(ctx.rng, ds.p(), ctx.mtry);

  SplitChoice best;
  best.gain = 1e-12;

  std::vector<std::pair<double, double>> sorted;  // (x_j, y)
  sorted.reserve(m);

  std::vector<int> total_counts;
  double total_sum = 0.0, total_sumsq = 0.0;
  if (classify) {
    total_counts.assign(ctx.n_classes, 0);
    for (int r : rows) ++total_counts[static_cast<int>(ds.target(r))];
  } else {
    for (int r : rows) {
      total_sum += ds.target(r);
      total_sumsq += ds.target(r) * ds.target(r);
    }
  }
  const double parent_impurity =
      classify ? gini_from_counts(total_counts, m)
               : total_sumsq / m - (total_sum / m) * (total_sum / m);
  if (parent_impurity <= 0.0) return best;

  std::vector<int> left_counts;
  for (int feature : candidates) {
    sorted.clear();
    for (int r : rows) sorted.emplace_back(ds.at(r, feature), ds.target(r));
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (sorted.front().first == sorted.back().first) continue;

    if (classify) left_counts.assign(ctx.n_classes, 0);
    double left_sum = 0.0, left_sumsq = 0.0;
    for (int i = 0; i + 1 < m; ++i) {
      const auto [v, y] = sorted[i];
      if (classify)
        ++left_counts[static_cast<int>(y)];
      else {
        left_sum += y;
        left_sumsq += y * y;
      }
      if (v == sorted[i + 1].first) continue;
      const int nl = i + 1, nr = m - nl;
      if (nl < ctx.min_leaf || nr < ctx.min_leaf) continue;
      double child_impurity;
      if (classify) {
        double right_gini_acc = 0.0, left_gini_acc = 0.0;
        for (int c = 0; c < ctx.n_classes; ++c) {
          const double fl = static_cast<double>(left_counts[c]) / nl;
          const double fr = static_cast<double>(total_counts[c] - left_counts[c]) / nr;
          left_gini_acc += fl * fl;
          right_gini_acc += fr * fr;
        }
        child_impurity =
            (nl * (1.0 - left_gini_acc) + nr * (1.0 - right_gini_acc)) / m;
      } else {
        const double rs = total_sum - left_sum, rss = total_sumsq - left_sumsq;
        const double lvar = left_sumsq / nl - (left_sum / nl) * (left_sum / nl);
        const double rvar = rss / nr - (rs / nr) * (rs / nr);
        child_impurity = (nl * lvar + nr * rvar) / m;
      }
      const double gain = parent_impurity - child_impurity;
      if (gain > best.gain) {
        best.feature = feature;
        best.threshold = 0.5 * (v + sorted[i + 1].first);
        best.gain = gain;
      }
    }
  }
  return best;
}

void grow(GrowContext& ctx, Tree& tree, int node_id, std::vector<int> rows, int depth) {
  bool should_split = depth < ctx.cfg.max_depth &&
                      static_cast<int>(rows.size()) >= 2 * ctx.min_leaf;
  SplitChoice split;
  if (should_split) {
    split = find_split(ctx, rows);
    should_split = split.feature >= 0;
  }
  if (!should_split) {
    tree.nodes[node_id].feature = -1;
    return;  // leaf; rows re-assigned after growth
  }
  tree.nodes[node_id].feature = split.feature;
  tree.nodes[node_id].threshold = split.threshold;

  std::vector<int> left_rows, right_rows;
  for (int r : rows) {
    (ctx.ds.at(r, split.feature) <= split.threshold ? left_rows : right_rows).push_back(r);
  }
  rows.clear();
  rows.shrink_to_fit();

  const int left_id = static_cast<int>(tree.nodes.size());
  tree.nodes[node_id].left = left_id;
  tree.nodes.emplace_back();
  grow(ctx, tree, left_id, std::move(left_rows), depth + 1);

  const int right_id = static_cast<int>(tree.nodes.size());
  tree.nodes[node_id].right = right_id;
  tree.nodes.emplace_back();
  grow(ctx, tree, right_id, std::move(right_rows), depth + 1);
}

void assign_regions(Tree& tree, int node_id, const Hyperrectangle& region) {
  auto& node = tree.nodes[node_id];
  if (node.is_leaf()) {
    node.region = region;
    return;
  }
  Hyperrectangle left = region;
  Interval iv = region.interval(node.feature);
  left.set(node.feature, iv.lo, std::min(iv.hi, node.threshold));
  assign_regions(tree, node.left, left);

  Hyperrectangle right = region;
  right.set(node.feature, std::max(iv.lo, node.threshold), iv.hi);
  assign_regions(tree, node.right, right);
}

/// Route every training row to its leaf and recompute leaf values, so the
/// forest's prediction is exactly the weighted mean of training targets.
void populate_leaves(Tree& tree, const Dataset& ds, int n_classes) {
  for (auto& node : tree.nodes) {
    if (node.is_leaf()) {
      node.sample_ids.clear();
      node.value.clear();
    }
  }
  for (int i = 0; i < ds.n(); ++i) tree.nodes[tree.descend(ds.row(i))].sample_ids.push_back(i);
  for (auto& node : tree.nodes) {
    if (!node.is_leaf()) continue;
    if (node.sample_ids.empty()) throw Error("internal error: empty leaf after routing");
    if (ds.task() == TaskKind::classification) {
      node.value.assign(n_classes, 0.0);
      for (int i : node.sample_ids) node.value[static_cast<int>(ds.target(i))] += 1.0;
      for (double& v : node.value) v /= node.sample_ids.size();
    } else {
      double sum = 0.0;
      for (int i : node.sample_ids) sum += ds.target(i);
      node.value = {sum / node.sample_ids.size()};
    }
  }
}

Tree build_tree(const Dataset& ds, const ForestConfig& cfg, int min_leaf, int mtry,
                int n_classes, std::uint64_t tree_seed) {
  GrowContext ctx{ds, cfg, min_leaf, mtry, n_classes, Rng(tree_seed), {}};
  std::vector<int> rows;
  rows.reserve(ds.n());
  if (cfg.bootstrap) {
    for (int i = 0; i < ds.n(); ++i)
      rows.push_back(static_cast<int>(ctx.rng.uniform_index(ds.n())));
  } else {
    rows.resize(ds.n());
    std::iota(rows.begin(), rows.end(), 0);
  }
  if (cfg.mtry_per_tree) ctx.tree_features = sample_features(ctx.rng, ds.p(), mtry);

  Tree tree;
  tree.nodes.emplace_back();
  grow(ctx, tree, 0, std::move(rows), 0);
  assign_regions(tree, 0, Hyperrectangle{});
  populate_leaves(tree, ds, n_classes);
  return tree;
}

}  // namespace

Forest::Forest(std::vector<Tree> trees, TaskKind task, int p, int n_train, int n_classes,
               std::uint64_t seed)
    : trees_(std::move(trees)), task_(task), p_(p), n_train_(n_train), n_classes_(n_classes),
      seed_(seed) {
  if (trees_.empty()) throw Error("forest needs at least one tree");
}

Forest Forest::train(const Dataset& ds, const ForestConfig& config) {
  if (config.n_trees < 1 || config.max_depth < 1) throw Error("invalid forest configuration");
  if (config.min_leaf == 0 || config.min_leaf < -1) throw Error("invalid min_leaf");
  const bool classify = ds.task() == TaskKind::classification;
  if (classify && ds.n_classes() < 2)
    throw Error("classification training needs at least two classes");

  const int min_leaf = config.min_leaf > 0 ? config.min_leaf : (classify ? 1 : 5);
  int mtry = config.mtry;
  if (mtry <= 0) {
    mtry = classify ? static_cast<int>(std::lround(std::sqrt(static_cast<double>(ds.p()))))
                    : ds.p() / 3;
  }
  mtry = std::clamp(mtry, 1, ds.p());

  std::vector<std::uint64_t> tree_seeds(config.n_trees);
  std::uint64_t s = config.seed;
  for (auto& ts : tree_seeds) ts = splitmix64(s);

  std::vector<Tree> trees(config.n_trees);
  const int jobs = std::max(1, config.n_jobs);
  if (jobs == 1) {
    for (int t = 0; t < config.n_trees; ++t)
      trees[t] = build_tree(ds, config, min_leaf, mtry, ds.n_classes(), tree_seeds[t]);
  } else {
    std::vector<std::thread> workers;
    std::atomic<int> next{0};
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (int t = next.fetch_add(1); t < config.n_trees; t = next.fetch_add(1))
          trees[t] = build_tree(ds, config, min_leaf, mtry, ds.n_classes(), tree_seeds[t]);
      });
    }
    for (auto& w : workers) w.join();
  }
  return Forest(std::move(trees), ds.task(), ds.p(), ds.n(),
                classify ? ds.n_classes() : 0, config.seed);
}

std::vector<double> Forest::predict(std::span<const double> x) const {
  const int width = task_ == TaskKind::classification ? n_classes_ : 1;
  std::vector<double> out(width, 0.0);
  for (const auto& tree : trees_) {
    const auto& value = tree.nodes[tree.descend(x)].value;
    for (int c = 0; c < width; ++c) out[c] += value[c];
  }
  for (double& v : out) v /= trees_.size();
  return out;
}

double Forest::predict_value(std::span<const double> x) const { return predict(x)[0]; }

int Forest::predict_class(std::span<const double> x) const {
  const auto probs = predict(x);
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

bool Forest::prediction_in_target(std::span<const double> x, const TargetSet& target) const {
  if (task_ == TaskKind::classification)
    return target.is_class() && predict_class(x) == target.class_label();
  return target.contains(predict_value(x));
}

WeightVector Forest::point_weights(std::span<const double> x) const {
  std::vector<double> dense(n_train_, 0.0);
  const double k = static_cast<double>(trees_.size());
  for (const auto& tree : trees_) {
    const auto& leaf = tree.nodes[tree.descend(x)];
    const double w = 1.0 / (k * leaf.sample_ids.size());
    for (int i : leaf.sample_ids) dense[i] += w;
  }
  return compress_weights(dense);
}

std::vector<long long> Forest::split_frequency() const {
  std::vector<long long> counts(p_, 0);
  for (const auto& tree : trees_)
    for (const auto& node : tree.nodes)
      if (!node.is_leaf()) ++counts[node.feature];
  return counts;
}

std::string Forest::to_json() const {
  json trees = json::array();
  for (const auto& tree : trees_) {
    json nodes = json::array();
    for (const auto& node : tree.nodes) {
      if (node.is_leaf())
        nodes.push_back(json{{"ids", node.sample_ids}, {"v", node.value}});
      else
        nodes.push_back(json{{"f", node.feature},
                             {"t", node.threshold},
                             {"l", node.left},
                             {"r", node.right}});
    }
    trees.push_back(json{{"nodes", std::move(nodes)}});
  }
  return json{{"format", "crules-forest"},
              {"version", 1},
              {"task", task_ == TaskKind::classification ? "classification" : "regression"},
              {"seed", seed_},
              {"p", p_},
              {"n_train", n_train_},
              {"n_classes", n_classes_},
              {"trees", std::move(trees)}}
      .dump();
}

Forest Forest::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("malformed forest JSON: " + std::string(e.what()));
  }
  if (!doc.contains("format") || doc["format"] != "crules-forest" || !doc.contains("version"))
    throw FormatError("not a forest file");
  if (doc["version"] != 1)
    throw FormatError("unsupported forest format version: " + doc["version"].dump());

  const std::string task_name = doc.at("task").get<std::string>();
  const TaskKind task =
      task_name == "classification" ? TaskKind::classification : TaskKind::regression;
  std::vector<Tree> trees;
  for (const auto& jt : doc.at("trees")) {
    Tree tree;
    for (const auto& jn : jt.at("nodes")) {
      TreeNode node;
      if (jn.contains("f")) {
        node.feature = jn.at("f").get<int>();
        node.threshold = jn.at("t").get<double>();
        node.left = jn.at("l").get<int>();
        node.right = jn.at("r").get<int>();
      } else {
        node.sample_ids = jn.at("ids").get<std::vector<int>>();
        node.value = jn.at("v").get<std::vector<double>>();
      }
      tree.nodes.push_back(std::move(node));
    }
    if (tree.nodes.empty()) throw FormatError("tree with no nodes");
    assign_regions(tree, 0, Hyperrectangle{});
    trees.push_back(std::move(tree));
  }
  return Forest(std::move(trees), task, doc.at("p").get<int>(), doc.at("n_train").get<int>(),
                doc.at("n_classes").get<int>(), doc.at("seed").get<std::uint64_t>());
}

void Forest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write forest file: " + path);
  out << to_json();
}

Forest Forest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open forest file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace crules
