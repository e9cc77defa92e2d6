#include "crules/isolation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "crules/rng.hpp"

namespace crules {

using nlohmann::json;

double IsolationForest::average_path_length(int m) {
  if (m <= 1) return 0.0;
  constexpr double euler_gamma = 0.5772156649015329;
  const double harmonic = std::log(static_cast<double>(m - 1)) + euler_gamma;
  return 2.0 * harmonic - 2.0 * (m - 1.0) / m;
}

namespace {

void grow_itree(IsolationForest::ITree& tree, int node_id, const Dataset& ds,
                std::vector<int> rows, int depth, int depth_limit, Rng& rng) {
  auto make_external = [&](int id, int size) {
    tree.nodes[id].feature = -1;
    tree.nodes[id].size = size;
  };
  const int m = static_cast<int>(rows.size());
  if (m <= 1 || depth >= depth_limit) {
    make_external(node_id, m);
    return;
  }
  // Pick a random feature with spread; give up after p attempts (duplicates).
  int feature = -1;
  double lo = 0.0, hi = 0.0;
  for (int attempt = 0; attempt < ds.p(); ++attempt) {
    const int j = static_cast<int>(rng.uniform_index(ds.p()));
    double jlo = ds.at(rows[0], j), jhi = jlo;
    for (int r : rows) {
      jlo = std::min(jlo, ds.at(r, j));
      jhi = std::max(jhi, ds.at(r, j));
    }
    if (jhi > jlo) {
      feature = j;
      lo = jlo;
      hi = jhi;
      break;
    }
  }
  if (feature < 0) {
    make_external(node_id, m);
    return;
  }
  const double threshold = rng.uniform(lo, hi);

  std::vector<int> left_rows, right_rows;
  for (int r : rows) (ds.at(r, feature) < threshold ? left_rows : right_rows).push_back(r);
  if (left_rows.empty() || right_rows.empty()) {
    make_external(node_id, m);
    return;
  }
  rows.clear();
  rows.shrink_to_fit();

  tree.nodes[node_id].feature = feature;
  tree.nodes[node_id].threshold = threshold;
  const int left_id = static_cast<int>(tree.nodes.size());
  tree.nodes[node_id].left = left_id;
  tree.nodes.emplace_back();
  grow_itree(tree, left_id, ds, std::move(left_rows), depth + 1, depth_limit, rng);
  const int right_id = static_cast<int>(tree.nodes.size());
  tree.nodes[node_id].right = right_id;
  tree.nodes.emplace_back();
  grow_itree(tree, right_id, ds, std::move(right_rows), depth + 1, depth_limit, rng);
}

double path_length(const IsolationForest::ITree& tree, std::span<const double> x) {
  int node = 0;
  int depth = 0;
  while (tree.nodes[node].feature >= 0) {
    const auto& n = tree.nodes[node];
    node = x[n.feature] < n.threshold ? n.left : n.right;
    ++depth;
  }
  return depth + IsolationForest::average_path_length(tree.nodes[node].size);
}

}  // namespace

IsolationForest IsolationForest::fit(const Dataset& ds, const IsolationConfig& config) {
  if (config.n_trees < 1) throw Error("isolation forest needs at least one tree");
  const int psi = std::min(config.psi, ds.n());
  if (psi < 2) throw Error("subsample size must be at least 2");
  const int depth_limit = static_cast<int>(std::ceil(std::log2(static_cast<double>(psi))));

  IsolationForest forest;
  forest.psi_ = psi;
  Rng master(config.seed);
  for (int t = 0; t < config.n_trees; ++t) {
    Rng rng = master.fork(static_cast<std::uint64_t>(t) + 1);
    // Subsample without replacement via partial Fisher-Yates.
    std::vector<int> all(ds.n());
    for (int i = 0; i < ds.n(); ++i) all[i] = i;
    for (int i = 0; i < psi; ++i) {
      const int j = i + static_cast<int>(rng.uniform_index(ds.n() - i));
      std::swap(all[i], all[j]);
    }
    all.resize(psi);

    ITree tree;
    tree.nodes.emplace_back();
    grow_itree(tree, 0, ds, std::move(all), 0, depth_limit, rng);
    forest.trees_.push_back(std::move(tree));
  }

  std::vector<double> scores(ds.n());
  for (int i = 0; i < ds.n(); ++i) scores[i] = forest.score(ds.row(i));
  std::sort(scores.begin(), scores.end());
  const double keep = 1.0 - config.contamination;
  int rank = static_cast<int>(std::ceil(keep * ds.n())) - 1;
  rank = std::clamp(rank, 0, ds.n() - 1);
  forest.tau_ = scores[rank];
  return forest;
}

double IsolationForest::mean_path_length(std::span<const double> x) const {
  double total = 0.0;
  for (const auto& tree : trees_) total += path_length(tree, x);
  return total / trees_.size();
}

double IsolationForest::score(std::span<const double> x) const {
  return std::pow(2.0, -mean_path_length(x) / average_path_length(psi_));
}

std::string IsolationForest::to_json() const {
  json trees = json::array();
  for (const auto& tree : trees_) {
    json nodes = json::array();
    for (const auto& node : tree.nodes) {
      if (node.feature < 0)
        nodes.push_back(json{{"s", node.size}});
      else
        nodes.push_back(json{{"f", node.feature},
                             {"t", node.threshold},
                             {"l", node.left},
                             {"r", node.right}});
    }
    trees.push_back(json{{"nodes", std::move(nodes)}});
  }
  return json{{"format", "crules-iforest"},
              {"version", 1},
              {"psi", psi_},
              {"tau", tau_},
              {"trees", std::move(trees)}}
      .dump();
}

IsolationForest IsolationForest::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("malformed isolation forest JSON: " + std::string(e.what()));
  }
  if (!doc.contains("format") || doc["format"] != "crules-iforest")
    throw FormatError("not an isolation forest file");
  if (doc.at("version") != 1)
    throw FormatError("unsupported isolation forest version: " + doc["version"].dump());
  IsolationForest forest;
  forest.psi_ = doc.at("psi").get<int>();
  forest.tau_ = doc.at("tau").get<double>();
  for (const auto& jt : doc.at("trees")) {
    ITree tree;
    for (const auto& jn : jt.at("nodes")) {
      Node node;
      if (jn.contains("f")) {
        node.feature = jn.at("f").get<int>();
        node.threshold = jn.at("t").get<double>();
        node.left = jn.at("l").get<int>();
        node.right = jn.at("r").get<int>();
      } else {
        node.size = jn.at("s").get<int>();
      }
      tree.nodes.push_back(node);
    }
    forest.trees_.push_back(std::move(tree));
  }
  return forest;
}

void IsolationForest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write isolation forest file: " + path);
  out << to_json();
}

IsolationForest IsolationForest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open isolation forest file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace crules
