#include "crules/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "crules/rng.hpp"

namespace crules {

using nlohmann::json;

Dataset::Dataset(std::vector<FeatureSpec> features, std::vector<double> x_row_major,
                 std::vector<double> y, TaskKind task, std::vector<std::string> class_names)
    : features_(std::move(features)),
      x_(std::move(x_row_major)),
      y_(std::move(y)),
      task_(task),
      class_names_(std::move(class_names)) {
  p_ = static_cast<int>(features_.size());
  if (p_ < 1) throw IngestError("dataset needs at least one feature");
  if (x_.size() % p_ != 0) throw IngestError("feature matrix size not divisible by p");
  n_ = static_cast<int>(x_.size() / p_);
  if (n_ < 1) throw IngestError("dataset needs at least one row");
  if (static_cast<int>(y_.size()) != n_) throw IngestError("target length does not match row count");

  for (int j = 0; j < p_; ++j) {
    for (int k = j + 1; k < p_; ++k) {
      if (features_[j].name == features_[k].name)
        throw IngestError("duplicate feature name: " + features_[j].name);
    }
    if (features_[j].is_categorical() && features_[j].categories.size() < 2)
      throw IngestError("categorical feature " + features_[j].name + " needs >= 2 categories");
  }
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < p_; ++j) {
      const double v = at(i, j);
      if (std::isnan(v))
        throw IngestError("missing value at row " + std::to_string(i) + ", column " +
                          features_[j].name);
      if (features_[j].is_categorical()) {
        const int code = static_cast<int>(v);
        if (v != code || code < 0 || code >= static_cast<int>(features_[j].categories.size()))
          throw IngestError("invalid category code at row " + std::to_string(i) + ", column " +
                            features_[j].name);
      }
    }
  }
  if (task_ == TaskKind::classification) {
    if (class_names_.empty()) {
      int max_code = 0;
      for (double v : y_) max_code = std::max(max_code, static_cast<int>(v));
      for (int c = 0; c <= max_code; ++c) class_names_.push_back(std::to_string(c));
    }
    for (int i = 0; i < n_; ++i) {
      const int code = static_cast<int>(y_[i]);
      if (y_[i] != code || code < 0 || code >= static_cast<int>(class_names_.size()))
        throw IngestError("invalid class code at row " + std::to_string(i));
    }
  }

  cols_.resize(x_.size());
  for (int j = 0; j < p_; ++j)
    for (int i = 0; i < n_; ++i) cols_[static_cast<std::size_t>(j) * n_ + i] = at(i, j);
}

int Dataset::feature_index(const std::string& name) const {
  for (int j = 0; j < p_; ++j)
    if (features_[j].name == name) return j;
  throw IngestError("unknown feature: " + name);
}

std::string Dataset::decode(int col, double value) const {
  const auto& spec = features_[col];
  if (!spec.is_categorical()) {
    std::ostringstream out;
    out << value;
    return out.str();
  }
  const int code = static_cast<int>(value);
  if (value != code || code < 0 || code >= static_cast<int>(spec.categories.size()))
    throw IngestError("invalid category code for column " + spec.name);
  return spec.categories[code];
}

Dataset Dataset::with_target(std::vector<double> y, TaskKind task,
                             std::vector<std::string> class_names) const {
  return Dataset(features_, x_, std::move(y), task, std::move(class_names));
}

Dataset Dataset::subset(const std::vector<int>& rows) const {
  std::vector<double> x;
  x.reserve(rows.size() * p_);
  std::vector<double> y;
  y.reserve(rows.size());
  for (int i : rows) {
    const auto r = row(i);
    x.insert(x.end(), r.begin(), r.end());
    y.push_back(y_[i]);
  }
  return Dataset(features_, std::move(x), std::move(y), task_, class_names_);
}

std::pair<double, double> Dataset::column_range(int j) const {
  const auto col = column(j);
  const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
  return {*lo, *hi};
}

Dataset Dataset::normalized(const Dataset* reference) const {
  const Dataset& ref = reference ? *reference : *this;
  std::vector<double> x = x_;
  for (int j = 0; j < p_; ++j) {
    if (features_[j].is_categorical()) continue;
    const auto [lo, hi] = ref.column_range(j);
    const double range = hi - lo;
    for (int i = 0; i < n_; ++i) {
      double& v = x[static_cast<std::size_t>(i) * p_ + j];
      v = range > 0 ? std::clamp((v - lo) / range, 0.0, 1.0) : 0.0;
    }
  }
  return Dataset(features_, std::move(x), y_, task_, class_names_);
}

namespace {

FeatureKind kind_from_string(const std::string& s) {
  if (s == "continuous") return FeatureKind::continuous;
  if (s == "categorical") return FeatureKind::categorical;
  throw IngestError("unknown feature kind: " + s);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open schema file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IngestError("malformed schema JSON: " + std::string(e.what()));
  }
  Schema schema;
  for (const auto& f : doc.at("features")) {
    FeatureSpec spec;
    spec.name = f.at("name").get<std::string>();
    spec.kind = kind_from_string(f.at("kind").get<std::string>());
    if (spec.is_categorical())
      spec.categories = f.at("categories").get<std::vector<std::string>>();
    schema.features.push_back(std::move(spec));
  }
  const auto& t = doc.at("target");
  schema.target.name = t.at("name").get<std::string>();
  const std::string kind = t.at("kind").get<std::string>();
  if (kind == "class")
    schema.target.kind = TaskKind::classification;
  else if (kind == "real")
    schema.target.kind = TaskKind::regression;
  else
    throw IngestError("unknown target kind: " + kind);
  if (t.contains("classes")) schema.target.classes = t.at("classes").get<std::vector<std::string>>();
  return schema;
}

std::string schema_to_json(const Schema& schema) {
  json features = json::array();
  for (const auto& f : schema.features) {
    json item{{"name", f.name},
              {"kind", f.is_categorical() ? "categorical" : "continuous"}};
    if (f.is_categorical()) item["categories"] = f.categories;
    features.push_back(std::move(item));
  }
  json target{{"name", schema.target.name},
              {"kind", schema.target.kind == TaskKind::classification ? "class" : "real"}};
  if (!schema.target.classes.empty()) target["classes"] = schema.target.classes;
  return json{{"features", features}, {"target", target}}.dump(2);
}

Dataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open CSV file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IngestError("empty CSV file: " + path);
  const auto header = split_line(line);

  std::vector<int> feature_cols(schema.features.size(), -1);
  int target_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = trim(header[c]);
    for (std::size_t j = 0; j < schema.features.size(); ++j)
      if (name == schema.features[j].name) feature_cols[j] = static_cast<int>(c);
    if (name == schema.target.name) target_col = static_cast<int>(c);
  }
  for (std::size_t j = 0; j < schema.features.size(); ++j)
    if (feature_cols[j] < 0)
      throw IngestError("missing column: " + schema.features[j].name);
  if (target_col < 0) throw IngestError("missing column: " + schema.target.name);

  const bool classify = schema.target.kind == TaskKind::classification;
  std::vector<std::string> class_names = schema.target.classes;
  auto class_code = [&](const std::string& label, int csv_row) -> double {
    for (std::size_t c = 0; c < class_names.size(); ++c)
      if (class_names[c] == label) return static_cast<double>(c);
    if (!schema.target.classes.empty())
      throw IngestError("unknown class '" + label + "' at row " + std::to_string(csv_row) +
                        ", column " + schema.target.name);
    class_names.push_back(label);
    return static_cast<double>(class_names.size() - 1);
  };

  std::vector<double> x;
  std::vector<double> y;
  int csv_row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++csv_row;
    const auto cells = split_line(line);
    for (std::size_t j = 0; j < schema.features.size(); ++j) {
      const auto& spec = schema.features[j];
      if (feature_cols[j] >= static_cast<int>(cells.size()))
        throw IngestError("short row " + std::to_string(csv_row) + ": missing column " + spec.name);
      const std::string cell = trim(cells[feature_cols[j]]);
      if (cell.empty())
        throw IngestError("empty cell at row " + std::to_string(csv_row) + ", column " + spec.name);
      if (spec.is_categorical()) {
        const auto it = std::find(spec.categories.begin(), spec.categories.end(), cell);
        if (it == spec.categories.end())
          throw IngestError("unknown category '" + cell + "' at row " + std::to_string(csv_row) +
                            ", column " + spec.name);
        x.push_back(static_cast<double>(it - spec.categories.begin()));
      } else {
        try {
          std::size_t used = 0;
          const double v = std::stod(cell, &used);
          if (used != cell.size()) throw std::invalid_argument(cell);
          x.push_back(v);
        } catch (const std::exception&) {
          throw IngestError("unparseable cell '" + cell + "' at row " + std::to_string(csv_row) +
                            ", column " + spec.name);
        }
      }
    }
    if (target_col >= static_cast<int>(cells.size()))
      throw IngestError("short row " + std::to_string(csv_row) + ": missing column " +
                        schema.target.name);
    const std::string cell = trim(cells[target_col]);
    if (cell.empty())
      throw IngestError("empty cell at row " + std::to_string(csv_row) + ", column " +
                        schema.target.name);
    if (classify) {
      y.push_back(class_code(cell, csv_row));
    } else {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        y.push_back(v);
      } catch (const std::exception&) {
        throw IngestError("unparseable cell '" + cell + "' at row " + std::to_string(csv_row) +
                          ", column " + schema.target.name);
      }
    }
  }
  if (x.empty()) throw IngestError("CSV has no data rows: " + path);
  return Dataset(schema.features, std::move(x), std::move(y),
                 classify ? TaskKind::classification : TaskKind::regression,
                 classify ? class_names : std::vector<std::string>{});
}

void save_csv(const Dataset& ds, const std::string& target_name, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write CSV file: " + path);
  out.precision(17);
  for (const auto& f : ds.features()) out << f.name << ',';
  out << target_name << '\n';
  for (int i = 0; i < ds.n(); ++i) {
    for (int j = 0; j < ds.p(); ++j) {
      if (ds.feature(j).is_categorical())
        out << ds.decode(j, ds.at(i, j));
      else
        out << ds.at(i, j);
      out << ',';
    }
    if (ds.task() == TaskKind::classification)
      out << ds.class_names()[static_cast<int>(ds.target(i))];
    else
      out << ds.target(i);
    out << '\n';
  }
}

std::pair<std::vector<int>, std::vector<int>> split_indices(int n, double train_fraction,
                                                            std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error("train_fraction must lie in (0, 1)");
  if (n < 2) throw Error("split needs at least two rows");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  int train_count = static_cast<int>(std::llround(train_fraction * n));
  train_count = std::clamp(train_count, 1, n - 1);
  std::vector<int> train(order.begin(), order.begin() + train_count);
  std::vector<int> test(order.begin() + train_count, order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  auto [train_rows, test_rows] = split_indices(ds.n(), train_fraction, seed);
  return {ds.subset(train_rows), ds.subset(test_rows)};
}

TargetSet TargetSet::for_class(int label) {
  TargetSet t;
  t.kind_ = Kind::class_label;
  t.label_ = label;
  return t;
}

TargetSet TargetSet::for_interval(double lo, double hi, bool allow_point) {
  if (lo > hi) throw Error("target interval has lo > hi");
  if (lo == hi && !allow_point) throw Error("degenerate target interval not allowed");
  TargetSet t;
  t.kind_ = Kind::interval;
  t.lo_ = lo;
  t.hi_ = hi;
  return t;
}

std::string TargetSet::describe() const {
  if (is_class()) return "class " + std::to_string(label_);
  std::ostringstream out;
  out << '[' << lo_ << ", " << hi_ << ']';
  return out.str();
}

void Hyperrectangle::set(int dim, double lo, double hi) {
  if (lo > hi) throw Error("interval has lo > hi");
  intervals_[dim] = Interval{lo, hi};
}

Interval Hyperrectangle::interval(int dim) const {
  const auto it = intervals_.find(dim);
  return it == intervals_.end() ? Interval{} : it->second;
}

std::vector<int> Hyperrectangle::support() const {
  std::vector<int> dims;
  dims.reserve(intervals_.size());
  for (const auto& [dim, iv] : intervals_) dims.push_back(dim);
  return dims;
}

bool Hyperrectangle::contains(std::span<const double> x) const {
  for (const auto& [dim, iv] : intervals_) {
    if (dim >= static_cast<int>(x.size()) || !iv.contains(x[dim])) return false;
  }
  return true;
}

bool Hyperrectangle::contains_on(const std::vector<int>& dims, std::span<const double> x) const {
  for (int dim : dims) {
    const auto it = intervals_.find(dim);
    if (it != intervals_.end() && !it->second.contains(x[dim])) return false;
  }
  return true;
}

Hyperrectangle Hyperrectangle::project(const std::vector<int>& dims) const {
  Hyperrectangle out;
  for (int dim : dims) {
    const auto it = intervals_.find(dim);
    if (it != intervals_.end()) out.intervals_[dim] = it->second;
  }
  return out;
}

void Hyperrectangle::intersect_with(const Hyperrectangle& other) {
  for (const auto& [dim, iv] : other.intervals_) {
    const auto it = intervals_.find(dim);
    if (it == intervals_.end()) {
      intervals_[dim] = iv;
    } else {
      it->second.lo = std::max(it->second.lo, iv.lo);
      it->second.hi = std::min(it->second.hi, iv.hi);
      if (it->second.lo > it->second.hi) throw Error("empty intersection");
    }
  }
}

namespace {

json bound_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

double bound_from_json(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw FormatError("bad interval bound: " + s);
  }
  return v.get<double>();
}

}  // namespace

std::string hyperrectangle_to_json(const Hyperrectangle& rect,
                                   const std::vector<FeatureSpec>& features) {
  json out = json::object();
  for (const auto& [dim, iv] : rect.intervals()) {
    const std::string name =
        dim < static_cast<int>(features.size()) ? features[dim].name : std::to_string(dim);
    out[name] = json::array({bound_to_json(iv.lo), bound_to_json(iv.hi)});
  }
  return out.dump();
}

Hyperrectangle hyperrectangle_from_json(const std::string& json_text,
                                        const std::vector<FeatureSpec>& features) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError("malformed hyperrectangle JSON: " + std::string(e.what()));
  }
  Hyperrectangle rect;
  for (const auto& [name, bounds] : doc.items()) {
    int dim = -1;
    for (std::size_t j = 0; j < features.size(); ++j)
      if (features[j].name == name) dim = static_cast<int>(j);
    if (dim < 0) throw FormatError("unknown feature in hyperrectangle: " + name);
    rect.set(dim, bound_from_json(bounds.at(0)), bound_from_json(bounds.at(1)));
  }
  return rect;
}

}  // namespace crules
