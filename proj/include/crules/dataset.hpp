#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crules {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a CSV/schema cannot be ingested; message names row and column.
class IngestError : public Error {
 public:
  using Error::Error;
};

/// Raised on malformed or wrong-version model files.
class FormatError : public Error {
 public:
  using Error::Error;
};

enum class FeatureKind { continuous, categorical };
enum class TaskKind { classification, regression };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  std::vector<std::string> categories;  // categorical only; code i <-> categories[i]

  bool is_categorical() const { return kind == FeatureKind::categorical; }
};

/// Typed tabular data. Immutable after construction; safe to share across
/// threads. Categorical cells hold integer codes 0..C-1 stored as doubles.
class Dataset {
 public:
  Dataset(std::vector<FeatureSpec> features, std::vector<double> x_row_major,
          std::vector<double> y, TaskKind task,
          std::vector<std::string> class_names = {});

  int n() const { return n_; }
  int p() const { return p_; }
  TaskKind task() const { return task_; }

  double at(int row, int col) const { return x_[static_cast<std::size_t>(row) * p_ + col]; }
  std::span<const double> row(int i) const {
    return {x_.data() + static_cast<std::size_t>(i) * p_, static_cast<std::size_t>(p_)};
  }
  /// Column-major view of one feature (length n).
  std::span<const double> column(int j) const {
    return {cols_.data() + static_cast<std::size_t>(j) * n_, static_cast<std::size_t>(n_)};
  }
  double target(int i) const { return y_[i]; }
  const std::vector<double>& targets() const { return y_; }

  const std::vector<FeatureSpec>& features() const { return features_; }
  const FeatureSpec& feature(int j) const { return features_[j]; }
  int feature_index(const std::string& name) const;
  int n_classes() const { return static_cast<int>(class_names_.size()); }
  const std::vector<std::string>& class_names() const { return class_names_; }

  /// Decode a categorical cell back to its category string.
  std::string decode(int col, double value) const;

  /// Copy with a different target vector (used to retrain on model predictions).
  Dataset with_target(std::vector<double> y, TaskKind task,
                      std::vector<std::string> class_names = {}) const;

  /// Copy restricted to the given rows (order preserved).
  Dataset subset(const std::vector<int>& rows) const;

  /// Min-max normalized copy: continuous features mapped to [0,1] using the
  /// ranges of `reference` (defaults to this dataset). Categorical codes are
  /// left untouched.
  Dataset normalized(const Dataset* reference = nullptr) const;

  std::pair<double, double> column_range(int j) const;

 private:
  std::vector<FeatureSpec> features_;
  std::vector<double> x_;     // row-major n*p
  std::vector<double> cols_;  // column-major copy for fast scans
  std::vector<double> y_;
  TaskKind task_;
  std::vector<std::string> class_names_;
  int n_ = 0;
  int p_ = 0;
};

struct TargetSpec {
  std::string name;
  TaskKind kind = TaskKind::classification;
  std::vector<std::string> classes;  // optional; inferred from data when empty
};

struct Schema {
  std::vector<FeatureSpec> features;
  TargetSpec target;
};

/// Parse the JSON sidecar schema (feature names, kinds, categories, target).
Schema load_schema(const std::string& path);
std::string schema_to_json(const Schema& schema);

/// Load a header-rowed CSV under the given schema. Cells must be complete;
/// errors name the offending row and column.
Dataset load_csv(const std::string& path, const Schema& schema);

void save_csv(const Dataset& ds, const std::string& target_name, const std::string& path);

/// Deterministic row split; exact partition of [0, n).
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed);
std::pair<std::vector<int>, std::vector<int>> split_indices(int n, double train_fraction,
                                                            std::uint64_t seed);

/// Desired outcome set: a class label, or a closed interval for regression.
class TargetSet {
 public:
  static TargetSet for_class(int label);
  static TargetSet for_interval(double lo, double hi, bool allow_point = false);

  bool is_class() const { return kind_ == Kind::class_label; }
  int class_label() const { return label_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  bool contains(double y) const {
    return is_class() ? static_cast<int>(y) == label_ : (lo_ <= y && y <= hi_);
  }

  std::string describe() const;

 private:
  enum class Kind { class_label, interval };
  Kind kind_ = Kind::class_label;
  int label_ = 0;
  double lo_ = 0.0;
  double hi_ = 0.0;
};

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double v) const { return lo <= v && v <= hi; }
  bool operator==(const Interval& other) const { return lo == other.lo && hi == other.hi; }
};

/// Axis-aligned box over a sparse support set of feature indices. Features
/// outside the support are unconstrained; interval bounds may be infinite.
class Hyperrectangle {
 public:
  Hyperrectangle() = default;

  void set(int dim, double lo, double hi);
  void set(int dim, Interval iv) { set(dim, iv.lo, iv.hi); }
  void clear(int dim) { intervals_.erase(dim); }

  bool constrains(int dim) const { return intervals_.count(dim) > 0; }
  Interval interval(int dim) const;  // unconstrained dims yield (-inf, inf)
  const std::map<int, Interval>& intervals() const { return intervals_; }
  std::vector<int> support() const;
  bool empty_support() const { return intervals_.empty(); }

  bool contains(std::span<const double> x) const;
  /// Membership restricted to the given dims (each must be constrained or is
  /// treated as unconstrained).
  bool contains_on(const std::vector<int>& dims, std::span<const double> x) const;

  /// Projection onto a subset of dims (keeps only intervals on those dims).
  Hyperrectangle project(const std::vector<int>& dims) const;

  /// Shrink this box dimwise by another (set intersection of constraints).
  void intersect_with(const Hyperrectangle& other);

  bool operator==(const Hyperrectangle& other) const { return intervals_ == other.intervals_; }

 private:
  std::map<int, Interval> intervals_;
};

/// {"feature": [lo, hi], ...} with "-inf"/"inf" sentinels for open bounds.
std::string hyperrectangle_to_json(const Hyperrectangle& rect,
                                   const std::vector<FeatureSpec>& features);
Hyperrectangle hyperrectangle_from_json(const std::string& json_text,
                                        const std::vector<FeatureSpec>& features);

}  // namespace crules
