#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace emsrisk {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 10;
  std::size_t min_leaf = 5;
  /// Features tried per split; 0 means ceil(sqrt(feature count)).
  std::size_t mtry = 0;
  std::uint64_t seed = 1;
  /// Worker threads for tree construction. Results do not depend on it.
  unsigned threads = 1;

  std::size_t resolved_mtry(std::size_t n_features) const;
  /// Throws UsageError if a field is out of range for `n_features`.
  void validate(std::size_t n_features) const;
};

/// Column-major numeric design matrix with +1/-1 labels.
class TrainingData {
public:
  TrainingData(std::size_t n_features, std::vector<std::string> feature_names = {});

  void add(std::span<const double> row, int label);
  std::size_t rows() const { return labels_.size(); }
  std::size_t features() const { return n_features_; }
  double value(std::size_t row, std::size_t feature) const { return columns_[feature][row]; }
  std::span<const double> column(std::size_t feature) const { return columns_[feature]; }
  int label(std::size_t row) const { return labels_[row]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::string>& feature_names() const { return names_; }

private:
  std::size_t n_features_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
  std::vector<int> labels_;
};

/// 1 - sum p_k^2 over the given class counts. Throws UsageError when all
/// counts are zero or any is negative.
double gini_impurity(std::span<const double> class_counts);

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;  ///< x <= threshold goes left
  double impurity_decrease = 0.0;
};

/// Exhaustive CART split search over `features` for the multiset `samples`
/// (duplicates act as weights). Thresholds are midpoints between
/// consecutive distinct values; each side must hold at least `min_leaf`
/// samples. Returns nullopt when no split lowers the Gini impurity. Ties go
/// to the lowest feature index, then the lowest threshold.
std::optional<Split> best_split(const TrainingData& data, std::span<const std::size_t> samples,
                                std::span<const std::size_t> features, std::size_t min_leaf = 1);

struct TreeNode {
  int feature = -1;  ///< -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double impurity_decrease = 0.0;
  double n_samples = 0.0;
  double p_positive = 0.0;  ///< leaf class distribution is (p, 1 - p)

  bool leaf() const { return feature < 0; }
};

class Tree {
public:
  Tree() = default;
  explicit Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t depth() const;

private:
  std::vector<TreeNode> nodes_;
};

/// Grows one CART tree on the weighted multiset `samples`, trying `mtry`
/// random features per node (mtry == features() means all, in order).
Tree grow_tree(const TrainingData& data, std::span<const std::size_t> samples, const ForestConfig& config,
               std::uint64_t tree_seed);

class Forest {
public:
  Forest() = default;
  Forest(std::size_t n_features, std::vector<std::string> feature_names, ForestConfig config,
         std::vector<Tree> trees);

  /// Mean positive-class leaf probability across trees.
  double predict_proba(std::span<const double> x) const;
  /// Per-feature sums of sample-weighted impurity decrease, normalized to 1.
  /// A forest without any split returns zeros (and warns).
  std::vector<double> feature_importances() const;

  std::size_t n_features() const { return n_features_; }
  const std::vector<std::string>& feature_names() const { return names_; }
  const ForestConfig& config() const { return config_; }
  const std::vector<Tree>& trees() const { return trees_; }

  /// Versioned JSON document; trees as nested node objects.
  std::string to_json() const;
  static Forest from_json(const std::string& text);

private:
  std::size_t n_features_ = 0;
  std::vector<std::string> names_;
  ForestConfig config_;
  std::vector<Tree> trees_;
};

/// Bootstrap-aggregated CART forest. Tree t uses an RNG seeded from
/// (config.seed, t), so the result is independent of thread count. Data with
/// a single class produces constant trees and a warning.
Forest train_forest(const TrainingData& data, const ForestConfig& config);

inline constexpr int kForestFormatVersion = 1;

}  // namespace emsrisk
