#include "emsrisk/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "emsrisk/error.hpp"
#include "emsrisk/log.hpp"
#include "emsrisk/rng.hpp"

namespace emsrisk {
namespace {

// A split must beat the incumbent by more than this to replace it; it also
// acts as the minimum useful impurity decrease.
constexpr double kGainTolerance = 1e-12;

struct Weighted {
  std::uint32_t row;
  std::uint32_t weight;
};

struct Item {
  std::uint32_t rank;
  double pos;
  double neg;
};

// Per feature: the sorted distinct values and each row's index into them.
// Built once per forest; splits then only compare integer ranks.
struct RankedColumns {
  std::vector<std::vector<double>> distinct;
  std::vector<std::vector<std::uint32_t>> rank;

  explicit RankedColumns(const TrainingData& data) : distinct(data.features()), rank(data.features()) {
    for (std::size_t f = 0; f < data.features(); ++f) {
      const auto col = data.column(f);
      auto& d = distinct[f];
      d.assign(col.begin(), col.end());
      std::sort(d.begin(), d.end());
      d.erase(std::unique(d.begin(), d.end()), d.end());
      auto& r = rank[f];
      r.resize(col.size());
      for (std::size_t i = 0; i < col.size(); ++i)
        r[i] = static_cast<std::uint32_t>(std::lower_bound(d.begin(), d.end(), col[i]) - d.begin());
    }
  }
};

struct Scratch {
  std::vector<Item> items;
  std::vector<double> hist_pos, hist_neg;
};

double gini2(double pos, double neg) {
  const double w = pos + neg;
  if (w <= 0.0) return 0.0;
  const double p = pos / w, q = neg / w;
  return 1.0 - p * p - q * q;
}

double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

// Candidate thresholds sit between consecutive distinct values present in
// the node, scanned in ascending order; weights are integers, so the class
// sums are exact whichever way the node is bucketed.
std::optional<Split> search(const TrainingData& data, const RankedColumns& ranked, std::span<const Weighted> samples,
                            std::span<const std::size_t> features, std::size_t min_leaf, Scratch& scratch) {
  double P = 0, N = 0;
  for (const auto& s : samples) (data.label(s.row) > 0 ? P : N) += s.weight;
  const double W = P + N;
  const double parent = gini2(P, N);
  const double leaf_min = static_cast<double>(min_leaf);

  std::optional<Split> best;
  double best_gain = 0.0;
  for (std::size_t f : features) {
    const auto& values = ranked.distinct[f];
    const auto& rank = ranked.rank[f];
    if (values.size() < 2) continue;

    double lp = 0, ln = 0;
    std::optional<std::uint32_t> prev;
    auto visit = [&](std::uint32_t r, double pos, double neg) {
      if (prev) {
        const double wl = lp + ln, wr = W - wl;
        if (wl >= leaf_min && wr >= leaf_min) {
          const double gain = parent - (wl / W) * gini2(lp, ln) - (wr / W) * gini2(P - lp, N - ln);
          if (gain > best_gain + kGainTolerance) {
            best_gain = gain;
            best = Split{f, midpoint(values[*prev], values[r]), gain};
          }
        }
      }
      lp += pos;
      ln += neg;
      prev = r;
    };

    if (values.size() <= 4 * samples.size()) {
      auto& hp = scratch.hist_pos;
      auto& hn = scratch.hist_neg;
      if (hp.size() < values.size()) {
        hp.resize(values.size(), 0.0);
        hn.resize(values.size(), 0.0);
      }
      for (const auto& s : samples) (data.label(s.row) > 0 ? hp : hn)[rank[s.row]] += s.weight;
      for (std::uint32_t r = 0; r < values.size(); ++r) {
        if (hp[r] == 0.0 && hn[r] == 0.0) continue;
        visit(r, hp[r], hn[r]);
        hp[r] = hn[r] = 0.0;
      }
    } else {
      auto& items = scratch.items;
      items.clear();
      for (const auto& s : samples) {
        const bool positive = data.label(s.row) > 0;
        items.push_back({rank[s.row], positive ? double(s.weight) : 0.0, positive ? 0.0 : double(s.weight)});
      }
      std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.rank < b.rank; });
      for (std::size_t k = 0; k < items.size();) {
        double pos = 0, neg = 0;
        std::size_t j = k;
        for (; j < items.size() && items[j].rank == items[k].rank; ++j) {
          pos += items[j].pos;
          neg += items[j].neg;
        }
        visit(items[k].rank, pos, neg);
        k = j;
      }
    }
  }
  return best;
}

std::vector<Weighted> compress(std::span<const std::size_t> samples, std::size_t rows) {
  std::vector<std::uint32_t> counts(rows, 0);
  for (std::size_t s : samples) {
    if (s >= rows) throw UsageError("sample index out of range");
    ++counts[s];
  }
  std::vector<Weighted> out;
  for (std::size_t r = 0; r < rows; ++r)
    if (counts[r]) out.push_back({static_cast<std::uint32_t>(r), counts[r]});
  return out;
}

class TreeGrower {
public:
  TreeGrower(const TrainingData& data, const RankedColumns& ranked, const ForestConfig& config, std::uint64_t seed)
      : data_(data), ranked_(ranked), config_(config), rng_(seed), mtry_(config.resolved_mtry(data.features())) {
    all_features_.resize(data.features());
    for (std::size_t f = 0; f < all_features_.size(); ++f) all_features_[f] = f;
  }

  std::vector<TreeNode> grow(std::vector<Weighted> samples) {
    build(std::move(samples), 0);
    return std::move(nodes_);
  }

private:
  std::vector<std::size_t> pick_features() {
    if (mtry_ >= all_features_.size()) return all_features_;
    std::vector<std::size_t> pool = all_features_;
    for (std::size_t i = 0; i < mtry_; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng_.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(mtry_);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  std::int32_t build(std::vector<Weighted> samples, std::size_t depth) {
    double pos = 0, neg = 0;
    for (const auto& s : samples) (data_.label(s.row) > 0 ? pos : neg) += s.weight;
    const auto index = static_cast<std::int32_t>(nodes_.size());
    TreeNode node;
    node.n_samples = pos + neg;
    node.p_positive = node.n_samples > 0 ? pos / node.n_samples : 0.0;
    nodes_.push_back(node);

    if (depth >= config_.max_depth || pos == 0 || neg == 0 ||
        node.n_samples < 2.0 * static_cast<double>(config_.min_leaf))
      return index;
    const auto features = pick_features();
    const auto split = search(data_, ranked_, samples, features, config_.min_leaf, scratch_);
    if (!split) return index;

    std::vector<Weighted> left, right;
    const auto col = data_.column(split->feature);
    for (const auto& s : samples) (col[s.row] <= split->threshold ? left : right).push_back(s);
    samples.clear();
    samples.shrink_to_fit();

    const std::int32_t l = build(std::move(left), depth + 1);
    const std::int32_t r = build(std::move(right), depth + 1);
    TreeNode& n = nodes_[static_cast<std::size_t>(index)];
    n.feature = static_cast<int>(split->feature);
    n.threshold = split->threshold;
    n.impurity_decrease = split->impurity_decrease;
    n.left = l;
    n.right = r;
    return index;
  }

  const TrainingData& data_;
  const RankedColumns& ranked_;
  const ForestConfig& config_;
  Rng rng_;
  std::size_t mtry_;
  std::vector<std::size_t> all_features_;
  std::vector<TreeNode> nodes_;
  Scratch scratch_;
};

nlohmann::ordered_json node_json(const std::vector<TreeNode>& nodes, std::int32_t i) {
  const TreeNode& n = nodes.at(static_cast<std::size_t>(i));
  nlohmann::ordered_json j;
  j["n_samples"] = n.n_samples;
  if (n.leaf()) {
    j["p_positive"] = n.p_positive;
    return j;
  }
  j["feature"] = n.feature;
  j["threshold"] = n.threshold;
  j["impurity_decrease"] = n.impurity_decrease;
  j["p_positive"] = n.p_positive;
  j["left"] = node_json(nodes, n.left);
  j["right"] = node_json(nodes, n.right);
  return j;
}

std::int32_t parse_node(const nlohmann::json& j, std::vector<TreeNode>& nodes, std::size_t n_features,
                        std::size_t depth) {
  if (depth > 512) throw DataError("forest JSON: tree too deep");
  const auto index = static_cast<std::int32_t>(nodes.size());
  TreeNode n;
  n.n_samples = j.at("n_samples").get<double>();
  n.p_positive = j.at("p_positive").get<double>();
  nodes.push_back(n);
  if (!j.contains("feature")) return index;
  const int f = j.at("feature").get<int>();
  if (f < 0 || static_cast<std::size_t>(f) >= n_features) throw DataError("forest JSON: feature out of range");
  const std::int32_t l = parse_node(j.at("left"), nodes, n_features, depth + 1);
  const std::int32_t r = parse_node(j.at("right"), nodes, n_features, depth + 1);
  TreeNode& m = nodes[static_cast<std::size_t>(index)];
  m.feature = f;
  m.threshold = j.at("threshold").get<double>();
  m.impurity_decrease = j.at("impurity_decrease").get<double>();
  m.left = l;
  m.right = r;
  return index;
}

}  // namespace

std::size_t ForestConfig::resolved_mtry(std::size_t n_features) const {
  if (mtry > 0) return mtry;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_features)))));
}

void ForestConfig::validate(std::size_t n_features) const {
  if (n_trees < 1) throw UsageError("n_trees must be at least 1");
  if (max_depth < 1) throw UsageError("max_depth must be at least 1");
  if (min_leaf < 1) throw UsageError("min_leaf must be at least 1");
  if (n_features < 1) throw UsageError("need at least one feature");
  const std::size_t m = resolved_mtry(n_features);
  if (m < 1 || m > n_features)
    throw UsageError("mtry must be between 1 and " + std::to_string(n_features));
}

TrainingData::TrainingData(std::size_t n_features, std::vector<std::string> feature_names)
    : n_features_(n_features), names_(std::move(feature_names)), columns_(n_features) {
  if (!names_.empty() && names_.size() != n_features) throw UsageError("feature name count mismatch");
  if (names_.empty())
    for (std::size_t f = 0; f < n_features; ++f) names_.push_back("f" + std::to_string(f));
}

void TrainingData::add(std::span<const double> row, int label) {
  if (row.size() != n_features_) throw UsageError("row has wrong feature count");
  if (label != 1 && label != -1) throw UsageError("labels must be +1 or -1");
  for (std::size_t f = 0; f < n_features_; ++f) columns_[f].push_back(row[f]);
  labels_.push_back(label);
}

double gini_impurity(std::span<const double> class_counts) {
  double total = 0.0;
  for (double c : class_counts) {
    if (!(c >= 0.0)) throw UsageError("class counts must be non-negative");
    total += c;
  }
  if (total <= 0.0) throw UsageError("gini_impurity of an empty node");
  double sum_sq = 0.0;
  for (double c : class_counts) sum_sq += (c / total) * (c / total);
  return 1.0 - sum_sq;
}

std::optional<Split> best_split(const TrainingData& data, std::span<const std::size_t> samples,
                                std::span<const std::size_t> features, std::size_t min_leaf) {
  for (std::size_t f : features)
    if (f >= data.features()) throw UsageError("feature index out of range");
  std::vector<std::size_t> sorted(features.begin(), features.end());
  std::sort(sorted.begin(), sorted.end());
  const auto weighted = compress(samples, data.rows());
  const RankedColumns ranked(data);
  Scratch scratch;
  return search(data, ranked, weighted, sorted, std::max<std::size_t>(min_leaf, 1), scratch);
}

double Tree::predict(std::span<const double> x) const {
  if (nodes_.empty()) throw UsageError("empty tree");
  std::size_t i = 0;
  while (!nodes_[i].leaf()) {
    const TreeNode& n = nodes_[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes_[i].p_positive;
}

std::size_t Tree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  if (!nodes_.empty()) stack.push_back({0, 0});
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes_[i].leaf()) {
      stack.push_back({static_cast<std::size_t>(nodes_[i].left), d + 1});
      stack.push_back({static_cast<std::size_t>(nodes_[i].right), d + 1});
    }
  }
  return best;
}

Tree grow_tree(const TrainingData& data, std::span<const std::size_t> samples, const ForestConfig& config,
               std::uint64_t tree_seed) {
  config.validate(data.features());
  auto weighted = compress(samples, data.rows());
  if (weighted.empty()) throw UsageError("cannot grow a tree on zero samples");
  const RankedColumns ranked(data);
  return Tree(TreeGrower(data, ranked, config, tree_seed).grow(std::move(weighted)));
}

Forest::Forest(std::size_t n_features, std::vector<std::string> feature_names, ForestConfig config,
               std::vector<Tree> trees)
    : n_features_(n_features), names_(std::move(feature_names)), config_(config), trees_(std::move(trees)) {}

double Forest::predict_proba(std::span<const double> x) const {
  if (trees_.empty()) throw UsageError("forest has no trees");
  if (x.size() != n_features_)
    throw UsageError("feature vector has " + std::to_string(x.size()) + " entries, forest expects " +
                     std::to_string(n_features_));
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(x);
  return sum / static_cast<double>(trees_.size());
}

std::vector<double> Forest::feature_importances() const {
  std::vector<double> imp(n_features_, 0.0);
  for (const auto& t : trees_)
    for (const auto& n : t.nodes())
      if (!n.leaf()) imp[static_cast<std::size_t>(n.feature)] += n.n_samples * n.impurity_decrease;
  double total = 0.0;
  for (double v : imp) total += v;
  if (total <= 0.0) {
    log::warn("forest has no splits; feature importances are all zero");
    return imp;
  }
  for (double& v : imp) v /= total;
  return imp;
}

std::string Forest::to_json() const {
  nlohmann::ordered_json doc;
  doc["format"] = "emsrisk-forest";
  doc["version"] = kForestFormatVersion;
  doc["n_features"] = n_features_;
  doc["feature_names"] = names_;
  doc["config"] = {{"n_trees", config_.n_trees},   {"max_depth", config_.max_depth},
                   {"min_leaf", config_.min_leaf}, {"mtry", config_.resolved_mtry(n_features_)},
                   {"seed", config_.seed}};
  doc["trees"] = nlohmann::ordered_json::array();
  for (const auto& t : trees_) doc["trees"].push_back(node_json(t.nodes(), 0));
  return doc.dump(1);
}

Forest Forest::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
    if (doc.value("format", "") != "emsrisk-forest") throw DataError("not an emsrisk forest document");
    if (doc.at("version").get<int>() != kForestFormatVersion)
      throw DataError("unsupported forest format version " + doc.at("version").dump());
    const auto n_features = doc.at("n_features").get<std::size_t>();
    auto names = doc.at("feature_names").get<std::vector<std::string>>();
    if (names.size() != n_features) throw DataError("forest JSON: feature name count mismatch");
    ForestConfig cfg;
    const auto& c = doc.at("config");
    cfg.n_trees = c.at("n_trees").get<std::size_t>();
    cfg.max_depth = c.at("max_depth").get<std::size_t>();
    cfg.min_leaf = c.at("min_leaf").get<std::size_t>();
    cfg.mtry = c.at("mtry").get<std::size_t>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    std::vector<Tree> trees;
    for (const auto& t : doc.at("trees")) {
      std::vector<TreeNode> nodes;
      parse_node(t, nodes, n_features, 0);
      trees.emplace_back(std::move(nodes));
    }
    if (trees.empty()) throw DataError("forest JSON has no trees");
    return Forest(n_features, std::move(names), cfg, std::move(trees));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("forest JSON: ") + e.what());
  }
}

Forest train_forest(const TrainingData& data, const ForestConfig& config) {
  config.validate(data.features());
  if (data.rows() == 0) throw DataError("cannot train a forest on zero examples");
  std::size_t pos = 0;
  for (int l : data.labels()) pos += l > 0;
  const std::size_t n = data.rows();

  std::vector<Tree> trees(config.n_trees);
  if (pos == 0 || pos == n) {
    log::warn("training data has a single class; forest predicts a constant");
    TreeNode leaf;
    leaf.n_samples = static_cast<double>(n);
    leaf.p_positive = pos == n ? 1.0 : 0.0;
    for (auto& t : trees) t = Tree({leaf});
    return Forest(data.features(), data.feature_names(), config, std::move(trees));
  }

  const RankedColumns ranked(data);
  auto grow_one = [&](std::size_t t) {
    Rng rng(derive_seed(config.seed, {static_cast<std::uint64_t>(t)}));
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n));
    const std::uint64_t tree_seed = rng.next();
    trees[t] = Tree(TreeGrower(data, ranked, config, tree_seed).grow(compress(sample, n)));
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(config.n_trees)));
  if (workers == 1) {
    for (std::size_t t = 0; t < config.n_trees; ++t) grow_one(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t t; (t = next++) < config.n_trees;) {
          try {
            grow_one(t);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
  }
  return Forest(data.features(), data.feature_names(), config, std::move(trees));
}

}  // namespace emsrisk
