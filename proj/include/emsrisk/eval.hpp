#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emsrisk/features.hpp"
#include "emsrisk/forest.hpp"
#include "emsrisk/ingest.hpp"

namespace emsrisk {

inline constexpr double kDecisionThreshold = 0.5;

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  /// False when nothing was predicted positive; precision then reads 0.
  bool precision_defined = true;
};

/// Scores >= threshold count as a +1 prediction. Throws UsageError on a
/// length mismatch or when no label is +1.
PrecisionRecall precision_recall(std::span<const double> scores, std::span<const int> labels,
                                 double threshold = kDecisionThreshold);

/// Mann-Whitney rank AUC, ties counted one half. Throws UsageError unless
/// both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

struct AblationSpec {
  enum class Mode { DropGroup, OnlyGroup };
  Mode mode = Mode::DropGroup;
  FeatureGroup group = FeatureGroup::Fsq;

  /// "drop:Fsq", "only:Calls", ...
  static AblationSpec parse(std::string_view text);
  std::string label() const;
  /// Layout indices kept under this ablation, ascending.
  std::vector<std::size_t> kept_features() const;
};

/// Kept layout indices; all of them without an ablation.
std::vector<std::size_t> kept_features(const std::optional<AblationSpec>& ablation);

struct ScoredExample {
  int hour_of_week = 0;
  double score = 0.0;
  int label = -1;
};

using HourlyAccuracy = std::array<std::optional<double>, kHoursPerWeek>;

/// Fraction correct per hour-of-week bucket; empty buckets are nullopt.
HourlyAccuracy hourly_accuracy(std::span<const ScoredExample> scored, double threshold = kDecisionThreshold);

struct EvalConfig {
  WalkForwardConfig walk;
  ForestConfig forest;
  std::optional<AblationSpec> ablation;
};

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  bool precision_defined = true;
  double auc = 0.5;
  double accuracy = 0.0;
  std::size_t n_test = 0;
  std::size_t n_positive = 0;
  std::size_t evaluated_hours = 0;
  std::size_t skipped_hours = 0;
  std::size_t retrains = 0;
  HourlyAccuracy hourly{};
  std::array<std::size_t, kHoursPerWeek> hourly_count{};
  std::vector<std::string> feature_names;
  /// Mean over retrained forests of the normalized Gini importances.
  std::vector<double> importances;
  std::string ablation = "none";
  /// Share of (region, hour) slots with a call over the whole dataset.
  double slot_positive_rate = 0.0;
  std::vector<ScoredExample> scored;
};

/// Share of (region, hour) slots holding at least one non-excluded call,
/// over whole days from the first to the last call.
double slot_positive_rate(const Dataset& dataset);

/// The last `eval_weeks` whole weeks before the end of the data (the day
/// after the last call). Throws DataError when the data is too short to
/// leave `warmup_hours` of history before the window.
WalkForwardConfig default_walk_forward(const Dataset& dataset, std::size_t eval_weeks,
                                       std::int64_t warmup_hours = 4 * kHoursPerWeek);

/// UAR per region from a risk table over calls before `cutoff`.
std::map<std::string, double> uar_before(const Dataset& dataset, HourStamp cutoff);

/// Walk-forward evaluation: a forest is retrained on every example
/// labelled before each block start and scores the balanced test sets of
/// the block's hours. UAR uses calls before the evaluation start only.
MetricsReport run_walk_forward(const Dataset& dataset, const EvalConfig& config);

/// Trains one forest on every labelled example before `config.walk.end`.
Forest train_model(const Dataset& dataset, const EvalConfig& config);

void write_report_json(const std::string& path, const MetricsReport& report);
/// One row per hour of week: hour_of_week,accuracy,n.
void write_report_csv(const std::string& path, const MetricsReport& report);

}  // namespace emsrisk
