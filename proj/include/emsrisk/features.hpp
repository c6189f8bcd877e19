#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emsrisk/ingest.hpp"
#include "emsrisk/rng.hpp"

namespace emsrisk {

/// Fixed feature layout. Indices are stable within a layout version.
enum Feature : std::size_t {
  kHoD,
  kDoW,
  kUAR,
  kResPop,
  kDayPop,
  kIMD,
  kHist,
  kHoDHist,
  kHoDHistF,
  kHoWCalls,
  kHoWHistF,
  kDayWHist,
  kFsqHist,
  kFsqHoD,
  kHoDFsqF,
  kFsqHoW,
  kHoWFsqF,
  kFeatureCount
};

inline constexpr int kFeatureLayoutVersion = 1;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "HoD",       "DoW",        "UAR",        "ResPop",   "DayPop",  "IMD",
    "Hist",      "HoD_hist",   "HoD_hist_f", "HoW_calls", "HoW_hist_f", "Day_W_hist",
    "Fsq_hist",  "Fsq_HoD",    "HoD_Fsq_f",  "Fsq_HoW",  "HoW_Fsq_f"};

/// Demo: static area descriptors. Calls: prediction-time and call-history
/// features. Fsq: check-in activity features.
enum class FeatureGroup { Demo, Calls, Fsq };

FeatureGroup feature_group(std::size_t feature);
std::string_view group_name(FeatureGroup g);
/// Parses "Demo", "Calls" or "Fsq" (case-insensitive).
FeatureGroup parse_group(std::string_view name);
/// Feature indices of one group, ascending.
std::vector<std::size_t> group_features(FeatureGroup g);

using FeatureVector = std::array<double, kFeatureCount>;

struct LabeledExample {
  FeatureVector features{};
  int label = -1;  ///< +1 call, -1 no call
  std::string region_id;
  HourStamp t_prime;
};

/// Per-region history accumulated strictly before a moving cursor. Advancing
/// is incremental, so sweeping hour by hour through the data is linear.
class HistoryIndex {
public:
  /// `uar` supplies the static UAR value per region (missing ids read 0).
  HistoryIndex(const Dataset& dataset, std::map<std::string, double> uar);

  /// Folds in every call and check-in with timestamp < t. `t` must not move
  /// backwards.
  void advance_to(HourStamp t);
  HourStamp cursor() const { return cursor_; }

  /// Features for (region, cursor()).
  FeatureVector features(std::size_t region) const;
  FeatureVector features(const std::string& region_id) const;

  const std::vector<std::string>& region_ids() const { return region_ids_; }
  std::size_t region_index(const std::string& region_id) const;

private:
  struct Counts {
    double hist = 0, fsq = 0;
    std::array<double, 24> hod{};
    std::array<double, 168> how{};
    std::array<double, 7> dow{};
    std::array<double, 24> fsq_hod{};
    std::array<double, 168> fsq_how{};
  };
  struct Static {
    double uar = 0, res_pop = 0, day_pop = 0, imd = 0;
  };

  std::vector<std::string> region_ids_;
  std::vector<Static> static_;
  std::vector<Counts> counts_;
  std::vector<std::pair<HourStamp, std::uint32_t>> calls_;     // non-excluded, sorted
  std::vector<std::pair<HourStamp, std::uint32_t>> checkins_;  // assigned venues, sorted
  std::size_t next_call_ = 0;
  std::size_t next_checkin_ = 0;
  HourStamp cursor_{INT64_MIN};
};

/// Features of `region_id` at prediction time t_prime from calls and
/// check-ins strictly before t_prime. Throws UsageError for an unknown
/// region or a t_prime not after the first call.
FeatureVector build_features(const std::string& region_id, HourStamp t_prime, const Dataset& dataset,
                             const std::map<std::string, double>& uar);

/// Draws round(ratio * |positives|) distinct regions, uniformly without
/// replacement, from `regions` minus `positives`. Falls back to every
/// call-free region (with a warning) when there are too few.
std::vector<std::string> sample_negatives(HourStamp t_prime, const std::vector<std::string>& positives,
                                          const std::vector<std::string>& regions, double ratio, Rng& rng);

struct WalkForwardConfig {
  HourStamp start;  ///< first evaluated hour
  HourStamp end;    ///< exclusive
  std::int64_t retrain_every = 168;
  std::int64_t warmup_hours = 4 * 168;
  double negative_ratio = 1.0;
  std::uint64_t seed = 42;
};

/// One evaluated hour. `train` is a prefix of the chronological example
/// list: every example labelled before `train_cutoff`.
struct WalkForwardStep {
  HourStamp t_prime;
  HourStamp train_cutoff;
  std::span<const LabeledExample> train;
  std::span<const LabeledExample> test;
};

/// Builds the labelled example stream once and serves the per-hour
/// (train, test) views. Each hour with calls contributes its positives and
/// an equal number of sampled negatives; the same examples later serve as
/// training data. Hours without calls yield an empty test set.
class WalkForward {
public:
  WalkForward(const Dataset& dataset, const WalkForwardConfig& config, std::map<std::string, double> uar);

  const WalkForwardConfig& config() const { return config_; }
  /// First hour for which examples are built (one hour after the first call).
  HourStamp data_start() const { return data_start_; }
  const std::vector<LabeledExample>& examples() const { return examples_; }

  /// One step per hour in [start, end).
  std::vector<WalkForwardStep> steps() const;

  /// Hours whose call-free regions could not match the positive count.
  std::size_t short_hours() const { return short_hours_; }

private:
  std::span<const LabeledExample> range(HourStamp from, HourStamp to) const;

  WalkForwardConfig config_;
  HourStamp data_start_;
  std::vector<LabeledExample> examples_;
  std::size_t short_hours_ = 0;
};

/// Header `t_prime,region_id,label,<feature names...>`.
void write_examples_csv(const std::string& path, std::span<const LabeledExample> examples);

}  // namespace emsrisk
