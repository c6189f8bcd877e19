#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emsrisk/ingest.hpp"
#include "emsrisk/model.hpp"

namespace emsrisk {

/// Contiguous daily counts starting at `start_date`.
struct DailySeries {
  Date start_date{};
  std::vector<double> values;
};

/// A series whose entries may be undefined (e.g. moving-average edges).
using PartialSeries = std::vector<std::optional<double>>;

inline constexpr std::size_t kSeasonLength = 365;
using SeasonalIndices = std::array<std::optional<double>, kSeasonLength>;

/// Multiplicative decomposition: observed = trend * seasonality * irregular.
struct Decomposition {
  DailySeries observed;
  PartialSeries trend;
  SeasonalIndices seasonality;  ///< indexed by seasonal_slot()
  PartialSeries irregular;
};

/// Selects calls for histograms. Excluded (code-35) calls never match.
struct CallFilter {
  std::optional<NatureCode> nature;
  std::optional<std::string> region_id;
  std::optional<HourStamp> from;  ///< inclusive
  std::optional<HourStamp> to;    ///< exclusive

  bool matches(const CallEvent& call) const;
};

/// Calendar month used as a profiling window.
struct MonthWindow {
  int year = 1970;
  unsigned month = 1;

  HourStamp begin() const;
  HourStamp end() const;
  MonthWindow next() const;
  static MonthWindow containing(HourStamp t);
  friend auto operator<=>(const MonthWindow&, const MonthWindow&) = default;
};

/// Day-of-year slot 0..364; 31 December of a leap year (day 366) folds
/// into the last slot.
std::size_t seasonal_slot(Date date);

/// Counts non-excluded calls per calendar day over the closed span from the
/// first to the last matching call. Throws DataError if nothing matches.
DailySeries aggregate_daily(std::span<const CallEvent> calls,
                            std::optional<NatureCode> nature = std::nullopt);

/// Centered moving average. Odd windows use a plain centered mean; even
/// windows use the 2xw centered average. Entries within half a window of
/// either edge are undefined. Throws UsageError if the series is shorter
/// than the window.
PartialSeries centered_moving_average(std::span<const double> values, std::size_t window = 365);

/// Mean detrended value (value / trend) per seasonal slot. Points whose
/// trend is zero are skipped with a warning.
SeasonalIndices multiplicative_seasonality(const DailySeries& series, const PartialSeries& trend);

Decomposition decompose(const DailySeries& series, std::size_t window = 365);

/// One row per day: date,observed,trend,seasonality,irregular. Undefined
/// components are left empty.
void write_decomposition_csv(const std::string& path, const Decomposition& d);

/// 24-bin hour-of-day counts of matching calls.
TemporalProfile hour_of_day_counts(std::span<const CallEvent> calls, const CallFilter& filter);
/// 168-bin hour-of-week counts of matching calls.
TemporalProfile hour_of_week_counts(std::span<const CallEvent> calls, const CallFilter& filter);

/// L1-normalized hour-of-day profile of one nature inside one month.
/// No matching calls gives an all-zero profile and a warning.
TemporalProfile diurnal_profile(std::span<const CallEvent> calls, NatureCode nature, MonthWindow month);
/// L1-normalized hour-of-week profile of one nature over all calls.
TemporalProfile weekly_profile(std::span<const CallEvent> calls, NatureCode nature);
TemporalProfile weekly_profile(std::span<const CallEvent> calls, const CallFilter& filter);

inline constexpr double kKlSmoothing = 1e-6;

/// Kullback-Leibler divergence D(p||q) in nats. Each input is L1-normalized,
/// smoothed by `epsilon` per bin and re-normalized first, so zero bins and
/// all-zero profiles are allowed. Throws UsageError on a length mismatch.
double kl_divergence(const TemporalProfile& p, const TemporalProfile& q, double epsilon = kKlSmoothing);

enum class StabilityMode { WithinRegion, CrossRegion };

struct StabilityOptions {
  StabilityMode mode = StabilityMode::WithinRegion;
  /// Random region pairs drawn per nature in cross-region mode.
  std::size_t pairs_per_nature = 100;
  std::uint64_t seed = 1;
};

struct StabilityScore {
  NatureCode nature;
  std::string region_a;
  std::string region_b;
  MonthWindow window_a;
  MonthWindow window_b;
  double kl = 0.0;
};

struct NatureStability {
  NatureCode nature;
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;
};

struct StabilityReport {
  StabilityMode mode = StabilityMode::WithinRegion;
  std::vector<StabilityScore> scores;
  std::vector<NatureStability> summary;
  std::vector<NatureCode> skipped;  ///< fewer than two non-empty windows
};

/// Within-region mode compares the weekly profiles of successive calendar
/// months of the same region. Cross-region mode compares same-month
/// profiles of random distinct region pairs. Only non-empty (region, month)
/// profiles take part.
StabilityReport profile_stability_report(std::span<const CallEvent> calls, std::span<const NatureCode> natures,
                                         const StabilityOptions& options);

void write_stability_csv(const std::string& scores_path, const std::string& summary_path,
                         const StabilityReport& report);

/// Distinct non-excluded natures in ascending code order.
std::vector<NatureCode> natures_present(std::span<const CallEvent> calls);

}  // namespace emsrisk
