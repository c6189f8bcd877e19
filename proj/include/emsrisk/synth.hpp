#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "emsrisk/ingest.hpp"

namespace emsrisk {

using WeeklyTemplate = std::array<double, kHoursPerWeek>;

/// A Gaussian bump on the hour-of-day axis (wraps around midnight).
struct DiurnalBump {
  double hour = 12.0;
  double width = 2.0;
  double weight = 1.0;
};

/// Builds a 168-bin template: `floor` plus the bumps for each day, scaled
/// by the per-day multipliers (Monday first). Rescaled to mean 1.
WeeklyTemplate make_template(const std::vector<DiurnalBump>& bumps, double floor,
                             const std::array<double, 7>& day_multipliers = {1, 1, 1, 1, 1, 1, 1});
/// Every bin 1.
WeeklyTemplate flat_template();

struct NatureTemplate {
  int code = 0;
  /// Mean calls per region-hour before regional factors.
  double base_rate = 0.0;
  WeeklyTemplate profile = flat_template();
};

struct CategoryTemplate {
  std::string name;
  /// Probability that a region holds the category at all.
  double presence = 0.5;
  /// A holding region gets 1..max_venues venues.
  int max_venues = 1;
  /// Mean check-ins per venue-hour.
  double checkin_rate = 0.0;
  WeeklyTemplate profile = flat_template();
};

struct Coupling {
  int nature = 0;
  std::string category;
  double multiplier = 1.0;
};

/// Calls per (region r, hour t, nature i) are Poisson with mean
///
///   base_i * pop(r) * imd(r) * template_i(how(t) - shift(r))
///          * prod{coupled categories held by r} multiplier
///          * activity(r, how(t)) * season(t)
///
/// pop(r) = (res_pop / pop_mean)^pop_elasticity and
/// imd(r) = exp(imd_effect * z) with z in [-1, 1] the centred IMD score.
/// activity(r, h) = (1 + k * a(r, h) / a_mean) / (1 + k) where a(r, h) is
/// the expected check-in rate of r's venues at h and k = activity_coupling.
/// shift(r) is uniform on [-phase_shift, phase_shift] hours.
/// season(t) = seasonal_surge on 20 Dec .. 1 Jan, 1 otherwise.
struct GeneratorSpec {
  std::string name = "custom";
  std::uint64_t seed = 1;
  int n_regions = 50;
  /// Grid columns; 0 picks ceil(sqrt(n_regions)).
  int grid_columns = 0;
  double cell_size = 0.01;
  Point origin{-2.30, 53.40};
  Date start{std::chrono::year{2015}, std::chrono::month{1}, std::chrono::day{5}};
  int days = 730;

  std::vector<NatureTemplate> natures;
  std::vector<CategoryTemplate> categories;
  std::vector<Coupling> couplings;

  double pop_mean = 1500.0;
  /// Log-normal sigma of res_pop around pop_mean.
  double pop_spread = 0.25;
  double pop_elasticity = 1.0;
  /// day_pop = res_pop * ratio with ratio log-normal around day_pop_ratio.
  double day_pop_ratio = 0.8;
  double day_pop_spread = 0.3;
  double imd_min = 5.0;
  double imd_max = 60.0;
  double imd_effect = 0.2;
  int phase_shift = 0;
  double activity_coupling = 0.0;
  double seasonal_surge = 1.0;

  /// Throws UsageError naming the first violated constraint.
  void validate() const;
};

/// Preset names accepted by `preset`.
std::vector<std::string> preset_names();
/// "default" (same as "paper-mimic"), "null", "coupled", "daytime",
/// "night", "diurnal", "ablation", "uncoupled", "regional", "seasonal".
/// Throws UsageError for an unknown name.
GeneratorSpec preset(std::string_view name);

GeneratorSpec spec_from_json(const std::string& text);
std::string spec_to_json(const GeneratorSpec& spec);
/// A preset name, or the path of a JSON spec file.
GeneratorSpec load_spec(const std::string& name_or_path);

/// Refuses specs expecting more than this many calls plus check-ins.
inline constexpr double kMaxExpectedEvents = 1e6;

/// Deterministic in (spec, seed); `threads` only changes speed.
/// Throws UsageError when the expected event count exceeds the cap.
Dataset generate(const GeneratorSpec& spec, unsigned threads = 1);

struct ExpectedPair {
  int nature = 0;
  std::string category;
  double sa = 0.0;
  double ta = 0.0;
  double st_risk = 0.0;
};

struct GroundTruth {
  double expected_calls = 0.0;        ///< analysed natures only
  double expected_excluded_calls = 0.0;
  double expected_checkins = 0.0;
  /// Expected share of (region, hour) slots with an analysed call.
  double expected_slot_rate = 0.0;
  /// L1-normalized expected weekly call profile per nature.
  std::map<int, std::vector<double>> nature_profiles;
  /// L1-normalized expected weekly check-in profile per held category.
  std::map<std::string, std::vector<double>> category_profiles;
  /// Every (analysed nature, held category) pair, sorted by (nature, category).
  std::vector<ExpectedPair> pairs;
  /// Planted couplings on held categories, by expected ST_Risk descending.
  std::vector<ExpectedPair> top_couplings;
  /// Categories held by each region.
  std::map<std::string, std::vector<std::string>> region_categories;
};

/// Closed-form expectations for the dataset `generate(spec)` draws. SA is
/// the ratio of expected counts, so it matches the empirical lift only in
/// the large-sample limit.
GroundTruth ground_truth(const GeneratorSpec& spec);

}  // namespace emsrisk
