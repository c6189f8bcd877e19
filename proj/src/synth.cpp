#include "emsrisk/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "emsrisk/error.hpp"
#include "emsrisk/rng.hpp"
#include "text_io.hpp"

namespace emsrisk {

WeeklyTemplate make_template(const std::vector<DiurnalBump>& bumps, double floor,
                             const std::array<double, 7>& day_multipliers) {
  std::array<double, 24> day{};
  for (int h = 0; h < 24; ++h) {
    double v = floor;
    for (const auto& b : bumps) {
      double d = std::fabs(h - b.hour);
      d = std::min(d, 24.0 - d);
      v += b.weight * std::exp(-0.5 * (d / b.width) * (d / b.width));
    }
    day[static_cast<std::size_t>(h)] = v;
  }
  WeeklyTemplate out{};
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = day[i % 24] * day_multipliers[i / 24];
    total += out[i];
  }
  if (!(total > 0.0)) throw UsageError("template has no mass");
  for (double& v : out) v *= kHoursPerWeek / total;
  return out;
}

WeeklyTemplate flat_template() {
  WeeklyTemplate t;
  t.fill(1.0);
  return t;
}

namespace {

void check_profile(const WeeklyTemplate& p, const std::string& what) {
  double total = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) throw UsageError(what + ": profile entries must be finite and >= 0");
    total += v;
  }
  if (!(total > 0.0)) throw UsageError(what + ": profile has no mass");
}

}  // namespace

void GeneratorSpec::validate() const {
  if (n_regions < 1) throw UsageError("n_regions must be >= 1");
  if (grid_columns < 0) throw UsageError("grid_columns must be >= 0");
  if (!(cell_size > 0.0)) throw UsageError("cell_size must be > 0");
  if (days < 1) throw UsageError("days must be >= 1");
  if (!start.ok()) throw UsageError("start is not a valid date");
  std::set<int> codes;
  for (const auto& n : natures) {
    if (n.code < 1) throw UsageError("nature codes must be >= 1");
    if (!codes.insert(n.code).second) throw UsageError("duplicate nature " + std::to_string(n.code));
    if (!std::isfinite(n.base_rate) || n.base_rate < 0.0)
      throw UsageError("nature " + std::to_string(n.code) + ": base_rate must be >= 0");
    check_profile(n.profile, "nature " + std::to_string(n.code));
  }
  std::set<std::string> names;
  for (const auto& c : categories) {
    if (c.name.empty()) throw UsageError("category names must be non-empty");
    if (!names.insert(c.name).second) throw UsageError("duplicate category '" + c.name + "'");
    if (!(c.presence >= 0.0 && c.presence <= 1.0))
      throw UsageError("category '" + c.name + "': presence must be in [0, 1]");
    if (c.max_venues < 1) throw UsageError("category '" + c.name + "': max_venues must be >= 1");
    if (!std::isfinite(c.checkin_rate) || c.checkin_rate < 0.0)
      throw UsageError("category '" + c.name + "': checkin_rate must be >= 0");
    check_profile(c.profile, "category '" + c.name + "'");
  }
  for (const auto& k : couplings) {
    if (!codes.count(k.nature)) throw UsageError("coupling names unknown nature " + std::to_string(k.nature));
    if (!names.count(k.category)) throw UsageError("coupling names unknown category '" + k.category + "'");
    if (!(k.multiplier > 1.0) || !std::isfinite(k.multiplier))
      throw UsageError("coupling multipliers must be > 1");
  }
  if (!(pop_mean > 0.0)) throw UsageError("pop_mean must be > 0");
  if (!(pop_spread >= 0.0) || !(day_pop_spread >= 0.0)) throw UsageError("spreads must be >= 0");
  if (!(day_pop_ratio >= 0.0)) throw UsageError("day_pop_ratio must be >= 0");
  if (!std::isfinite(pop_elasticity)) throw UsageError("pop_elasticity must be finite");
  if (!(imd_min >= 0.0) || !(imd_max >= imd_min)) throw UsageError("need 0 <= imd_min <= imd_max");
  if (!std::isfinite(imd_effect)) throw UsageError("imd_effect must be finite");
  if (phase_shift < 0 || phase_shift > kHoursPerWeek / 2) throw UsageError("phase_shift must be in [0, 84]");
  if (!(activity_coupling >= 0.0)) throw UsageError("activity_coupling must be >= 0");
  if (!(seasonal_surge > 0.0)) throw UsageError("seasonal_surge must be > 0");
}

namespace {

struct VenueDraw {
  std::size_t category = 0;
  Point location;
};

struct RegionLayout {
  std::string id;
  double res_pop = 0, day_pop = 0, imd = 0;
  int shift = 0;
  std::vector<bool> holds;  // per category
  std::vector<VenueDraw> venues;
  // rate[i][how]: expected calls per hour before the seasonal factor.
  std::vector<WeeklyTemplate> rate;
};

struct Layout {
  std::vector<RegionLayout> regions;
  int columns = 1;
  // Days in the window per day of week, and their summed seasonal factor.
  std::array<double, 7> day_count{}, season_weight{};
  std::array<double, 7> surge_days{};
};

std::string pad_id(char prefix, std::size_t n, std::size_t width) {
  std::string digits = std::to_string(n);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

bool surge_day(Date d) {
  const unsigned m = static_cast<unsigned>(d.month()), day = static_cast<unsigned>(d.day());
  return (m == 12 && day >= 20) || (m == 1 && day == 1);
}

WeeklyTemplate mean_one(const WeeklyTemplate& p) {
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  WeeklyTemplate out{};
  for (std::size_t h = 0; h < p.size(); ++h) out[h] = p[h] * kHoursPerWeek / total;
  return out;
}

Layout build_layout(const GeneratorSpec& spec) {
  spec.validate();
  Layout L;
  L.columns = spec.grid_columns > 0 ? spec.grid_columns
                                    : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.n_regions))));
  const std::size_t width = std::max<std::size_t>(3, std::to_string(spec.n_regions).size());

  const std::int64_t first_day = day_index(spec.start);
  for (int d = 0; d < spec.days; ++d) {
    const Date date = date_from_day_index(first_day + d);
    const auto dow = static_cast<std::size_t>(day_of_week(make_hour(date)));
    L.day_count[dow] += 1.0;
    const bool surge = surge_day(date);
    L.surge_days[dow] += surge;
    L.season_weight[dow] += surge ? spec.seasonal_surge : 1.0;
  }

  std::vector<WeeklyTemplate> nature_t, category_t;
  for (const auto& n : spec.natures) nature_t.push_back(mean_one(n.profile));
  for (const auto& c : spec.categories) category_t.push_back(mean_one(c.profile));

  std::size_t venue_counter = 0;
  for (int r = 0; r < spec.n_regions; ++r) {
    Rng rng(derive_seed(spec.seed, {0, static_cast<std::uint64_t>(r)}));
    RegionLayout R;
    R.id = pad_id('R', static_cast<std::size_t>(r) + 1, width);
    R.res_pop = std::round(spec.pop_mean * std::exp(spec.pop_spread * rng.normal()));
    R.res_pop = std::max(R.res_pop, 1.0);
    R.day_pop = std::round(R.res_pop * spec.day_pop_ratio * std::exp(spec.day_pop_spread * rng.normal()));
    const double u = rng.uniform();
    R.imd = spec.imd_min + u * (spec.imd_max - spec.imd_min);
    R.shift = spec.phase_shift > 0
                  ? static_cast<int>(rng.below(2 * static_cast<std::uint64_t>(spec.phase_shift) + 1)) -
                        spec.phase_shift
                  : 0;

    const int col = r % L.columns, row = r / L.columns;
    const double x0 = spec.origin.lon + col * spec.cell_size, y0 = spec.origin.lat + row * spec.cell_size;
    R.holds.assign(spec.categories.size(), false);
    for (std::size_t c = 0; c < spec.categories.size(); ++c) {
      const auto& cat = spec.categories[c];
      if (!(rng.uniform() < cat.presence)) continue;
      R.holds[c] = true;
      const auto n = 1 + rng.below(static_cast<std::uint64_t>(cat.max_venues));
      for (std::uint64_t v = 0; v < n; ++v) {
        // Keep venues well inside the cell so the join never meets an edge.
        const double fx = 0.05 + 0.9 * rng.uniform(), fy = 0.05 + 0.9 * rng.uniform();
        R.venues.push_back({c, Point{x0 + fx * spec.cell_size, y0 + fy * spec.cell_size}});
        ++venue_counter;
      }
    }
    L.regions.push_back(std::move(R));
  }

  // Expected check-in activity per region and hour of week.
  std::vector<WeeklyTemplate> activity(L.regions.size(), WeeklyTemplate{});
  double activity_total = 0.0;
  for (std::size_t r = 0; r < L.regions.size(); ++r) {
    for (const auto& v : L.regions[r].venues)
      for (std::size_t h = 0; h < kHoursPerWeek; ++h)
        activity[r][h] += spec.categories[v.category].checkin_rate * category_t[v.category][h];
    activity_total += std::accumulate(activity[r].begin(), activity[r].end(), 0.0);
  }
  const double activity_mean = activity_total / (static_cast<double>(L.regions.size()) * kHoursPerWeek);
  const double kappa = activity_mean > 0.0 ? spec.activity_coupling : 0.0;

  const double imd_mid = 0.5 * (spec.imd_min + spec.imd_max);
  const double imd_half = 0.5 * (spec.imd_max - spec.imd_min);
  for (std::size_t r = 0; r < L.regions.size(); ++r) {
    auto& R = L.regions[r];
    const double pop = std::pow(R.res_pop / spec.pop_mean, spec.pop_elasticity);
    const double z = imd_half > 0.0 ? (R.imd - imd_mid) / imd_half : 0.0;
    const double imd = std::exp(spec.imd_effect * z);
    R.rate.assign(spec.natures.size(), WeeklyTemplate{});
    for (std::size_t i = 0; i < spec.natures.size(); ++i) {
      double coupled = 1.0;
      for (const auto& k : spec.couplings) {
        if (k.nature != spec.natures[i].code) continue;
        for (std::size_t c = 0; c < spec.categories.size(); ++c)
          if (R.holds[c] && spec.categories[c].name == k.category) coupled *= k.multiplier;
      }
      const double scale = spec.natures[i].base_rate * pop * imd * coupled;
      for (int h = 0; h < kHoursPerWeek; ++h) {
        const int src = ((h - R.shift) % kHoursPerWeek + kHoursPerWeek) % kHoursPerWeek;
        double act = 1.0;
        if (kappa > 0.0)
          act = (1.0 + kappa * activity[r][static_cast<std::size_t>(h)] / activity_mean) / (1.0 + kappa);
        R.rate[i][static_cast<std::size_t>(h)] = scale * nature_t[i][static_cast<std::size_t>(src)] * act;
      }
    }
  }
  (void)venue_counter;
  return L;
}

Polygon square(const GeneratorSpec& spec, int r, int columns) {
  const int col = r % columns, row = r / columns;
  const double x0 = spec.origin.lon + col * spec.cell_size, y0 = spec.origin.lat + row * spec.cell_size;
  const double x1 = x0 + spec.cell_size, y1 = y0 + spec.cell_size;
  return Polygon{Ring{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}};
}

struct Expected {
  double calls = 0, excluded = 0, checkins = 0;
};

Expected expected_counts(const GeneratorSpec& spec, const Layout& L) {
  Expected e;
  for (const auto& R : L.regions) {
    for (std::size_t i = 0; i < spec.natures.size(); ++i) {
      double s = 0.0;
      for (std::size_t h = 0; h < kHoursPerWeek; ++h) s += R.rate[i][h] * L.season_weight[h / 24];
      (NatureCode{spec.natures[i].code}.excluded() ? e.excluded : e.calls) += s;
    }
    for (const auto& v : R.venues) {
      const auto& cat = spec.categories[v.category];
      const auto t = mean_one(cat.profile);
      for (std::size_t h = 0; h < kHoursPerWeek; ++h) e.checkins += cat.checkin_rate * t[h] * L.day_count[h / 24];
    }
  }
  return e;
}

struct RegionDraw {
  std::vector<CallEvent> calls;
  std::vector<CheckIn> checkins;
};

RegionDraw draw_region(const GeneratorSpec& spec, const Layout& L, std::size_t r,
                       const std::vector<std::string>& venue_ids, std::size_t first_venue) {
  const auto& R = L.regions[r];
  RegionDraw out;
  Rng call_rng(derive_seed(spec.seed, {1, r}));
  const HourStamp t0 = make_hour(spec.start);
  const std::size_t hours = static_cast<std::size_t>(spec.days) * kHoursPerDay;
  for (std::size_t k = 0; k < hours; ++k) {
    const HourStamp t = t0 + static_cast<std::int64_t>(k);
    const auto how = static_cast<std::size_t>(hour_of_week(t));
    const double season = surge_day(civil_date(t)) ? spec.seasonal_surge : 1.0;
    for (std::size_t i = 0; i < spec.natures.size(); ++i) {
      const auto n = call_rng.poisson(R.rate[i][how] * season);
      for (std::uint64_t j = 0; j < n; ++j) out.calls.push_back({t, R.id, NatureCode{spec.natures[i].code}});
    }
  }
  for (std::size_t v = 0; v < R.venues.size(); ++v) {
    const auto& cat = spec.categories[R.venues[v].category];
    if (cat.checkin_rate == 0.0) continue;
    const auto t_profile = mean_one(cat.profile);
    Rng rng(derive_seed(spec.seed, {2, r, v}));
    const auto& id = venue_ids[first_venue + v];
    for (std::size_t k = 0; k < hours; ++k) {
      const HourStamp t = t0 + static_cast<std::int64_t>(k);
      const auto n = rng.poisson(cat.checkin_rate * t_profile[static_cast<std::size_t>(hour_of_week(t))]);
      for (std::uint64_t j = 0; j < n; ++j) out.checkins.push_back({id, t});
    }
  }
  return out;
}

}  // namespace

Dataset generate(const GeneratorSpec& spec, unsigned threads) {
  const Layout L = build_layout(spec);
  const Expected e = expected_counts(spec, L);
  const double total = e.calls + e.excluded + e.checkins;
  if (total > kMaxExpectedEvents) {
    std::ostringstream msg;
    msg << "spec expects " << std::llround(total) << " events, above the " << kMaxExpectedEvents
        << " cap; lower the rates, regions or days";
    throw UsageError(msg.str());
  }

  Dataset ds;
  std::size_t n_venues = 0;
  for (const auto& R : L.regions) n_venues += R.venues.size();
  const std::size_t vwidth = std::max<std::size_t>(4, std::to_string(n_venues).size());
  std::vector<std::string> venue_ids;
  std::vector<std::size_t> first_venue;
  for (std::size_t r = 0; r < L.regions.size(); ++r) {
    const auto& R = L.regions[r];
    ds.regions.emplace(R.id, Region{R.id, square(spec, static_cast<int>(r), L.columns), R.res_pop, R.day_pop, R.imd});
    first_venue.push_back(venue_ids.size());
    for (const auto& v : R.venues) {
      venue_ids.push_back(pad_id('V', venue_ids.size() + 1, vwidth));
      ds.venues.emplace(venue_ids.back(),
                        Venue{venue_ids.back(), spec.categories[v.category].name, v.location, R.id});
    }
  }

  std::vector<RegionDraw> draws(L.regions.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < L.regions.size();)
      draws[r] = draw_region(spec, L, r, venue_ids, first_venue[r]);
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(L.regions.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < n_threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (auto& d : draws) {
    ds.calls.insert(ds.calls.end(), std::make_move_iterator(d.calls.begin()), std::make_move_iterator(d.calls.end()));
    ds.checkins.insert(ds.checkins.end(), std::make_move_iterator(d.checkins.begin()),
                       std::make_move_iterator(d.checkins.end()));
  }
  std::stable_sort(ds.calls.begin(), ds.calls.end(),
                   [](const CallEvent& a, const CallEvent& b) { return a.timestamp < b.timestamp; });
  std::stable_sort(ds.checkins.begin(), ds.checkins.end(),
                   [](const CheckIn& a, const CheckIn& b) { return a.timestamp < b.timestamp; });
  return ds;
}

GroundTruth ground_truth(const GeneratorSpec& spec) {
  const Layout L = build_layout(spec);
  const Expected e = expected_counts(spec, L);
  GroundTruth gt;
  gt.expected_calls = e.calls;
  gt.expected_excluded_calls = e.excluded;
  gt.expected_checkins = e.checkins;

  const std::size_t R = L.regions.size(), I = spec.natures.size(), C = spec.categories.size();
  // Expected analysed calls per region and nature.
  std::vector<std::vector<double>> count(R, std::vector<double>(I, 0.0));
  std::map<int, std::vector<double>> nature_profile;
  double slot = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    const auto& reg = L.regions[r];
    for (std::size_t h = 0; h < kHoursPerWeek; ++h) {
      double lambda = 0.0;
      for (std::size_t i = 0; i < I; ++i) {
        if (NatureCode{spec.natures[i].code}.excluded()) continue;
        const double x = reg.rate[i][h] * L.season_weight[h / 24];
        count[r][i] += x;
        auto& p = nature_profile[spec.natures[i].code];
        p.resize(kHoursPerWeek, 0.0);
        p[h] += x;
        lambda += reg.rate[i][h];
      }
      const double surge = L.surge_days[h / 24], plain = L.day_count[h / 24] - surge;
      slot += plain * -std::expm1(-lambda) + surge * -std::expm1(-lambda * spec.seasonal_surge);
    }
  }
  gt.expected_slot_rate = slot / (static_cast<double>(R) * spec.days * kHoursPerDay);

  for (auto& [code, p] : nature_profile) {
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    if (s > 0.0) {
      for (double& v : p) v /= s;
      gt.nature_profiles[code] = p;
    }
  }

  std::vector<bool> held(C, false);
  for (const auto& reg : L.regions) {
    auto& cats = gt.region_categories[reg.id];
    for (std::size_t c = 0; c < C; ++c)
      if (reg.holds[c]) {
        held[c] = true;
        cats.push_back(spec.categories[c].name);
      }
    std::sort(cats.begin(), cats.end());
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (!held[c] || spec.categories[c].checkin_rate == 0.0) continue;
    const auto t = mean_one(spec.categories[c].profile);
    std::vector<double> p(kHoursPerWeek);
    for (std::size_t h = 0; h < kHoursPerWeek; ++h) p[h] = t[h] * L.day_count[h / 24];
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= s;
    gt.category_profiles[spec.categories[c].name] = std::move(p);
  }

  double N_all = 0.0;
  std::vector<double> N(I, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t i = 0; i < I; ++i) {
      N[i] += count[r][i];
      N_all += count[r][i];
    }
  for (std::size_t i = 0; i < I; ++i) {
    const int code = spec.natures[i].code;
    if (NatureCode{code}.excluded() || !(N[i] > 0.0)) continue;
    for (std::size_t c = 0; c < C; ++c) {
      if (!held[c]) continue;
      double n_i = 0.0, n_j = 0.0;
      for (std::size_t r = 0; r < R; ++r) {
        if (!L.regions[r].holds[c]) continue;
        n_i += count[r][i];
        n_j += std::accumulate(count[r].begin(), count[r].end(), 0.0);
      }
      if (!(n_j > 0.0)) continue;
      ExpectedPair p;
      p.nature = code;
      p.category = spec.categories[c].name;
      p.sa = (n_i / n_j) / (N[i] / N_all);
      if (auto cp = gt.category_profiles.find(p.category); cp != gt.category_profiles.end())
        p.ta = std::clamp(cosine_similarity(gt.nature_profiles.at(code), cp->second), 0.0, 1.0);
      p.st_risk = p.sa * p.ta;
      gt.pairs.push_back(std::move(p));
    }
  }
  std::sort(gt.pairs.begin(), gt.pairs.end(), [](const auto& a, const auto& b) {
    return a.nature != b.nature ? a.nature < b.nature : a.category < b.category;
  });
  for (const auto& k : spec.couplings)
    for (const auto& p : gt.pairs)
      if (p.nature == k.nature && p.category == k.category) gt.top_couplings.push_back(p);
  std::stable_sort(gt.top_couplings.begin(), gt.top_couplings.end(),
                   [](const auto& a, const auto& b) { return a.st_risk > b.st_risk; });
  return gt;
}

// ---------------------------------------------------------------- presets

namespace {

using DayMult = std::array<double, 7>;
constexpr DayMult kFlatWeek{1, 1, 1, 1, 1, 1, 1};
constexpr DayMult kWeekend{0.9, 0.9, 0.9, 1.0, 1.3, 1.6, 1.4};
constexpr DayMult kNightlife{0.6, 0.6, 0.7, 0.9, 1.6, 2.2, 1.3};
constexpr DayMult kWorkweek{1.2, 1.2, 1.2, 1.2, 1.1, 0.2, 0.1};

NatureTemplate nature(int code, double rate, std::vector<DiurnalBump> bumps, double floor,
                      const DayMult& days = kFlatWeek) {
  return NatureTemplate{code, rate, make_template(bumps, floor, days)};
}

CategoryTemplate category(std::string name, double presence, int max_venues, double rate,
                          std::vector<DiurnalBump> bumps, double floor, const DayMult& days = kFlatWeek) {
  return CategoryTemplate{std::move(name), presence, max_venues, rate, make_template(bumps, floor, days)};
}

// Urban venue mix shared by most presets.
std::vector<CategoryTemplate> city_categories(double rate_scale) {
  const double s = rate_scale;
  return {
      category("Nightclub", 0.12, 2, 0.20 * s, {{23.5, 1.8, 1.0}, {1.5, 1.5, 0.8}}, 0.01, kNightlife),
      category("Pub", 0.25, 2, 0.08 * s, {{20.5, 2.5, 1.0}}, 0.05, kWeekend),
      category("Office", 0.4, 3, 0.03 * s, {{10.0, 2.0, 1.0}, {15.0, 2.0, 0.8}}, 0.02, kWorkweek),
      category("Cafe", 0.5, 2, 0.05 * s, {{11.0, 2.5, 1.0}}, 0.05),
      category("Park", 0.4, 1, 0.04 * s, {{14.0, 3.0, 1.0}}, 0.03, {0.8, 0.8, 0.8, 0.8, 0.9, 1.6, 1.6}),
      category("Gym", 0.3, 1, 0.05 * s, {{7.0, 1.5, 1.0}, {18.5, 1.5, 1.0}}, 0.02),
      category("University", 0.1, 3, 0.05 * s, {{12.0, 3.0, 1.0}}, 0.02, kWorkweek),
      category("Train Station", 0.15, 1, 0.20 * s, {{8.0, 1.2, 1.0}, {17.5, 1.2, 1.0}}, 0.05),
      category("Supermarket", 0.4, 1, 0.05 * s, {{17.0, 3.0, 1.0}}, 0.05),
      category("Restaurant", 0.5, 2, 0.05 * s, {{12.5, 1.5, 0.7}, {19.5, 2.0, 1.0}}, 0.02, kWeekend),
      category("Hospital", 0.08, 1, 0.06 * s, {{12.0, 5.0, 1.0}}, 0.3),
      category("Field", 0.15, 1, 0.03 * s, {{15.0, 3.0, 1.0}}, 0.02, {0.7, 0.7, 0.7, 0.7, 0.8, 1.8, 1.8}),
      category("School", 0.3, 1, 0.03 * s, {{8.5, 1.0, 1.0}, {15.0, 1.0, 0.8}}, 0.01, kWorkweek),
  };
}

GeneratorSpec paper_mimic() {
  GeneratorSpec s;
  s.name = "paper-mimic";
  s.seed = 20150105;
  s.natures = {
      nature(17, 0.0060, {{9.5, 2.5, 1.0}, {15.0, 3.0, 0.4}}, 0.08),
      nature(23, 0.0025, {{22.0, 3.0, 1.0}, {1.0, 2.5, 0.6}}, 0.10, kWeekend),
      nature(4, 0.0022, {{23.5, 2.0, 1.0}, {2.0, 1.5, 0.8}}, 0.05, kNightlife),
      nature(3, 0.0008, {{14.0, 3.0, 1.0}}, 0.03, {1, 1, 1, 1, 1, 1.3, 1.3}),
      nature(29, 0.0025, {{8.0, 1.5, 1.0}, {17.5, 1.5, 1.0}}, 0.10, {1, 1, 1, 1, 1, 0.6, 0.6}),
      nature(21, 0.0020, {{11.0, 3.0, 1.0}, {19.0, 3.0, 0.8}}, 0.15),
      nature(10, 0.0030, {{10.0, 4.0, 1.0}}, 0.25),
      nature(35, 0.0042, {{11.0, 2.5, 1.0}, {15.0, 2.5, 0.8}}, 0.01, {1, 1, 1, 1, 1, 0.15, 0.15}),
  };
  s.categories = city_categories(1.0);
  s.couplings = {{4, "Nightclub", 3.0}, {23, "Pub", 1.8}, {3, "Field", 3.0}, {29, "Train Station", 1.6}};
  s.pop_spread = 0.45;
  s.imd_effect = 0.3;
  s.phase_shift = 2;
  s.activity_coupling = 0.5;
  s.seasonal_surge = 1.2;
  return s;
}

// Constant rate everywhere and always; nothing to learn.
GeneratorSpec null_spec() {
  GeneratorSpec s;
  s.name = "null";
  s.seed = 11;
  s.n_regions = 30;
  s.days = 140;
  s.natures = {{17, 0.02, flat_template()}, {23, 0.02, flat_template()}};
  s.categories = {{"Cafe", 0.5, 2, 0.02, flat_template()}, {"Pub", 0.5, 2, 0.02, flat_template()}};
  s.pop_spread = 0.0;
  s.day_pop_spread = 0.0;
  s.pop_elasticity = 0.0;
  s.imd_effect = 0.0;
  return s;
}

GeneratorSpec uncoupled() {
  GeneratorSpec s;
  s.name = "uncoupled";
  s.seed = 5;
  s.n_regions = 20;
  s.days = 365;
  for (int code : {17, 23, 29, 21}) s.natures.push_back({code, 0.16, flat_template()});
  for (const char* c : {"Cafe", "Pub", "Park", "Office"}) s.categories.push_back({c, 0.5, 1, 0.005, flat_template()});
  return s;
}

GeneratorSpec coupled() {
  GeneratorSpec s;
  s.name = "coupled";
  s.seed = 3;
  s.n_regions = 40;
  s.days = 364;
  s.natures = {
      nature(4, 0.004, {{23.5, 1.8, 1.0}, {1.5, 1.5, 0.8}}, 0.02, kNightlife),
      nature(17, 0.020, {{9.5, 2.5, 1.0}}, 0.08),
      nature(29, 0.010, {{8.0, 1.5, 1.0}, {17.5, 1.5, 1.0}}, 0.10),
  };
  s.categories = city_categories(0.3);
  s.couplings = {{4, "Nightclub", 3.0}};
  return s;
}

GeneratorSpec daytime() {
  GeneratorSpec s;
  s.name = "daytime";
  s.seed = 6;
  s.n_regions = 200;
  s.days = 364;
  const DayMult weekend{0.8, 0.8, 0.8, 0.8, 1.0, 1.6, 1.6};
  s.natures = {
      nature(3, 0.004, {{15.0, 2.5, 1.0}}, 0.03, weekend),
      nature(17, 0.060, {{9.5, 2.5, 1.0}}, 0.08),
  };
  // Rare venues that attract the nature spatially but are busy at night.
  for (const char* name : {"Hostel", "Rec Center", "Sake Bar", "Ferry", "Stable", "Chicken Wings", "Cineplex",
                           "Voting Booth", "Outdoors", "Yoga Studio", "Bowling Alley", "Hot Spring", "Casino",
                           "Skate Park", "Arcade", "Karaoke"}) {
    s.categories.push_back(category(name, 0.02, 1, 0.01, {{3.0, 2.0, 1.0}}, 0.02));
    s.couplings.push_back({3, name, 4.0});
  }
  // Common venues in step with the nature but spatially neutral.
  for (const char* name : {"Home", "Hotel", "Fast Food", "Apartments", "Pub", "Grocery Store", "Road",
                           "Other - Food", "Bar", "Cafe", "Laundry", "Supermarket"})
    s.categories.push_back(category(name, 0.5, 1, 0.01, {{15.0, 2.5, 1.0}}, 0.03, weekend));
  // Outdoor venue: moderately attractive on both axes.
  s.categories.push_back(category("Field", 0.25, 1, 0.01, {{16.0, 2.5, 1.0}}, 0.03, weekend));
  s.couplings.push_back({3, "Field", 2.0});
  return s;
}

// Calls almost vanish at night except for nocturnal natures tied to nightlife.
GeneratorSpec night() {
  GeneratorSpec s;
  s.name = "night";
  s.seed = 10;
  s.n_regions = 40;
  s.days = 168;
  s.natures = {
      nature(17, 0.030, {{10.0, 2.5, 1.0}, {15.0, 2.5, 0.7}}, 0.0005),
      nature(29, 0.020, {{8.0, 1.5, 1.0}, {17.5, 1.5, 1.0}}, 0.0005),
      nature(4, 0.004, {{1.5, 1.5, 1.0}}, 0.001, kNightlife),
  };
  s.categories = city_categories(0.3);
  s.couplings = {{4, "Nightclub", 8.0}};
  return s;
}

// A strong daily cycle whose phase differs by region.
GeneratorSpec diurnal() {
  GeneratorSpec s;
  s.name = "diurnal";
  s.seed = 9;
  s.n_regions = 40;
  s.days = 168;
  s.natures = {
      nature(17, 0.040, {{10.0, 2.0, 1.0}}, 0.02),
      nature(21, 0.020, {{19.0, 2.0, 1.0}}, 0.02),
  };
  s.categories = city_categories(0.3);
  s.phase_shift = 12;
  s.pop_spread = 1.2;
  s.imd_effect = 0.0;
  return s;
}

// Check-in activity drives call rates; regional phase only shows in call history.
GeneratorSpec ablation() {
  GeneratorSpec s;
  s.name = "ablation";
  s.seed = 8;
  s.n_regions = 60;
  s.days = 168;
  s.natures = {
      nature(17, 0.020, {{10.0, 1.5, 1.0}, {16.0, 1.5, 0.6}}, 0.03),
      nature(23, 0.010, {{22.0, 1.5, 1.0}}, 0.03, kWeekend),
  };
  s.categories = city_categories(0.4);
  s.activity_coupling = 10.0;
  s.phase_shift = 12;
  s.pop_spread = 0.1;
  s.imd_effect = 0.05;
  return s;
}

// Regions differ in when their calls happen.
GeneratorSpec regional() {
  GeneratorSpec s;
  s.name = "regional";
  s.seed = 4;
  s.n_regions = 30;
  s.days = 364;
  s.natures = {
      nature(17, 0.020, {{9.5, 2.5, 1.0}}, 0.08),
      nature(23, 0.015, {{22.0, 3.0, 1.0}}, 0.10, kWeekend),
  };
  s.categories = city_categories(0.2);
  s.phase_shift = 12;
  return s;
}

GeneratorSpec seasonal() {
  GeneratorSpec s;
  s.name = "seasonal";
  s.seed = 12;
  s.n_regions = 20;
  // Four years from 2017: every December inside the trend span is a common year.
  s.start = Date{std::chrono::year{2017}, std::chrono::month{1}, std::chrono::day{2}};
  s.days = 4 * 365;
  s.natures = {{17, 1.0, flat_template()}};
  s.seasonal_surge = 1.2;
  return s;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"default", "paper-mimic", "null", "coupled", "daytime", "night",
          "diurnal", "ablation",    "uncoupled", "regional", "seasonal"};
}

GeneratorSpec preset(std::string_view name) {
  if (name == "default" || name == "paper-mimic") return paper_mimic();
  if (name == "null") return null_spec();
  if (name == "coupled") return coupled();
  if (name == "daytime") return daytime();
  if (name == "night") return night();
  if (name == "diurnal") return diurnal();
  if (name == "ablation") return ablation();
  if (name == "uncoupled") return uncoupled();
  if (name == "regional") return regional();
  if (name == "seasonal") return seasonal();
  throw UsageError("unknown spec preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- JSON

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

WeeklyTemplate profile_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != kHoursPerWeek)
    throw UsageError(what + ": profile must be an array of 168 numbers");
  WeeklyTemplate p{};
  for (std::size_t h = 0; h < p.size(); ++h) p[h] = j[h].get<double>();
  return p;
}

WeeklyTemplate template_from(const json& j, const std::string& what) {
  if (j.contains("profile")) return profile_from(j["profile"], what);
  if (!j.contains("bumps")) return flat_template();
  std::vector<DiurnalBump> bumps;
  for (const auto& b : j["bumps"])
    bumps.push_back({b.at("hour").get<double>(), b.value("width", 2.0), b.value("weight", 1.0)});
  std::array<double, 7> days{1, 1, 1, 1, 1, 1, 1};
  if (j.contains("day_multipliers")) {
    const auto& d = j["day_multipliers"];
    if (!d.is_array() || d.size() != 7) throw UsageError(what + ": day_multipliers needs 7 numbers");
    for (std::size_t k = 0; k < 7; ++k) days[k] = d[k].get<double>();
  }
  return make_template(bumps, j.value("floor", 0.0), days);
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j[key].get<T>();
}

}  // namespace

GeneratorSpec spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("spec is not valid JSON: ") + e.what());
  }
  static const std::set<std::string> known = {
      "name", "base", "seed", "n_regions", "grid_columns", "cell_size", "origin", "start", "days",
      "natures", "categories", "couplings", "pop_mean", "pop_spread", "pop_elasticity", "day_pop_ratio",
      "day_pop_spread", "imd_min", "imd_max", "imd_effect", "phase_shift", "activity_coupling", "seasonal_surge"};
  if (!j.is_object()) throw UsageError("spec must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw UsageError("unknown spec field '" + key + "'");
  try {
    GeneratorSpec s = j.contains("base") ? preset(j["base"].get<std::string>()) : GeneratorSpec{};
    read_opt(j, "name", s.name);
    read_opt(j, "seed", s.seed);
    read_opt(j, "n_regions", s.n_regions);
    read_opt(j, "grid_columns", s.grid_columns);
    read_opt(j, "cell_size", s.cell_size);
    if (j.contains("origin")) s.origin = {j["origin"].at(0).get<double>(), j["origin"].at(1).get<double>()};
    if (j.contains("start")) s.start = parse_date(j["start"].get<std::string>());
    read_opt(j, "days", s.days);
    if (j.contains("natures")) {
      s.natures.clear();
      for (const auto& n : j["natures"]) {
        const int code = n.at("code").get<int>();
        s.natures.push_back({code, n.at("base_rate").get<double>(), template_from(n, "nature " + std::to_string(code))});
      }
    }
    if (j.contains("categories")) {
      s.categories.clear();
      for (const auto& c : j["categories"]) {
        CategoryTemplate t;
        t.name = c.at("name").get<std::string>();
        t.presence = c.value("presence", 0.5);
        t.max_venues = c.value("max_venues", 1);
        t.checkin_rate = c.value("checkin_rate", 0.0);
        t.profile = template_from(c, "category '" + t.name + "'");
        s.categories.push_back(std::move(t));
      }
    }
    if (j.contains("couplings")) {
      s.couplings.clear();
      for (const auto& k : j["couplings"])
        s.couplings.push_back(
            {k.at("nature").get<int>(), k.at("category").get<std::string>(), k.at("multiplier").get<double>()});
    }
    read_opt(j, "pop_mean", s.pop_mean);
    read_opt(j, "pop_spread", s.pop_spread);
    read_opt(j, "pop_elasticity", s.pop_elasticity);
    read_opt(j, "day_pop_ratio", s.day_pop_ratio);
    read_opt(j, "day_pop_spread", s.day_pop_spread);
    read_opt(j, "imd_min", s.imd_min);
    read_opt(j, "imd_max", s.imd_max);
    read_opt(j, "imd_effect", s.imd_effect);
    read_opt(j, "phase_shift", s.phase_shift);
    read_opt(j, "activity_coupling", s.activity_coupling);
    read_opt(j, "seasonal_surge", s.seasonal_surge);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad spec field: ") + e.what());
  }
}

std::string spec_to_json(const GeneratorSpec& s) {
  ordered_json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["n_regions"] = s.n_regions;
  j["grid_columns"] = s.grid_columns;
  j["cell_size"] = s.cell_size;
  j["origin"] = {s.origin.lon, s.origin.lat};
  j["start"] = format_date(s.start);
  j["days"] = s.days;
  j["natures"] = ordered_json::array();
  for (const auto& n : s.natures)
    j["natures"].push_back({{"code", n.code}, {"base_rate", n.base_rate}, {"profile", n.profile}});
  j["categories"] = ordered_json::array();
  for (const auto& c : s.categories)
    j["categories"].push_back({{"name", c.name},
                               {"presence", c.presence},
                               {"max_venues", c.max_venues},
                               {"checkin_rate", c.checkin_rate},
                               {"profile", c.profile}});
  j["couplings"] = ordered_json::array();
  for (const auto& k : s.couplings)
    j["couplings"].push_back({{"nature", k.nature}, {"category", k.category}, {"multiplier", k.multiplier}});
  j["pop_mean"] = s.pop_mean;
  j["pop_spread"] = s.pop_spread;
  j["pop_elasticity"] = s.pop_elasticity;
  j["day_pop_ratio"] = s.day_pop_ratio;
  j["day_pop_spread"] = s.day_pop_spread;
  j["imd_min"] = s.imd_min;
  j["imd_max"] = s.imd_max;
  j["imd_effect"] = s.imd_effect;
  j["phase_shift"] = s.phase_shift;
  j["activity_coupling"] = s.activity_coupling;
  j["seasonal_surge"] = s.seasonal_surge;
  return j.dump(1);
}

GeneratorSpec load_spec(const std::string& name_or_path) {
  for (const auto& p : preset_names())
    if (p == name_or_path) return preset(name_or_path);
  std::ifstream in(name_or_path, std::ios::binary);
  if (!in) throw UsageError("'" + name_or_path + "' is neither a spec preset nor a readable file");
  std::ostringstream text;
  text << in.rdbuf();
  return spec_from_json(text.str());
}

}  // namespace emsrisk
