#include "emsrisk/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "emsrisk/error.hpp"
#include "emsrisk/log.hpp"
#include "emsrisk/rng.hpp"
#include "text_io.hpp"

namespace emsrisk {

bool CallFilter::matches(const CallEvent& call) const {
  if (call.excluded()) return false;
  if (nature && call.nature != *nature) return false;
  if (region_id && call.region_id != *region_id) return false;
  if (from && call.timestamp < *from) return false;
  if (to && !(call.timestamp < *to)) return false;
  return true;
}

HourStamp MonthWindow::begin() const { return make_hour(year, month, 1, 0); }
HourStamp MonthWindow::end() const { return next().begin(); }
MonthWindow MonthWindow::next() const {
  return month == 12 ? MonthWindow{year + 1, 1} : MonthWindow{year, month + 1};
}
MonthWindow MonthWindow::containing(HourStamp t) {
  Date d = civil_date(t);
  return MonthWindow{static_cast<int>(d.year()), static_cast<unsigned>(d.month())};
}

std::size_t seasonal_slot(Date date) {
  return static_cast<std::size_t>(std::min(day_of_year(date), static_cast<int>(kSeasonLength)) - 1);
}

DailySeries aggregate_daily(std::span<const CallEvent> calls, std::optional<NatureCode> nature) {
  CallFilter filter{nature, std::nullopt, std::nullopt, std::nullopt};
  std::int64_t first = 0, last = -1;
  bool any = false;
  for (const auto& c : calls) {
    if (!filter.matches(c)) continue;
    const std::int64_t d = day_index(c.timestamp);
    if (!any) {
      first = last = d;
      any = true;
    }
    first = std::min(first, d);
    last = std::max(last, d);
  }
  if (!any) throw DataError("aggregate_daily: no calls to aggregate");
  DailySeries s{date_from_day_index(first), std::vector<double>(static_cast<std::size_t>(last - first + 1), 0.0)};
  for (const auto& c : calls)
    if (filter.matches(c)) s.values[static_cast<std::size_t>(day_index(c.timestamp) - first)] += 1.0;
  return s;
}

PartialSeries centered_moving_average(std::span<const double> values, std::size_t window) {
  if (window == 0) throw UsageError("moving-average window must be positive");
  if (values.size() < window)
    throw UsageError("series of length " + std::to_string(values.size()) + " is shorter than window " +
                     std::to_string(window));
  const std::size_t n = values.size();
  const std::size_t half = window / 2;
  PartialSeries trend(n);
  if (window % 2 == 1) {
    for (std::size_t i = half; i + half < n; ++i) {
      double sum = 0.0;
      for (std::size_t k = i - half; k <= i + half; ++k) sum += values[k];
      trend[i] = sum / static_cast<double>(window);
    }
  } else {
    for (std::size_t i = half; i + half < n; ++i) {
      double sum = 0.5 * (values[i - half] + values[i + half]);
      for (std::size_t k = i - half + 1; k < i + half; ++k) sum += values[k];
      trend[i] = sum / static_cast<double>(window);
    }
  }
  return trend;
}

SeasonalIndices multiplicative_seasonality(const DailySeries& series, const PartialSeries& trend) {
  if (trend.size() != series.values.size()) throw UsageError("trend and series lengths differ");
  std::array<double, kSeasonLength> sum{};
  std::array<std::size_t, kSeasonLength> count{};
  std::size_t zero_trend = 0;
  const std::int64_t day0 = day_index(series.start_date);
  for (std::size_t i = 0; i < trend.size(); ++i) {
    if (!trend[i]) continue;
    if (*trend[i] == 0.0) {
      ++zero_trend;
      continue;
    }
    const std::size_t slot = seasonal_slot(date_from_day_index(day0 + static_cast<std::int64_t>(i)));
    sum[slot] += series.values[i] / *trend[i];
    ++count[slot];
  }
  if (zero_trend > 0) log::warn(std::to_string(zero_trend) + " days with zero trend skipped in seasonality");
  SeasonalIndices out;
  for (std::size_t s = 0; s < kSeasonLength; ++s)
    if (count[s] > 0) out[s] = sum[s] / static_cast<double>(count[s]);
  return out;
}

Decomposition decompose(const DailySeries& series, std::size_t window) {
  Decomposition d;
  d.observed = series;
  d.trend = centered_moving_average(series.values, window);
  d.seasonality = multiplicative_seasonality(series, d.trend);
  d.irregular.assign(series.values.size(), std::nullopt);
  const std::int64_t day0 = day_index(series.start_date);
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    if (!d.trend[i]) continue;
    const auto& s = d.seasonality[seasonal_slot(date_from_day_index(day0 + static_cast<std::int64_t>(i)))];
    if (!s) continue;
    const double denom = *d.trend[i] * *s;
    if (denom > 0.0) d.irregular[i] = series.values[i] / denom;
  }
  return d;
}

void write_decomposition_csv(const std::string& path, const Decomposition& d) {
  auto out = detail::open_output(path);
  out << "date,observed,trend,seasonality,irregular\n";
  const std::int64_t day0 = day_index(d.observed.start_date);
  auto cell = [](const std::optional<double>& v) { return v ? detail::fmt(*v) : std::string(); };
  for (std::size_t i = 0; i < d.observed.values.size(); ++i) {
    const Date date = date_from_day_index(day0 + static_cast<std::int64_t>(i));
    out << format_date(date) << ',' << detail::fmt(d.observed.values[i]) << ',' << cell(d.trend[i]) << ','
        << cell(d.seasonality[seasonal_slot(date)]) << ',' << cell(d.irregular[i]) << '\n';
  }
  detail::finish_output(out, path);
}

TemporalProfile hour_of_day_counts(std::span<const CallEvent> calls, const CallFilter& filter) {
  auto p = TemporalProfile::zeros(kHoursPerDay);
  for (const auto& c : calls)
    if (filter.matches(c)) p.values[static_cast<std::size_t>(hour_of_day(c.timestamp))] += 1.0;
  return p;
}

TemporalProfile hour_of_week_counts(std::span<const CallEvent> calls, const CallFilter& filter) {
  auto p = TemporalProfile::zeros(kHoursPerWeek);
  for (const auto& c : calls)
    if (filter.matches(c)) p.values[static_cast<std::size_t>(hour_of_week(c.timestamp))] += 1.0;
  return p;
}

TemporalProfile diurnal_profile(std::span<const CallEvent> calls, NatureCode nature, MonthWindow month) {
  CallFilter f{nature, std::nullopt, month.begin(), month.end()};
  auto counts = hour_of_day_counts(calls, f);
  if (counts.all_zero())
    log::warn("no calls of nature " + std::to_string(nature.code) + " in " + std::to_string(month.year) + "-" +
              std::to_string(month.month));
  return l1_normalize(counts);
}

TemporalProfile weekly_profile(std::span<const CallEvent> calls, const CallFilter& filter) {
  auto counts = hour_of_week_counts(calls, filter);
  if (counts.all_zero()) log::warn("weekly profile has no matching calls");
  return l1_normalize(counts);
}

TemporalProfile weekly_profile(std::span<const CallEvent> calls, NatureCode nature) {
  return weekly_profile(calls, CallFilter{nature, std::nullopt, std::nullopt, std::nullopt});
}

namespace {

std::vector<double> smoothed(const TemporalProfile& p, double eps) {
  std::vector<double> v = l1_normalize(p).values;
  double sum = 0.0;
  for (double& x : v) {
    x += eps;
    sum += x;
  }
  for (double& x : v) x /= sum;
  return v;
}

}  // namespace

double kl_divergence(const TemporalProfile& p, const TemporalProfile& q, double epsilon) {
  if (p.size() != q.size())
    throw UsageError("kl_divergence: length mismatch (" + std::to_string(p.size()) + " vs " +
                     std::to_string(q.size()) + ")");
  if (p.size() == 0) throw UsageError("kl_divergence: empty profiles");
  if (!(epsilon > 0.0)) throw UsageError("kl_divergence: smoothing must be positive");
  const auto ps = smoothed(p, epsilon);
  const auto qs = smoothed(q, epsilon);
  double d = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (ps[i] != qs[i]) d += ps[i] * std::log(ps[i] / qs[i]);
  return std::max(d, 0.0);
}

std::vector<NatureCode> natures_present(std::span<const CallEvent> calls) {
  std::vector<NatureCode> out;
  for (const auto& c : calls)
    if (!c.excluded()) out.push_back(c.nature);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

NatureStability summarize(NatureCode nature, std::vector<double> scores) {
  NatureStability s{nature, scores.size(), 0.0, 0.0, 0.0};
  if (scores.empty()) return s;
  s.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
  double ss = 0.0;
  for (double x : scores) ss += (x - s.mean) * (x - s.mean);
  s.stddev = scores.size() > 1 ? std::sqrt(ss / static_cast<double>(scores.size() - 1)) : 0.0;
  std::sort(scores.begin(), scores.end());
  const std::size_t m = scores.size() / 2;
  s.median = scores.size() % 2 ? scores[m] : 0.5 * (scores[m - 1] + scores[m]);
  return s;
}

}  // namespace

StabilityReport profile_stability_report(std::span<const CallEvent> calls, std::span<const NatureCode> natures,
                                         const StabilityOptions& options) {
  StabilityReport report;
  report.mode = options.mode;

  for (NatureCode nature : natures) {
    // (region, month) -> hour-of-week counts for this nature.
    std::map<std::pair<std::string, MonthWindow>, TemporalProfile> windows;
    for (const auto& c : calls) {
      if (c.excluded() || c.nature != nature) continue;
      auto [it, inserted] = windows.try_emplace({c.region_id, MonthWindow::containing(c.timestamp)},
                                                TemporalProfile::zeros(kHoursPerWeek));
      it->second.values[static_cast<std::size_t>(hour_of_week(c.timestamp))] += 1.0;
    }
    if (windows.size() < 2) {
      report.skipped.push_back(nature);
      continue;
    }

    std::vector<double> scores;
    auto record = [&](const std::string& ra, MonthWindow ma, const std::string& rb, MonthWindow mb,
                      const TemporalProfile& pa, const TemporalProfile& pb) {
      StabilityScore s{nature, ra, rb, ma, mb, kl_divergence(pa, pb)};
      scores.push_back(s.kl);
      report.scores.push_back(std::move(s));
    };

    if (options.mode == StabilityMode::WithinRegion) {
      for (auto it = windows.begin(); it != windows.end(); ++it) {
        const auto& [region, month] = it->first;
        auto succ = windows.find({region, month.next()});
        if (succ != windows.end()) record(region, month, region, month.next(), it->second, succ->second);
      }
    } else {
      // month -> regions with a non-empty profile in that month
      std::map<MonthWindow, std::vector<const std::string*>> by_month;
      for (const auto& [key, profile] : windows) by_month[key.second].push_back(&key.first);
      std::vector<MonthWindow> months;
      for (const auto& [m, regions] : by_month)
        if (regions.size() >= 2) months.push_back(m);
      if (!months.empty()) {
        Rng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(nature.code)}));
        for (std::size_t k = 0; k < options.pairs_per_nature; ++k) {
          const MonthWindow m = months[rng.below(months.size())];
          const auto& regions = by_month[m];
          const std::size_t a = rng.below(regions.size());
          std::size_t b = rng.below(regions.size() - 1);
          if (b >= a) ++b;
          record(*regions[a], m, *regions[b], m, windows.at({*regions[a], m}), windows.at({*regions[b], m}));
        }
      }
    }
    if (scores.empty())
      report.skipped.push_back(nature);
    else
      report.summary.push_back(summarize(nature, std::move(scores)));
  }
  return report;
}

void write_stability_csv(const std::string& scores_path, const std::string& summary_path,
                         const StabilityReport& report) {
  const char* mode = report.mode == StabilityMode::WithinRegion ? "within" : "cross";
  auto month_str = [](MonthWindow m) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u", m.year, m.month);
    return std::string(buf);
  };
  {
    auto out = detail::open_output(scores_path);
    out << "mode,nature,region_a,window_a,region_b,window_b,kl\n";
    for (const auto& s : report.scores)
      out << mode << ',' << s.nature.code << ',' << detail::csv_field(s.region_a) << ',' << month_str(s.window_a)
          << ',' << detail::csv_field(s.region_b) << ',' << month_str(s.window_b) << ',' << detail::fmt(s.kl)
          << '\n';
    detail::finish_output(out, scores_path);
  }
  auto out = detail::open_output(summary_path);
  out << "mode,nature,label,count,mean,median,stddev\n";
  for (const auto& s : report.summary)
    out << mode << ',' << s.nature.code << ',' << detail::csv_field(s.nature.label()) << ',' << s.count << ','
        << detail::fmt(s.mean) << ',' << detail::fmt(s.median) << ',' << detail::fmt(s.stddev) << '\n';
  detail::finish_output(out, summary_path);
}

}  // namespace emsrisk
