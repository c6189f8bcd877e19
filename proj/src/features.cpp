#include "emsrisk/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "emsrisk/error.hpp"
#include "emsrisk/log.hpp"
#include "text_io.hpp"

namespace emsrisk {

FeatureGroup feature_group(std::size_t f) {
  switch (f) {
    case kUAR:
    case kResPop:
    case kDayPop:
    case kIMD:
      return FeatureGroup::Demo;
    case kFsqHist:
    case kFsqHoD:
    case kHoDFsqF:
    case kFsqHoW:
    case kHoWFsqF:
      return FeatureGroup::Fsq;
    default:
      if (f >= kFeatureCount) throw UsageError("feature index out of range");
      return FeatureGroup::Calls;
  }
}

std::string_view group_name(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::Demo:
      return "Demo";
    case FeatureGroup::Calls:
      return "Calls";
    case FeatureGroup::Fsq:
      return "Fsq";
  }
  return "?";
}

FeatureGroup parse_group(std::string_view name) {
  std::string lower;
  for (char c : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "demo") return FeatureGroup::Demo;
  if (lower == "calls") return FeatureGroup::Calls;
  if (lower == "fsq") return FeatureGroup::Fsq;
  throw UsageError("unknown feature group '" + std::string(name) + "' (expected Demo, Calls or Fsq)");
}

std::vector<std::size_t> group_features(FeatureGroup g) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < kFeatureCount; ++f)
    if (feature_group(f) == g) out.push_back(f);
  return out;
}

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

std::vector<std::string> draw_without_replacement(const std::vector<std::string>& positives,
                                                  const std::vector<std::string>& regions, std::size_t count,
                                                  Rng& rng) {
  std::vector<std::string> sorted_pos = positives;
  std::sort(sorted_pos.begin(), sorted_pos.end());
  std::vector<std::string> pool;
  for (const auto& r : regions)
    if (!std::binary_search(sorted_pos.begin(), sorted_pos.end(), r)) pool.push_back(r);
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  count = std::min(count, pool.size());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

std::size_t negative_target(std::size_t positives, double r) {
  return static_cast<std::size_t>(std::llround(r * static_cast<double>(positives)));
}

}  // namespace

HistoryIndex::HistoryIndex(const Dataset& ds, std::map<std::string, double> uar) {
  std::map<std::string, std::uint32_t> index;
  for (const auto& [id, r] : ds.regions) {
    index.emplace(id, static_cast<std::uint32_t>(region_ids_.size()));
    region_ids_.push_back(id);
    auto u = uar.find(id);
    static_.push_back({u == uar.end() ? 0.0 : u->second, r.res_pop, r.day_pop, r.imd});
  }
  counts_.resize(region_ids_.size());
  for (const auto& c : ds.calls) {
    if (c.excluded()) continue;
    auto it = index.find(c.region_id);
    if (it == index.end()) throw DataError("call references unknown region '" + c.region_id + "'");
    calls_.emplace_back(c.timestamp, it->second);
  }
  for (const auto& ci : ds.checkins) {
    auto v = ds.venues.find(ci.venue_id);
    if (v == ds.venues.end() || !v->second.region_id) continue;
    checkins_.emplace_back(ci.timestamp, index.at(*v->second.region_id));
  }
  auto by_time = [](const auto& a, const auto& b) { return a.first < b.first; };
  std::stable_sort(calls_.begin(), calls_.end(), by_time);
  std::stable_sort(checkins_.begin(), checkins_.end(), by_time);
}

void HistoryIndex::advance_to(HourStamp t) {
  if (t < cursor_) throw UsageError("HistoryIndex cannot move backwards");
  cursor_ = t;
  for (; next_call_ < calls_.size() && calls_[next_call_].first < t; ++next_call_) {
    const auto [ts, r] = calls_[next_call_];
    Counts& c = counts_[r];
    c.hist += 1;
    c.hod[static_cast<std::size_t>(hour_of_day(ts))] += 1;
    c.how[static_cast<std::size_t>(hour_of_week(ts))] += 1;
    c.dow[static_cast<std::size_t>(day_of_week(ts))] += 1;
  }
  for (; next_checkin_ < checkins_.size() && checkins_[next_checkin_].first < t; ++next_checkin_) {
    const auto [ts, r] = checkins_[next_checkin_];
    Counts& c = counts_[r];
    c.fsq += 1;
    c.fsq_hod[static_cast<std::size_t>(hour_of_day(ts))] += 1;
    c.fsq_how[static_cast<std::size_t>(hour_of_week(ts))] += 1;
  }
}

std::size_t HistoryIndex::region_index(const std::string& region_id) const {
  auto it = std::lower_bound(region_ids_.begin(), region_ids_.end(), region_id);
  if (it == region_ids_.end() || *it != region_id) throw UsageError("unknown region '" + region_id + "'");
  return static_cast<std::size_t>(it - region_ids_.begin());
}

FeatureVector HistoryIndex::features(const std::string& region_id) const {
  return features(region_index(region_id));
}

FeatureVector HistoryIndex::features(std::size_t region) const {
  const Counts& c = counts_.at(region);
  const Static& s = static_[region];
  const auto h = static_cast<std::size_t>(hour_of_day(cursor_));
  const auto w = static_cast<std::size_t>(hour_of_week(cursor_));
  const auto d = static_cast<std::size_t>(day_of_week(cursor_));
  FeatureVector f{};
  f[kHoD] = static_cast<double>(h);
  f[kDoW] = static_cast<double>(d);
  f[kUAR] = s.uar;
  f[kResPop] = s.res_pop;
  f[kDayPop] = s.day_pop;
  f[kIMD] = s.imd;
  f[kHist] = c.hist;
  f[kHoDHist] = c.hod[h];
  f[kHoDHistF] = ratio(c.hod[h], c.hist);
  f[kHoWCalls] = c.how[w];
  f[kHoWHistF] = ratio(c.how[w], c.hist);
  f[kDayWHist] = c.dow[d];
  f[kFsqHist] = c.fsq;
  f[kFsqHoD] = c.fsq_hod[h];
  f[kHoDFsqF] = ratio(c.fsq_hod[h], c.fsq);
  f[kFsqHoW] = c.fsq_how[w];
  f[kHoWFsqF] = ratio(c.fsq_how[w], c.fsq);
  return f;
}

FeatureVector build_features(const std::string& region_id, HourStamp t_prime, const Dataset& ds,
                             const std::map<std::string, double>& uar) {
  auto region = ds.regions.find(region_id);
  if (region == ds.regions.end()) throw UsageError("unknown region '" + region_id + "'");
  auto first = std::find_if(ds.calls.begin(), ds.calls.end(), [](const CallEvent& c) { return !c.excluded(); });
  if (first == ds.calls.end() || !(first->timestamp < t_prime))
    throw UsageError("prediction time must be after the first call");

  const int h = hour_of_day(t_prime), w = hour_of_week(t_prime), d = day_of_week(t_prime);
  double hist = 0, hod = 0, how = 0, dow = 0;
  for (const auto& c : ds.calls) {
    if (c.excluded() || c.region_id != region_id || !(c.timestamp < t_prime)) continue;
    hist += 1;
    hod += hour_of_day(c.timestamp) == h;
    how += hour_of_week(c.timestamp) == w;
    dow += day_of_week(c.timestamp) == d;
  }
  double fsq = 0, fsq_hod = 0, fsq_how = 0;
  for (const auto& ci : ds.checkins) {
    if (!(ci.timestamp < t_prime)) continue;
    auto v = ds.venues.find(ci.venue_id);
    if (v == ds.venues.end() || v->second.region_id != region_id) continue;
    fsq += 1;
    fsq_hod += hour_of_day(ci.timestamp) == h;
    fsq_how += hour_of_week(ci.timestamp) == w;
  }
  const Region& r = region->second;
  auto u = uar.find(region_id);
  return FeatureVector{static_cast<double>(h), static_cast<double>(d), u == uar.end() ? 0.0 : u->second,
                       r.res_pop, r.day_pop, r.imd, hist, hod, ratio(hod, hist), how, ratio(how, hist), dow,
                       fsq, fsq_hod, ratio(fsq_hod, fsq), fsq_how, ratio(fsq_how, fsq)};
}

std::vector<std::string> sample_negatives(HourStamp t_prime, const std::vector<std::string>& positives,
                                          const std::vector<std::string>& regions, double ratio_, Rng& rng) {
  if (!(ratio_ >= 0.0)) throw UsageError("negative sampling ratio must be non-negative");
  const std::size_t want = negative_target(positives.size(), ratio_);
  auto out = draw_without_replacement(positives, regions, want, rng);
  if (out.size() < want)
    log::warn("only " + std::to_string(out.size()) + " call-free regions at " + format_timestamp(t_prime) +
              ", wanted " + std::to_string(want));
  return out;
}

WalkForward::WalkForward(const Dataset& ds, const WalkForwardConfig& config, std::map<std::string, double> uar)
    : config_(config) {
  auto first = std::find_if(ds.calls.begin(), ds.calls.end(), [](const CallEvent& c) { return !c.excluded(); });
  if (first == ds.calls.end()) throw DataError("walk-forward needs at least one call");
  data_start_ = first->timestamp + 1;
  if (config.retrain_every < 1) throw UsageError("retrain interval must be at least one hour");
  if (config.warmup_hours < 0) throw UsageError("warm-up must be non-negative");
  if (config.start < data_start_ + config.warmup_hours)
    throw UsageError("evaluation start " + format_timestamp(config.start) + " precedes the warm-up end " +
                     format_timestamp(data_start_ + config.warmup_hours));
  if (!(config.start < config.end)) throw UsageError("evaluation window is empty");
  if (!(config.negative_ratio > 0.0)) throw UsageError("negative sampling ratio must be positive");

  HistoryIndex history(ds, std::move(uar));
  const auto& regions = history.region_ids();

  std::size_t i = 0;
  while (i < ds.calls.size() && ds.calls[i].timestamp < data_start_) ++i;
  while (i < ds.calls.size() && ds.calls[i].timestamp < config.end) {
    const HourStamp t = ds.calls[i].timestamp;
    std::vector<std::string> positives;
    for (; i < ds.calls.size() && ds.calls[i].timestamp == t; ++i)
      if (!ds.calls[i].excluded()) positives.push_back(ds.calls[i].region_id);
    std::sort(positives.begin(), positives.end());
    positives.erase(std::unique(positives.begin(), positives.end()), positives.end());
    if (positives.empty()) continue;

    Rng rng(derive_seed(config.seed, {static_cast<std::uint64_t>(t.hours)}));
    const std::size_t want = negative_target(positives.size(), config.negative_ratio);
    auto negatives = draw_without_replacement(positives, regions, want, rng);
    if (negatives.size() < want) {
      ++short_hours_;
      // Keep the hour balanced by dropping positives.
      const auto keep = static_cast<std::size_t>(
          std::floor(static_cast<double>(negatives.size()) / config.negative_ratio + 1e-9));
      for (std::size_t k = 0; k < keep; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng.below(positives.size() - k));
        std::swap(positives[k], positives[j]);
      }
      positives.resize(std::min(keep, positives.size()));
      std::sort(positives.begin(), positives.end());
    }

    history.advance_to(t);
    for (const auto& r : positives) examples_.push_back({history.features(r), +1, r, t});
    for (const auto& r : negatives) examples_.push_back({history.features(r), -1, r, t});
  }
  if (short_hours_ > 0)
    log::warn(std::to_string(short_hours_) + " hours had fewer call-free regions than positives");
}

std::span<const LabeledExample> WalkForward::range(HourStamp from, HourStamp to) const {
  auto cmp = [](const LabeledExample& e, HourStamp t) { return e.t_prime < t; };
  auto lo = std::lower_bound(examples_.begin(), examples_.end(), from, cmp);
  auto hi = std::lower_bound(lo, examples_.end(), to, cmp);
  return {lo, hi};
}

std::vector<WalkForwardStep> WalkForward::steps() const {
  std::vector<WalkForwardStep> out;
  for (HourStamp t = config_.start; t < config_.end; t = t + 1) {
    const std::int64_t block = (t - config_.start) / config_.retrain_every;
    const HourStamp cutoff = config_.start + block * config_.retrain_every;
    out.push_back({t, cutoff, range(data_start_, cutoff), range(t, t + 1)});
  }
  return out;
}

void write_examples_csv(const std::string& path, std::span<const LabeledExample> examples) {
  auto out = detail::open_output(path);
  out << "t_prime,region_id,label";
  for (auto name : kFeatureNames) out << ',' << name;
  out << '\n';
  for (const auto& e : examples) {
    out << format_timestamp(e.t_prime) << ',' << detail::csv_field(e.region_id) << ',' << e.label;
    for (double v : e.features) out << ',' << detail::fmt(v);
    out << '\n';
  }
  detail::finish_output(out, path);
}

}  // namespace emsrisk
