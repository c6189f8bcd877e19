#include "emsrisk/risk.hpp"

#include <algorithm>
#include <json.hpp>

#include "emsrisk/error.hpp"
#include "emsrisk/log.hpp"
#include "emsrisk/timeseries.hpp"
#include "text_io.hpp"

namespace emsrisk {
namespace {

bool in_window(const CallEvent& c, const RiskOptions& o) {
  if (c.excluded()) return false;
  if (o.from && c.timestamp < *o.from) return false;
  if (o.to && !(c.timestamp < *o.to)) return false;
  return true;
}

// Per-region, per-nature call totals plus category presence.
struct CountIndex {
  std::map<std::string, std::map<NatureCode, double>> by_region;
  std::map<NatureCode, double> by_nature;
  std::map<std::string, double> region_total;
  double total = 0.0;
  std::map<std::string, std::set<std::string>, std::less<>> category_regions;

  CountIndex(const Dataset& ds, const RiskOptions& o) {
    for (const auto& c : ds.calls) {
      if (!in_window(c, o)) continue;
      by_region[c.region_id][c.nature] += 1.0;
      region_total[c.region_id] += 1.0;
      by_nature[c.nature] += 1.0;
      total += 1.0;
    }
    for (const auto& [id, v] : ds.venues) {
      auto& regions = category_regions[v.category];
      if (v.region_id) regions.insert(*v.region_id);
    }
  }

  PairCounts counts(NatureCode nature, std::string_view category) const {
    auto cat = category_regions.find(category);
    if (cat == category_regions.end() || cat->second.empty())
      throw NoSupportError("category '" + std::string(category) + "' has no venues in any region");
    auto nat = by_nature.find(nature);
    if (nat == by_nature.end() || nat->second == 0.0)
      throw NoSupportError("nature " + std::to_string(nature.code) + " has no calls");
    PairCounts pc;
    pc.N_i = nat->second;
    pc.N_all = total;
    for (const auto& region : cat->second) {
      auto r = by_region.find(region);
      if (r == by_region.end()) continue;
      pc.n_j += region_total.at(region);
      if (auto it = r->second.find(nature); it != r->second.end()) pc.n_i += it->second;
    }
    if (pc.n_j == 0.0)
      throw NoSupportError("regions holding category '" + std::string(category) + "' have no calls");
    return pc;
  }
};

double lift(const PairCounts& pc) {
  if (pc.n_i == 0.0) return 0.0;
  return (pc.n_i / pc.n_j) / (pc.N_i / pc.N_all);
}

TemporalProfile nature_weekly_counts(const Dataset& ds, NatureCode nature, const RiskOptions& o) {
  CallFilter f{nature, std::nullopt, o.from, o.to};
  return hour_of_week_counts(ds.calls, f);
}

double rank_score(const AttractivenessEntry& e, RankVariant v) {
  switch (v) {
    case RankVariant::Spatial:
      return e.sa;
    case RankVariant::Temporal:
      return e.ta;
    case RankVariant::SpatioTemporal:
      return e.st_risk;
  }
  return 0.0;
}

}  // namespace

RiskTable::RiskTable(std::vector<NatureCode> natures, std::vector<std::string> categories,
                     std::vector<AttractivenessEntry> entries, std::vector<OmittedPair> omitted)
    : natures_(std::move(natures)),
      categories_(std::move(categories)),
      entries_(std::move(entries)),
      omitted_(std::move(omitted)) {
  std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
    return a.nature != b.nature ? a.nature < b.nature : a.category < b.category;
  });
  for (const auto& e : entries_) category_risk_[e.category] += e.st_risk;
}

const AttractivenessEntry* RiskTable::find(NatureCode nature, std::string_view category) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair{nature, category},
                             [](const AttractivenessEntry& e, const auto& key) {
                               return e.nature != key.first ? e.nature < key.first : e.category < key.second;
                             });
  if (it == entries_.end() || it->nature != nature || it->category != category) return nullptr;
  return &*it;
}

double RiskTable::category_risk(std::string_view category) const {
  auto it = category_risk_.find(category);
  return it == category_risk_.end() ? 0.0 : it->second;
}

PairCounts pair_counts(NatureCode nature, std::string_view category, const Dataset& ds,
                       const RiskOptions& options) {
  return CountIndex(ds, options).counts(nature, category);
}

double spatial_attractiveness(NatureCode nature, std::string_view category, const Dataset& ds,
                              const RiskOptions& options) {
  return lift(pair_counts(nature, category, ds, options));
}

TemporalProfile category_weekly_counts(const Dataset& ds, std::string_view category) {
  auto p = TemporalProfile::zeros(kHoursPerWeek);
  for (const auto& c : ds.checkins) {
    auto v = ds.venues.find(c.venue_id);
    if (v != ds.venues.end() && v->second.category == category)
      p.values[static_cast<std::size_t>(hour_of_week(c.timestamp))] += 1.0;
  }
  return p;
}

double temporal_attractiveness(NatureCode nature, std::string_view category, const Dataset& ds,
                               const RiskOptions& options) {
  auto ti = l1_normalize(nature_weekly_counts(ds, nature, options));
  auto tj = l1_normalize(category_weekly_counts(ds, category));
  return std::clamp(cosine_similarity(ti.values, tj.values), 0.0, 1.0);
}

double st_risk(NatureCode nature, std::string_view category, const Dataset& ds, const RiskOptions& options) {
  return spatial_attractiveness(nature, category, ds, options) *
         temporal_attractiveness(nature, category, ds, options);
}

RiskTable build_risk_table(const Dataset& ds, const RiskOptions& options) {
  const CountIndex index(ds, options);
  std::vector<NatureCode> natures;
  for (const auto& [n, count] : index.by_nature) natures.push_back(n);
  std::vector<std::string> categories;
  for (const auto& [c, regions] : index.category_regions) categories.push_back(c);

  std::map<NatureCode, TemporalProfile> nature_profiles;
  for (NatureCode n : natures) nature_profiles.emplace(n, l1_normalize(nature_weekly_counts(ds, n, options)));
  std::map<std::string, TemporalProfile, std::less<>> category_profiles;
  {
    std::map<std::string, TemporalProfile, std::less<>> counts;
    for (const auto& c : categories) counts.emplace(c, TemporalProfile::zeros(kHoursPerWeek));
    for (const auto& ci : ds.checkins) {
      auto v = ds.venues.find(ci.venue_id);
      if (v == ds.venues.end()) continue;
      counts.at(v->second.category).values[static_cast<std::size_t>(hour_of_week(ci.timestamp))] += 1.0;
    }
    for (auto& [c, p] : counts) category_profiles.emplace(c, l1_normalize(p));
  }

  std::vector<AttractivenessEntry> entries;
  std::vector<OmittedPair> omitted;
  for (const auto& category : categories) {
    if (index.category_regions.at(category).empty())
      log::warn("category '" + category + "' has no venues inside any region; not scored");
    for (NatureCode n : natures) {
      PairCounts pc;
      try {
        pc = index.counts(n, category);
      } catch (const NoSupportError& e) {
        omitted.push_back({n, category, e.what()});
        continue;
      }
      AttractivenessEntry e{n, category, lift(pc), 0.0, 0.0, pc};
      e.ta = std::clamp(cosine_similarity(nature_profiles.at(n).values, category_profiles.at(category).values),
                        0.0, 1.0);
      e.st_risk = e.sa * e.ta;
      entries.push_back(std::move(e));
    }
  }
  return RiskTable(std::move(natures), std::move(categories), std::move(entries), std::move(omitted));
}

SankeyData sankey_export(const RiskTable& table, double threshold) {
  SankeyData out;
  out.threshold = threshold;
  std::map<NatureCode, double> nature_mass;
  std::map<std::string, double> category_mass;
  for (const auto& e : table.entries()) {
    if (!(e.st_risk > threshold)) continue;
    out.links.push_back({"nature:" + std::to_string(e.nature.code), "category:" + e.category, e.st_risk});
    nature_mass[e.nature] += e.st_risk;
    category_mass[e.category] += e.st_risk;
  }
  for (const auto& [n, m] : nature_mass)
    out.nodes.push_back({"nature:" + std::to_string(n.code), std::string(n.label()), "nature", m});
  for (const auto& [c, m] : category_mass) out.nodes.push_back({"category:" + c, c, "category", m});
  return out;
}

void write_sankey_json(const std::string& path, const SankeyData& data) {
  nlohmann::ordered_json doc;
  doc["threshold"] = data.threshold;
  doc["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : data.nodes)
    doc["nodes"].push_back({{"id", n.id}, {"label", n.label}, {"kind", n.kind}, {"mass", n.mass}});
  doc["links"] = nlohmann::ordered_json::array();
  for (const auto& l : data.links)
    doc["links"].push_back({{"source", l.source}, {"target", l.target}, {"weight", l.weight}});
  auto out = detail::open_output(path);
  out << doc.dump(2) << '\n';
  detail::finish_output(out, path);
}

std::vector<RankedActivity> top_k_activities(const RiskTable& table, NatureCode nature, std::size_t k,
                                             RankVariant variant) {
  std::vector<RankedActivity> ranked;
  for (const auto& e : table.entries())
    if (e.nature == nature) ranked.push_back({e.category, rank_score(e, variant)});
  std::sort(ranked.begin(), ranked.end(), [](const RankedActivity& a, const RankedActivity& b) {
    return a.score != b.score ? a.score > b.score : a.category < b.category;
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

double urban_activity_risk(const std::set<std::string>& categories, const RiskTable& table) {
  double uar = 0.0;
  for (const auto& c : categories) uar += table.category_risk(c);
  return uar;
}

std::map<std::string, std::set<std::string>> region_categories(const Dataset& ds) {
  std::map<std::string, std::set<std::string>> out;
  for (const auto& [id, r] : ds.regions) out[id];
  for (const auto& [id, v] : ds.venues)
    if (v.region_id) out[*v.region_id].insert(v.category);
  return out;
}

double urban_activity_risk(const std::string& region_id, const Dataset& ds, const RiskTable& table) {
  if (!ds.regions.count(region_id)) throw UsageError("unknown region '" + region_id + "'");
  std::set<std::string> cats;
  for (const auto& [id, v] : ds.venues)
    if (v.region_id == region_id) cats.insert(v.category);
  return urban_activity_risk(cats, table);
}

std::map<std::string, double> urban_activity_risk_all(const Dataset& ds, const RiskTable& table) {
  std::map<std::string, double> out;
  for (const auto& [region, cats] : region_categories(ds)) out[region] = urban_activity_risk(cats, table);
  return out;
}

void write_risk_table_csv(const std::string& path, const RiskTable& table) {
  auto out = detail::open_output(path);
  out << "nature,category,sa,ta,st_risk,n_i,n_j,N_i,N_all\n";
  for (const auto& e : table.entries())
    out << e.nature.code << ',' << detail::csv_field(e.category) << ',' << detail::fmt(e.sa) << ','
        << detail::fmt(e.ta) << ',' << detail::fmt(e.st_risk) << ',' << detail::fmt(e.counts.n_i) << ','
        << detail::fmt(e.counts.n_j) << ',' << detail::fmt(e.counts.N_i) << ',' << detail::fmt(e.counts.N_all)
        << '\n';
  detail::finish_output(out, path);
}

void write_uar_csv(const std::string& path, const std::map<std::string, double>& uar) {
  auto out = detail::open_output(path);
  out << "region_id,uar\n";
  for (const auto& [id, v] : uar) out << detail::csv_field(id) << ',' << detail::fmt(v) << '\n';
  detail::finish_output(out, path);
}

void write_top_activities_csv(const std::string& path, const RiskTable& table, std::size_t k) {
  auto out = detail::open_output(path);
  out << "nature,variant,rank,category,score\n";
  const std::pair<RankVariant, const char*> variants[] = {{RankVariant::SpatioTemporal, "spatiotemporal"},
                                                          {RankVariant::Spatial, "spatial"},
                                                          {RankVariant::Temporal, "temporal"}};
  for (NatureCode n : table.natures())
    for (const auto& [variant, name] : variants) {
      std::size_t rank = 1;
      for (const auto& r : top_k_activities(table, n, k, variant))
        out << n.code << ',' << name << ',' << rank++ << ',' << detail::csv_field(r.category) << ','
            << detail::fmt(r.score) << '\n';
    }
  detail::finish_output(out, path);
}

}  // namespace emsrisk
