#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "emsrisk/ingest.hpp"
#include "emsrisk/model.hpp"

namespace emsrisk {

/// Restricts the calls that feed the attractiveness scores. Check-ins are
/// always used in full.
struct RiskOptions {
  std::optional<HourStamp> from;  ///< inclusive
  std::optional<HourStamp> to;    ///< exclusive
};

/// Call counts behind one spatial attractiveness value.
///   n_i   nature-i calls in regions holding >= 1 venue of category j
///   n_j   calls of any nature in those regions
///   N_i   nature-i calls everywhere
///   N_all calls of any nature everywhere
struct PairCounts {
  double n_i = 0, n_j = 0, N_i = 0, N_all = 0;
};

struct AttractivenessEntry {
  NatureCode nature;
  std::string category;
  double sa = 0.0;
  double ta = 0.0;
  double st_risk = 0.0;
  PairCounts counts;
};

struct OmittedPair {
  NatureCode nature;
  std::string category;
  std::string reason;
};

/// Scores over (nature x category). Immutable once built.
class RiskTable {
public:
  RiskTable() = default;
  RiskTable(std::vector<NatureCode> natures, std::vector<std::string> categories,
            std::vector<AttractivenessEntry> entries, std::vector<OmittedPair> omitted);

  const std::vector<NatureCode>& natures() const { return natures_; }
  const std::vector<std::string>& categories() const { return categories_; }
  /// Sorted by (nature code, category name).
  const std::vector<AttractivenessEntry>& entries() const { return entries_; }
  const std::vector<OmittedPair>& omitted() const { return omitted_; }

  const AttractivenessEntry* find(NatureCode nature, std::string_view category) const;
  /// Sum over natures of ST_Risk for one category; 0 for unscored categories.
  double category_risk(std::string_view category) const;

private:
  std::vector<NatureCode> natures_;
  std::vector<std::string> categories_;
  std::vector<AttractivenessEntry> entries_;
  std::vector<OmittedPair> omitted_;
  std::map<std::string, double, std::less<>> category_risk_;
};

/// Throws NoSupportError when category j has no venue inside any region,
/// when nature i never occurs, or when the j-regions hold no calls.
PairCounts pair_counts(NatureCode nature, std::string_view category, const Dataset& dataset,
                       const RiskOptions& options = {});

/// Lift (n_i / n_j) / (N_i / N_all); 1 means nature i is as common in
/// j-regions as everywhere. 0 when n_i == 0.
double spatial_attractiveness(NatureCode nature, std::string_view category, const Dataset& dataset,
                              const RiskOptions& options = {});

/// Cosine similarity of the nature's weekly call profile and the category's
/// weekly check-in profile; 0 when either is empty.
double temporal_attractiveness(NatureCode nature, std::string_view category, const Dataset& dataset,
                               const RiskOptions& options = {});

/// spatial_attractiveness * temporal_attractiveness.
double st_risk(NatureCode nature, std::string_view category, const Dataset& dataset,
               const RiskOptions& options = {});

/// Weekly check-in counts for venues of one category.
TemporalProfile category_weekly_counts(const Dataset& dataset, std::string_view category);

/// Scores every supported (nature, category) pair. Unsupported pairs are
/// listed in `omitted()` with a reason.
RiskTable build_risk_table(const Dataset& dataset, const RiskOptions& options = {});

struct SankeyNode {
  std::string id;
  std::string label;
  std::string kind;  ///< "nature" or "category"
  double mass = 0.0;
};
struct SankeyLink {
  std::string source;
  std::string target;
  double weight = 0.0;
};
struct SankeyData {
  double threshold = 1.2;
  std::vector<SankeyNode> nodes;
  std::vector<SankeyLink> links;
};

inline constexpr double kSankeyThreshold = 1.2;

/// Keeps pairs whose ST_Risk is strictly above `threshold`. Node mass is
/// the sum of its link weights.
SankeyData sankey_export(const RiskTable& table, double threshold = kSankeyThreshold);
void write_sankey_json(const std::string& path, const SankeyData& data);

enum class RankVariant { Spatial, Temporal, SpatioTemporal };

struct RankedActivity {
  std::string category;
  double score = 0.0;
};

/// Categories for one nature ranked by SA, TA or ST_Risk (descending; ties
/// by category name). k larger than the category count returns them all.
std::vector<RankedActivity> top_k_activities(const RiskTable& table, NatureCode nature, std::size_t k = 10,
                                             RankVariant variant = RankVariant::SpatioTemporal);

/// Sum over the distinct categories present of the nature-summed ST_Risk.
double urban_activity_risk(const std::set<std::string>& categories, const RiskTable& table);
double urban_activity_risk(const std::string& region_id, const Dataset& dataset, const RiskTable& table);
/// UAR for every region in the dataset.
std::map<std::string, double> urban_activity_risk_all(const Dataset& dataset, const RiskTable& table);

/// Distinct categories of venues assigned to each region.
std::map<std::string, std::set<std::string>> region_categories(const Dataset& dataset);

void write_risk_table_csv(const std::string& path, const RiskTable& table);
void write_uar_csv(const std::string& path, const std::map<std::string, double>& uar);
void write_top_activities_csv(const std::string& path, const RiskTable& table, std::size_t k);

}  // namespace emsrisk
