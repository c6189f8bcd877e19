#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "emsrisk/model.hpp"

namespace emsrisk {

/// Calls sorted by timestamp; regions and venues keyed by id. Every call
/// region and every assigned venue region resolves in `regions`.
struct Dataset {
  std::vector<CallEvent> calls;
  std::map<std::string, Region> regions;
  std::map<std::string, Venue> venues;
  std::vector<CheckIn> checkins;
};

struct ParseIssue {
  std::size_t line = 0;
  std::string message;
};

enum class ParseMode {
  Strict,   ///< first malformed row throws ParseError
  Lenient,  ///< malformed rows are skipped and reported in `issues`
};

struct CallParse {
  std::vector<CallEvent> calls;
  std::vector<ParseIssue> issues;
};
struct CheckInParse {
  std::vector<CheckIn> checkins;
  std::size_t unknown_venue = 0;
  std::vector<ParseIssue> issues;
};
struct VenueParse {
  std::map<std::string, Venue> venues;
  std::vector<ParseIssue> issues;
};
struct RegionParse {
  std::map<std::string, Region> regions;
  std::size_t rings_closed = 0;  ///< unclosed rings repaired on read
};

/// `timestamp,dispatch_code,region_id`. Output is stably sorted by time.
/// Code-35 rows are kept; `CallEvent::excluded()` flags them.
CallParse parse_calls(const std::string& path, ParseMode mode = ParseMode::Strict);
/// GeoJSON FeatureCollection of Polygon/MultiPolygon features with
/// properties region_id, res_pop, day_pop, imd.
RegionParse parse_regions(const std::string& path);
/// `venue_id,category,lon,lat`.
VenueParse parse_venues(const std::string& path, ParseMode mode = ParseMode::Strict);
/// `venue_id,timestamp`. Rows naming a venue not in `venues` are skipped
/// and counted in `unknown_venue`.
CheckInParse parse_checkins(const std::string& path, const std::map<std::string, Venue>& venues,
                            ParseMode mode = ParseMode::Strict);

void write_calls(const std::string& path, const std::vector<CallEvent>& calls);
void write_regions(const std::string& path, const std::map<std::string, Region>& regions);
void write_venues(const std::string& path, const std::map<std::string, Venue>& venues);
void write_checkins(const std::string& path, const std::vector<CheckIn>& checkins);

struct JoinResult {
  std::map<std::string, Venue> venues;
  std::size_t assigned = 0;
  std::size_t unassigned = 0;
  /// Venues strictly inside more than one region (overlapping input).
  std::size_t overlapping = 0;
};

/// Assigns each venue the region containing it. Regions are scanned in
/// ascending region_id order and the first containing one wins, so a venue
/// on a shared edge goes to the lexicographically smallest id.
JoinResult spatial_join(const std::map<std::string, Venue>& venues,
                        const std::map<std::string, Region>& regions);

/// Throws DataError if a call or venue names an unknown region, or the
/// calls are not sorted.
void validate(const Dataset& dataset);

/// Reads calls.csv, regions.geojson, venues.csv, checkins.csv from `dir`,
/// runs the spatial join and validates.
Dataset load_dataset(const std::string& dir);
void save_dataset(const Dataset& dataset, const std::string& dir);

/// File names inside a dataset directory.
inline constexpr const char* kCallsFile = "calls.csv";
inline constexpr const char* kRegionsFile = "regions.geojson";
inline constexpr const char* kVenuesFile = "venues.csv";
inline constexpr const char* kCheckinsFile = "checkins.csv";

}  // namespace emsrisk
