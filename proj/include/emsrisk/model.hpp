#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emsrisk/time.hpp"

namespace emsrisk {

/// Operator-assigned dispatch code describing the nature of a call.
struct NatureCode {
  int code = 0;

  /// Healthcare practitioner referrals reflect service operations rather
  /// than incidence, so they are kept in storage but never analysed.
  static constexpr int kExcludedCode = 35;

  std::string_view label() const;
  bool excluded() const noexcept { return code == kExcludedCode; }
  bool valid() const noexcept { return code >= 1; }

  friend auto operator<=>(const NatureCode&, const NatureCode&) = default;
};

/// Looks up a nature by its label (case-sensitive). Returns nullopt when
/// the label is not in the dispatch table.
std::optional<NatureCode> nature_from_label(std::string_view label);

struct CallEvent {
  HourStamp timestamp;
  std::string region_id;
  NatureCode nature;

  bool excluded() const noexcept { return nature.excluded(); }
};

struct Point {
  double lon = 0.0;
  double lat = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Closed ring: first vertex == last vertex, at least four vertices.
using Ring = std::vector<Point>;
/// First ring is the outer boundary; any further rings are holes (or, for
/// flattened multipolygons, further shells). Membership uses the even-odd
/// rule over all rings.
using Polygon = std::vector<Ring>;

struct Region {
  std::string region_id;
  Polygon boundary;
  double res_pop = 0.0;
  double day_pop = 0.0;
  double imd = 0.0;
};

struct Venue {
  std::string venue_id;
  std::string category;
  Point location;
  /// Empty until the spatial join assigns a containing region.
  std::optional<std::string> region_id;
};

struct CheckIn {
  std::string venue_id;
  HourStamp timestamp;
};

enum class Normalization { Counts, L1 };

/// Hour-of-day (24) or hour-of-week (168) frequency vector.
struct TemporalProfile {
  std::vector<double> values;
  Normalization normalization = Normalization::Counts;

  static TemporalProfile zeros(std::size_t bins) {
    return TemporalProfile{std::vector<double>(bins, 0.0), Normalization::Counts};
  }
  std::size_t size() const noexcept { return values.size(); }
  double total() const;
  bool all_zero() const;
};

/// Scales a non-negative profile to unit sum. An all-zero profile comes back
/// all-zero (tagged L1). Throws InvariantError on a negative entry.
TemporalProfile l1_normalize(const TemporalProfile& profile);

/// Cosine similarity; 0 when either vector is all-zero.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace emsrisk
