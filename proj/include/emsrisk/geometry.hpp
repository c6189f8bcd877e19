#pragma once

#include "emsrisk/model.hpp"

namespace emsrisk {

enum class PointLocation { Outside, Boundary, Inside };

struct BoundingBox {
  double min_lon, min_lat, max_lon, max_lat;
  bool contains(Point p) const {
    return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
  }
};

/// Throws DataError when a ring has fewer than three distinct vertices or
/// is not closed, or when the polygon has no rings.
void validate_polygon(const Polygon& polygon);

BoundingBox bounding_box(const Polygon& polygon);

/// Even-odd membership over all rings. Points within 1e-12 of any edge
/// report Boundary.
PointLocation locate_point(Point p, const Polygon& polygon);

/// Boundary points count as inside.
bool point_in_polygon(Point p, const Polygon& polygon);

}  // namespace emsrisk
