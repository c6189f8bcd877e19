#include "emsrisk/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "emsrisk/error.hpp"

namespace emsrisk {
namespace {

constexpr double kEdgeTolerance = 1e-12;

bool on_segment(Point p, Point a, Point b) {
  const double dx = b.lon - a.lon, dy = b.lat - a.lat;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2, 0.0, 1.0);
  const double ex = a.lon + t * dx - p.lon, ey = a.lat + t * dy - p.lat;
  return ex * ex + ey * ey <= kEdgeTolerance * kEdgeTolerance;
}

std::size_t distinct_vertices(const Ring& ring) {
  std::vector<Point> pts(ring.begin(), ring.end());
  std::sort(pts.begin(), pts.end(), [](Point a, Point b) {
    return a.lon < b.lon || (a.lon == b.lon && a.lat < b.lat);
  });
  return static_cast<std::size_t>(std::unique(pts.begin(), pts.end()) - pts.begin());
}

}  // namespace

void validate_polygon(const Polygon& polygon) {
  if (polygon.empty()) throw DataError("polygon has no rings");
  for (std::size_t r = 0; r < polygon.size(); ++r) {
    const Ring& ring = polygon[r];
    if (ring.size() < 4 || !(ring.front() == ring.back()))
      throw DataError("ring " + std::to_string(r) + " is not closed or has fewer than 4 vertices");
    if (distinct_vertices(ring) < 3)
      throw DataError("ring " + std::to_string(r) + " is degenerate (fewer than 3 distinct vertices)");
  }
}

BoundingBox bounding_box(const Polygon& polygon) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  BoundingBox box{inf, inf, -inf, -inf};
  for (const Ring& ring : polygon)
    for (Point p : ring) {
      box.min_lon = std::min(box.min_lon, p.lon);
      box.min_lat = std::min(box.min_lat, p.lat);
      box.max_lon = std::max(box.max_lon, p.lon);
      box.max_lat = std::max(box.max_lat, p.lat);
    }
  return box;
}

PointLocation locate_point(Point p, const Polygon& polygon) {
  validate_polygon(polygon);
  bool inside = false;
  for (const Ring& ring : polygon) {
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
      const Point a = ring[j], b = ring[i];
      if (on_segment(p, a, b)) return PointLocation::Boundary;
      if ((a.lat > p.lat) != (b.lat > p.lat)) {
        const double x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
        if (p.lon < x) inside = !inside;
      }
    }
  }
  return inside ? PointLocation::Inside : PointLocation::Outside;
}

bool point_in_polygon(Point p, const Polygon& polygon) {
  return locate_point(p, polygon) != PointLocation::Outside;
}

}  // namespace emsrisk
