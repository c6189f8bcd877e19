#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "emsrisk/error.hpp"
#include "emsrisk/geometry.hpp"
#include "emsrisk/rng.hpp"
#include "support.hpp"

using namespace emsrisk;
using emsrisk::testing::square;

TEST(PointInPolygon, UnitSquare) {
  const auto sq = square(0, 0);
  EXPECT_TRUE(point_in_polygon({0.5, 0.5}, sq));
  EXPECT_FALSE(point_in_polygon({2, 2}, sq));
}

TEST(PointInPolygon, HoleExcludes) {
  Polygon p = square(0, 0);
  p.push_back(square(0.25, 0.25, 0.5)[0]);
  EXPECT_FALSE(point_in_polygon({0.5, 0.5}, p));
  EXPECT_TRUE(point_in_polygon({0.1, 0.1}, p));
}

TEST(PointInPolygon, BoundaryCountsAsInside) {
  const auto sq = square(0, 0);
  EXPECT_EQ(locate_point({1.0, 0.5}, sq), PointLocation::Boundary);
  EXPECT_EQ(locate_point({0.0, 0.0}, sq), PointLocation::Boundary);
  EXPECT_TRUE(point_in_polygon({0.5, 1.0}, sq));
  EXPECT_EQ(locate_point({0.5, 0.5}, sq), PointLocation::Inside);
}

TEST(PointInPolygon, DegenerateRejected) {
  Polygon flat{{{0, 0}, {1, 1}, {0, 0}, {1, 1}, {0, 0}}};
  EXPECT_THROW(validate_polygon(flat), DataError);
  Polygon open{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
  EXPECT_THROW(validate_polygon(open), DataError);
  EXPECT_THROW(validate_polygon(Polygon{}), DataError);
  EXPECT_NO_THROW(validate_polygon(square(0, 0)));
}

namespace {

// Winding number by signed crossings; independent of the even-odd code.
int winding_number(Point p, const Ring& ring) {
  int wn = 0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const Point a = ring[i], b = ring[i + 1];
    const double cross = (b.lon - a.lon) * (p.lat - a.lat) - (p.lon - a.lon) * (b.lat - a.lat);
    if (a.lat <= p.lat) {
      if (b.lat > p.lat && cross > 0) ++wn;
    } else if (b.lat <= p.lat && cross < 0) {
      --wn;
    }
  }
  return wn;
}

Ring star_polygon(Rng& rng, int vertices) {
  Ring ring;
  for (int k = 0; k < vertices; ++k) {
    const double angle = 2 * M_PI * (k + 0.8 * rng.uniform()) / vertices;
    const double radius = 0.2 + rng.uniform();
    ring.push_back({radius * std::cos(angle), radius * std::sin(angle)});
  }
  ring.push_back(ring.front());
  return ring;
}

}  // namespace

TEST(PointInPolygon, MatchesWindingNumberOnStarPolygons) {
  Rng rng(7);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Ring ring = star_polygon(rng, 3 + static_cast<int>(rng.below(12)));
    const Polygon poly{ring};
    for (int k = 0; k < 50; ++k) {
      const Point p{2.6 * rng.uniform() - 1.3, 2.6 * rng.uniform() - 1.3};
      if (locate_point(p, poly) == PointLocation::Boundary) continue;
      EXPECT_EQ(point_in_polygon(p, poly), winding_number(p, ring) != 0);
      ++checked;
    }
  }
  EXPECT_GT(checked, 10000);
}

TEST(BoundingBox, Square) {
  const auto b = bounding_box(square(2, 3, 0.5));
  EXPECT_DOUBLE_EQ(b.min_lon, 2);
  EXPECT_DOUBLE_EQ(b.max_lat, 3.5);
  EXPECT_TRUE(b.contains({2.25, 3.25}));
}
