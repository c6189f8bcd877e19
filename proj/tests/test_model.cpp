#include <gtest/gtest.h>

#include <cmath>

#include "emsrisk/error.hpp"
#include "emsrisk/model.hpp"

using namespace emsrisk;

TEST(Nature, LabelsAndExclusion) {
  EXPECT_EQ(NatureCode{17}.label(), "Falls");
  EXPECT_TRUE(NatureCode{35}.excluded());
  EXPECT_FALSE(NatureCode{17}.excluded());
  EXPECT_EQ(nature_from_label("Falls")->code, 17);
  EXPECT_FALSE(nature_from_label("No such thing").has_value());
}

TEST(L1Normalize, Proportional) {
  TemporalProfile p{{2, 2, 0, 0}, Normalization::Counts};
  auto q = l1_normalize(p);
  EXPECT_EQ(q.normalization, Normalization::L1);
  EXPECT_DOUBLE_EQ(q.values[0], 0.5);
  EXPECT_DOUBLE_EQ(q.values[1], 0.5);
  EXPECT_DOUBLE_EQ(q.values[2], 0.0);
}

TEST(L1Normalize, OneThree) {
  auto p = TemporalProfile::zeros(24);
  p.values[0] = 1;
  p.values[1] = 3;
  auto q = l1_normalize(p);
  EXPECT_DOUBLE_EQ(q.values[0], 0.25);
  EXPECT_DOUBLE_EQ(q.values[1], 0.75);
  EXPECT_DOUBLE_EQ(q.total(), 1.0);
}

TEST(L1Normalize, AllZeroStaysZero) {
  auto q = l1_normalize(TemporalProfile::zeros(168));
  EXPECT_TRUE(q.all_zero());
  EXPECT_EQ(q.normalization, Normalization::L1);
}

TEST(L1Normalize, NegativeEntryRejected) {
  TemporalProfile p{{1, -1}, Normalization::Counts};
  EXPECT_THROW(l1_normalize(p), InvariantError);
}

TEST(Cosine, Basics) {
  std::vector<double> e0{1, 0, 0}, e01{1, 1, 0}, e2{0, 0, 1}, z{0, 0, 0};
  EXPECT_NEAR(cosine_similarity(e0, e01), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(cosine_similarity(e0, e2), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(e0, z), 0.0);
  EXPECT_NEAR(cosine_similarity(e01, e01), 1.0, 1e-15);
}
