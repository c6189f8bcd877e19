#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "emsrisk/error.hpp"
#include "emsrisk/features.hpp"
#include "emsrisk/log.hpp"
#include "emsrisk/synth.hpp"
#include "support.hpp"

using namespace emsrisk;
using namespace emsrisk::testing;

namespace {

// Monday 2 March 2015.
const HourStamp kMonday = make_hour(2015, 3, 2);

std::vector<std::string> region_names(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("R" + std::to_string(i));
  return out;
}

}  // namespace

TEST(Features, GroupsPartitionTheLayout) {
  std::set<std::size_t> seen;
  for (auto g : {FeatureGroup::Demo, FeatureGroup::Calls, FeatureGroup::Fsq})
    for (auto f : group_features(g)) {
      EXPECT_TRUE(seen.insert(f).second);
      EXPECT_EQ(feature_group(f), g);
    }
  EXPECT_EQ(seen.size(), static_cast<std::size_t>(kFeatureCount));
  EXPECT_EQ(group_features(FeatureGroup::Demo), (std::vector<std::size_t>{kUAR, kResPop, kDayPop, kIMD}));
  EXPECT_EQ(parse_group("fsq"), FeatureGroup::Fsq);
  EXPECT_THROW(parse_group("weather"), UsageError);
}

TEST(Features, ZeroHistoryRegion) {
  Dataset ds = strip_dataset(2);
  ds.calls.push_back(call(kMonday, "R0", 4));
  const auto f = build_features("R1", kMonday + 30, ds, {{"R1", 2.5}});
  EXPECT_EQ(f[kHist], 0.0);
  for (auto k : {kHoDHist, kHoDHistF, kHoWCalls, kHoWHistF, kDayWHist, kFsqHist, kHoDFsqF, kHoWFsqF})
    EXPECT_EQ(f[k], 0.0) << kFeatureNames[k];
  EXPECT_EQ(f[kUAR], 2.5);
  EXPECT_EQ(f[kResPop], 1501.0);
  EXPECT_EQ(f[kIMD], 10.0);
}

TEST(Features, HourOfDayHistory) {
  Dataset ds = strip_dataset(1);
  // 4 calls at 14:00 on earlier days and 6 at other hours.
  for (int d = 0; d < 4; ++d) ds.calls.push_back(call(kMonday + 24 * d + 14, "R0", 17));
  for (int k = 0; k < 6; ++k) ds.calls.push_back(call(kMonday + 24 * k + 3, "R0", 17));
  std::sort(ds.calls.begin(), ds.calls.end(), [](auto& a, auto& b) { return a.timestamp < b.timestamp; });
  const HourStamp t = kMonday + 24 * 8 + 14;
  const auto f = build_features("R0", t, ds, {});
  EXPECT_EQ(f[kHist], 10.0);
  EXPECT_EQ(f[kHoDHist], 4.0);
  EXPECT_NEAR(f[kHoDHistF], 0.4, 1e-15);
  EXPECT_EQ(f[kHoD], 14.0);
}

TEST(Features, StrictlyBeforePredictionTime) {
  Dataset ds = strip_dataset(1);
  ds.calls = {call(kMonday, "R0", 17), call(kMonday + 5, "R0", 17)};
  EXPECT_EQ(build_features("R0", kMonday + 5, ds, {})[kHist], 1.0);
  EXPECT_EQ(build_features("R0", kMonday + 6, ds, {})[kHist], 2.0);
}

TEST(Features, MondayMidnightWeekly) {
  Dataset ds = strip_dataset(1);
  ds.calls = {call(kMonday, "R0", 17), call(kMonday + 30, "R0", 17)};
  const auto f = build_features("R0", kMonday + 168, ds, {});
  EXPECT_EQ(f[kHoWCalls], 1.0);
  EXPECT_EQ(f[kDayWHist], 1.0);
  EXPECT_EQ(f[kDoW], 0.0);
  EXPECT_NEAR(f[kHoWHistF], 0.5, 1e-15);
}

TEST(Features, CheckInHistory) {
  Dataset ds = strip_dataset(2);
  add_venue(ds, "V1", "Pub", 0);
  add_venue(ds, "V2", "Pub", 1);
  ds.calls = {call(kMonday, "R1", 17)};
  ds.checkins = {{"V1", kMonday + 2}, {"V1", kMonday + 26}, {"V2", kMonday + 2}, {"V1", kMonday + 30}, {"V1", kMonday + 50}};
  const auto f = build_features("R0", kMonday + 50, ds, {});
  EXPECT_EQ(f[kFsqHist], 3.0);
  EXPECT_EQ(f[kFsqHoD], 2.0);  // 02:00 on two days
  EXPECT_NEAR(f[kHoDFsqF], 2.0 / 3.0, 1e-15);
  EXPECT_EQ(f[kFsqHoW], 0.0);
}

TEST(Features, Errors) {
  Dataset ds = strip_dataset(1);
  EXPECT_THROW(build_features("R0", kMonday, ds, {}), UsageError);
  ds.calls = {call(kMonday, "R0", 17)};
  EXPECT_THROW(build_features("R9", kMonday + 1, ds, {}), UsageError);
  EXPECT_THROW(build_features("R0", kMonday, ds, {}), UsageError);
}

TEST(Features, SumsAndFractionsHold) {
  auto spec = preset("coupled");
  spec.days = 28;
  const auto ds = generate(spec);
  HistoryIndex index(ds, {});
  const HourStamp end = ds.calls.back().timestamp;
  for (HourStamp t = ds.calls.front().timestamp + 1; t < end; t = t + 97) {
    index.advance_to(t);
    for (std::size_t r = 0; r < index.region_ids().size(); r += 7) {
      const auto f = index.features(r);
      if (f[kHist] > 0) EXPECT_NEAR(f[kHoDHistF], f[kHoDHist] / f[kHist], 1e-15);
      for (auto k : {kHoDHistF, kHoWHistF, kHoDFsqF, kHoWFsqF}) {
        EXPECT_GE(f[k], 0.0);
        EXPECT_LE(f[k], 1.0);
      }
    }
  }
}

TEST(Features, HistoryIndexMatchesDirectComputation) {
  auto spec = preset("coupled");
  spec.days = 21;
  spec.n_regions = 9;
  const auto ds = generate(spec);
  std::map<std::string, double> uar{{"R001", 1.5}};
  HistoryIndex index(ds, uar);
  const HourStamp first = ds.calls.front().timestamp;
  for (HourStamp t = first + 1; t < first + 21 * 24; t = t + 41) {
    index.advance_to(t);
    for (const auto& r : index.region_ids()) {
      const auto a = index.features(r);
      const auto b = build_features(r, t, ds, uar);
      for (std::size_t k = 0; k < kFeatureCount; ++k) ASSERT_DOUBLE_EQ(a[k], b[k]) << r << ' ' << kFeatureNames[k];
    }
  }
}

TEST(Features, HistoryIndexRejectsRewind) {
  Dataset ds = strip_dataset(1);
  ds.calls = {call(kMonday, "R0", 17)};
  HistoryIndex index(ds, {});
  index.advance_to(kMonday + 10);
  EXPECT_THROW(index.advance_to(kMonday + 9), UsageError);
}

TEST(SampleNegatives, DistinctCallFreeRegions) {
  Rng rng(42);
  const auto regions = region_names(10);
  const std::vector<std::string> positives{"R2", "R7"};
  const auto neg = sample_negatives(kMonday, positives, regions, 1.0, rng);
  ASSERT_EQ(neg.size(), 2u);
  EXPECT_NE(neg[0], neg[1]);
  for (const auto& r : neg) EXPECT_EQ(std::count(positives.begin(), positives.end(), r), 0);
}

TEST(SampleNegatives, Deterministic) {
  const auto regions = region_names(50);
  const std::vector<std::string> positives{"R1", "R2", "R3"};
  Rng a(42), b(42);
  EXPECT_EQ(sample_negatives(kMonday, positives, regions, 2.0, a), sample_negatives(kMonday, positives, regions, 2.0, b));
}

TEST(SampleNegatives, NoCallFreeRegionWarns) {
  Rng rng(42);
  const auto regions = region_names(3);
  std::size_t warned = 0;
  log::ScopedSink sink([&](const std::string&) { ++warned; });
  EXPECT_TRUE(sample_negatives(kMonday, regions, regions, 1.0, rng).empty());
  EXPECT_EQ(warned, 1u);
  EXPECT_EQ(sample_negatives(kMonday, {"R0", "R1"}, regions, 1.0, rng), std::vector<std::string>{"R2"});
  EXPECT_EQ(warned, 2u);
}

TEST(SampleNegatives, RoughlyUniform) {
  Rng rng(7);
  const auto regions = region_names(5);
  std::map<std::string, int> hits;
  for (int k = 0; k < 20000; ++k)
    for (const auto& r : sample_negatives(kMonday, {"R0"}, regions, 1.0, rng)) ++hits[r];
  EXPECT_EQ(hits.count("R0"), 0u);
  for (const auto& [r, n] : hits) EXPECT_NEAR(n / 20000.0, 0.25, 0.02) << r;
}

namespace {

struct Stream {
  Dataset ds;
  WalkForwardConfig config;
};

Stream small_stream() {
  auto spec = preset("coupled");
  spec.days = 56;
  spec.n_regions = 12;
  Stream s{generate(spec), {}};
  const HourStamp first = s.ds.calls.front().timestamp + 1;
  s.config.start = first + s.config.warmup_hours;
  s.config.end = s.config.start + 2 * 168 + 5;
  return s;
}

}  // namespace

TEST(WalkForward, RefusesStartInsideWarmup) {
  auto s = small_stream();
  s.config.start = s.config.start - 1;
  EXPECT_THROW(WalkForward(s.ds, s.config, {}), UsageError);
}

TEST(WalkForward, ChronologyAndBalance) {
  const auto s = small_stream();
  WalkForward wf(s.ds, s.config, {});
  std::size_t evaluated = 0;
  for (const auto& step : wf.steps()) {
    for (const auto& e : step.train) ASSERT_LT(e.t_prime, step.t_prime);
    int pos = 0, neg = 0;
    std::set<std::string> seen;
    for (const auto& e : step.test) {
      EXPECT_EQ(e.t_prime, step.t_prime);
      EXPECT_TRUE(seen.insert(e.region_id).second);
      (e.label > 0 ? pos : neg) += 1;
    }
    EXPECT_EQ(pos, neg);
    evaluated += pos > 0;
  }
  EXPECT_GT(evaluated, 100u);
}

TEST(WalkForward, FirstStepTrainsOnWarmup) {
  const auto s = small_stream();
  WalkForward wf(s.ds, s.config, {});
  const auto steps = wf.steps();
  const auto& first = steps.front();
  ASSERT_FALSE(first.train.empty());
  EXPECT_EQ(first.t_prime, s.config.start);
  EXPECT_GE(first.train.front().t_prime, wf.data_start());
  EXPECT_LT(first.train.back().t_prime, s.config.start);
  EXPECT_LT(s.config.start - first.train.front().t_prime, s.config.warmup_hours + 1);
  EXPECT_EQ(first.train.data(), wf.examples().data());
}

TEST(WalkForward, TrainSetsConstantWithinBlocks) {
  const auto s = small_stream();
  WalkForward wf(s.ds, s.config, {});
  const auto steps = wf.steps();
  for (std::size_t k = 1; k < steps.size(); ++k) {
    const bool same_block = (steps[k].t_prime - s.config.start) / 168 == (steps[k - 1].t_prime - s.config.start) / 168;
    if (same_block) {
      EXPECT_EQ(steps[k].train.data(), steps[k - 1].train.data());
      EXPECT_EQ(steps[k].train.size(), steps[k - 1].train.size());
    } else {
      EXPECT_GT(steps[k].train.size(), steps[k - 1].train.size());
    }
  }
}

TEST(WalkForward, LabelsMatchCalls) {
  const auto s = small_stream();
  WalkForward wf(s.ds, s.config, {});
  std::set<std::pair<std::int64_t, std::string>> slots;
  for (const auto& c : s.ds.calls)
    if (!c.excluded()) slots.insert({c.timestamp.hours, c.region_id});
  for (const auto& e : wf.examples()) EXPECT_EQ(e.label > 0, slots.count({e.t_prime.hours, e.region_id}) == 1);
}

TEST(WalkForward, Deterministic) {
  const auto s = small_stream();
  WalkForward a(s.ds, s.config, {}), b(s.ds, s.config, {});
  ASSERT_EQ(a.examples().size(), b.examples().size());
  for (std::size_t k = 0; k < a.examples().size(); ++k) {
    EXPECT_EQ(a.examples()[k].region_id, b.examples()[k].region_id);
    EXPECT_EQ(a.examples()[k].features, b.examples()[k].features);
  }
}

TEST(WalkForward, ShortHoursKeepBalance) {
  Dataset ds = strip_dataset(3);
  for (int h = 0; h < 10; ++h) ds.calls.push_back(call(kMonday + h, "R0", 17));
  for (const char* r : {"R0", "R1", "R2"}) ds.calls.push_back(call(kMonday + 20, r, 17));
  WalkForwardConfig c;
  c.warmup_hours = 2;
  c.start = kMonday + 3;
  c.end = kMonday + 24;
  log::ScopedSink quiet([](const std::string&) {});
  WalkForward wf(ds, c, {});
  EXPECT_EQ(wf.short_hours(), 1u);
  for (const auto& e : wf.examples()) EXPECT_NE(e.t_prime, kMonday + 20);
}
