#include <gtest/gtest.h>

#include <cmath>

#include "emsrisk/error.hpp"
#include "emsrisk/eval.hpp"
#include "emsrisk/geometry.hpp"
#include "emsrisk/risk.hpp"
#include "emsrisk/synth.hpp"
#include "emsrisk/timeseries.hpp"
#include "support.hpp"

using namespace emsrisk;
using namespace emsrisk::testing;

namespace {

GeneratorSpec tiny() {
  auto s = preset("coupled");
  s.n_regions = 6;
  s.days = 14;
  return s;
}

std::string serialized(const Dataset& ds) {
  TempDir dir;
  save_dataset(ds, dir.path().string());
  std::string out;
  for (const char* f : {"calls.csv", "regions.geojson", "venues.csv", "checkins.csv"}) out += read_text(dir.file(f));
  return out;
}

}  // namespace

TEST(Template, MeanOneAndShape) {
  const auto t = make_template({{9.0, 1.0, 1.0}}, 0.1, {1, 1, 1, 1, 1, 2, 2});
  double sum = 0;
  for (double v : t) sum += v;
  EXPECT_NEAR(sum / kHoursPerWeek, 1.0, 1e-12);
  EXPECT_GT(t[9], t[3]);
  EXPECT_NEAR(t[5 * 24 + 9], 2 * t[9], 1e-12);
  for (double v : flat_template()) EXPECT_EQ(v, 1.0);
}

TEST(Generate, ZeroRatesGiveEmptyStreams) {
  auto s = tiny();
  for (auto& n : s.natures) n.base_rate = 0;
  for (auto& c : s.categories) c.checkin_rate = 0;
  const auto ds = generate(s);
  EXPECT_EQ(ds.regions.size(), 6u);
  EXPECT_FALSE(ds.venues.empty());
  EXPECT_TRUE(ds.calls.empty());
  EXPECT_TRUE(ds.checkins.empty());
}

TEST(Generate, DeterministicAndThreadInvariant) {
  const auto s = tiny();
  const auto a = serialized(generate(s));
  EXPECT_EQ(a, serialized(generate(s)));
  EXPECT_EQ(a, serialized(generate(s, 4)));
  auto other = s;
  other.seed += 1;
  EXPECT_NE(a, serialized(generate(other)));
}

TEST(Generate, OutputIsValidAndChronological) {
  const auto ds = generate(tiny());
  EXPECT_NO_THROW(validate(ds));
  EXPECT_TRUE(std::is_sorted(ds.calls.begin(), ds.calls.end(),
                             [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; }));
  // Venue assignments agree with a fresh point-in-polygon join.
  const auto join = spatial_join(ds.venues, ds.regions);
  EXPECT_EQ(join.unassigned, 0u);
  for (const auto& [id, v] : join.venues) EXPECT_EQ(v.region_id, ds.venues.at(id).region_id) << id;
}

TEST(Generate, RefusesOversizedSpecs) {
  auto s = preset("paper-mimic");
  s.natures[0].base_rate = 5.0;
  EXPECT_THROW(generate(s), UsageError);
}

TEST(Generate, DefaultSpecSlotRate) {
  const auto ds = generate(preset("default"));
  EXPECT_NEAR(slot_positive_rate(ds), 0.02, 0.01);
  EXPECT_NEAR(ground_truth(preset("default")).expected_slot_rate, 0.02, 0.01);
}

TEST(Generate, WeeklyProfileConvergesToTemplate) {
  GeneratorSpec s;
  s.n_regions = 25;
  s.days = 364;
  s.pop_spread = 0.0;
  s.natures = {{17, 0.9, make_template({{9.5, 2.5, 1.0}, {15, 3, 0.5}}, 0.1, {1, 1, 1, 1, 1.2, 0.8, 0.7})}};
  const auto ds = generate(s);
  ASSERT_GE(ds.calls.size(), 100000u);
  const auto empirical = l1_normalize(weekly_profile(ds.calls, NatureCode{17})).values;
  const auto gt = ground_truth(s);
  const auto& expected = gt.nature_profiles.at(17);
  double l1 = 0;
  for (std::size_t h = 0; h < expected.size(); ++h) l1 += std::fabs(empirical[h] - expected[h]);
  EXPECT_LT(l1, 0.05);
}

TEST(Generate, PlantedCouplingsRecovered) {
  const auto spec = preset("default");
  const auto table = build_risk_table(generate(spec));
  for (const auto& k : spec.couplings) {
    const auto* e = table.find(NatureCode{k.nature}, k.category);
    ASSERT_NE(e, nullptr) << k.category;
    EXPECT_GT(e->sa, 1.0 + (k.multiplier - 1.0) / 2.0) << k.nature << ' ' << k.category;
  }
}

TEST(Generate, SeasonalSurgeRaisesChristmas) {
  GeneratorSpec s;
  s.n_regions = 10;
  s.start = parse_date("2015-12-01");
  s.days = 31;
  s.seasonal_surge = 2.0;
  s.natures = {{17, 0.5, flat_template()}};
  const auto daily = aggregate_daily(generate(s).calls).values;
  double early = 0, late = 0;
  for (int d = 0; d < 14; ++d) early += daily[d];
  for (int d = 19; d < 31; ++d) late += daily[d];
  EXPECT_NEAR((late / 12) / (early / 14), 2.0, 0.15);
}

TEST(GroundTruth, NoCouplingsMeansUnitLift) {
  auto s = preset("paper-mimic");
  s.couplings.clear();
  s.activity_coupling = 0;
  const auto gt = ground_truth(s);
  ASSERT_FALSE(gt.pairs.empty());
  // Phase-shifted regions see slightly different hours of the holiday surge.
  for (const auto& p : gt.pairs) EXPECT_NEAR(p.sa, 1.0, 1e-4) << p.nature << ' ' << p.category;
  EXPECT_TRUE(gt.top_couplings.empty());
}

TEST(GroundTruth, UniformTemplate) {
  GeneratorSpec s;
  s.n_regions = 4;
  s.days = 7;
  s.natures = {{4, 0.1, flat_template()}};
  const auto gt = ground_truth(s);
  for (double v : gt.nature_profiles.at(4)) EXPECT_NEAR(v, 1.0 / 168, 1e-15);
}

TEST(GroundTruth, CoupledPairMatchesEmpiricalLift) {
  const auto spec = preset("coupled");
  const auto gt = ground_truth(spec);
  ASSERT_FALSE(gt.top_couplings.empty());
  const auto& top = gt.top_couplings.front();
  EXPECT_EQ(top.category, "Nightclub");
  const auto table = build_risk_table(generate(spec));
  EXPECT_NEAR(table.find(NatureCode{4}, "Nightclub")->sa, top.sa, 0.1 * top.sa);
}

TEST(Spec, Validation) {
  auto s = tiny();
  s.couplings[0].multiplier = 0.5;
  EXPECT_THROW(s.validate(), UsageError);
  s = tiny();
  s.natures[0].base_rate = -1;
  EXPECT_THROW(s.validate(), UsageError);
  s = tiny();
  s.couplings.push_back({4, "Casino", 2.0});
  EXPECT_THROW(s.validate(), UsageError);
  EXPECT_THROW(preset("nope"), UsageError);
}

TEST(Spec, JsonRoundTrip) {
  for (const auto& name : preset_names()) {
    const auto s = preset(name);
    const auto text = spec_to_json(s);
    EXPECT_EQ(spec_to_json(spec_from_json(text)), text) << name;
  }
  EXPECT_THROW(spec_from_json(R"({"base": "null", "regions": 3})"), UsageError);
  const auto derived = spec_from_json(R"({"base": "null", "n_regions": 3, "seed": 8})");
  EXPECT_EQ(derived.n_regions, 3);
  EXPECT_EQ(derived.seed, 8u);
  EXPECT_EQ(derived.days, preset("null").days);
}

TEST(Spec, LoadFromFile) {
  TempDir dir;
  write_text(dir.file("s.json"), R"({"base": "uncoupled", "days": 10})");
  EXPECT_EQ(load_spec(dir.file("s.json")).days, 10);
  EXPECT_EQ(load_spec("night").name, "night");
  EXPECT_THROW(load_spec(dir.file("missing.json")), UsageError);
}
