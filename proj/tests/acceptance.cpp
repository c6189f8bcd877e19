// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "emsrisk/error.hpp"
#include "emsrisk/eval.hpp"
#include "emsrisk/log.hpp"
#include "emsrisk/risk.hpp"
#include "emsrisk/rng.hpp"
#include "emsrisk/synth.hpp"
#include "emsrisk/timeseries.hpp"
#include "support.hpp"

using namespace emsrisk;
using namespace emsrisk::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and thresholds.
constexpr double kReconstructionRel = 1e-9;
constexpr double kDecomposeSeconds = 1.0;
constexpr double kSurgeFloor = 1.1;
constexpr double kSeasonMeanTol = 0.05;
constexpr double kSelfKl = 1e-12;
constexpr int kKlPairs = 10000;
constexpr int kRegionalSeeds = 20;
constexpr double kRegionalShare = 0.95;
constexpr double kUncoupledTol = 0.05;
constexpr double kMinCalls = 1e5;
constexpr int kCouplingSeeds = 10, kCouplingNeeded = 9;
constexpr int kDaytimeSeeds = 10, kDaytimeNeeded = 8;
constexpr double kMinAuc = 0.60;
constexpr double kSlotRate = 0.02, kSlotRateTol = 0.01;
constexpr double kPipelineSeconds = 600.0;
constexpr double kImportanceSum = 1e-9;
constexpr double kNullAucTol = 0.05;
constexpr double kFlatHourTol = 0.15;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

DailySeries series(Date start, std::vector<double> v) {
  DailySeries s;
  s.start_date = start;
  s.values = std::move(v);
  return s;
}

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + EMSRISK_CLI_PATH + "' " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_text(e.path().string());
  return files;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_text(p.string())); }

MetricsReport walk(const std::string& spec_name, std::size_t weeks, std::size_t trees,
                   const char* ablation = nullptr) {
  const auto ds = generate(preset(spec_name));
  EvalConfig cfg;
  cfg.walk = default_walk_forward(ds, weeks);
  cfg.forest.n_trees = trees;
  if (ablation) cfg.ablation = AblationSpec::parse(ablation);
  return run_walk_forward(ds, cfg);
}

// Example-weighted accuracy over hour-of-day buckets.
std::array<std::pair<double, double>, 24> hour_of_day_accuracy(const MetricsReport& r) {
  std::array<std::pair<double, double>, 24> acc{};
  for (const auto& s : r.scored) {
    auto& [hit, n] = acc[static_cast<std::size_t>(s.hour_of_week % 24)];
    hit += (s.score >= kDecisionThreshold) == (s.label > 0);
    n += 1;
  }
  return acc;
}

Outcome decomposition_identity() {
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 730 + rng.below(1200);
    std::vector<double> v(n);
    for (auto& x : v) x = 1.0 + 99.0 * rng.uniform();
    const auto d = decompose(series(parse_date("2012-03-01"), v));
    for (std::size_t i = 0; i < n; ++i) {
      const auto slot = seasonal_slot(date_from_day_index(day_index(d.observed.start_date) + static_cast<std::int64_t>(i)));
      if (!d.trend[i] || !d.seasonality[slot] || !d.irregular[i]) continue;
      const double back = *d.trend[i] * *d.seasonality[slot] * *d.irregular[i];
      worst = std::max(worst, std::fabs(back - v[i]) / v[i]);
    }
  }
  std::vector<double> five(5 * 365 + 1);
  for (auto& x : five) x = static_cast<double>(rng.below(200));
  const auto t0 = Clock::now();
  log::ScopedSink quiet([](const std::string&) {});
  decompose(series(parse_date("2014-01-01"), five));
  const double secs = seconds_since(t0);
  return {worst <= kReconstructionRel && secs < kDecomposeSeconds,
          fmt("max relative error %.3g, 5-year decomposition %.3fs", worst, secs)};
}

Outcome seasonality_recovery() {
  const auto ds = generate(preset("seasonal"));
  const auto d = decompose(aggregate_daily(ds.calls));
  // Planted days in common-year slots: 20-31 December and 1 January.
  std::vector<std::size_t> slots{seasonal_slot(parse_date("2015-01-01"))};
  for (int day = 20; day <= 31; ++day) slots.push_back(seasonal_slot(parse_date(fmt("2015-12-%02d", day))));
  double lowest = INFINITY;
  bool all_defined = true;
  for (auto s : slots) {
    if (!d.seasonality[s]) all_defined = false;
    else lowest = std::min(lowest, *d.seasonality[s]);
  }
  double sum = 0;
  int n = 0;
  for (const auto& v : d.seasonality)
    if (v) sum += *v, ++n;
  const double mean = n ? sum / n : 0.0;
  return {all_defined && lowest > kSurgeFloor && std::fabs(mean - 1.0) <= kSeasonMeanTol,
          fmt("lowest planted index %.3f, mean index %.4f over %d slots", lowest, mean, n)};
}

double mean_kl(const StabilityReport& r) {
  double s = 0;
  for (const auto& x : r.scores) s += x.kl;
  return r.scores.empty() ? 0.0 : s / static_cast<double>(r.scores.size());
}

Outcome kl_suite() {
  Rng rng(202);
  double min_kl = INFINITY, max_self = 0.0;
  for (int k = 0; k < kKlPairs; ++k) {
    const std::size_t bins = rng.uniform() < 0.5 ? 24 : 168;
    auto p = TemporalProfile::zeros(bins), q = TemporalProfile::zeros(bins);
    for (std::size_t b = 0; b < bins; ++b) {
      p.values[b] = rng.uniform() < 0.2 ? 0.0 : rng.uniform() * 10.0;
      q.values[b] = rng.uniform() < 0.2 ? 0.0 : rng.uniform() * 10.0;
    }
    min_kl = std::min(min_kl, kl_divergence(p, q));
    max_self = std::max(max_self, std::fabs(kl_divergence(p, p)));
  }
  int wins = 0;
  for (int seed = 1; seed <= kRegionalSeeds; ++seed) {
    auto spec = preset("regional");
    spec.seed = static_cast<std::uint64_t>(seed);
    const auto ds = generate(spec);
    const auto natures = natures_present(ds.calls);
    StabilityOptions o;
    o.seed = static_cast<std::uint64_t>(seed);
    o.mode = StabilityMode::WithinRegion;
    const double within = mean_kl(profile_stability_report(ds.calls, natures, o));
    o.mode = StabilityMode::CrossRegion;
    const double cross = mean_kl(profile_stability_report(ds.calls, natures, o));
    wins += cross > within;
  }
  const bool ok = min_kl >= 0.0 && max_self < kSelfKl && wins >= kRegionalShare * kRegionalSeeds;
  return {ok, fmt("min D %.3g, max D(p||p) %.3g, cross > within in %d/%d seeds", min_kl, max_self, wins,
                  kRegionalSeeds)};
}

Outcome sa_oracle() {
  Rng rng(303);
  const std::vector<std::string> categories{"A", "B", "C"};
  const std::vector<int> natures{4, 17, 23};
  int instances = 0, mismatches = 0, compared = 0;
  while (instances < 100) {
    const int n_regions = 1 + static_cast<int>(rng.below(5));
    const std::size_t n_nat = 1 + rng.below(3), n_cat = 1 + rng.below(3);
    Dataset ds = strip_dataset(n_regions);
    int v = 0;
    for (int r = 0; r < n_regions; ++r)
      for (std::size_t c = 0; c < n_cat; ++c)
        if (rng.uniform() < 0.5) add_venue(ds, "V" + std::to_string(v++), categories[c], r);
    const HourStamp t0 = make_hour(2016, 1, 4);
    for (int k = 0, n = 1 + static_cast<int>(rng.below(40)); k < n; ++k)
      ds.calls.push_back(call(t0 + k, "R" + std::to_string(rng.below(n_regions)), natures[rng.below(n_nat)]));
    ++instances;
    for (std::size_t i = 0; i < n_nat; ++i)
      for (std::size_t c = 0; c < n_cat; ++c) {
        double n_i = 0, n_j = 0, N_i = 0, N_all = 0;
        for (const auto& e : ds.calls) {
          bool held = false;
          for (const auto& [id, venue] : ds.venues) held |= venue.category == categories[c] && venue.region_id == e.region_id;
          N_all += 1;
          N_i += e.nature.code == natures[i];
          n_j += held;
          n_i += held && e.nature.code == natures[i];
        }
        if (n_j == 0 || N_i == 0) {
          try {
            spatial_attractiveness(NatureCode{natures[i]}, categories[c], ds);
            ++mismatches;
          } catch (const NoSupportError&) {
          }
          continue;
        }
        const double expected = n_i == 0 ? 0.0 : (n_i / n_j) / (N_i / N_all);
        ++compared;
        mismatches += spatial_attractiveness(NatureCode{natures[i]}, categories[c], ds) != expected;
      }
  }
  const auto ds = generate(preset("uncoupled"));
  const auto table = build_risk_table(ds);
  double worst = 0.0;
  for (const auto& e : table.entries()) worst = std::max(worst, std::fabs(e.sa - 1.0));
  const double calls = static_cast<double>(ds.calls.size());
  const bool ok = mismatches == 0 && compared > 0 && calls >= kMinCalls && !table.entries().empty() &&
                  worst <= kUncoupledTol;
  return {ok, fmt("%d mismatches over %d pairs in %d instances; uncoupled max |SA-1| %.4f over %zu pairs, %.0f calls",
                  mismatches, compared, instances, worst, table.entries().size(), calls)};
}

Outcome coupling_recovery() {
  int hits = 0;
  bool in_sankey = false;
  for (int seed = 1; seed <= kCouplingSeeds; ++seed) {
    auto spec = preset("coupled");
    spec.seed = static_cast<std::uint64_t>(seed);
    const auto table = build_risk_table(generate(spec));
    const auto top = top_k_activities(table, NatureCode{4}, 3, RankVariant::SpatioTemporal);
    hits += std::any_of(top.begin(), top.end(), [](const auto& a) { return a.category == "Nightclub"; });
    if (seed == 1) {
      const auto sk = sankey_export(table);
      in_sankey = std::any_of(sk.links.begin(), sk.links.end(), [](const SankeyLink& l) {
        return l.source == "nature:4" && l.target == "category:Nightclub";
      });
    }
  }
  AttractivenessEntry boundary{NatureCode{4}, "Boundary", 1.2, 1.0, 1.2, {}};
  AttractivenessEntry above{NatureCode{4}, "Above", 1.3, 1.0, 1.3, {}};
  const RiskTable fixture({NatureCode{4}}, {"Above", "Boundary"}, {above, boundary}, {});
  const auto sk = sankey_export(fixture, kSankeyThreshold);
  const bool boundary_out = std::none_of(sk.links.begin(), sk.links.end(),
                                         [](const SankeyLink& l) { return l.target == "category:Boundary"; });
  const bool above_in = std::any_of(sk.links.begin(), sk.links.end(),
                                    [](const SankeyLink& l) { return l.target == "category:Above"; });
  return {hits >= kCouplingNeeded && in_sankey && boundary_out && above_in,
          fmt("top-3 in %d/%d seeds, in Sankey %s, 1.2 boundary excluded %s", hits, kCouplingSeeds,
              in_sankey ? "yes" : "no", boundary_out && above_in ? "yes" : "no")};
}

bool contains(const std::vector<RankedActivity>& r, const std::string& c) {
  return std::any_of(r.begin(), r.end(), [&](const auto& a) { return a.category == c; });
}

Outcome spatiotemporal_necessity() {
  int hits = 0;
  for (int seed = 1; seed <= kDaytimeSeeds; ++seed) {
    auto spec = preset("daytime");
    spec.seed = static_cast<std::uint64_t>(seed);
    const auto table = build_risk_table(generate(spec));
    const bool st = contains(top_k_activities(table, NatureCode{3}, 10, RankVariant::SpatioTemporal), "Field");
    const bool ta = contains(top_k_activities(table, NatureCode{3}, 10, RankVariant::Temporal), "Field");
    hits += st && !ta;
  }
  return {hits >= kDaytimeNeeded, fmt("ST-only top-10 in %d/%d seeds", hits, kDaytimeSeeds)};
}

Outcome walk_forward_paper_mimic(const fs::path& work) {
  const auto out = work / "paper";
  const auto t0 = Clock::now();
  const int rc = run_cli("report --paper-mimic -o " + quoted(out));
  const double secs = seconds_since(t0);
  if (rc != 0) return {false, fmt("report exited %d", rc)};
  const double auc = read_json(out / "evaluate" / "report.json").at("auc").get<double>();
  const double rate = read_json(out / "dataset_summary.json").at("slot_positive_rate").get<double>();
  return {auc >= kMinAuc && std::fabs(rate - kSlotRate) <= kSlotRateTol && secs < kPipelineSeconds,
          fmt("AUC %.4f, slot rate %.4f, pipeline %.1fs", auc, rate, secs)};
}

Outcome ablation_direction() {
  constexpr std::size_t weeks = 10, trees = 50;
  const double full = walk("ablation", weeks, trees).auc;
  std::map<std::string, double> drop;
  for (const char* g : {"Demo", "Calls", "Fsq"})
    drop[g] = full - walk("ablation", weeks, trees, (std::string("drop:") + g).c_str()).auc;
  const double only_fsq = walk("ablation", weeks, trees, "only:Fsq").auc;
  const double only_demo = walk("ablation", weeks, trees, "only:Demo").auc;
  const bool calls_largest = drop["Calls"] > drop["Demo"] && drop["Calls"] > drop["Fsq"];
  return {calls_largest && only_fsq > only_demo,
          fmt("full %.4f; decrease Demo %.4f Calls %.4f Fsq %.4f; only Fsq %.4f vs only Demo %.4f", full,
              drop["Demo"], drop["Calls"], drop["Fsq"], only_fsq, only_demo)};
}

Outcome importance_direction() {
  const auto r = walk("diurnal", 8, 50);
  std::size_t top = 0;
  double sum = 0;
  for (std::size_t k = 0; k < r.importances.size(); ++k) {
    sum += r.importances[k];
    if (r.importances[k] > r.importances[top]) top = k;
  }
  const std::string name = r.feature_names.empty() ? "" : r.feature_names[top];
  return {(name == "HoD" || name == "HoD_hist") && std::fabs(sum - 1.0) <= kImportanceSum,
          fmt("top feature %s (%.3f), importances sum to 1%+.2g", name.c_str(), r.importances[top], sum - 1.0)};
}

Outcome night_accuracy() {
  const auto r = walk("night", 8, 50);
  const auto acc = hour_of_day_accuracy(r);
  double hit = 0, n = 0;
  for (int h = 0; h < 6; ++h) hit += acc[h].first, n += acc[h].second;
  const double night = n > 0 ? hit / n : 0.0;
  return {n > 0 && night > r.accuracy, fmt("00-05 accuracy %.4f vs overall %.4f", night, r.accuracy)};
}

Outcome null_model() {
  const auto r = walk("null", 8, 50);
  double worst = 0.0;
  for (const auto& [hit, n] : hour_of_day_accuracy(r))
    if (n > 0) worst = std::max(worst, std::fabs(hit / n - r.accuracy));
  return {std::fabs(r.auc - 0.5) <= kNullAucTol && worst <= kFlatHourTol,
          fmt("AUC %.4f, largest hour-of-day deviation from overall accuracy %.4f", r.auc, worst)};
}

Outcome determinism(const fs::path& work) {
  const auto spec = work / "det_spec.json";
  write_text(spec.string(), R"({"base": "coupled", "n_regions": 10, "days": 400})");
  const std::string model = " --weeks 2 --warmup 336 --trees 8";
  const std::vector<std::pair<std::string, std::string>> commands{
      {"generate", "generate --spec " + quoted(spec)},
      {"decompose", "decompose --window 91"},
      {"profiles", "profiles"},
      {"stability_within", "stability --mode within"},
      {"stability_cross", "stability --mode cross --pairs 20"},
      {"risk", "risk"},
      {"train", "train --trees 8"},
      {"evaluate", "evaluate" + model},
      {"report", "report" + model + " --with-ablations"},
  };
  const auto data = work / "det_data";
  if (run_cli("generate --spec " + quoted(spec) + " -o " + quoted(data)) != 0) return {false, "generate failed"};
  std::vector<std::string> differing;
  for (const auto& [name, args] : commands) {
    std::map<std::string, std::string> first;
    for (int run = 0; run < 4; ++run) {
      const auto out = work / ("det_" + name + "_" + std::to_string(run));
      const std::string threads = run % 2 ? " --threads 3" : " --threads 1";
      const std::string data_arg = name == "generate" ? "" : " -d " + quoted(data);
      if (run_cli(args + data_arg + threads + " -o " + quoted(out)) != 0) {
        differing.push_back(name + " (exit)");
        break;
      }
      auto snap = snapshot(out);
      if (run == 0) first = std::move(snap);
      else if (snap != first || first.empty()) {
        differing.push_back(name);
        break;
      }
    }
  }
  std::string list;
  for (const auto& d : differing) list += (list.empty() ? "" : ", ") + d;
  return {differing.empty(), differing.empty() ? fmt("%zu subcommands identical across 4 runs at 1 and 3 threads",
                                                     commands.size())
                                               : "differs: " + list};
}

}  // namespace

int main() {
  TempDir work;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"decomposition identity", decomposition_identity},
      {"seasonality recovery", seasonality_recovery},
      {"KL suite", kl_suite},
      {"SA oracle equivalence", sa_oracle},
      {"coupling recovery", coupling_recovery},
      {"spatio-temporal necessity", spatiotemporal_necessity},
      {"walk-forward classification", [&] { return walk_forward_paper_mimic(work.path()); }},
      {"ablation direction", ablation_direction},
      {"importance direction", importance_direction},
      {"temporal accuracy profile", night_accuracy},
      {"null-model sanity", null_model},
      {"determinism", [&] { return determinism(work.path()); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
