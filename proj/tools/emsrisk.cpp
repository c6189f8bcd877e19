// Command-line driver. Talks to the library through the C interface only.
#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>

#include "emsrisk/emsrisk.h"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kOutEnv = "EMSRISK_OUT";

struct Failure {
  int code;
  std::string message;
};

void check(emsrisk_status s) {
  if (s != EMSRISK_OK) throw Failure{static_cast<int>(s), emsrisk_last_error()};
}

[[noreturn]] void usage(const std::string& msg) { throw Failure{EMSRISK_USAGE, msg}; }

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};
using Dataset = Handle<emsrisk_dataset, emsrisk_dataset_free>;
using RiskTable = Handle<emsrisk_risk_table, emsrisk_risk_table_free>;
using Forest = Handle<emsrisk_forest, emsrisk_forest_free>;

struct Options {
  std::string out;
  unsigned threads = 1;
  std::string data;
  // generate
  std::string spec = "default";
  std::uint64_t seed = 0;
  bool paper_mimic = false;
  // decompose
  int nature = 0;
  std::string region, from, to;
  int window = 365;
  // profiles
  std::string month;
  // stability
  std::string mode = "within";
  std::size_t pairs = 100;
  std::uint64_t stability_seed = 1;
  // risk
  double threshold = 1.2;
  std::size_t top_k = 10;
  // train / evaluate
  std::size_t trees = 100, depth = 10, min_leaf = 5, mtry = 0;
  std::uint64_t forest_seed = 1, sample_seed = 42;
  std::string ablation = "none";
  std::size_t weeks = 12;
  std::int64_t retrain_every = 168, warmup = 672;
  double negative_ratio = 1.0;
  bool with_ablations = false;
};

fs::path out_dir(const Options& o) {
  fs::path dir = o.out;
  if (dir.empty()) {
    const char* env = std::getenv(kOutEnv);
    dir = env && *env ? env : "emsrisk-out";
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Failure{EMSRISK_DATA, "cannot create output directory " + dir.string()};
  return dir;
}

void require_dataset_dir(const std::string& dir) {
  if (dir.empty()) usage("--data is required");
  for (const char* f : {"calls.csv", "regions.geojson", "venues.csv", "checkins.csv"})
    if (!fs::is_regular_file(fs::path(dir) / f))
      throw Failure{EMSRISK_DATA, "dataset directory '" + dir + "' lacks " + f};
}

void load(Dataset& ds, const std::string& dir) {
  require_dataset_dir(dir);
  check(emsrisk_dataset_load(dir.c_str(), &ds.p));
}

void write_config(const fs::path& dir, const std::string& subcommand, const ordered_json& options) {
  ordered_json doc;
  doc["tool"] = "emsrisk";
  doc["version"] = emsrisk_version();
  doc["subcommand"] = subcommand;
  doc["options"] = options;
  std::ofstream out(dir / "config.json", std::ios::binary);
  out << doc.dump(2) << '\n';
  if (!out) throw Failure{EMSRISK_DATA, "cannot write " + (dir / "config.json").string()};
}

std::string p(const fs::path& dir, const char* name) { return (dir / name).string(); }

emsrisk_model_options model_options(const Options& o) {
  emsrisk_model_options m;
  emsrisk_model_options_default(&m);
  m.n_trees = o.trees;
  m.max_depth = o.depth;
  m.min_leaf = o.min_leaf;
  m.mtry = o.mtry;
  m.seed = o.forest_seed;
  m.sample_seed = o.sample_seed;
  m.threads = o.threads;
  m.ablation = o.ablation.c_str();
  m.eval_weeks = o.weeks;
  m.retrain_every = o.retrain_every;
  m.warmup_hours = o.warmup;
  m.negative_ratio = o.negative_ratio;
  return m;
}

ordered_json model_json(const Options& o) {
  return {{"trees", o.trees},       {"max_depth", o.depth},           {"min_leaf", o.min_leaf},
          {"mtry", o.mtry},         {"forest_seed", o.forest_seed},   {"sample_seed", o.sample_seed},
          {"ablation", o.ablation}, {"weeks", o.weeks},               {"retrain_every", o.retrain_every},
          {"warmup", o.warmup},     {"negative_ratio", o.negative_ratio}};
}

// ---- stages

void stage_generate(const Options& o, const fs::path& dir) {
  const std::string spec = o.paper_mimic ? "paper-mimic" : o.spec;
  Dataset ds;
  check(emsrisk_dataset_generate(spec.c_str(), o.seed, o.threads, &ds.p));
  check(emsrisk_dataset_save(ds.p, dir.string().c_str()));
  check(emsrisk_spec_write(spec.c_str(), o.seed, p(dir, "spec.json").c_str()));
}

void stage_decompose(const Options& o, const emsrisk_dataset* ds, const fs::path& dir) {
  emsrisk_filter f{o.nature, o.region.c_str(), o.from.c_str(), o.to.c_str()};
  check(emsrisk_decompose_write(ds, &f, o.window, p(dir, "decomposition.csv").c_str(),
                                p(dir, "seasonal_indices.csv").c_str()));
}

void stage_profiles(const Options& o, const emsrisk_dataset* ds, const fs::path& dir) {
  check(emsrisk_profiles_write(ds, o.month.empty() ? nullptr : o.month.c_str(), p(dir, "diurnal_profiles.csv").c_str(),
                               p(dir, "weekly_profiles.csv").c_str()));
}

void stage_stability(const Options& o, const emsrisk_dataset* ds, const fs::path& dir) {
  const auto mode = o.mode == "cross" ? EMSRISK_ACROSS_REGIONS : EMSRISK_WITHIN_REGION_ACROSS_TIME;
  check(emsrisk_stability_write(ds, mode, o.pairs, o.stability_seed, p(dir, "stability_scores.csv").c_str(),
                                p(dir, "stability_summary.csv").c_str()));
}

void stage_risk(const Options& o, const emsrisk_dataset* ds, const fs::path& dir) {
  RiskTable t;
  check(emsrisk_risk_table_build(ds, o.from.c_str(), o.to.c_str(), &t.p));
  check(emsrisk_risk_table_write(t.p, p(dir, "risk_table.csv").c_str()));
  check(emsrisk_sankey_write(t.p, o.threshold, p(dir, "sankey.json").c_str()));
  check(emsrisk_top_activities_write(t.p, o.top_k, p(dir, "top_activities.csv").c_str()));
  check(emsrisk_uar_write(ds, t.p, p(dir, "uar.csv").c_str()));
}

void stage_train(const Options& o, const emsrisk_dataset* ds, const fs::path& dir) {
  const auto m = model_options(o);
  Forest f;
  check(emsrisk_forest_train(ds, &m, &f.p));
  check(emsrisk_forest_save(f.p, p(dir, "forest.json").c_str()));
  check(emsrisk_forest_importances_write(f.p, p(dir, "importances.csv").c_str()));
}

void stage_evaluate(const Options& o, const emsrisk_dataset* ds, const fs::path& dir) {
  const auto m = model_options(o);
  emsrisk_metrics metrics;
  check(emsrisk_evaluate(ds, &m, p(dir, "report.json").c_str(), p(dir, "report.csv").c_str(), &metrics));
  std::cerr << "auc " << metrics.auc << ", accuracy " << metrics.accuracy << " over " << metrics.n_test
            << " test examples\n";
}

fs::path subdir(const fs::path& dir, const char* name) {
  const auto d = dir / name;
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw Failure{EMSRISK_DATA, "cannot create " + d.string()};
  return d;
}

void stage_report(const Options& o, const fs::path& dir) {
  std::string data = o.data;
  if (o.paper_mimic) {
    const auto d = subdir(dir, "data");
    stage_generate(o, d);
    data = d.string();
  }
  Dataset ds;
  load(ds, data);
  emsrisk_dataset_info info;
  check(emsrisk_dataset_info_get(ds.p, &info));

  stage_decompose(o, ds.p, subdir(dir, "decompose"));
  stage_profiles(o, ds.p, subdir(dir, "profiles"));
  Options cross = o;
  cross.mode = "cross";
  Options within = o;
  within.mode = "within";
  stage_stability(within, ds.p, subdir(dir, "stability_within"));
  stage_stability(cross, ds.p, subdir(dir, "stability_cross"));
  stage_risk(o, ds.p, subdir(dir, "risk"));
  stage_evaluate(o, ds.p, subdir(dir, "evaluate"));
  if (o.with_ablations)
    for (const char* a : {"drop:Demo", "drop:Calls", "drop:Fsq", "only:Demo", "only:Calls", "only:Fsq"}) {
      Options ab = o;
      ab.ablation = a;
      std::string name = std::string("evaluate_") + a;
      name[name.find(':')] = '_';
      stage_evaluate(ab, ds.p, subdir(dir, name.c_str()));
    }

  ordered_json summary;
  summary["calls"] = info.n_calls;
  summary["excluded_calls"] = info.n_excluded_calls;
  summary["regions"] = info.n_regions;
  summary["venues"] = info.n_venues;
  summary["checkins"] = info.n_checkins;
  summary["slot_positive_rate"] = info.slot_positive_rate;
  summary["first_call"] = info.first_call;
  summary["last_call"] = info.last_call;
  std::ofstream out(dir / "dataset_summary.json", std::ios::binary);
  out << summary.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal ambulance demand analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(emsrisk_version()));
  Options o;

  auto common = [&](CLI::App* s, bool needs_data) {
    s->add_option("--out,-o", o.out, std::string("output directory (default $") + kOutEnv + " or ./emsrisk-out)");
    s->add_option("--threads", o.threads, "worker threads; results do not depend on it")
        ->check(CLI::Range(1u, 256u));
    if (needs_data) s->add_option("--data,-d", o.data, "dataset directory");
  };
  auto model = [&](CLI::App* s) {
    s->add_option("--trees", o.trees, "trees per forest")->check(CLI::PositiveNumber);
    s->add_option("--max-depth", o.depth, "maximum tree depth")->check(CLI::PositiveNumber);
    s->add_option("--min-leaf", o.min_leaf, "minimum samples per leaf")->check(CLI::PositiveNumber);
    s->add_option("--mtry", o.mtry, "features tried per split (0 = sqrt)");
    s->add_option("--forest-seed", o.forest_seed, "forest seed");
    s->add_option("--sample-seed", o.sample_seed, "negative sampling seed");
    s->add_option("--ablation", o.ablation, "none, drop:<group> or only:<group> (Demo, Calls, Fsq)");
    s->add_option("--warmup", o.warmup, "hours of history before the first evaluated hour");
    s->add_option("--negative-ratio", o.negative_ratio, "negatives per positive");
    s->add_option("--retrain-every", o.retrain_every, "hours between retrains")->check(CLI::PositiveNumber);
  };
  auto evaluation = [&](CLI::App* s) {
    model(s);
    s->add_option("--weeks", o.weeks, "evaluation weeks at the end of the data")->check(CLI::PositiveNumber);
  };
  auto window = [&](CLI::App* s) {
    s->add_option("--from", o.from, "inclusive start, YYYY-MM-DD[THH]");
    s->add_option("--to", o.to, "exclusive end, YYYY-MM-DD[THH]");
  };

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  common(gen, false);
  gen->add_option("--spec", o.spec, "preset name or JSON spec file");
  gen->add_option("--seed", o.seed, "override the spec seed (0 keeps it)");
  gen->add_flag("--paper-mimic", o.paper_mimic, "use the paper-mimic preset");

  auto* dec = app.add_subcommand("decompose", "multiplicative trend/seasonality decomposition of daily counts");
  common(dec, true);
  window(dec);
  dec->add_option("--nature", o.nature, "dispatch code (default: all analysed)");
  dec->add_option("--region", o.region, "region id (default: all)");
  dec->add_option("--window", o.window, "moving-average window in days")->check(CLI::PositiveNumber);

  auto* prof = app.add_subcommand("profiles", "diurnal and weekly profiles per nature");
  common(prof, true);
  prof->add_option("--month", o.month, "YYYY-MM (default: every month)");

  auto* stab = app.add_subcommand("stability", "KL divergence of weekly profiles");
  common(stab, true);
  stab->add_option("--mode", o.mode, "within (same region, successive months) or cross (region pairs)")
      ->check(CLI::IsMember({"within", "cross"}));
  stab->add_option("--pairs", o.pairs, "region pairs per nature in cross mode")->check(CLI::PositiveNumber);
  stab->add_option("--seed", o.stability_seed, "pair sampling seed");

  auto* risk = app.add_subcommand("risk", "spatio-temporal attractiveness, Sankey export and UAR");
  common(risk, true);
  window(risk);
  risk->add_option("--threshold", o.threshold, "Sankey keeps st_risk strictly above this");
  risk->add_option("--top-k", o.top_k, "activities per nature and variant")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "fit a random forest on every labelled example");
  common(train, true);
  model(train);

  auto* eval = app.add_subcommand("evaluate", "walk-forward evaluation");
  common(eval, true);
  evaluation(eval);

  auto* rep = app.add_subcommand("report", "run every analysis stage");
  common(rep, true);
  evaluation(rep);
  rep->add_flag("--paper-mimic", o.paper_mimic, "generate the paper-mimic dataset first");
  rep->add_option("--seed", o.seed, "override the generator seed with --paper-mimic");
  rep->add_option("--threshold", o.threshold, "Sankey threshold");
  rep->add_option("--top-k", o.top_k, "activities per nature and variant")->check(CLI::PositiveNumber);
  rep->add_option("--pairs", o.pairs, "region pairs per nature for cross-region stability")
      ->check(CLI::PositiveNumber);
  rep->add_flag("--with-ablations", o.with_ablations, "also evaluate every feature-group ablation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : EMSRISK_USAGE;
  }

  try {
    ordered_json echo;
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "report" && o.paper_mimic && !o.data.empty()) usage("--paper-mimic and --data are exclusive");
    if (name == "report" && !o.paper_mimic && o.data.empty()) usage("report needs --data or --paper-mimic");
    if (name != "generate" && !(name == "report" && o.paper_mimic)) require_dataset_dir(o.data);
    const fs::path dir = out_dir(o);

    Dataset ds;
    if (name != "generate" && name != "report") load(ds, o.data);

    if (name == "generate") {
      echo = {{"spec", o.paper_mimic ? "paper-mimic" : o.spec}, {"seed", o.seed}};
      stage_generate(o, dir);
    } else if (name == "decompose") {
      echo = {{"data", o.data}, {"nature", o.nature}, {"region", o.region},
              {"from", o.from}, {"to", o.to},         {"window", o.window}};
      stage_decompose(o, ds.p, dir);
    } else if (name == "profiles") {
      echo = {{"data", o.data}, {"month", o.month}};
      stage_profiles(o, ds.p, dir);
    } else if (name == "stability") {
      echo = {{"data", o.data}, {"mode", o.mode}, {"pairs", o.pairs}, {"seed", o.stability_seed}};
      stage_stability(o, ds.p, dir);
    } else if (name == "risk") {
      echo = {{"data", o.data}, {"from", o.from}, {"to", o.to}, {"threshold", o.threshold}, {"top_k", o.top_k}};
      stage_risk(o, ds.p, dir);
    } else if (name == "train") {
      echo = {{"data", o.data}, {"model", model_json(o)}};
      stage_train(o, ds.p, dir);
    } else if (name == "evaluate") {
      echo = {{"data", o.data}, {"model", model_json(o)}};
      stage_evaluate(o, ds.p, dir);
    } else if (name == "report") {
      echo = {{"data", o.paper_mimic ? "paper-mimic" : o.data},
              {"seed", o.seed},
              {"threshold", o.threshold},
              {"top_k", o.top_k},
              {"pairs", o.pairs},
              {"with_ablations", o.with_ablations},
              {"model", model_json(o)}};
      stage_report(o, dir);
    }
    write_config(dir, name, echo);
    return 0;
  } catch (const Failure& f) {
    std::cerr << "emsrisk: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "emsrisk: internal error: " << e.what() << '\n';
    return EMSRISK_INTERNAL;
  }
}
