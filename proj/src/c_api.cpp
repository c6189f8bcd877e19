#include "emsrisk/emsrisk.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>

#include "emsrisk/error.hpp"
#include "emsrisk/eval.hpp"
#include "emsrisk/forest.hpp"
#include "emsrisk/ingest.hpp"
#include "emsrisk/log.hpp"
#include "emsrisk/risk.hpp"
#include "emsrisk/synth.hpp"
#include "emsrisk/timeseries.hpp"
#include "text_io.hpp"

struct emsrisk_dataset {
  emsrisk::Dataset data;
};
struct emsrisk_risk_table {
  emsrisk::RiskTable table;
};
struct emsrisk_forest {
  emsrisk::Forest forest;
};

namespace {

thread_local std::string g_last_error;

template <class F>
emsrisk_status guard(F&& body) {
  try {
    g_last_error.clear();
    body();
    return EMSRISK_OK;
  } catch (const emsrisk::Error& e) {
    g_last_error = e.what();
    return static_cast<emsrisk_status>(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
  } catch (...) {
    g_last_error = "internal error";
  }
  return EMSRISK_INTERNAL;
}

template <class T>
T& need(T* p, const char* what) {
  if (!p) throw emsrisk::UsageError(std::string(what) + " must not be NULL");
  return *p;
}

std::string path_arg(const char* p, const char* what) {
  if (!p || !*p) throw emsrisk::UsageError(std::string(what) + " path must be given");
  return p;
}

std::optional<emsrisk::HourStamp> opt_time(const char* text) {
  if (!text || !*text) return std::nullopt;
  return emsrisk::parse_timestamp(text);
}

emsrisk::EvalConfig eval_config(const emsrisk_model_options& o) {
  emsrisk::EvalConfig cfg;
  cfg.forest.n_trees = o.n_trees;
  cfg.forest.max_depth = o.max_depth;
  cfg.forest.min_leaf = o.min_leaf;
  cfg.forest.mtry = o.mtry;
  cfg.forest.seed = o.seed;
  cfg.forest.threads = std::max(1u, o.threads);
  cfg.walk.retrain_every = o.retrain_every;
  cfg.walk.warmup_hours = o.warmup_hours;
  cfg.walk.negative_ratio = o.negative_ratio;
  cfg.walk.seed = o.sample_seed;
  if (o.ablation && *o.ablation && std::strcmp(o.ablation, "none") != 0)
    cfg.ablation = emsrisk::AblationSpec::parse(o.ablation);
  return cfg;
}

void copy_stamp(char (&dst)[20], const std::string& s) {
  std::memset(dst, 0, sizeof dst);
  std::memcpy(dst, s.data(), std::min(s.size(), sizeof dst - 1));
}

}  // namespace

extern "C" {

const char* emsrisk_version(void) { return "0.3.0"; }
const char* emsrisk_last_error(void) { return g_last_error.c_str(); }
size_t emsrisk_warning_count(void) { return emsrisk::log::warning_count(); }
void emsrisk_reset_warning_count(void) { emsrisk::log::reset_warning_count(); }

emsrisk_status emsrisk_dataset_generate(const char* spec, uint64_t seed, unsigned threads, emsrisk_dataset** out) {
  return guard([&] {
    need(out, "out");
    auto s = emsrisk::load_spec(spec ? spec : "default");
    if (seed != 0) s.seed = seed;
    auto* ds = new emsrisk_dataset{emsrisk::generate(s, std::max(1u, threads))};
    *out = ds;
  });
}

emsrisk_status emsrisk_dataset_load(const char* dir, emsrisk_dataset** out) {
  return guard([&] {
    need(out, "out");
    *out = new emsrisk_dataset{emsrisk::load_dataset(path_arg(dir, "dataset"))};
  });
}

emsrisk_status emsrisk_dataset_save(const emsrisk_dataset* ds, const char* dir) {
  return guard([&] { emsrisk::save_dataset(need(ds, "dataset").data, path_arg(dir, "dataset")); });
}

void emsrisk_dataset_free(emsrisk_dataset* ds) { delete ds; }

emsrisk_status emsrisk_dataset_info_get(const emsrisk_dataset* ds, emsrisk_dataset_info* out) {
  return guard([&] {
    const auto& d = need(ds, "dataset").data;
    auto& info = need(out, "out");
    info = {};
    info.n_calls = d.calls.size();
    info.n_excluded_calls = static_cast<size_t>(
        std::count_if(d.calls.begin(), d.calls.end(), [](const auto& c) { return c.excluded(); }));
    info.n_regions = d.regions.size();
    info.n_venues = d.venues.size();
    info.n_checkins = d.checkins.size();
    info.slot_positive_rate = emsrisk::slot_positive_rate(d);
    if (!d.calls.empty()) {
      copy_stamp(info.first_call, emsrisk::format_timestamp(d.calls.front().timestamp));
      copy_stamp(info.last_call, emsrisk::format_timestamp(d.calls.back().timestamp));
    }
  });
}

emsrisk_status emsrisk_spec_write(const char* spec, uint64_t seed, const char* path) {
  return guard([&] {
    auto s = emsrisk::load_spec(spec ? spec : "default");
    if (seed != 0) s.seed = seed;
    const auto p = path_arg(path, "spec");
    auto out = emsrisk::detail::open_output(p);
    out << emsrisk::spec_to_json(s) << '\n';
    emsrisk::detail::finish_output(out, p);
  });
}

emsrisk_status emsrisk_decompose_write(const emsrisk_dataset* ds, const emsrisk_filter* filter, int window,
                                       const char* series_path, const char* indices_path) {
  return guard([&] {
    const auto& d = need(ds, "dataset").data;
    if (window < 1) throw emsrisk::UsageError("window must be at least one day");
    emsrisk::CallFilter f;
    if (filter) {
      if (filter->nature != 0) f.nature = emsrisk::NatureCode{filter->nature};
      if (filter->region_id && *filter->region_id) {
        if (!d.regions.count(filter->region_id))
          throw emsrisk::UsageError(std::string("unknown region '") + filter->region_id + "'");
        f.region_id = filter->region_id;
      }
      f.from = opt_time(filter->from);
      f.to = opt_time(filter->to);
    }
    std::vector<emsrisk::CallEvent> calls;
    for (const auto& c : d.calls)
      if (f.matches(c)) calls.push_back(c);
    const auto series = emsrisk::aggregate_daily(calls);
    if (series.values.size() < static_cast<std::size_t>(window))
      throw emsrisk::DataError("series spans " + std::to_string(series.values.size()) +
                               " days, shorter than the " + std::to_string(window) + "-day window");
    const auto dec = emsrisk::decompose(series, static_cast<std::size_t>(window));
    emsrisk::write_decomposition_csv(path_arg(series_path, "series"), dec);
    if (indices_path && *indices_path) {
      auto out = emsrisk::detail::open_output(indices_path);
      out << "slot,index\n";
      for (std::size_t s = 0; s < dec.seasonality.size(); ++s)
        out << s << ',' << (dec.seasonality[s] ? emsrisk::detail::fmt(*dec.seasonality[s]) : std::string()) << '\n';
      emsrisk::detail::finish_output(out, indices_path);
    }
  });
}

emsrisk_status emsrisk_profiles_write(const emsrisk_dataset* ds, const char* month, const char* diurnal_path,
                                      const char* weekly_path) {
  return guard([&] {
    using namespace emsrisk;
    const auto& d = need(ds, "dataset").data;
    const auto natures = natures_present(d.calls);
    if (natures.empty()) throw DataError("dataset has no analysed calls");

    std::vector<MonthWindow> months;
    if (month && *month) {
      const std::string m(month);
      if (m.size() != 7 || m[4] != '-') throw UsageError("month must look like YYYY-MM");
      const auto t = parse_timestamp(m + "-01");
      months.push_back(MonthWindow::containing(t));
    } else {
      auto first = std::find_if(d.calls.begin(), d.calls.end(), [](const auto& c) { return !c.excluded(); });
      auto last = std::find_if(d.calls.rbegin(), d.calls.rend(), [](const auto& c) { return !c.excluded(); });
      for (auto w = MonthWindow::containing(first->timestamp); w <= MonthWindow::containing(last->timestamp);
           w = w.next())
        months.push_back(w);
    }

    if (diurnal_path && *diurnal_path) {
      auto out = detail::open_output(diurnal_path);
      out << "nature,month,hour,share\n";
      for (const auto& w : months) {
        char label[8];
        std::snprintf(label, sizeof label, "%04d-%02u", w.year, w.month);
        for (const auto& n : natures) {
          // Months without calls for a nature are simply absent.
          if (!month && hour_of_day_counts(d.calls, CallFilter{n, std::nullopt, w.begin(), w.end()}).all_zero())
            continue;
          const auto p = diurnal_profile(d.calls, n, w);
          for (std::size_t h = 0; h < p.size(); ++h)
            out << n.code << ',' << label << ',' << h << ',' << detail::fmt(p.values[h]) << '\n';
        }
      }
      detail::finish_output(out, diurnal_path);
    }
    if (weekly_path && *weekly_path) {
      auto out = detail::open_output(weekly_path);
      out << "nature,hour_of_week,share\n";
      for (const auto& n : natures) {
        const auto p = weekly_profile(d.calls, n);
        for (std::size_t h = 0; h < p.size(); ++h)
          out << n.code << ',' << h << ',' << detail::fmt(p.values[h]) << '\n';
      }
      detail::finish_output(out, weekly_path);
    }
  });
}

emsrisk_status emsrisk_stability_write(const emsrisk_dataset* ds, emsrisk_stability_mode mode,
                                       size_t pairs_per_nature, uint64_t seed, const char* scores_path,
                                       const char* summary_path) {
  return guard([&] {
    using namespace emsrisk;
    const auto& d = need(ds, "dataset").data;
    StabilityOptions o;
    if (mode == EMSRISK_WITHIN_REGION_ACROSS_TIME)
      o.mode = StabilityMode::WithinRegion;
    else if (mode == EMSRISK_ACROSS_REGIONS)
      o.mode = StabilityMode::CrossRegion;
    else
      throw UsageError("unknown stability mode");
    if (pairs_per_nature == 0) throw UsageError("pairs per nature must be positive");
    o.pairs_per_nature = pairs_per_nature;
    o.seed = seed;
    const auto natures = natures_present(d.calls);
    const auto report = profile_stability_report(d.calls, natures, o);
    write_stability_csv(path_arg(scores_path, "scores"), path_arg(summary_path, "summary"), report);
  });
}

emsrisk_status emsrisk_risk_table_build(const emsrisk_dataset* ds, const char* from, const char* to,
                                        emsrisk_risk_table** out) {
  return guard([&] {
    need(out, "out");
    emsrisk::RiskOptions o{opt_time(from), opt_time(to)};
    *out = new emsrisk_risk_table{emsrisk::build_risk_table(need(ds, "dataset").data, o)};
  });
}

void emsrisk_risk_table_free(emsrisk_risk_table* table) { delete table; }

size_t emsrisk_risk_table_size(const emsrisk_risk_table* table) { return table ? table->table.entries().size() : 0; }

emsrisk_status emsrisk_risk_table_entry(const emsrisk_risk_table* table, size_t index, emsrisk_risk_entry* out) {
  return guard([&] {
    const auto& entries = need(table, "table").table.entries();
    need(out, "out");
    if (index >= entries.size()) throw emsrisk::UsageError("entry index out of range");
    const auto& e = entries[index];
    *out = emsrisk_risk_entry{e.nature.code, e.category.c_str(), e.sa, e.ta, e.st_risk};
  });
}

emsrisk_status emsrisk_risk_table_write(const emsrisk_risk_table* table, const char* path) {
  return guard([&] { emsrisk::write_risk_table_csv(path_arg(path, "risk table"), need(table, "table").table); });
}

emsrisk_status emsrisk_sankey_write(const emsrisk_risk_table* table, double threshold, const char* path) {
  return guard([&] {
    emsrisk::write_sankey_json(path_arg(path, "sankey"), emsrisk::sankey_export(need(table, "table").table, threshold));
  });
}

emsrisk_status emsrisk_top_activities_write(const emsrisk_risk_table* table, size_t k, const char* path) {
  return guard([&] {
    if (k == 0) throw emsrisk::UsageError("k must be positive");
    emsrisk::write_top_activities_csv(path_arg(path, "top activities"), need(table, "table").table, k);
  });
}

emsrisk_status emsrisk_uar_write(const emsrisk_dataset* ds, const emsrisk_risk_table* table, const char* path) {
  return guard([&] {
    emsrisk::write_uar_csv(path_arg(path, "uar"),
                           emsrisk::urban_activity_risk_all(need(ds, "dataset").data, need(table, "table").table));
  });
}

void emsrisk_model_options_default(emsrisk_model_options* out) {
  if (!out) return;
  const emsrisk::ForestConfig f;
  const emsrisk::WalkForwardConfig w;
  *out = emsrisk_model_options{};
  out->n_trees = f.n_trees;
  out->max_depth = f.max_depth;
  out->min_leaf = f.min_leaf;
  out->mtry = f.mtry;
  out->seed = f.seed;
  out->sample_seed = w.seed;
  out->threads = 1;
  out->ablation = nullptr;
  out->eval_weeks = 12;
  out->retrain_every = w.retrain_every;
  out->warmup_hours = w.warmup_hours;
  out->negative_ratio = w.negative_ratio;
}

emsrisk_status emsrisk_forest_train(const emsrisk_dataset* ds, const emsrisk_model_options* options,
                                    emsrisk_forest** out) {
  return guard([&] {
    using namespace emsrisk;
    const auto& d = need(ds, "dataset").data;
    need(out, "out");
    auto cfg = eval_config(need(options, "options"));
    auto last = std::find_if(d.calls.rbegin(), d.calls.rend(), [](const auto& c) { return !c.excluded(); });
    if (last == d.calls.rend()) throw DataError("dataset has no analysed calls");
    cfg.walk.end = HourStamp{(day_index(last->timestamp) + 1) * kHoursPerDay};
    cfg.walk.start = cfg.walk.end - 1;
    cfg.walk.warmup_hours = 0;
    *out = new emsrisk_forest{train_model(d, cfg)};
  });
}

emsrisk_status emsrisk_forest_save(const emsrisk_forest* forest, const char* path) {
  return guard([&] {
    const auto p = path_arg(path, "forest");
    auto out = emsrisk::detail::open_output(p);
    out << need(forest, "forest").forest.to_json() << '\n';
    emsrisk::detail::finish_output(out, p);
  });
}

emsrisk_status emsrisk_forest_load(const char* path, emsrisk_forest** out) {
  return guard([&] {
    need(out, "out");
    const auto p = path_arg(path, "forest");
    std::ifstream in(p, std::ios::binary);
    if (!in) throw emsrisk::DataError("cannot open '" + p + "'");
    std::ostringstream text;
    text << in.rdbuf();
    *out = new emsrisk_forest{emsrisk::Forest::from_json(text.str())};
  });
}

emsrisk_status emsrisk_forest_importances_write(const emsrisk_forest* forest, const char* path) {
  return guard([&] {
    const auto& f = need(forest, "forest").forest;
    const auto imp = f.feature_importances();
    const auto p = path_arg(path, "importances");
    auto out = emsrisk::detail::open_output(p);
    out << "feature,importance\n";
    for (std::size_t k = 0; k < imp.size(); ++k)
      out << f.feature_names()[k] << ',' << emsrisk::detail::fmt(imp[k]) << '\n';
    emsrisk::detail::finish_output(out, p);
  });
}

void emsrisk_forest_free(emsrisk_forest* forest) { delete forest; }

emsrisk_status emsrisk_evaluate(const emsrisk_dataset* ds, const emsrisk_model_options* options,
                                const char* report_json, const char* report_csv, emsrisk_metrics* metrics) {
  return guard([&] {
    using namespace emsrisk;
    const auto& d = need(ds, "dataset").data;
    const auto& o = need(options, "options");
    if (o.eval_weeks == 0) throw UsageError("eval_weeks must be positive");
    auto cfg = eval_config(o);
    const auto window = default_walk_forward(d, o.eval_weeks, o.warmup_hours);
    cfg.walk.start = window.start;
    cfg.walk.end = window.end;
    const auto report = run_walk_forward(d, cfg);
    if (report_json && *report_json) write_report_json(report_json, report);
    if (report_csv && *report_csv) write_report_csv(report_csv, report);
    if (metrics)
      *metrics = emsrisk_metrics{report.precision, report.precision_defined ? 1 : 0, report.recall,
                                 report.auc,       report.accuracy,
                                 report.n_test,    report.evaluated_hours,
                                 report.retrains};
  });
}

}  // extern "C"
