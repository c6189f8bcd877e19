#include "emsrisk/eval.hpp"

#include <algorithm>
#include <json.hpp>
#include <numeric>
#include <set>

#include "emsrisk/error.hpp"
#include "emsrisk/log.hpp"
#include "emsrisk/risk.hpp"
#include "text_io.hpp"

namespace emsrisk {

PrecisionRecall precision_recall(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) throw UsageError("precision_recall: length mismatch");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] > 0;
    tp += predicted && actual;
    fp += predicted && !actual;
    fn += !predicted && actual;
  }
  if (tp + fn == 0) throw UsageError("precision_recall: no positive labels");
  PrecisionRecall pr;
  pr.recall = tp / (tp + fn);
  pr.precision_defined = tp + fp > 0;
  pr.precision = pr.precision_defined ? tp / (tp + fp) : 0.0;
  return pr;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw UsageError("auc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0, n_pos = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] > 0) {
        rank_sum += midrank;
        n_pos += 1;
      }
    i = j;
  }
  const double n_neg = static_cast<double>(scores.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UsageError("auc needs both classes");
  return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
}

AblationSpec AblationSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw UsageError("ablation must look like drop:<group> or only:<group>");
  const auto mode = text.substr(0, colon);
  AblationSpec spec;
  if (mode == "drop")
    spec.mode = Mode::DropGroup;
  else if (mode == "only")
    spec.mode = Mode::OnlyGroup;
  else
    throw UsageError("ablation mode must be 'drop' or 'only', got '" + std::string(mode) + "'");
  spec.group = parse_group(text.substr(colon + 1));
  return spec;
}

std::string AblationSpec::label() const {
  return std::string(mode == Mode::DropGroup ? "drop:" : "only:") + std::string(group_name(group));
}

std::vector<std::size_t> AblationSpec::kept_features() const {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < kFeatureCount; ++f)
    if ((feature_group(f) == group) == (mode == Mode::OnlyGroup)) out.push_back(f);
  return out;
}

std::vector<std::size_t> kept_features(const std::optional<AblationSpec>& ablation) {
  if (ablation) return ablation->kept_features();
  std::vector<std::size_t> all(kFeatureCount);
  std::iota(all.begin(), all.end(), 0);
  return all;
}

HourlyAccuracy hourly_accuracy(std::span<const ScoredExample> scored, double threshold) {
  std::array<double, kHoursPerWeek> correct{}, total{};
  for (const auto& s : scored) {
    if (s.hour_of_week < 0 || s.hour_of_week >= kHoursPerWeek) throw UsageError("hour_of_week out of range");
    const auto h = static_cast<std::size_t>(s.hour_of_week);
    total[h] += 1;
    correct[h] += (s.score >= threshold) == (s.label > 0);
  }
  HourlyAccuracy out;
  for (std::size_t h = 0; h < out.size(); ++h)
    if (total[h] > 0) out[h] = correct[h] / total[h];
  return out;
}

double slot_positive_rate(const Dataset& ds) {
  std::set<std::pair<std::string, std::int64_t>> slots;
  std::optional<std::int64_t> first, last;
  for (const auto& c : ds.calls) {
    if (c.excluded()) continue;
    slots.emplace(c.region_id, c.timestamp.hours);
    const auto d = day_index(c.timestamp);
    first = first ? std::min(*first, d) : d;
    last = last ? std::max(*last, d) : d;
  }
  if (!first || ds.regions.empty()) return 0.0;
  const double hours = static_cast<double>(*last - *first + 1) * 24.0;
  return static_cast<double>(slots.size()) / (hours * static_cast<double>(ds.regions.size()));
}

WalkForwardConfig default_walk_forward(const Dataset& ds, std::size_t eval_weeks, std::int64_t warmup_hours) {
  auto last = std::find_if(ds.calls.rbegin(), ds.calls.rend(), [](const CallEvent& c) { return !c.excluded(); });
  if (last == ds.calls.rend()) throw DataError("dataset has no calls");
  WalkForwardConfig cfg;
  cfg.warmup_hours = warmup_hours;
  cfg.end = HourStamp{(day_index(last->timestamp) + 1) * 24};
  cfg.start = cfg.end - static_cast<std::int64_t>(eval_weeks) * kHoursPerWeek;
  auto first = std::find_if(ds.calls.begin(), ds.calls.end(), [](const CallEvent& c) { return !c.excluded(); });
  if (cfg.start < first->timestamp + 1 + cfg.warmup_hours)
    throw DataError("dataset is too short for a " + std::to_string(eval_weeks) +
                    "-week evaluation window after the warm-up");
  return cfg;
}

std::map<std::string, double> uar_before(const Dataset& ds, HourStamp cutoff) {
  RiskOptions opts;
  opts.to = cutoff;
  return urban_activity_risk_all(ds, build_risk_table(ds, opts));
}

namespace {

TrainingData project(std::span<const LabeledExample> examples, const std::vector<std::size_t>& kept) {
  std::vector<std::string> names;
  for (std::size_t f : kept) names.emplace_back(kFeatureNames[f]);
  TrainingData data(kept.size(), std::move(names));
  std::vector<double> row(kept.size());
  for (const auto& e : examples) {
    for (std::size_t k = 0; k < kept.size(); ++k) row[k] = e.features[kept[k]];
    data.add(row, e.label);
  }
  return data;
}

}  // namespace

MetricsReport run_walk_forward(const Dataset& ds, const EvalConfig& config) {
  const auto kept = kept_features(config.ablation);
  config.forest.validate(kept.size());
  WalkForward wf(ds, config.walk, uar_before(ds, config.walk.start));

  MetricsReport report;
  report.ablation = config.ablation ? config.ablation->label() : "none";
  for (std::size_t f : kept) report.feature_names.emplace_back(kFeatureNames[f]);
  report.importances.assign(kept.size(), 0.0);
  report.slot_positive_rate = slot_positive_rate(ds);

  const auto steps = wf.steps();
  std::optional<Forest> forest;
  std::optional<HourStamp> trained_for;
  std::vector<double> row(kept.size());
  for (const auto& step : steps) {
    if (step.test.empty()) {
      ++report.skipped_hours;
      continue;
    }
    if (!trained_for || *trained_for != step.train_cutoff) {
      if (step.train.empty()) throw DataError("no training examples before " + format_timestamp(step.train_cutoff));
      auto data = project(step.train, kept);
      forest = train_forest(data, config.forest);
      trained_for = step.train_cutoff;
      ++report.retrains;
      const auto imp = forest->feature_importances();
      for (std::size_t k = 0; k < imp.size(); ++k) report.importances[k] += imp[k];
    }
    ++report.evaluated_hours;
    for (const auto& e : step.test) {
      for (std::size_t k = 0; k < kept.size(); ++k) row[k] = e.features[kept[k]];
      report.scored.push_back({hour_of_week(e.t_prime), forest->predict_proba(row), e.label});
    }
  }
  if (report.retrains > 0)
    for (double& v : report.importances) v /= static_cast<double>(report.retrains);

  std::vector<double> scores;
  std::vector<int> labels;
  double correct = 0;
  for (const auto& s : report.scored) {
    scores.push_back(s.score);
    labels.push_back(s.label);
    correct += (s.score >= kDecisionThreshold) == (s.label > 0);
    ++report.hourly_count[static_cast<std::size_t>(s.hour_of_week)];
  }
  report.n_test = scores.size();
  report.n_positive = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (report.n_positive == 0 || report.n_positive == report.n_test)
    throw DataError("evaluation window produced no balanced test examples");
  const auto pr = precision_recall(scores, labels);
  report.precision = pr.precision;
  report.recall = pr.recall;
  report.precision_defined = pr.precision_defined;
  report.auc = auc(scores, labels);
  report.accuracy = correct / static_cast<double>(report.n_test);
  report.hourly = hourly_accuracy(report.scored);
  return report;
}

Forest train_model(const Dataset& ds, const EvalConfig& config) {
  const auto kept = kept_features(config.ablation);
  config.forest.validate(kept.size());
  WalkForward wf(ds, config.walk, uar_before(ds, config.walk.end));
  if (wf.examples().empty()) throw DataError("no labelled examples to train on");
  return train_forest(project(wf.examples(), kept), config.forest);
}

void write_report_json(const std::string& path, const MetricsReport& r) {
  nlohmann::ordered_json doc;
  doc["ablation"] = r.ablation;
  doc["precision"] = r.precision;
  doc["precision_defined"] = r.precision_defined;
  doc["recall"] = r.recall;
  doc["auc"] = r.auc;
  doc["accuracy"] = r.accuracy;
  doc["n_test"] = r.n_test;
  doc["n_positive"] = r.n_positive;
  doc["evaluated_hours"] = r.evaluated_hours;
  doc["skipped_hours"] = r.skipped_hours;
  doc["retrains"] = r.retrains;
  doc["slot_positive_rate"] = r.slot_positive_rate;
  nlohmann::ordered_json hourly = nlohmann::ordered_json::array();
  for (const auto& h : r.hourly) hourly.push_back(h ? nlohmann::ordered_json(*h) : nlohmann::ordered_json());
  doc["hourly_accuracy"] = std::move(hourly);
  nlohmann::ordered_json imp = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < r.feature_names.size(); ++k) imp[r.feature_names[k]] = r.importances[k];
  doc["feature_importances"] = std::move(imp);
  auto out = detail::open_output(path);
  out << doc.dump(2) << '\n';
  detail::finish_output(out, path);
}

void write_report_csv(const std::string& path, const MetricsReport& r) {
  auto out = detail::open_output(path);
  out << "hour_of_week,accuracy,n\n";
  for (std::size_t h = 0; h < r.hourly.size(); ++h)
    out << h << ',' << (r.hourly[h] ? detail::fmt(*r.hourly[h]) : std::string()) << ',' << r.hourly_count[h]
        << '\n';
  detail::finish_output(out, path);
}

}  // namespace emsrisk
