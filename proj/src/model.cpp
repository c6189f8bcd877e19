#include "emsrisk/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <utility>

#include "emsrisk/error.hpp"

namespace emsrisk {
namespace {

// Standard emergency dispatch protocol chief complaints.
constexpr std::array<std::string_view, 35> kLabels = {
    "Abdominal Pain",
    "Allergies",
    "Animal Bites",
    "Assault",
    "Back Pain",
    "Breathing Problems",
    "Burns/Explosion",
    "Carbon Monoxide/Inhalation",
    "Cardiac/Respiratory Arrest",
    "Chest Pain",
    "Choking",
    "Convulsions/Seizures",
    "Diabetic Problems",
    "Drowning",
    "Electrocution",
    "Eye Problems",
    "Falls",
    "Headache",
    "Heart Problems",
    "Heat/Cold Exposure",
    "Haemorrhage/Lacerations",
    "Inaccessible Incident/Entrapment",
    "Overdose/Poisoning",
    "Pregnancy/Childbirth",
    "Psychiatric/Suicide Attempt",
    "Sick Person",
    "Stab/Gunshot",
    "Stroke",
    "Traffic Incidents",
    "Traumatic Injuries",
    "Unconscious/Fainting",
    "Unknown Problem",
    "Interfacility Transfer",
    "Automatic Crash Notification",
    "Healthcare Practitioner Referral",
};

}  // namespace

std::string_view NatureCode::label() const {
  if (code >= 1 && code <= static_cast<int>(kLabels.size())) return kLabels[code - 1];
  return "Other";
}

std::optional<NatureCode> nature_from_label(std::string_view label) {
  for (std::size_t i = 0; i < kLabels.size(); ++i)
    if (kLabels[i] == label) return NatureCode{static_cast<int>(i) + 1};
  return std::nullopt;
}

double TemporalProfile::total() const {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

bool TemporalProfile::all_zero() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

TemporalProfile l1_normalize(const TemporalProfile& profile) {
  for (std::size_t i = 0; i < profile.values.size(); ++i)
    if (!(profile.values[i] >= 0.0))
      throw InvariantError("profile bin " + std::to_string(i) + " is negative");
  TemporalProfile out{profile.values, Normalization::L1};
  double sum = profile.total();
  if (sum > 0.0)
    for (double& v : out.values) v /= sum;
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace emsrisk
