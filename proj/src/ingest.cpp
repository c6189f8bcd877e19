#include "emsrisk/ingest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "emsrisk/error.hpp"
#include "emsrisk/geometry.hpp"
#include "emsrisk/log.hpp"
#include "text_io.hpp"

namespace emsrisk {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using detail::split_csv;

namespace {

// Iterates data rows after checking the header. `on_row` returns an error
// message for a malformed row, or an empty string.
template <class OnRow>
std::vector<ParseIssue> read_csv(const std::string& path, std::string_view header, ParseMode mode,
                                 OnRow&& on_row) {
  auto in = detail::open_input(path);
  std::string line;
  std::vector<ParseIssue> issues;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != header)
    throw ParseError(path, 1, "expected header '" + std::string(header) + "', got '" + line + "'");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::string err = on_row(split_csv(line));
    if (err.empty()) continue;
    if (mode == ParseMode::Strict) throw ParseError(path, lineno, err);
    issues.push_back({lineno, err});
  }
  return issues;
}

std::string expect_fields(const std::vector<std::string>& f, std::size_t n) {
  if (f.size() != n)
    return "expected " + std::to_string(n) + " fields, got " + std::to_string(f.size());
  return {};
}

Ring parse_ring(const json& coords, const std::string& where, std::size_t& closed) {
  if (!coords.is_array()) throw DataError(where + ": ring is not an array");
  Ring ring;
  for (const auto& c : coords) {
    if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number())
      throw DataError(where + ": bad coordinate");
    ring.push_back(Point{c[0].get<double>(), c[1].get<double>()});
  }
  if (!ring.empty() && !(ring.front() == ring.back())) {
    ring.push_back(ring.front());
    ++closed;
    log::warn(where + ": ring was not closed; closing it");
  }
  return ring;
}

double number_property(const json& props, const char* name, const std::string& where) {
  auto it = props.find(name);
  if (it == props.end() || it->is_null())
    throw DataError(where + ": missing property '" + name + "'");
  if (!it->is_number()) throw DataError(where + ": property '" + std::string(name) + "' is not a number");
  return it->get<double>();
}

}  // namespace

CallParse parse_calls(const std::string& path, ParseMode mode) {
  CallParse out;
  out.issues = read_csv(path, "timestamp,dispatch_code,region_id", mode,
                        [&](const std::vector<std::string>& f) -> std::string {
                          if (auto e = expect_fields(f, 3); !e.empty()) return e;
                          CallEvent call;
                          try {
                            call.timestamp = parse_timestamp(f[0]);
                          } catch (const Error& e) {
                            return e.what();
                          }
                          auto code = detail::parse_int(f[1]);
                          if (!code || *code < 1) return "bad dispatch code '" + f[1] + "'";
                          if (f[2].empty()) return "empty region_id";
                          call.nature = NatureCode{static_cast<int>(*code)};
                          call.region_id = f[2];
                          out.calls.push_back(std::move(call));
                          return {};
                        });
  std::stable_sort(out.calls.begin(), out.calls.end(),
                   [](const CallEvent& a, const CallEvent& b) { return a.timestamp < b.timestamp; });
  return out;
}

RegionParse parse_regions(const std::string& path) {
  auto in = detail::open_input(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array())
    throw DataError(path + ": not a GeoJSON FeatureCollection");

  RegionParse out;
  std::size_t index = 0;
  for (const auto& feature : doc["features"]) {
    std::string where = path + ": feature " + std::to_string(index++);
    const json props = feature.value("properties", json::object());
    auto id_it = props.find("region_id");
    if (id_it == props.end() || id_it->is_null())
      throw DataError(where + ": missing property 'region_id'");
    Region region;
    region.region_id = id_it->is_string() ? id_it->get<std::string>() : id_it->dump();
    where += " (" + region.region_id + ")";
    region.res_pop = number_property(props, "res_pop", where);
    region.day_pop = number_property(props, "day_pop", where);
    region.imd = number_property(props, "imd", where);
    if (!(region.res_pop > 0)) throw DataError(where + ": res_pop must be positive");
    if (!(region.day_pop >= 0)) throw DataError(where + ": day_pop must be non-negative");
    if (!(region.imd >= 0)) throw DataError(where + ": imd must be non-negative");

    const json geom = feature.value("geometry", json());
    const std::string type = geom.is_object() ? geom.value("type", "") : "";
    if (type == "Polygon") {
      for (const auto& ring : geom.at("coordinates"))
        region.boundary.push_back(parse_ring(ring, where, out.rings_closed));
    } else if (type == "MultiPolygon") {
      for (const auto& poly : geom.at("coordinates"))
        for (const auto& ring : poly) region.boundary.push_back(parse_ring(ring, where, out.rings_closed));
    } else {
      throw DataError(where + ": geometry must be Polygon or MultiPolygon");
    }
    try {
      validate_polygon(region.boundary);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    std::string id = region.region_id;
    if (!out.regions.emplace(id, std::move(region)).second)
      throw DataError(where + ": duplicate region_id");
  }
  return out;
}

VenueParse parse_venues(const std::string& path, ParseMode mode) {
  VenueParse out;
  out.issues = read_csv(path, "venue_id,category,lon,lat", mode,
                        [&](const std::vector<std::string>& f) -> std::string {
                          if (auto e = expect_fields(f, 4); !e.empty()) return e;
                          if (f[0].empty()) return "empty venue_id";
                          if (f[1].empty()) return "empty category";
                          auto lon = detail::parse_double(f[2]);
                          auto lat = detail::parse_double(f[3]);
                          if (!lon || !lat) return "bad coordinates";
                          Venue v{f[0], f[1], Point{*lon, *lat}, std::nullopt};
                          if (!out.venues.emplace(f[0], std::move(v)).second)
                            return "duplicate venue_id '" + f[0] + "'";
                          return {};
                        });
  return out;
}

CheckInParse parse_checkins(const std::string& path, const std::map<std::string, Venue>& venues,
                            ParseMode mode) {
  CheckInParse out;
  out.issues = read_csv(path, "venue_id,timestamp", mode,
                        [&](const std::vector<std::string>& f) -> std::string {
                          if (auto e = expect_fields(f, 2); !e.empty()) return e;
                          HourStamp t;
                          try {
                            t = parse_timestamp(f[1]);
                          } catch (const Error& e) {
                            return e.what();
                          }
                          if (!venues.count(f[0])) {
                            ++out.unknown_venue;
                            return {};
                          }
                          out.checkins.push_back(CheckIn{f[0], t});
                          return {};
                        });
  if (out.unknown_venue > 0)
    log::warn(path + ": skipped " + std::to_string(out.unknown_venue) +
              " check-ins referencing unknown venues");
  std::stable_sort(out.checkins.begin(), out.checkins.end(),
                   [](const CheckIn& a, const CheckIn& b) { return a.timestamp < b.timestamp; });
  return out;
}

void write_calls(const std::string& path, const std::vector<CallEvent>& calls) {
  auto out = detail::open_output(path);
  out << "timestamp,dispatch_code,region_id\n";
  for (const auto& c : calls)
    out << format_timestamp(c.timestamp) << ',' << c.nature.code << ',' << detail::csv_field(c.region_id)
        << '\n';
  detail::finish_output(out, path);
}

void write_regions(const std::string& path, const std::map<std::string, Region>& regions) {
  ordered_json features = ordered_json::array();
  for (const auto& [id, r] : regions) {
    ordered_json rings = ordered_json::array();
    for (const Ring& ring : r.boundary) {
      ordered_json coords = ordered_json::array();
      for (Point p : ring) coords.push_back({p.lon, p.lat});
      rings.push_back(std::move(coords));
    }
    ordered_json f;
    f["type"] = "Feature";
    f["properties"] = {{"region_id", id}, {"res_pop", r.res_pop}, {"day_pop", r.day_pop}, {"imd", r.imd}};
    f["geometry"] = {{"type", "Polygon"}, {"coordinates", std::move(rings)}};
    features.push_back(std::move(f));
  }
  ordered_json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = std::move(features);
  auto out = detail::open_output(path);
  out << doc.dump(1) << '\n';
  detail::finish_output(out, path);
}

void write_venues(const std::string& path, const std::map<std::string, Venue>& venues) {
  auto out = detail::open_output(path);
  out << "venue_id,category,lon,lat\n";
  for (const auto& [id, v] : venues)
    out << detail::csv_field(id) << ',' << detail::csv_field(v.category) << ',' << detail::fmt(v.location.lon)
        << ',' << detail::fmt(v.location.lat) << '\n';
  detail::finish_output(out, path);
}

void write_checkins(const std::string& path, const std::vector<CheckIn>& checkins) {
  auto out = detail::open_output(path);
  out << "venue_id,timestamp\n";
  for (const auto& c : checkins)
    out << detail::csv_field(c.venue_id) << ',' << format_timestamp(c.timestamp) << '\n';
  detail::finish_output(out, path);
}

JoinResult spatial_join(const std::map<std::string, Venue>& venues,
                        const std::map<std::string, Region>& regions) {
  struct Candidate {
    const Region* region;
    BoundingBox box;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(regions.size());
  for (const auto& [id, r] : regions) candidates.push_back({&r, bounding_box(r.boundary)});

  JoinResult out;
  for (const auto& [id, venue] : venues) {
    Venue v = venue;
    v.region_id.reset();
    std::size_t strictly_inside = 0;
    for (const auto& c : candidates) {
      if (!c.box.contains(v.location)) continue;
      PointLocation loc = locate_point(v.location, c.region->boundary);
      if (loc == PointLocation::Outside) continue;
      if (!v.region_id) v.region_id = c.region->region_id;
      if (loc == PointLocation::Inside) ++strictly_inside;
    }
    if (strictly_inside > 1) ++out.overlapping;
    if (v.region_id)
      ++out.assigned;
    else
      ++out.unassigned;
    out.venues.emplace(id, std::move(v));
  }
  if (out.overlapping > 0)
    log::warn(std::to_string(out.overlapping) + " venues fall inside overlapping regions; first region id wins");
  return out;
}

void validate(const Dataset& ds) {
  for (std::size_t i = 0; i < ds.calls.size(); ++i) {
    if (!ds.regions.count(ds.calls[i].region_id))
      throw DataError("call " + std::to_string(i) + " references unknown region '" + ds.calls[i].region_id + "'");
    if (i > 0 && ds.calls[i].timestamp < ds.calls[i - 1].timestamp)
      throw DataError("calls are not sorted by timestamp");
  }
  for (const auto& [id, v] : ds.venues)
    if (v.region_id && !ds.regions.count(*v.region_id))
      throw DataError("venue '" + id + "' references unknown region '" + *v.region_id + "'");
}

Dataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  for (const char* name : {kCallsFile, kRegionsFile, kVenuesFile, kCheckinsFile})
    if (!fs::exists(root / name)) throw DataError("dataset directory '" + dir + "' lacks " + name);
  Dataset ds;
  ds.regions = parse_regions((root / kRegionsFile).string()).regions;
  ds.calls = parse_calls((root / kCallsFile).string()).calls;
  auto venues = parse_venues((root / kVenuesFile).string()).venues;
  ds.checkins = parse_checkins((root / kCheckinsFile).string(), venues).checkins;
  auto joined = spatial_join(venues, ds.regions);
  if (joined.unassigned > 0)
    log::warn(std::to_string(joined.unassigned) + " venues lie outside every region");
  ds.venues = std::move(joined.venues);
  validate(ds);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
  const fs::path root(dir);
  write_calls((root / kCallsFile).string(), ds.calls);
  write_regions((root / kRegionsFile).string(), ds.regions);
  write_venues((root / kVenuesFile).string(), ds.venues);
  write_checkins((root / kCheckinsFile).string(), ds.checkins);
}

}  // namespace emsrisk
