#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "transit_robust/common.hpp"
#include "transit_robust/features.hpp"
#include "transit_robust/network.hpp"
#include "transit_robust/robustness.hpp"
#include "transit_robust/search.hpp"
#include "transit_robust/simulation.hpp"
#include "transit_robust/surrogate.hpp"

namespace transit_robust::io {

namespace fs = std::filesystem;

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw IoError("cannot format number");
  return std::string(buf, p);
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) throw ValidationError(where + ": not a number '" + s + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& s, const std::string& where) {
  std::int64_t v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) throw ValidationError(where + ": not an integer '" + s + "'");
  return v;
}

inline std::vector<std::int64_t> parse_int_list(const std::string& s, const std::string& where) {
  std::vector<std::int64_t> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(parse_int(tok, where));
  return out;
}

template <class T>
std::string join_ints(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(v[i]);
  }
  return s;
}

// Writes to a temporary sibling and renames it into place.
inline void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Minimal CSV: comma separated, no quoting, header row required.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string source;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ValidationError(source + ": missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable t;
  t.source = path.string();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ValidationError(t.source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ValidationError(t.source + ": empty file");
  return t;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].find_first_of(",\n\r") != std::string::npos) throw ValidationError("CSV field contains a separator: '" + cells[i] + "'");
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }
  const std::string& text() const { return text_; }
  void save(const fs::path& path) const { write_text_atomic(path, text_); }

 private:
  std::string text_;
};

inline std::string fmt_bound(Minutes v) { return v >= kUnbounded ? "inf" : std::to_string(v); }
inline Minutes parse_bound(const std::string& s, const std::string& where) { return s == "inf" ? kUnbounded : parse_int(s, where); }

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

inline std::string params_csv(const NetworkParams& p) {
  CsvWriter w({"key", "value"});
  w.row({"period", std::to_string(p.period)});
  w.row({"wait_min", std::to_string(p.wait_min)});
  w.row({"wait_max", std::to_string(p.wait_max)});
  w.row({"min_transfer", std::to_string(p.min_transfer)});
  w.row({"turnaround_min", std::to_string(p.turnaround_min)});
  w.row({"turnaround_max", p.turnaround_max ? std::to_string(*p.turnaround_max) : "inf"});
  w.row({"horizon_periods", std::to_string(p.horizon_periods)});
  w.row({"vehicle_capacity", std::to_string(p.vehicle_capacity)});
  return w.text();
}

inline NetworkParams read_params(const fs::path& path) {
  NetworkParams p;
  if (!fs::exists(path)) return p;
  const auto t = read_csv(path);
  const auto k = t.column("key"), v = t.column("value");
  for (const auto& r : t.rows) {
    const auto& key = r[k];
    const auto& val = r[v];
    const std::string where = t.source + " " + key;
    if (key == "period") p.period = parse_int(val, where);
    else if (key == "wait_min") p.wait_min = parse_int(val, where);
    else if (key == "wait_max") p.wait_max = parse_int(val, where);
    else if (key == "min_transfer") p.min_transfer = parse_int(val, where);
    else if (key == "turnaround_min") p.turnaround_min = parse_int(val, where);
    else if (key == "turnaround_max") p.turnaround_max = val == "inf" ? std::nullopt : std::optional<Minutes>(parse_int(val, where));
    else if (key == "horizon_periods") p.horizon_periods = static_cast<int>(parse_int(val, where));
    else if (key == "vehicle_capacity") p.vehicle_capacity = static_cast<int>(parse_int(val, where));
    else throw ValidationError(t.source + ": unknown parameter '" + key + "'");
  }
  return p;
}

inline void write_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir);
  CsvWriter st({"id", "name"});
  for (const auto& s : ds.stations) st.row({std::to_string(s.id), s.name});
  st.save(dir / "stations.csv");
  CsvWriter ed({"id", "from", "to", "min_drive", "max_drive"});
  for (const auto& e : ds.edges) ed.row({std::to_string(e.id), std::to_string(e.from), std::to_string(e.to), std::to_string(e.min_drive), std::to_string(e.max_drive)});
  ed.save(dir / "edges.csv");
  CsvWriter li({"id", "frequency", "station_path"});
  for (const auto& l : ds.lines) li.row({std::to_string(l.id), std::to_string(l.frequency), join_ints(l.station_path)});
  li.save(dir / "lines.csv");
  CsvWriter od({"origin", "destination", "earliest_departure", "weight"});
  for (const auto& g : ds.groups) od.row({std::to_string(g.origin), std::to_string(g.destination), std::to_string(g.earliest_departure), std::to_string(g.weight)});
  od.save(dir / "od.csv");
  write_text_atomic(dir / "params.csv", params_csv(ds.params));
}

inline Dataset read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  Dataset ds;
  {
    const auto t = read_csv(dir / "stations.csv");
    const auto ci = t.column("id"), cn = t.column("name");
    for (const auto& r : t.rows) ds.stations.push_back({static_cast<StationId>(parse_int(r[ci], t.source)), r[cn]});
  }
  {
    const auto t = read_csv(dir / "edges.csv");
    const auto ci = t.column("id"), cf = t.column("from"), ct = t.column("to"), cmin = t.column("min_drive"), cmax = t.column("max_drive");
    for (const auto& r : t.rows) {
      ds.edges.push_back({static_cast<EdgeId>(parse_int(r[ci], t.source)), static_cast<StationId>(parse_int(r[cf], t.source)),
                          static_cast<StationId>(parse_int(r[ct], t.source)), parse_int(r[cmin], t.source), parse_int(r[cmax], t.source)});
    }
  }
  {
    const auto t = read_csv(dir / "lines.csv");
    const auto ci = t.column("id"), cf = t.column("frequency"), cp = t.column("station_path");
    for (const auto& r : t.rows) {
      Line l;
      l.id = static_cast<LineId>(parse_int(r[ci], t.source));
      l.frequency = static_cast<int>(parse_int(r[cf], t.source));
      for (auto s : parse_int_list(r[cp], t.source)) l.station_path.push_back(static_cast<StationId>(s));
      ds.lines.push_back(std::move(l));
    }
  }
  {
    const auto t = read_csv(dir / "od.csv");
    const auto co = t.column("origin"), cd = t.column("destination"), ce = t.column("earliest_departure"), cw = t.column("weight");
    for (const auto& r : t.rows) {
      ds.groups.push_back({static_cast<StationId>(parse_int(r[co], t.source)), static_cast<StationId>(parse_int(r[cd], t.source)),
                           parse_int(r[ce], t.source), static_cast<int>(parse_int(r[cw], t.source))});
    }
  }
  ds.params = read_params(dir / "params.csv");
  const auto problems = validate_dataset(ds);
  if (!problems.empty()) throw ValidationError(dir.string() + ": " + problems.front());
  return ds;
}

// ---------------------------------------------------------------------------
// Instance
// ---------------------------------------------------------------------------

inline void write_instance(const fs::path& dir, const Instance& inst) {
  write_dataset(dir, inst.dataset);
  const auto& ean = inst.ean;
  CsvWriter ev({"id", "kind", "station", "line", "trip", "periodic_parent"});
  for (const auto& e : ean.events) {
    ev.row({std::to_string(e.id), to_string(e.kind), std::to_string(e.station), std::to_string(e.line), std::to_string(e.trip),
            e.periodic_parent ? std::to_string(*e.periodic_parent) : ""});
  }
  ev.save(dir / "events.csv");
  CsvWriter ac({"id", "kind", "tail", "head", "lower", "upper", "edge"});
  for (const auto& a : ean.activities) {
    ac.row({std::to_string(a.id), to_string(a.kind), std::to_string(a.tail), std::to_string(a.head), std::to_string(a.lower), fmt_bound(a.upper),
            std::to_string(a.edge)});
  }
  ac.save(dir / "activities.csv");
  CsvWriter tt({"event_id", "time"});
  for (std::size_t e = 0; e < inst.timetable.times.size(); ++e) tt.row({std::to_string(e), std::to_string(inst.timetable.times[e])});
  tt.save(dir / "timetable.csv");
  CsvWriter to({"tour_id", "trip_sequence"});
  for (std::size_t v = 0; v < inst.schedule.tours.size(); ++v) to.row({std::to_string(v), join_ints(inst.schedule.tours[v])});
  to.save(dir / "tours.csv");
  CsvWriter ro({"group_id", "activity_sequence"});
  for (std::size_t g = 0; g < inst.routes.size(); ++g) ro.row({std::to_string(g), join_ints(inst.routes[g].activities)});
  ro.save(dir / "routes.csv");
  if (!inst.schedule.depots.empty()) {
    CsvWriter dp({"station"});
    for (auto s : inst.schedule.depots) dp.row({std::to_string(s)});
    dp.save(dir / "depots.csv");
  }
}

inline Instance read_instance(const fs::path& dir, const UtilityWeights& weights = {}) {
  Instance inst;
  inst.dataset = read_dataset(dir);
  inst.id = dir.filename().string();
  if (inst.id.empty()) inst.id = dir.parent_path().filename().string();
  auto& ean = inst.ean;
  {
    const auto t = read_csv(dir / "events.csv");
    const auto ci = t.column("id"), ck = t.column("kind"), cs = t.column("station"), cl = t.column("line"), ct = t.column("trip"),
               cp = t.column("periodic_parent");
    for (const auto& r : t.rows) {
      Event e;
      e.id = static_cast<EventId>(parse_int(r[ci], t.source));
      if (e.id != static_cast<EventId>(ean.events.size())) throw ValidationError(t.source + ": event ids must be dense and ordered");
      e.kind = parse_event_kind(r[ck]);
      e.station = static_cast<StationId>(parse_int(r[cs], t.source));
      e.line = static_cast<LineId>(parse_int(r[cl], t.source));
      e.trip = static_cast<TripId>(parse_int(r[ct], t.source));
      if (!r[cp].empty()) e.periodic_parent = static_cast<EventId>(parse_int(r[cp], t.source));
      if (e.station < 0 || static_cast<std::size_t>(e.station) >= inst.dataset.stations.size()) throw ValidationError(t.source + ": unknown station");
      ean.events.push_back(e);
    }
  }
  {
    const auto t = read_csv(dir / "activities.csv");
    const auto ci = t.column("id"), ck = t.column("kind"), ct = t.column("tail"), ch = t.column("head"), cl = t.column("lower"), cu = t.column("upper"),
               ce = t.column("edge");
    for (const auto& r : t.rows) {
      const auto id = parse_int(r[ci], t.source);
      if (id != static_cast<std::int64_t>(ean.activities.size())) throw ValidationError(t.source + ": activity ids must be dense and ordered");
      const auto tail = static_cast<EventId>(parse_int(r[ct], t.source));
      const auto head = static_cast<EventId>(parse_int(r[ch], t.source));
      const auto n = static_cast<EventId>(ean.events.size());
      if (tail < 0 || tail >= n || head < 0 || head >= n) throw ValidationError(t.source + ": activity " + std::to_string(id) + " references unknown event");
      ean.add_activity(parse_activity_kind(r[ck]), tail, head, parse_int(r[cl], t.source), parse_bound(r[cu], t.source),
                       static_cast<EdgeId>(parse_int(r[ce], t.source)));
    }
  }
  ean.build_index();
  rebuild_trips(ean);
  {
    const auto t = read_csv(dir / "timetable.csv");
    const auto ce = t.column("event_id"), ct = t.column("time");
    inst.timetable.times.assign(ean.events.size(), kNoTime);
    for (const auto& r : t.rows) {
      const auto e = parse_int(r[ce], t.source);
      if (e < 0 || static_cast<std::size_t>(e) >= ean.events.size()) throw ValidationError(t.source + ": unknown event " + std::to_string(e));
      inst.timetable.times[static_cast<std::size_t>(e)] = parse_int(r[ct], t.source);
    }
    inst.timetable.horizon_periods = inst.dataset.params.horizon_periods;
  }
  {
    const auto t = read_csv(dir / "tours.csv");
    const auto cs = t.column("trip_sequence");
    for (const auto& r : t.rows) {
      std::vector<TripId> tour;
      for (auto x : parse_int_list(r[cs], t.source)) tour.push_back(static_cast<TripId>(x));
      inst.schedule.tours.push_back(std::move(tour));
    }
    inst.schedule.vehicle_capacity = inst.dataset.params.vehicle_capacity;
  }
  if (fs::exists(dir / "depots.csv")) {
    const auto t = read_csv(dir / "depots.csv");
    for (const auto& r : t.rows) inst.schedule.depots.push_back(static_cast<StationId>(parse_int(r[t.column("station")], t.source)));
  }
  const auto viol = validate_aperiodic(inst.timetable, ean);
  if (!viol.empty()) throw ValidationError(dir.string() + ": timetable violates activity " + std::to_string(viol.front().activity) + " (" + viol.front().reason + ")");
  const auto problems = validate_schedule(inst.schedule, ean, inst.timetable.times, inst.dataset.params);
  if (!problems.empty()) throw ValidationError(dir.string() + ": " + problems.front());
  if (fs::exists(dir / "routes.csv")) {
    const auto t = read_csv(dir / "routes.csv");
    const auto cg = t.column("group_id"), cs = t.column("activity_sequence");
    inst.routes.assign(inst.dataset.groups.size(), PassengerRoute{});
    for (const auto& r : t.rows) {
      const auto g = parse_int(r[cg], t.source);
      if (g < 0 || static_cast<std::size_t>(g) >= inst.routes.size()) throw ValidationError(t.source + ": unknown group " + std::to_string(g));
      auto& route = inst.routes[static_cast<std::size_t>(g)];
      route.group = static_cast<GroupId>(g);
      for (auto a : parse_int_list(r[cs], t.source)) {
        if (a < 0 || static_cast<std::size_t>(a) >= ean.activities.size()) throw ValidationError(t.source + ": unknown activity " + std::to_string(a));
        route.activities.push_back(static_cast<ActivityId>(a));
      }
      if (route.activities.empty()) {
        route.status = RouteStatus::Stranded;
      } else {
        route.transfers = count_transfers(ean, route.activities);
        route.planned_departure = inst.timetable.times[ean.activities[route.activities.front()].tail];
        route.planned_arrival = inst.timetable.times[ean.activities[route.activities.back()].head];
        route.realized_arrival = route.planned_arrival;
      }
    }
    for (std::size_t g = 0; g < inst.routes.size(); ++g) inst.routes[g].group = static_cast<GroupId>(g);
    inst.refresh_loads();
  } else {
    plan_instance_routes(inst, weights);
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Scenarios (JSON lines)
// ---------------------------------------------------------------------------

inline nlohmann::json scenario_to_json(const DelayScenario& s) {
  using nlohmann::json;
  json j;
  j["source_delays"] = json::array();
  for (const auto& [t, d] : s.source_delays) j["source_delays"].push_back({t, d});
  j["edge_slowdowns"] = json::array();
  for (const auto& e : s.edge_slowdowns) j["edge_slowdowns"].push_back({e.edge, e.extra, e.start, e.end});
  j["station_blockings"] = json::array();
  for (const auto& b : s.station_blockings) j["station_blockings"].push_back({b.station, b.start, b.duration});
  if (!s.activity_delays.empty()) {
    j["activity_delays"] = json::array();
    for (const auto& [a, d] : s.activity_delays) j["activity_delays"].push_back({a, d});
  }
  j["seed"] = s.seed;
  return j;
}

inline DelayScenario scenario_from_json(const nlohmann::json& j) {
  DelayScenario s;
  try {
    for (const auto& x : j.value("source_delays", nlohmann::json::array())) s.source_delays.push_back({x.at(0).get<TripId>(), x.at(1).get<Minutes>()});
    for (const auto& x : j.value("edge_slowdowns", nlohmann::json::array())) {
      s.edge_slowdowns.push_back({x.at(0).get<EdgeId>(), x.at(1).get<Minutes>(), x.at(2).get<Minutes>(), x.at(3).get<Minutes>()});
    }
    for (const auto& x : j.value("station_blockings", nlohmann::json::array())) {
      s.station_blockings.push_back({x.at(0).get<StationId>(), x.at(1).get<Minutes>(), x.at(2).get<Minutes>()});
    }
    for (const auto& x : j.value("activity_delays", nlohmann::json::array())) s.activity_delays.push_back({x.at(0).get<ActivityId>(), x.at(1).get<Minutes>()});
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed scenario: ") + e.what());
  }
  return s;
}

inline std::vector<DelayScenario> read_scenarios(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<DelayScenario> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(scenario_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_scenarios(const fs::path& path, const std::vector<DelayScenario>& scenarios) {
  std::string text;
  for (const auto& s : scenarios) text += scenario_to_json(s).dump() + "\n";
  write_text_atomic(path, text);
}

// ---------------------------------------------------------------------------
// Matrices keyed by instance id
// ---------------------------------------------------------------------------

struct IdMatrix {
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline void write_id_matrix(const fs::path& path, const IdMatrix& m) {
  std::vector<std::string> header{"instance_id"};
  header.insert(header.end(), m.columns.begin(), m.columns.end());
  CsvWriter w(header);
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    if (m.rows[i].size() != m.columns.size()) throw ValidationError("row width does not match header");
    std::vector<std::string> cells{m.ids[i]};
    for (double v : m.rows[i]) cells.push_back(format_double(v));
    w.row(cells);
  }
  w.save(path);
}

inline IdMatrix read_id_matrix(const fs::path& path) {
  const auto t = read_csv(path);
  if (t.header.empty() || t.header.front() != "instance_id") throw ValidationError(t.source + ": first column must be instance_id");
  IdMatrix m;
  m.columns.assign(t.header.begin() + 1, t.header.end());
  for (const auto& r : t.rows) {
    m.ids.push_back(r[0]);
    std::vector<double> v;
    v.reserve(r.size() - 1);
    for (std::size_t i = 1; i < r.size(); ++i) v.push_back(parse_double(r[i], t.source));
    m.rows.push_back(std::move(v));
  }
  return m;
}

inline std::vector<std::string> feature_columns(std::size_t n) {
  std::vector<std::string> c;
  c.reserve(n);
  for (std::size_t i = 0; i < n; ++i) c.push_back("x" + std::to_string(i));
  return c;
}

inline const std::vector<std::string>& raw_columns() {
  static const std::vector<std::string> c{"rt1_raw", "rt2_raw", "rt3_raw", "rt4_raw"};
  return c;
}
inline const std::vector<std::string>& label_columns() {
  static const std::vector<std::string> c{"rt1", "rt2", "rt3", "rt4"};
  return c;
}

inline std::vector<TestValues> to_test_values(const IdMatrix& m) {
  std::vector<TestValues> out;
  for (const auto& r : m.rows) {
    if (r.size() != kTestCount) throw ValidationError("expected 4 robustness columns");
    out.push_back({r[0], r[1], r[2], r[3]});
  }
  return out;
}

inline std::vector<std::vector<double>> from_test_values(const std::vector<TestValues>& v) {
  std::vector<std::vector<double>> out;
  for (const auto& r : v) out.emplace_back(r.begin(), r.end());
  return out;
}

inline nlohmann::json layout_to_json(const FeatureLayout& l) {
  nlohmann::json j;
  j["stations"] = l.stations;
  j["edges"] = l.edges;
  j["caps"] = {{"traveltime_max", l.caps.traveltime_max}, {"transfers_max", l.caps.transfers_max}, {"turnaround_max", l.caps.turnaround_max}};
  j["size"] = l.size();
  j["segments"] = nlohmann::json::array();
  for (const auto& s : l.segments) j["segments"].push_back({{"feature", s.feature}, {"offset", s.offset}, {"length", s.length}});
  return j;
}

inline FeatureLayout layout_from_json(const nlohmann::json& j) {
  try {
    FeatureCaps caps{j.at("caps").at("traveltime_max").get<int>(), j.at("caps").at("transfers_max").get<int>(), j.at("caps").at("turnaround_max").get<int>()};
    return FeatureLayout::make(j.at("stations").get<std::size_t>(), j.at("edges").get<std::size_t>(), caps);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed layout: ") + e.what());
  }
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline void write_reference(const fs::path& path, const TestValues& ref) {
  nlohmann::json j;
  for (std::size_t t = 0; t < kTestCount; ++t) j["rt" + std::to_string(t + 1) + "_max"] = ref[t];
  write_json(path, j);
}

inline TestValues read_reference(const fs::path& path) {
  const auto j = read_json(path);
  TestValues r{};
  try {
    for (std::size_t t = 0; t < kTestCount; ++t) r[t] = j.at("rt" + std::to_string(t + 1) + "_max").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return r;
}

inline void write_history(const fs::path& path, const std::vector<EpochRecord>& h) {
  CsvWriter w({"epoch", "phase", "train_loss", "val_loss"});
  for (const auto& e : h) w.row({std::to_string(e.epoch), std::to_string(e.phase), format_double(e.train_loss), format_double(e.val_loss)});
  w.save(path);
}

inline void write_trace(const fs::path& path, const SearchTrace& trace) {
  CsvWriter w({"iter", "accepted", "activity", "est_rt1", "est_rt2", "est_rt3", "est_rt4", "objective", "utility", "rerouted"});
  std::vector<std::string> start{"0", "0", "", format_double(trace.start_estimate[0]), format_double(trace.start_estimate[1]),
                                 format_double(trace.start_estimate[2]), format_double(trace.start_estimate[3]), format_double(trace.start_objective),
                                 std::to_string(trace.start_utility), "0"};
  w.row(start);
  for (const auto& it : trace.iterations) {
    w.row({std::to_string(it.iteration), it.accepted ? "1" : "0", it.accepted ? std::to_string(it.activity) : "", format_double(it.estimate[0]),
           format_double(it.estimate[1]), format_double(it.estimate[2]), format_double(it.estimate[3]), format_double(it.objective), std::to_string(it.utility),
           it.rerouted ? "1" : "0"});
  }
  w.save(path);
}

inline void write_trace_real(const fs::path& path, const RealEvaluation& r) {
  CsvWriter w({"iter", "est_rt1", "est_rt2", "est_rt3", "est_rt4", "real_rt1", "real_rt2", "real_rt3", "real_rt4", "est_objective", "real_objective"});
  for (const auto& p : r.series) {
    w.row({std::to_string(p.iteration), format_double(p.estimate[0]), format_double(p.estimate[1]), format_double(p.estimate[2]), format_double(p.estimate[3]),
           format_double(p.real[0]), format_double(p.real[1]), format_double(p.real[2]), format_double(p.real[3]), format_double(p.estimated_objective),
           format_double(p.real_objective)});
  }
  w.save(path);
}

// Accepted solutions of a search run, enough to re-evaluate it later.
inline nlohmann::json trace_to_json(const SearchTrace& t) {
  nlohmann::json j;
  j["start_objective"] = t.start_objective;
  j["start_utility"] = t.start_utility;
  j["accepted"] = nlohmann::json::array();
  for (std::size_t k = 0; k < t.accepted_timetables.size(); ++k) {
    j["accepted"].push_back({{"iteration", t.accepted_iterations[k]},
                             {"estimate", std::vector<double>(t.accepted_estimates[k].begin(), t.accepted_estimates[k].end())},
                             {"times", t.accepted_timetables[k]}});
  }
  return j;
}

inline SearchTrace trace_from_json(const nlohmann::json& j) {
  SearchTrace t;
  try {
    t.start_objective = j.at("start_objective").get<double>();
    t.start_utility = j.at("start_utility").get<std::int64_t>();
    for (const auto& a : j.at("accepted")) {
      t.accepted_iterations.push_back(a.at("iteration").get<int>());
      const auto est = a.at("estimate").get<std::vector<double>>();
      if (est.size() != kTestCount) throw ValidationError("trace estimate must have 4 entries");
      t.accepted_estimates.push_back({est[0], est[1], est[2], est[3]});
      t.accepted_timetables.push_back(a.at("times").get<std::vector<Minutes>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed trace: ") + e.what());
  }
  if (!t.accepted_estimates.empty()) t.start_estimate = t.accepted_estimates.front();
  return t;
}

}  // namespace transit_robust::io
