#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "transit_robust/common.hpp"

namespace transit_robust {

// ---------------------------------------------------------------------------
// Dataset: infrastructure, line concept, demand
// ---------------------------------------------------------------------------

struct Station {
  StationId id = kNoId;
  std::string name;
};

// Undirected infrastructure connection. Drive activities in both directions
// refer to the same edge.
struct NetworkEdge {
  EdgeId id = kNoId;
  StationId from = kNoId;
  StationId to = kNoId;
  Minutes min_drive = 1;
  Minutes max_drive = 1;
};

// A line is operated in both directions along its station path; `frequency`
// is the number of departures per period and direction.
struct Line {
  LineId id = kNoId;
  std::vector<StationId> station_path;
  int frequency = 1;
};

struct PassengerGroup {
  StationId origin = kNoId;
  StationId destination = kNoId;
  Minutes earliest_departure = 0;
  int weight = 1;
};

struct NetworkParams {
  Minutes period = 60;
  Minutes wait_min = 1;
  Minutes wait_max = 3;
  Minutes min_transfer = 2;
  Minutes turnaround_min = 5;
  std::optional<Minutes> turnaround_max;  // unbounded when empty
  int horizon_periods = 8;
  int vehicle_capacity = 100;
};

struct Dataset {
  std::vector<Station> stations;
  std::vector<NetworkEdge> edges;
  std::vector<Line> lines;
  std::vector<PassengerGroup> groups;
  NetworkParams params;

  std::size_t station_count() const { return stations.size(); }
  std::size_t edge_count() const { return edges.size(); }

  std::optional<EdgeId> find_edge(StationId a, StationId b) const {
    for (const auto& e : edges) {
      if ((e.from == a && e.to == b) || (e.from == b && e.to == a)) return e.id;
    }
    return std::nullopt;
  }
};

// Edge lookup table keyed by unordered station pair.
class EdgeIndex {
 public:
  explicit EdgeIndex(const Dataset& ds) {
    for (const auto& e : ds.edges) index_[key(e.from, e.to)] = e.id;
  }
  std::optional<EdgeId> find(StationId a, StationId b) const {
    auto it = index_.find(key(a, b));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  static std::pair<StationId, StationId> key(StationId a, StationId b) { return {std::min(a, b), std::max(a, b)}; }
  std::map<std::pair<StationId, StationId>, EdgeId> index_;
};

inline std::vector<std::string> validate_dataset(const Dataset& ds) {
  std::vector<std::string> problems;
  const auto n = static_cast<StationId>(ds.stations.size());
  auto valid_station = [&](StationId s) { return s >= 0 && s < n; };
  for (std::size_t i = 0; i < ds.stations.size(); ++i) {
    if (ds.stations[i].id != static_cast<StationId>(i)) problems.push_back("station ids not dense at index " + std::to_string(i));
  }
  for (std::size_t i = 0; i < ds.edges.size(); ++i) {
    const auto& e = ds.edges[i];
    if (e.id != static_cast<EdgeId>(i)) problems.push_back("edge ids not dense at index " + std::to_string(i));
    if (!valid_station(e.from) || !valid_station(e.to)) problems.push_back("edge " + std::to_string(e.id) + " references unknown station");
    if (e.from == e.to) problems.push_back("edge " + std::to_string(e.id) + " is a loop");
    if (!(0 < e.min_drive && e.min_drive <= e.max_drive)) problems.push_back("edge " + std::to_string(e.id) + " has invalid drive bounds");
  }
  EdgeIndex index(ds);
  for (std::size_t i = 0; i < ds.lines.size(); ++i) {
    const auto& l = ds.lines[i];
    if (l.id != static_cast<LineId>(i)) problems.push_back("line ids not dense at index " + std::to_string(i));
    if (l.station_path.size() < 2) problems.push_back("line " + std::to_string(l.id) + " path shorter than 2");
    if (l.frequency < 1) problems.push_back("line " + std::to_string(l.id) + " frequency < 1");
    for (std::size_t k = 0; k + 1 < l.station_path.size(); ++k) {
      if (!index.find(l.station_path[k], l.station_path[k + 1])) {
        problems.push_back("line " + std::to_string(l.id) + " uses missing edge " + std::to_string(l.station_path[k]) + "-" +
                           std::to_string(l.station_path[k + 1]));
      }
    }
  }
  for (std::size_t g = 0; g < ds.groups.size(); ++g) {
    const auto& od = ds.groups[g];
    if (!valid_station(od.origin) || !valid_station(od.destination)) problems.push_back("group " + std::to_string(g) + " references unknown station");
    if (od.origin == od.destination) problems.push_back("group " + std::to_string(g) + " has origin == destination");
    if (od.weight < 1) problems.push_back("group " + std::to_string(g) + " weight < 1");
  }
  const auto& p = ds.params;
  if (p.period <= 0) problems.push_back("period must be positive");
  if (p.wait_min < 0 || p.wait_max < p.wait_min) problems.push_back("invalid wait bounds");
  if (p.min_transfer < 0) problems.push_back("min_transfer < 0");
  if (p.turnaround_min < 0) problems.push_back("turnaround_min < 0");
  if (p.horizon_periods < 1) problems.push_back("horizon_periods < 1");
  if (p.vehicle_capacity < 1) problems.push_back("vehicle_capacity < 1");
  return problems;
}

// ---------------------------------------------------------------------------
// Event-activity network
// ---------------------------------------------------------------------------

enum class EventKind { Arrival, Departure };
enum class ActivityKind { Drive, Wait, Transfer, Turnaround };

inline constexpr int kActivityKindCount = 4;

inline const char* to_string(EventKind k) { return k == EventKind::Arrival ? "arrival" : "departure"; }

inline const char* to_string(ActivityKind k) {
  switch (k) {
    case ActivityKind::Drive: return "drive";
    case ActivityKind::Wait: return "wait";
    case ActivityKind::Transfer: return "transfer";
    case ActivityKind::Turnaround: return "turnaround";
  }
  return "?";
}

inline EventKind parse_event_kind(const std::string& s) {
  if (s == "arrival") return EventKind::Arrival;
  if (s == "departure") return EventKind::Departure;
  throw ValidationError("unknown event kind '" + s + "'");
}

inline ActivityKind parse_activity_kind(const std::string& s) {
  if (s == "drive") return ActivityKind::Drive;
  if (s == "wait") return ActivityKind::Wait;
  if (s == "transfer") return ActivityKind::Transfer;
  if (s == "turnaround") return ActivityKind::Turnaround;
  throw ValidationError("unknown activity kind '" + s + "'");
}

struct Event {
  EventId id = kNoId;
  EventKind kind = EventKind::Departure;
  StationId station = kNoId;
  LineId line = kNoId;
  TripId trip = kNoId;
  std::optional<EventId> periodic_parent;
};

struct Activity {
  ActivityId id = kNoId;
  ActivityKind kind = ActivityKind::Drive;
  EventId tail = kNoId;
  EventId head = kNoId;
  Minutes lower = 0;
  Minutes upper = kUnbounded;
  EdgeId edge = kNoId;  // drive activities only
  std::int64_t passenger_load = 0;
};

// Ordered events of one vehicle run (departure, arrival, departure, ...).
struct Trip {
  TripId id = kNoId;
  LineId line = kNoId;
  std::vector<EventId> events;

  EventId first_departure() const { return events.front(); }
  EventId last_arrival() const { return events.back(); }
};

struct EventActivityNetwork {
  std::vector<Event> events;
  std::vector<Activity> activities;
  std::vector<Trip> trips;

  // Adjacency, rebuilt by build_index().
  std::vector<std::vector<ActivityId>> outgoing;
  std::vector<std::vector<ActivityId>> incoming;

  void build_index() {
    outgoing.assign(events.size(), {});
    incoming.assign(events.size(), {});
    for (const auto& a : activities) {
      outgoing[a.tail].push_back(a.id);
      incoming[a.head].push_back(a.id);
    }
  }

  ActivityId add_activity(ActivityKind kind, EventId tail, EventId head, Minutes lower, Minutes upper, EdgeId edge = kNoId) {
    Activity a;
    a.id = static_cast<ActivityId>(activities.size());
    a.kind = kind;
    a.tail = tail;
    a.head = head;
    a.lower = lower;
    a.upper = upper;
    a.edge = edge;
    activities.push_back(a);
    return a.id;
  }

  EventId add_event(EventKind kind, StationId station, LineId line, TripId trip, std::optional<EventId> parent = std::nullopt) {
    Event e;
    e.id = static_cast<EventId>(events.size());
    e.kind = kind;
    e.station = station;
    e.line = line;
    e.trip = trip;
    e.periodic_parent = parent;
    events.push_back(e);
    return e.id;
  }

  std::size_t count(ActivityKind kind) const {
    return static_cast<std::size_t>(std::count_if(activities.begin(), activities.end(), [&](const Activity& a) { return a.kind == kind; }));
  }

  // Removes all turnaround activities and renumbers the remaining ones.
  void remove_turnarounds() {
    std::vector<Activity> kept;
    kept.reserve(activities.size());
    for (const auto& a : activities) {
      if (a.kind == ActivityKind::Turnaround) continue;
      kept.push_back(a);
      kept.back().id = static_cast<ActivityId>(kept.size() - 1);
    }
    activities = std::move(kept);
  }
};

// Rebuilds `trips` from the trip field of events and the drive/wait chain.
inline void rebuild_trips(EventActivityNetwork& ean) {
  TripId max_trip = -1;
  for (const auto& e : ean.events) max_trip = std::max(max_trip, e.trip);
  std::vector<EventId> next(ean.events.size(), kNoId);
  std::vector<bool> has_prev(ean.events.size(), false);
  for (const auto& a : ean.activities) {
    if (a.kind == ActivityKind::Drive || a.kind == ActivityKind::Wait) {
      next[a.tail] = a.head;
      has_prev[a.head] = true;
    }
  }
  ean.trips.assign(static_cast<std::size_t>(max_trip + 1), Trip{});
  for (std::size_t t = 0; t < ean.trips.size(); ++t) ean.trips[t].id = static_cast<TripId>(t);
  for (const auto& e : ean.events) {
    if (e.trip < 0 || has_prev[e.id]) continue;
    auto& trip = ean.trips[e.trip];
    if (!trip.events.empty()) throw ValidationError("trip " + std::to_string(e.trip) + " has more than one start event");
    trip.line = e.line;
    for (EventId cur = e.id; cur != kNoId; cur = next[cur]) trip.events.push_back(cur);
  }
  for (const auto& t : ean.trips) {
    if (t.events.size() < 2) throw ValidationError("trip " + std::to_string(t.id) + " has fewer than two events");
    for (std::size_t k = 0; k < t.events.size(); ++k) {
      const auto expect = (k % 2 == 0) ? EventKind::Departure : EventKind::Arrival;
      if (ean.events[t.events[k]].kind != expect) throw ValidationError("trip " + std::to_string(t.id) + " does not alternate departure/arrival");
    }
  }
}

// ---------------------------------------------------------------------------
// Timetables and slack
// ---------------------------------------------------------------------------

struct PeriodicTimetable {
  Minutes period = 60;
  std::vector<Minutes> times;  // kNoTime marks a missing entry
};

struct AperiodicTimetable {
  int horizon_periods = 8;
  std::vector<Minutes> times;
};

struct Violation {
  ActivityId activity = kNoId;
  Minutes slack = 0;
  std::string reason;
};

inline Minutes periodic_slack(const Activity& a, const PeriodicTimetable& tt) {
  return floor_mod(tt.times.at(a.head) - tt.times.at(a.tail) - a.lower, tt.period);
}

inline Minutes aperiodic_slack(const Activity& a, const std::vector<Minutes>& times) {
  return times.at(a.head) - times.at(a.tail) - a.lower;
}

inline Minutes aperiodic_slack(const Activity& a, const AperiodicTimetable& tt) { return aperiodic_slack(a, tt.times); }

namespace detail {
inline void require_complete(const std::vector<Minutes>& times, std::size_t event_count) {
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < event_count; ++i) {
    if (i >= times.size() || times[i] == kNoTime) missing.push_back(i);
  }
  if (missing.empty()) return;
  std::ostringstream msg;
  msg << "timetable misses events:";
  for (std::size_t k = 0; k < missing.size() && k < 50; ++k) msg << ' ' << missing[k];
  if (missing.size() > 50) msg << " ... (" << missing.size() << " total)";
  throw ValidationError(msg.str());
}
}  // namespace detail

// Every activity must satisfy (pi_j - pi_i - L) mod T in [0, U - L].
inline std::vector<Violation> validate_periodic(const PeriodicTimetable& tt, const EventActivityNetwork& ean) {
  detail::require_complete(tt.times, ean.events.size());
  std::vector<Violation> out;
  for (const auto& a : ean.activities) {
    const Minutes s = periodic_slack(a, tt);
    if (s > a.upper - a.lower) out.push_back({a.id, s, "periodic slack exceeds U - L"});
  }
  return out;
}

inline std::vector<Violation> validate_aperiodic(const AperiodicTimetable& tt, const EventActivityNetwork& ean) {
  detail::require_complete(tt.times, ean.events.size());
  std::vector<Violation> out;
  for (const auto& a : ean.activities) {
    const Minutes s = aperiodic_slack(a, tt);
    if (s < 0) {
      out.push_back({a.id, s, "duration below lower bound"});
    } else if (a.upper < kUnbounded && s > a.upper - a.lower) {
      out.push_back({a.id, s, "duration above upper bound"});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Periodic network construction and roll-out
// ---------------------------------------------------------------------------

// Periodic trip pattern: line, direction (0 forward, 1 backward), repetition.
struct PeriodicTripInfo {
  LineId line = kNoId;
  int direction = 0;
  int repetition = 0;
};

struct PeriodicNetwork {
  EventActivityNetwork ean;
  std::vector<PeriodicTripInfo> trip_info;  // indexed by periodic trip id
  Minutes period = 60;
};

// One trip per line, direction and repetition; drive and wait activities
// along the trip; transfer activities from every arrival to every departure
// of a different line at the same station with bounds
// [min_transfer, min_transfer + T - 1].
inline PeriodicNetwork build_periodic_network(const Dataset& ds) {
  const auto problems = validate_dataset(ds);
  if (!problems.empty()) throw ValidationError("invalid dataset: " + problems.front());
  const auto& p = ds.params;
  EdgeIndex index(ds);
  PeriodicNetwork net;
  net.period = p.period;
  auto& ean = net.ean;
  for (const auto& line : ds.lines) {
    for (int dir = 0; dir < 2; ++dir) {
      std::vector<StationId> path = line.station_path;
      if (dir == 1) std::reverse(path.begin(), path.end());
      for (int rep = 0; rep < line.frequency; ++rep) {
        const auto trip_id = static_cast<TripId>(ean.trips.size());
        Trip trip;
        trip.id = trip_id;
        trip.line = line.id;
        net.trip_info.push_back({line.id, dir, rep});
        for (std::size_t k = 0; k + 1 < path.size(); ++k) {
          const EventId dep = ean.add_event(EventKind::Departure, path[k], line.id, trip_id);
          if (!trip.events.empty()) {
            ean.add_activity(ActivityKind::Wait, trip.events.back(), dep, p.wait_min, p.wait_max);
          }
          const EventId arr = ean.add_event(EventKind::Arrival, path[k + 1], line.id, trip_id);
          const auto& edge = ds.edges[*index.find(path[k], path[k + 1])];
          ean.add_activity(ActivityKind::Drive, dep, arr, edge.min_drive, edge.max_drive, edge.id);
          trip.events.push_back(dep);
          trip.events.push_back(arr);
        }
        ean.trips.push_back(std::move(trip));
      }
    }
  }
  std::vector<std::vector<EventId>> arrivals(ds.stations.size()), departures(ds.stations.size());
  for (const auto& e : ean.events) {
    (e.kind == EventKind::Arrival ? arrivals : departures)[e.station].push_back(e.id);
  }
  for (std::size_t s = 0; s < ds.stations.size(); ++s) {
    for (EventId a : arrivals[s]) {
      for (EventId d : departures[s]) {
        if (ean.events[a].line == ean.events[d].line) continue;
        ean.add_activity(ActivityKind::Transfer, a, d, p.min_transfer, p.min_transfer + p.period - 1);
      }
    }
  }
  ean.build_index();
  return net;
}

struct RolledOutNetwork {
  EventActivityNetwork ean;
  AperiodicTimetable timetable;
};

// Copies every periodic trip K times (copy k starts at pi_first + kT) and
// realizes each drive/wait activity with its periodic slack, so a trip that
// wraps around the period continues into the next period's event copy.
// Transfers are instantiated to the departure copy realizing the smallest
// duration >= L; those crossing the horizon end are dropped.
inline RolledOutNetwork roll_out(const PeriodicNetwork& periodic, const PeriodicTimetable& tt, int horizon_periods) {
  if (horizon_periods < 1) throw ValidationError("roll-out horizon must be >= 1");
  const auto violations = validate_periodic(tt, periodic.ean);
  if (!violations.empty()) {
    throw ValidationError("refusing to roll out infeasible periodic timetable (" + std::to_string(violations.size()) +
                          " violations, first activity " + std::to_string(violations.front().activity) + ")");
  }
  const auto& pean = periodic.ean;
  const Minutes T = tt.period;
  const auto K = static_cast<std::size_t>(horizon_periods);
  RolledOutNetwork out;
  auto& ean = out.ean;
  auto& times = out.timetable.times;
  out.timetable.horizon_periods = horizon_periods;

  // copy_of[periodic event][k] -> aperiodic event
  std::vector<std::vector<EventId>> copy_of(pean.events.size(), std::vector<EventId>(K, kNoId));
  // Chain activity (drive/wait) leaving each periodic event.
  std::vector<ActivityId> chain_out(pean.events.size(), kNoId);
  for (const auto& a : pean.activities) {
    if (a.kind == ActivityKind::Drive || a.kind == ActivityKind::Wait) chain_out[a.tail] = a.id;
  }
  for (std::size_t k = 0; k < K; ++k) {
    for (const auto& ptrip : pean.trips) {
      Trip trip;
      trip.id = static_cast<TripId>(ean.trips.size());
      trip.line = ptrip.line;
      Minutes t = tt.times[ptrip.first_departure()] + static_cast<Minutes>(k) * T;
      for (std::size_t idx = 0; idx < ptrip.events.size(); ++idx) {
        const EventId pe = ptrip.events[idx];
        const auto& src = pean.events[pe];
        const EventId e = ean.add_event(src.kind, src.station, src.line, trip.id, pe);
        times.push_back(t);
        copy_of[pe][k] = e;
        if (!trip.events.empty()) {
          const auto& pa = pean.activities[chain_out[ptrip.events[idx - 1]]];
          ean.add_activity(pa.kind, trip.events.back(), e, pa.lower, pa.upper, pa.edge);
        }
        trip.events.push_back(e);
        if (idx + 1 < ptrip.events.size()) {
          const auto& pa = pean.activities[chain_out[pe]];
          t += pa.lower + periodic_slack(pa, tt);
        }
      }
      ean.trips.push_back(std::move(trip));
    }
  }
  for (const auto& pa : pean.activities) {
    if (pa.kind != ActivityKind::Transfer) continue;
    const EventId head0 = copy_of[pa.head][0];
    const Minutes head_base = times[head0];
    for (std::size_t k = 0; k < K; ++k) {
      const EventId tail = copy_of[pa.tail][k];
      const Minutes earliest = times[tail] + pa.lower;
      const Minutes kk = ceil_div(earliest - head_base, T);
      if (kk < 0 || kk >= static_cast<Minutes>(K)) continue;
      const EventId head = copy_of[pa.head][static_cast<std::size_t>(kk)];
      ean.add_activity(ActivityKind::Transfer, tail, head, pa.lower, pa.upper);
    }
  }
  ean.build_index();
  return out;
}

// ---------------------------------------------------------------------------
// Vehicle schedules
// ---------------------------------------------------------------------------

struct VehicleSchedule {
  std::vector<std::vector<TripId>> tours;
  int vehicle_capacity = 100;
  std::vector<StationId> depots;  // empty: tours may start and end anywhere
};

// Replaces the turnaround activities of `ean` with those induced by the
// schedule (last arrival of a trip -> first departure of the next trip).
inline void apply_schedule(EventActivityNetwork& ean, const VehicleSchedule& schedule, const NetworkParams& params) {
  ean.remove_turnarounds();
  const Minutes upper = params.turnaround_max.value_or(kUnbounded);
  for (const auto& tour : schedule.tours) {
    for (std::size_t k = 0; k + 1 < tour.size(); ++k) {
      const auto& from = ean.trips.at(tour[k]);
      const auto& to = ean.trips.at(tour[k + 1]);
      ean.add_activity(ActivityKind::Turnaround, from.last_arrival(), to.first_departure(), params.turnaround_min, upper);
    }
  }
  ean.build_index();
}

inline std::vector<std::string> validate_schedule(const VehicleSchedule& schedule, const EventActivityNetwork& ean,
                                                  const std::vector<Minutes>& times, const NetworkParams& params) {
  std::vector<std::string> problems;
  std::vector<int> seen(ean.trips.size(), 0);
  for (std::size_t v = 0; v < schedule.tours.size(); ++v) {
    const auto& tour = schedule.tours[v];
    if (tour.empty()) problems.push_back("tour " + std::to_string(v) + " is empty");
    for (TripId t : tour) {
      if (t < 0 || static_cast<std::size_t>(t) >= ean.trips.size()) throw ValidationError("unknown trip id " + std::to_string(t));
      ++seen[t];
    }
    for (std::size_t k = 0; k + 1 < tour.size(); ++k) {
      const auto& from = ean.trips[tour[k]];
      const auto& to = ean.trips[tour[k + 1]];
      const auto& end_ev = ean.events[from.last_arrival()];
      const auto& start_ev = ean.events[to.first_departure()];
      if (end_ev.station != start_ev.station) {
        problems.push_back("tour " + std::to_string(v) + ": trip " + std::to_string(to.id) + " does not start where trip " +
                           std::to_string(from.id) + " ends");
      }
      const Minutes gap = times.at(start_ev.id) - times.at(end_ev.id);
      if (gap < params.turnaround_min) {
        problems.push_back("tour " + std::to_string(v) + ": turnaround " + std::to_string(from.id) + "->" + std::to_string(to.id) +
                           " gap " + std::to_string(gap) + " < " + std::to_string(params.turnaround_min));
      }
      if (params.turnaround_max && gap > *params.turnaround_max) {
        problems.push_back("tour " + std::to_string(v) + ": turnaround gap " + std::to_string(gap) + " above upper bound");
      }
    }
    if (!schedule.depots.empty() && !tour.empty()) {
      auto is_depot = [&](StationId s) { return std::find(schedule.depots.begin(), schedule.depots.end(), s) != schedule.depots.end(); };
      if (!is_depot(ean.events[ean.trips[tour.front()].first_departure()].station)) problems.push_back("tour " + std::to_string(v) + " does not start at a depot");
      if (!is_depot(ean.events[ean.trips[tour.back()].last_arrival()].station)) problems.push_back("tour " + std::to_string(v) + " does not end at a depot");
    }
  }
  for (std::size_t t = 0; t < seen.size(); ++t) {
    if (seen[t] == 0) problems.push_back("trip " + std::to_string(t) + " not covered by any tour");
    if (seen[t] > 1) problems.push_back("trip " + std::to_string(t) + " appears in " + std::to_string(seen[t]) + " tours");
  }
  return problems;
}

// ---------------------------------------------------------------------------
// Instance
// ---------------------------------------------------------------------------

enum class RouteStatus { Completed, Rerouted, Stranded };

inline const char* to_string(RouteStatus s) {
  switch (s) {
    case RouteStatus::Completed: return "completed";
    case RouteStatus::Rerouted: return "rerouted";
    case RouteStatus::Stranded: return "stranded";
  }
  return "?";
}

// Activity path of one passenger group. Boarding at the origin and alighting
// at the destination are implicit; an empty path means the group is stranded.
struct PassengerRoute {
  GroupId group = kNoId;
  std::vector<ActivityId> activities;
  Minutes planned_departure = 0;
  Minutes planned_arrival = 0;
  Minutes realized_arrival = 0;
  int transfers = 0;
  RouteStatus status = RouteStatus::Completed;
};

// Dataset plus aperiodic network (with schedule-induced turnarounds),
// timetable, vehicle schedule and planned passenger routes.
struct Instance {
  std::string id;
  Dataset dataset;
  EventActivityNetwork ean;
  AperiodicTimetable timetable;
  VehicleSchedule schedule;
  std::vector<PassengerRoute> routes;  // indexed by group id

  // Recomputes Activity::passenger_load from the planned routes.
  void refresh_loads() {
    for (auto& a : ean.activities) a.passenger_load = 0;
    for (const auto& r : routes) {
      if (r.group < 0) continue;
      const int w = dataset.groups.at(r.group).weight;
      for (ActivityId a : r.activities) ean.activities.at(a).passenger_load += w;
    }
  }
};

inline int count_transfers(const EventActivityNetwork& ean, const std::vector<ActivityId>& path) {
  return static_cast<int>(std::count_if(path.begin(), path.end(), [&](ActivityId a) { return ean.activities[a].kind == ActivityKind::Transfer; }));
}

}  // namespace transit_robust
