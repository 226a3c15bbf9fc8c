#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "transit_robust/transit_robust.hpp"

namespace tr_test {

using namespace transit_robust;

// One vehicle run: stations visited, event times (dep s0, arr s1, dep s1, ...)
// and the lower bound of each drive.
struct TripSpec {
  LineId line = 0;
  std::vector<StationId> stations;
  std::vector<Minutes> times;
  std::vector<Minutes> drive_lower;
};

struct HandInstance {
  int stations = 0;
  std::vector<TripSpec> trips;
  std::vector<std::vector<TripId>> tours;  // empty: one tour per trip
  std::vector<PassengerGroup> groups;
  NetworkParams params;
  UtilityWeights weights;
};

// Builds an aperiodic instance directly from trip specs. Transfers connect
// every arrival to every departure of another line at the same station whose
// scheduled gap lies in [min_transfer, min_transfer + T - 1].
inline Instance build(const HandInstance& h) {
  Instance inst;
  inst.id = "hand";
  auto& ds = inst.dataset;
  ds.params = h.params;
  for (int s = 0; s < h.stations; ++s) ds.stations.push_back({s, "S" + std::to_string(s)});
  std::map<LineId, std::vector<StationId>> line_paths;
  auto& ean = inst.ean;
  auto& times = inst.timetable.times;
  for (std::size_t t = 0; t < h.trips.size(); ++t) {
    const auto& spec = h.trips[t];
    const auto k = spec.stations.size() - 1;
    if (spec.times.size() != 2 * k || spec.drive_lower.size() != k) throw std::logic_error("bad trip spec");
    line_paths.emplace(spec.line, spec.stations);
    Trip trip;
    trip.id = static_cast<TripId>(t);
    trip.line = spec.line;
    for (std::size_t i = 0; i < k; ++i) {
      const StationId a = spec.stations[i], b = spec.stations[i + 1];
      auto edge = ds.find_edge(a, b);
      if (!edge) {
        edge = static_cast<EdgeId>(ds.edges.size());
        ds.edges.push_back({*edge, a, b, 1, 60});
      }
      const EventId dep = ean.add_event(EventKind::Departure, a, spec.line, trip.id);
      times.push_back(spec.times[2 * i]);
      if (!trip.events.empty()) ean.add_activity(ActivityKind::Wait, trip.events.back(), dep, h.params.wait_min, h.params.wait_max + 60);
      const EventId arr = ean.add_event(EventKind::Arrival, b, spec.line, trip.id);
      times.push_back(spec.times[2 * i + 1]);
      ean.add_activity(ActivityKind::Drive, dep, arr, spec.drive_lower[i], spec.drive_lower[i] + 60, *edge);
      trip.events.push_back(dep);
      trip.events.push_back(arr);
    }
    ean.trips.push_back(trip);
  }
  LineId max_line = -1;
  for (const auto& [l, p] : line_paths) max_line = std::max(max_line, l);
  for (LineId l = 0; l <= max_line; ++l) {
    auto it = line_paths.find(l);
    ds.lines.push_back({l, it != line_paths.end() ? it->second : std::vector<StationId>{}, 1});
  }
  const Minutes T = h.params.period;
  for (const auto& a : ean.events) {
    if (a.kind != EventKind::Arrival) continue;
    for (const auto& d : ean.events) {
      if (d.kind != EventKind::Departure || d.station != a.station || d.line == a.line) continue;
      const Minutes gap = times[d.id] - times[a.id];
      if (gap >= h.params.min_transfer && gap <= h.params.min_transfer + T - 1) {
        ean.add_activity(ActivityKind::Transfer, a.id, d.id, h.params.min_transfer, h.params.min_transfer + T - 1);
      }
    }
  }
  ds.groups = h.groups;
  inst.timetable.horizon_periods = 1;
  inst.schedule.vehicle_capacity = h.params.vehicle_capacity;
  if (h.tours.empty()) {
    for (std::size_t t = 0; t < h.trips.size(); ++t) inst.schedule.tours.push_back({static_cast<TripId>(t)});
  } else {
    inst.schedule.tours = h.tours;
  }
  apply_schedule(ean, inst.schedule, ds.params);
  plan_instance_routes(inst, h.weights);
  return inst;
}

// Line 0 along stations 0..k with the given drive lower bounds and slacks.
// drive_slack[i] is added to drive i, wait_slack[i] to the wait before drive
// i + 1. One group of `weight` rides from station 0 to station k, earliest
// departure = first departure.
inline HandInstance chain(const std::vector<Minutes>& drive_lower, const std::vector<Minutes>& drive_slack, const std::vector<Minutes>& wait_slack,
                          int weight, Minutes start = 0) {
  HandInstance h;
  const auto k = drive_lower.size();
  h.stations = static_cast<int>(k) + 1;
  TripSpec t;
  t.line = 0;
  Minutes now = start;
  for (std::size_t i = 0; i < k; ++i) {
    t.stations.push_back(static_cast<StationId>(i));
    t.times.push_back(now);
    now += drive_lower[i] + drive_slack[i];
    t.times.push_back(now);
    if (i + 1 < k) now += h.params.wait_min + wait_slack[i];
  }
  t.stations.push_back(static_cast<StationId>(k));
  t.drive_lower = drive_lower;
  h.trips.push_back(t);
  h.groups.push_back({0, static_cast<StationId>(k), start, weight});
  return h;
}

// The chain A -> B -> C of the spec examples: drives of 10, wait 1.
inline HandInstance abc_chain(Minutes wait_slack = 0, int weight = 5) { return chain({10, 10}, {0, 0}, {wait_slack}, weight); }

// Random instance with at most `max_events` events and at most 3 groups.
inline HandInstance random_small(Rng& rng, int max_events = 12) {
  HandInstance h;
  h.stations = static_cast<int>(rng.uniform_int(3, 4));
  h.params.vehicle_capacity = static_cast<int>(rng.uniform_int(2, 12));
  h.params.turnaround_min = rng.uniform_int(0, 3);
  h.weights.transfer_penalty = rng.uniform_int(0, 10);
  h.weights.stranding_penalty = rng.uniform_int(30, 240);
  const int lines = static_cast<int>(rng.uniform_int(1, 3));
  int events = 0;
  for (int guard = 0; guard < 20 && events < max_events; ++guard) {
    const int drives = static_cast<int>(rng.uniform_int(1, 2));
    if (events + 2 * drives > max_events) break;
    TripSpec t;
    t.line = static_cast<LineId>(rng.uniform_int(0, lines - 1));
    std::vector<StationId> path{static_cast<StationId>(rng.uniform_int(0, h.stations - 1))};
    while (static_cast<int>(path.size()) <= drives) {
      StationId s = static_cast<StationId>(rng.uniform_int(0, h.stations - 1));
      if (std::find(path.begin(), path.end(), s) == path.end()) path.push_back(s);
    }
    // Trips of one line share the line's path (possibly reversed).
    for (const auto& o : h.trips) {
      if (o.line != t.line) continue;
      path = o.stations;
      if (rng.uniform01() < 0.5) std::reverse(path.begin(), path.end());
      break;
    }
    if (events + 2 * (static_cast<int>(path.size()) - 1) > max_events) continue;
    t.stations = path;
    Minutes now = rng.uniform_int(0, 25);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      const Minutes lower = rng.uniform_int(1, 6);
      t.drive_lower.push_back(lower);
      t.times.push_back(now);
      now += lower + rng.uniform_int(0, 3);
      t.times.push_back(now);
      now += h.params.wait_min + rng.uniform_int(0, 2);
    }
    events += static_cast<int>(t.times.size());
    h.trips.push_back(t);
  }
  // Tours: chain trips greedily where compatible, at random.
  std::vector<std::size_t> order(h.trips.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return h.trips[a].times.front() < h.trips[b].times.front(); });
  for (auto t : order) {
    bool placed = false;
    for (auto& tour : h.tours) {
      const auto& last = h.trips[static_cast<std::size_t>(tour.back())];
      if (last.stations.back() == h.trips[t].stations.front() && h.trips[t].times.front() - last.times.back() >= h.params.turnaround_min &&
          rng.uniform01() < 0.7) {
        tour.push_back(static_cast<TripId>(t));
        placed = true;
        break;
      }
    }
    if (!placed) h.tours.push_back({static_cast<TripId>(t)});
  }
  const int groups = static_cast<int>(rng.uniform_int(1, 3));
  for (int g = 0; g < groups; ++g) {
    PassengerGroup od;
    od.origin = static_cast<StationId>(rng.uniform_int(0, h.stations - 1));
    do {
      od.destination = static_cast<StationId>(rng.uniform_int(0, h.stations - 1));
    } while (od.destination == od.origin);
    od.earliest_departure = rng.uniform_int(0, 20);
    od.weight = static_cast<int>(rng.uniform_int(1, 5));
    h.groups.push_back(od);
  }
  return h;
}

inline DelayScenario random_scenario(const Instance& inst, Rng& rng) {
  DelayScenario s;
  for (const auto& t : inst.ean.trips) {
    if (rng.uniform01() < 0.4) s.source_delays.push_back({t.id, rng.uniform_int(0, 12)});
  }
  for (const auto& e : inst.dataset.edges) {
    if (rng.uniform01() < 0.2) {
      const Minutes a = rng.uniform_int(0, 30);
      s.edge_slowdowns.push_back({e.id, rng.uniform_int(0, 6), a, a + rng.uniform_int(0, 30)});
    }
  }
  for (const auto& st : inst.dataset.stations) {
    if (rng.uniform01() < 0.15) s.station_blockings.push_back({st.id, rng.uniform_int(0, 30), rng.uniform_int(0, 15)});
  }
  for (const auto& a : inst.ean.activities) {
    if (a.kind == ActivityKind::Drive && rng.uniform01() < 0.15) s.activity_delays.push_back({a.id, rng.uniform_int(0, 5)});
  }
  return s;
}

// ---------------------------------------------------------------------------
// Brute-force reference for propagation and simulation.
// ---------------------------------------------------------------------------

// Fixpoint of the realized-time equations: every event is recomputed from
// its inputs (schedule, source delay, incoming drive/wait/turnaround
// activities, station blockings) until no event changes.
inline std::vector<Minutes> brute_propagate(const Instance& inst, const DelayScenario& s) {
  const auto& ean = inst.ean;
  std::vector<Minutes> base = inst.timetable.times;
  for (const auto& [trip, d] : s.source_delays) base[ean.trips[trip].events.front()] += d;
  std::vector<Minutes> t = base;
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& e : ean.events) {
      Minutes v = base[e.id];
      for (const auto& a : ean.activities) {
        if (a.head != e.id || a.kind == ActivityKind::Transfer) continue;
        Minutes lower = a.lower;
        for (const auto& [aid, d] : s.activity_delays) {
          if (aid == a.id) lower += d;
        }
        if (a.kind == ActivityKind::Drive) {
          for (const auto& sd : s.edge_slowdowns) {
            if (sd.edge == a.edge && t[a.tail] >= sd.start && t[a.tail] < sd.end) lower += sd.extra;
          }
        }
        v = std::max(v, t[a.tail] + lower);
      }
      if (e.kind == EventKind::Departure) {
        for (bool moved = true; moved;) {
          moved = false;
          for (const auto& b : s.station_blockings) {
            if (b.station == e.station && b.duration > 0 && v >= b.start && v < b.start + b.duration) {
              v = b.start + b.duration;
              moved = true;
            }
          }
        }
      }
      if (v != t[e.id]) {
        t[e.id] = v;
        changed = true;
      }
    }
  }
  return t;
}

struct BruteRoute {
  std::vector<ActivityId> path;
  Minutes cost = 0;
  int transfers = 0;
  EventId final_event = kNoId;
};

// Every route from a departure at the origin (time >= earliest departure) to
// an arrival at the destination over drive, wait and feasible transfer
// activities with enough seats on every drive.
inline std::vector<BruteRoute> enumerate_routes(const Instance& inst, const PassengerGroup& od, const std::vector<Minutes>& t,
                                                const std::vector<std::int64_t>& seats, const UtilityWeights& w) {
  const auto& ean = inst.ean;
  std::vector<BruteRoute> out;
  std::vector<ActivityId> path;
  std::function<void(EventId, int)> dfs = [&](EventId e, int tr) {
    const auto& ev = ean.events[e];
    if (ev.kind == EventKind::Arrival && ev.station == od.destination && !path.empty()) {
      const Minutes cost = t[e] - od.earliest_departure + w.transfer_penalty * tr;
      if (cost <= w.stranding_penalty) out.push_back({path, cost, tr, e});
    }
    for (const auto& a : ean.activities) {
      if (a.tail != e) continue;
      int next = tr;
      if (a.kind == ActivityKind::Turnaround) continue;
      if (a.kind == ActivityKind::Drive && seats[a.id] < od.weight) continue;
      if (a.kind == ActivityKind::Transfer) {
        if (t[a.head] - t[a.tail] < a.lower) continue;
        ++next;
      }
      path.push_back(a.id);
      dfs(a.head, next);
      path.pop_back();
    }
  };
  for (const auto& ev : ean.events) {
    if (ev.kind == EventKind::Departure && ev.station == od.origin && t[ev.id] >= od.earliest_departure) dfs(ev.id, 0);
  }
  return out;
}

// Optimal routes under (cost, transfers, final event id). Several routes may
// tie; all are returned.
inline std::vector<BruteRoute> optimal_routes(const std::vector<BruteRoute>& all) {
  std::vector<BruteRoute> best;
  for (const auto& r : all) {
    if (best.empty()) {
      best.push_back(r);
      continue;
    }
    const auto& b = best.front();
    const auto key = std::make_tuple(r.cost, r.transfers, r.final_event);
    const auto bkey = std::make_tuple(b.cost, b.transfers, b.final_event);
    if (key < bkey) best = {r};
    else if (key == bkey) best.push_back(r);
  }
  return best;
}

struct BruteOutcome {
  std::vector<Minutes> planned;
  std::vector<Minutes> realized;
  std::vector<RouteStatus> status;
  std::int64_t aggregate = 0;

  bool operator==(const BruteOutcome&) const = default;
};

// Replays groups in FCFS order against the instance's planned routes; where
// the optimal reroute is not unique every tie is explored, so the result is
// the set of outcomes any tie-breaking rule could produce.
inline std::vector<BruteOutcome> brute_simulate(const Instance& inst, const DelayScenario& s, const UtilityWeights& w) {
  const auto& ean = inst.ean;
  const auto& ds = inst.dataset;
  const auto realized = brute_propagate(inst, s);
  const auto& sched = inst.timetable.times;
  std::vector<GroupId> order(ds.groups.size());
  for (std::size_t g = 0; g < order.size(); ++g) order[g] = static_cast<GroupId>(g);
  std::stable_sort(order.begin(), order.end(), [&](GroupId a, GroupId b) { return ds.groups[a].earliest_departure < ds.groups[b].earliest_departure; });
  auto perceived = [&](GroupId g, const std::vector<ActivityId>& p, const std::vector<Minutes>& t) {
    if (p.empty()) return w.stranding_penalty;
    int tr = 0;
    for (auto a : p) tr += ean.activities[a].kind == ActivityKind::Transfer;
    return t[ean.activities[p.back()].head] - ds.groups[g].earliest_departure + w.transfer_penalty * tr;
  };
  std::vector<BruteOutcome> results;
  BruteOutcome cur;
  cur.planned.assign(ds.groups.size(), 0);
  cur.realized.assign(ds.groups.size(), 0);
  cur.status.assign(ds.groups.size(), RouteStatus::Completed);
  std::vector<std::int64_t> seats(ean.activities.size(), inst.schedule.vehicle_capacity);
  auto take = [&](const std::vector<ActivityId>& p, int weight, int sign) {
    for (auto a : p) {
      if (ean.activities[a].kind == ActivityKind::Drive) seats[a] -= sign * weight;
    }
  };
  std::function<void(std::size_t)> step = [&](std::size_t k) {
    if (k == order.size()) {
      if (std::find(results.begin(), results.end(), cur) == results.end()) results.push_back(cur);
      return;
    }
    const GroupId g = order[k];
    const auto& od = ds.groups[g];
    const auto& plan = inst.routes[g].activities;
    const auto saved_agg = cur.aggregate;
    cur.planned[g] = perceived(g, plan, sched);
    auto finish = [&](Minutes real, RouteStatus st) {
      cur.realized[g] = real;
      cur.status[g] = st;
      cur.aggregate += od.weight * std::max<Minutes>(0, real - cur.planned[g]);
      step(k + 1);
      cur.aggregate = saved_agg;
    };
    if (plan.empty()) {
      finish(cur.planned[g], RouteStatus::Stranded);
      return;
    }
    bool ok = true;
    for (auto aid : plan) {
      const auto& a = ean.activities[aid];
      if (a.kind == ActivityKind::Transfer && realized[a.head] - realized[a.tail] < a.lower) ok = false;
      if (a.kind == ActivityKind::Drive && seats[aid] < od.weight) ok = false;
    }
    if (ok) {
      take(plan, od.weight, 1);
      finish(perceived(g, plan, realized), RouteStatus::Completed);
      take(plan, od.weight, -1);
      return;
    }
    const auto best = optimal_routes(enumerate_routes(inst, od, realized, seats, w));
    if (best.empty()) {
      finish(w.stranding_penalty, RouteStatus::Stranded);
      return;
    }
    std::set<std::vector<ActivityId>> drive_sets;
    for (const auto& r : best) {
      std::vector<ActivityId> drives;
      for (auto a : r.path) {
        if (ean.activities[a].kind == ActivityKind::Drive) drives.push_back(a);
      }
      if (!drive_sets.insert(drives).second) continue;
      take(r.path, od.weight, 1);
      finish(r.cost, RouteStatus::Rerouted);
      take(r.path, od.weight, -1);
    }
  };
  step(0);
  return results;
}

// Small generated grid instance (12 stations, 5 lines, 40 groups, 3 periods).
inline Instance small_grid_instance(std::uint64_t seed, const std::string& variant = "random:30/firstfit") {
  GridSpec g;
  g.rows = 3;
  g.cols = 4;
  g.lines = 5;
  g.demand.groups = 40;
  g.params.horizon_periods = 3;
  g.seed = seed;
  return build_instance(gen_grid(g), parse_variant(variant, seed), seed, UtilityWeights{});
}

}  // namespace tr_test
