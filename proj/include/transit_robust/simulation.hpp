#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "transit_robust/common.hpp"
#include "transit_robust/network.hpp"

namespace transit_robust {

struct EdgeSlowdown {
  EdgeId edge = kNoId;
  Minutes extra = 0;
  Minutes start = 0;  // window [start, end) on the realized departure time
  Minutes end = 0;
};

struct StationBlocking {
  StationId station = kNoId;
  Minutes start = 0;
  Minutes duration = 0;
};

// Source delays applied in one simulation run.
struct DelayScenario {
  std::vector<std::pair<TripId, Minutes>> source_delays;  // added at the trip's first departure
  std::vector<EdgeSlowdown> edge_slowdowns;
  std::vector<StationBlocking> station_blockings;
  std::vector<std::pair<ActivityId, Minutes>> activity_delays;  // extra drive time on single activities
  std::uint64_t seed = 0;

  bool empty() const {
    return source_delays.empty() && edge_slowdowns.empty() && station_blockings.empty() && activity_delays.empty();
  }
};

inline void validate_scenario(const DelayScenario& s, const Instance& inst) {
  for (const auto& [trip, d] : s.source_delays) {
    if (trip < 0 || static_cast<std::size_t>(trip) >= inst.ean.trips.size()) throw ValidationError("scenario: unknown trip " + std::to_string(trip));
    if (d < 0) throw ValidationError("scenario: negative source delay");
  }
  for (const auto& sd : s.edge_slowdowns) {
    if (sd.edge < 0 || static_cast<std::size_t>(sd.edge) >= inst.dataset.edges.size()) throw ValidationError("scenario: unknown edge " + std::to_string(sd.edge));
    if (sd.extra < 0 || sd.end < sd.start) throw ValidationError("scenario: invalid edge slowdown");
  }
  for (const auto& b : s.station_blockings) {
    if (b.station < 0 || static_cast<std::size_t>(b.station) >= inst.dataset.stations.size()) throw ValidationError("scenario: unknown station " + std::to_string(b.station));
    if (b.duration < 0) throw ValidationError("scenario: negative blocking duration");
  }
  for (const auto& [a, d] : s.activity_delays) {
    if (a < 0 || static_cast<std::size_t>(a) >= inst.ean.activities.size()) throw ValidationError("scenario: unknown activity " + std::to_string(a));
    if (d < 0) throw ValidationError("scenario: negative activity delay");
  }
}

// Perceived travel time = (arrival - earliest departure) + transfer_penalty * transfers.
// Routes whose perceived time would exceed `stranding_penalty` count as
// infeasible; stranded groups are charged the penalty.
struct UtilityWeights {
  Minutes transfer_penalty = 5;
  Minutes stranding_penalty = 240;
};

// Remaining seats per activity (only drive entries are consulted).
struct CapacityState {
  std::vector<std::int64_t> remaining;

  static CapacityState full(const EventActivityNetwork& ean, int capacity) {
    CapacityState c;
    c.remaining.assign(ean.activities.size(), capacity);
    return c;
  }
  void reserve(const EventActivityNetwork& ean, const std::vector<ActivityId>& path, int weight) {
    for (ActivityId a : path) {
      if (ean.activities[a].kind == ActivityKind::Drive) remaining[a] -= weight;
    }
  }
};

struct GroupOutcome {
  Minutes planned_perceived = 0;
  Minutes realized_perceived = 0;
  RouteStatus status = RouteStatus::Completed;
};

struct SimulationResult {
  std::vector<GroupOutcome> groups;  // indexed by group id
  std::int64_t aggregate_delay = 0;  // sum of weight * max(0, realized - planned)
};

// Per-instance precomputation shared by every simulation on the instance.
// Read-only after construction, so one Simulator may serve many threads.
class Simulator {
 public:
  Simulator(const Instance& inst, UtilityWeights weights) : inst_(&inst), weights_(weights) {
    const auto& ean = inst.ean;
    if (ean.outgoing.size() != ean.events.size()) throw ValidationError("network index not built");
    build_topological_order();
    trip_start_.assign(ean.events.size(), kNoId);
    for (const auto& t : ean.trips) trip_start_[t.first_departure()] = t.id;
    drives_by_edge_.assign(inst.dataset.edges.size(), {});
    for (const auto& a : ean.activities) {
      if (a.kind == ActivityKind::Drive && a.edge >= 0) drives_by_edge_[a.edge].push_back(a.id);
    }
    group_order_.resize(inst.dataset.groups.size());
    for (std::size_t g = 0; g < group_order_.size(); ++g) group_order_[g] = static_cast<GroupId>(g);
    std::stable_sort(group_order_.begin(), group_order_.end(), [&](GroupId a, GroupId b) {
      return inst.dataset.groups[a].earliest_departure < inst.dataset.groups[b].earliest_departure;
    });
  }

  const Instance& instance() const { return *inst_; }
  const UtilityWeights& weights() const { return weights_; }
  const std::vector<GroupId>& group_order() const { return group_order_; }
  const std::vector<ActivityId>& drives_on_edge(EdgeId e) const { return drives_by_edge_.at(e); }

  // Realized event times under the no-wait policy: along drive, wait and
  // turnaround activities realized(head) = max(scheduled(head),
  // realized(tail) + lower); transfers never propagate delay.
  std::vector<Minutes> propagate(const DelayScenario& scenario) const {
    const auto& ean = inst_->ean;
    const auto& sched = inst_->timetable.times;
    std::vector<Minutes> realized = sched;
    if (scenario.empty()) return realized;

    std::vector<Minutes> start_delay(ean.trips.size(), 0);
    for (const auto& [trip, d] : scenario.source_delays) start_delay.at(trip) += d;
    std::vector<Minutes> extra(ean.activities.size(), 0);
    for (const auto& [a, d] : scenario.activity_delays) extra.at(a) += d;
    std::vector<std::vector<const EdgeSlowdown*>> slow(scenario.edge_slowdowns.empty() ? 0 : inst_->dataset.edges.size());
    for (const auto& sd : scenario.edge_slowdowns) slow.at(sd.edge).push_back(&sd);
    std::vector<std::vector<const StationBlocking*>> blocks(scenario.station_blockings.empty() ? 0 : inst_->dataset.stations.size());
    for (const auto& b : scenario.station_blockings) blocks.at(b.station).push_back(&b);

    for (EventId e : topo_) {
      Minutes t = sched[e];
      if (trip_start_[e] != kNoId) t += start_delay[trip_start_[e]];
      for (ActivityId aid : ean.incoming[e]) {
        const auto& a = ean.activities[aid];
        if (a.kind == ActivityKind::Transfer) continue;
        const Minutes dep = realized[a.tail];
        Minutes lower = a.lower + extra[aid];
        if (a.kind == ActivityKind::Drive && !slow.empty()) {
          for (const auto* sd : slow[a.edge]) {
            if (dep >= sd->start && dep < sd->end) lower += sd->extra;
          }
        }
        t = std::max(t, dep + lower);
      }
      if (!blocks.empty() && ean.events[e].kind == EventKind::Departure) {
        bool moved = true;
        while (moved) {
          moved = false;
          for (const auto* b : blocks[ean.events[e].station]) {
            if (b->duration > 0 && t >= b->start && t < b->start + b->duration) {
              t = b->start + b->duration;
              moved = true;
            }
          }
        }
      }
      realized[e] = t;
    }
    return realized;
  }

  // Events sorted by (time, arrivals before departures, id): a topological
  // order of every drive, wait and feasible transfer activity.
  struct TimedView {
    std::vector<EventId> order;
    std::vector<Minutes> sorted_times;
  };

  TimedView make_view(std::span<const Minutes> times) const {
    const auto& ev = inst_->ean.events;
    TimedView v;
    v.order.resize(ev.size());
    for (std::size_t i = 0; i < ev.size(); ++i) v.order[i] = static_cast<EventId>(i);
    std::sort(v.order.begin(), v.order.end(), [&](EventId a, EventId b) {
      if (times[a] != times[b]) return times[a] < times[b];
      const int ka = ev[a].kind == EventKind::Arrival ? 0 : 1;
      const int kb = ev[b].kind == EventKind::Arrival ? 0 : 1;
      if (ka != kb) return ka < kb;
      return a < b;
    });
    v.sorted_times.resize(ev.size());
    for (std::size_t i = 0; i < ev.size(); ++i) v.sorted_times[i] = times[v.order[i]];
    return v;
  }

  // Scratch buffers for route searches; one per thread.
  class Router {
   public:
    explicit Router(const Simulator& sim)
        : sim_(&sim), best_(sim.inst_->ean.events.size(), 0), pred_(sim.inst_->ean.events.size(), kNoId),
          stamp_(sim.inst_->ean.events.size(), 0) {}

    // Minimizes perceived travel time over routes whose every drive activity
    // still has `weight` free seats. Ties: fewer transfers, then lower final
    // event id. Returns a Stranded route when nothing is feasible.
    PassengerRoute route(GroupId group, std::span<const Minutes> times, const TimedView& view, const CapacityState& cap) {
      const auto& inst = *sim_->inst_;
      const auto& ean = inst.ean;
      const auto& od = inst.dataset.groups.at(group);
      const auto& w = sim_->weights_;
      if (od.origin < 0 || static_cast<std::size_t>(od.origin) >= inst.dataset.stations.size() || od.destination < 0 ||
          static_cast<std::size_t>(od.destination) >= inst.dataset.stations.size()) {
        throw ValidationError("group " + std::to_string(group) + " has origin/destination outside the network");
      }
      ++cur_;
      const Minutes ed = od.earliest_departure;
      const Minutes limit = ed + w.stranding_penalty;
      auto begin = std::lower_bound(view.sorted_times.begin(), view.sorted_times.end(), ed) - view.sorted_times.begin();
      auto end = std::upper_bound(view.sorted_times.begin(), view.sorted_times.end(), limit) - view.sorted_times.begin();

      EventId best_event = kNoId;
      Minutes best_cost = 0;
      int best_tr = 0;
      for (auto pos = begin; pos < end; ++pos) {
        const EventId e = view.order[static_cast<std::size_t>(pos)];
        const auto& ev = ean.events[e];
        if (ev.kind == EventKind::Departure && ev.station == od.origin && times[e] >= ed) {
          if (stamp_[e] != cur_ || best_[e] > 0) {
            stamp_[e] = cur_;
            best_[e] = 0;
            pred_[e] = kNoId;
          }
        }
        if (stamp_[e] != cur_) continue;
        const int tr = best_[e];
        if (ev.kind == EventKind::Arrival && ev.station == od.destination) {
          const Minutes cost = times[e] - ed + w.transfer_penalty * tr;
          if (cost <= w.stranding_penalty &&
              (best_event == kNoId || cost < best_cost || (cost == best_cost && (tr < best_tr || (tr == best_tr && e < best_event))))) {
            best_event = e;
            best_cost = cost;
            best_tr = tr;
          }
        }
        for (ActivityId aid : ean.outgoing[e]) {
          const auto& a = ean.activities[aid];
          int next = tr;
          switch (a.kind) {
            case ActivityKind::Drive:
              if (cap.remaining[aid] < od.weight) continue;
              break;
            case ActivityKind::Wait:
              break;
            case ActivityKind::Transfer:
              if (times[a.head] - times[a.tail] < a.lower) continue;
              next = tr + 1;
              break;
            case ActivityKind::Turnaround:
              continue;
          }
          if (times[a.head] > limit) continue;
          if (stamp_[a.head] != cur_ || next < best_[a.head]) {
            stamp_[a.head] = cur_;
            best_[a.head] = next;
            pred_[a.head] = aid;
          }
        }
      }

      PassengerRoute r;
      r.group = group;
      if (best_event == kNoId) {
        r.status = RouteStatus::Stranded;
        return r;
      }
      for (EventId e = best_event; pred_[e] != kNoId; e = ean.activities[pred_[e]].tail) r.activities.push_back(pred_[e]);
      std::reverse(r.activities.begin(), r.activities.end());
      r.transfers = best_tr;
      r.planned_departure = times[ean.activities[r.activities.front()].tail];
      r.planned_arrival = times[best_event];
      r.realized_arrival = times[best_event];
      r.status = RouteStatus::Completed;
      return r;
    }

   private:
    const Simulator* sim_;
    std::vector<int> best_;
    std::vector<ActivityId> pred_;
    std::vector<std::uint32_t> stamp_;
    std::uint32_t cur_ = 0;
  };

  Minutes perceived(GroupId g, const PassengerRoute& r, std::span<const Minutes> times) const {
    if (r.activities.empty()) return weights_.stranding_penalty;
    const auto& ean = inst_->ean;
    return times[ean.activities[r.activities.back()].head] - inst_->dataset.groups[g].earliest_departure +
           weights_.transfer_penalty * count_transfers(ean, r.activities);
  }

  // Routes every group on `times` in first-come-first-served order of
  // earliest departure, reserving seats as it goes.
  std::vector<PassengerRoute> plan_routes(std::span<const Minutes> times) const {
    const auto& inst = *inst_;
    const TimedView view = make_view(times);
    CapacityState cap = CapacityState::full(inst.ean, inst.schedule.vehicle_capacity);
    Router router(*this);
    std::vector<PassengerRoute> routes(inst.dataset.groups.size());
    for (GroupId g : group_order_) {
      routes[g] = router.route(g, times, view, cap);
      cap.reserve(inst.ean, routes[g].activities, inst.dataset.groups[g].weight);
    }
    return routes;
  }

  // Propagates the scenario, then replays every group in FCFS order through
  // the seat-reservation oracle. A group keeps its planned route while every
  // planned transfer is still reachable and every planned vehicle has room;
  // otherwise it is rerouted with full knowledge of the realized timetable.
  SimulationResult simulate(const DelayScenario& scenario) const {
    const auto& inst = *inst_;
    const auto& ean = inst.ean;
    if (inst.routes.size() != inst.dataset.groups.size()) throw ValidationError("instance has no planned routes");
    const std::vector<Minutes> realized = propagate(scenario);
    const auto& sched = inst.timetable.times;

    SimulationResult res;
    res.groups.resize(inst.dataset.groups.size());
    CapacityState cap = CapacityState::full(ean, inst.schedule.vehicle_capacity);
    std::optional<TimedView> view;
    std::optional<Router> router;
    for (GroupId g : group_order_) {
      const auto& od = inst.dataset.groups[g];
      const auto& plan = inst.routes[g];
      auto& out = res.groups[g];
      out.planned_perceived = perceived(g, plan, sched);
      if (plan.activities.empty()) {
        out.realized_perceived = out.planned_perceived;
        out.status = RouteStatus::Stranded;
        continue;
      }
      bool ok = true;
      for (ActivityId aid : plan.activities) {
        const auto& a = ean.activities[aid];
        if (a.kind == ActivityKind::Transfer && realized[a.head] - realized[a.tail] < a.lower) ok = false;
        if (a.kind == ActivityKind::Drive && cap.remaining[aid] < od.weight) ok = false;
        if (!ok) break;
      }
      if (ok) {
        cap.reserve(ean, plan.activities, od.weight);
        out.realized_perceived = perceived(g, plan, realized);
        out.status = RouteStatus::Completed;
      } else {
        if (!view) {
          view.emplace(make_view(realized));
          router.emplace(*this);
        }
        PassengerRoute r = router->route(g, realized, *view, cap);
        if (r.status == RouteStatus::Stranded) {
          out.realized_perceived = weights_.stranding_penalty;
          out.status = RouteStatus::Stranded;
        } else {
          cap.reserve(ean, r.activities, od.weight);
          out.realized_perceived = perceived(g, r, realized);
          out.status = RouteStatus::Rerouted;
        }
      }
      res.aggregate_delay += static_cast<std::int64_t>(od.weight) * std::max<Minutes>(0, out.realized_perceived - out.planned_perceived);
    }
    return res;
  }

 private:
  void build_topological_order() {
    const auto& ean = inst_->ean;
    std::vector<int> indeg(ean.events.size(), 0);
    for (const auto& a : ean.activities) {
      if (a.kind != ActivityKind::Transfer) ++indeg[a.head];
    }
    std::vector<EventId> queue;
    queue.reserve(ean.events.size());
    for (std::size_t e = 0; e < ean.events.size(); ++e) {
      if (indeg[e] == 0) queue.push_back(static_cast<EventId>(e));
    }
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      for (ActivityId aid : ean.outgoing[queue[qi]]) {
        const auto& a = ean.activities[aid];
        if (a.kind == ActivityKind::Transfer) continue;
        if (--indeg[a.head] == 0) queue.push_back(a.head);
      }
    }
    if (queue.size() != ean.events.size()) throw ValidationError("cycle in the aperiodic activity graph");
    topo_ = std::move(queue);
  }

  const Instance* inst_;
  UtilityWeights weights_;
  std::vector<EventId> topo_;
  std::vector<TripId> trip_start_;
  std::vector<std::vector<ActivityId>> drives_by_edge_;
  std::vector<GroupId> group_order_;
};

inline std::vector<Minutes> propagate(const Instance& inst, const DelayScenario& scenario) {
  validate_scenario(scenario, inst);
  return Simulator(inst, UtilityWeights{}).propagate(scenario);
}

inline PassengerRoute route_passenger(const Instance& inst, GroupId group, std::span<const Minutes> times, const UtilityWeights& weights,
                                      const CapacityState& capacity) {
  Simulator sim(inst, weights);
  const auto view = sim.make_view(times);
  Simulator::Router router(sim);
  return router.route(group, times, view, capacity);
}

inline SimulationResult simulate(const Instance& inst, const DelayScenario& scenario, const UtilityWeights& weights) {
  validate_scenario(scenario, inst);
  return Simulator(inst, weights).simulate(scenario);
}

// Computes planned routes on the instance's own timetable and refreshes the
// activity loads.
inline void plan_instance_routes(Instance& inst, const UtilityWeights& weights) {
  inst.routes = Simulator(inst, weights).plan_routes(inst.timetable.times);
  inst.refresh_loads();
}

// Sum over groups of weight * perceived travel time, with routes held fixed.
inline std::int64_t total_perceived_time(const Instance& inst, std::span<const Minutes> times, const UtilityWeights& weights) {
  std::int64_t total = 0;
  for (std::size_t g = 0; g < inst.dataset.groups.size(); ++g) {
    const auto& r = inst.routes.at(g);
    Minutes p = weights.stranding_penalty;
    if (!r.activities.empty()) {
      p = times[inst.ean.activities[r.activities.back()].head] - inst.dataset.groups[g].earliest_departure +
          weights.transfer_penalty * count_transfers(inst.ean, r.activities);
    }
    total += static_cast<std::int64_t>(inst.dataset.groups[g].weight) * p;
  }
  return total;
}

}  // namespace transit_robust
