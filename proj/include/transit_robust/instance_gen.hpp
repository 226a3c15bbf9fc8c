#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "transit_robust/common.hpp"
#include "transit_robust/features.hpp"
#include "transit_robust/network.hpp"
#include "transit_robust/parallel.hpp"
#include "transit_robust/rng.hpp"
#include "transit_robust/robustness.hpp"
#include "transit_robust/simulation.hpp"

namespace transit_robust {

struct DemandSpec {
  int groups = 300;
  int weight_min = 1;
  int weight_max = 10;
  Minutes departure_from = 30;
  Minutes departure_to = 300;
};

struct GridSpec {
  int rows = 8;
  int cols = 10;
  Minutes drive_min_lo = 2;
  Minutes drive_min_hi = 6;
  Minutes drive_spread_lo = 2;  // max_drive - min_drive
  Minutes drive_spread_hi = 4;
  int lines = 30;
  int extra_line_edges_lo = 4;
  int extra_line_edges_hi = 8;
  int frequency_lo = 1;
  int frequency_hi = 1;
  DemandSpec demand{1676, 1, 1, 30, 300};
  NetworkParams params;
  std::uint64_t seed = 1;
};

struct RingSpec {
  int rings = 8;
  int spokes = 20;
  Minutes drive_min_lo = 2;
  Minutes drive_min_hi = 6;
  Minutes drive_spread_lo = 2;
  Minutes drive_spread_hi = 4;
  int lines = 37;
  int extra_line_edges_lo = 4;
  int extra_line_edges_hi = 8;
  int frequency_lo = 1;
  int frequency_hi = 1;
  DemandSpec demand{2022, 1, 1, 30, 300};
  NetworkParams params;
  std::uint64_t seed = 1;
};

namespace detail {

inline void check_connected(const Dataset& ds) {
  const auto n = ds.stations.size();
  if (n == 0) throw ValidationError("dataset has no stations");
  std::vector<std::vector<StationId>> adj(n);
  for (const auto& e : ds.edges) {
    adj[e.from].push_back(e.to);
    adj[e.to].push_back(e.from);
  }
  std::vector<char> seen(n, 0);
  std::vector<StationId> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const StationId s = stack.back();
    stack.pop_back();
    for (StationId t : adj[s]) {
      if (!seen[t]) {
        seen[t] = 1;
        ++count;
        stack.push_back(t);
      }
    }
  }
  if (count != n) throw ValidationError("generated network is disconnected (" + std::to_string(count) + " of " + std::to_string(n) + " stations reachable)");
}

inline void add_edge(Dataset& ds, StationId a, StationId b, Rng& rng, Minutes lo, Minutes hi, Minutes spread_lo, Minutes spread_hi) {
  NetworkEdge e;
  e.id = static_cast<EdgeId>(ds.edges.size());
  e.from = a;
  e.to = b;
  e.min_drive = rng.uniform_int(lo, hi);
  e.max_drive = e.min_drive + rng.uniform_int(spread_lo, spread_hi);
  ds.edges.push_back(e);
}

// Random simple path of up to `len` edges starting at a random station.
inline std::vector<StationId> random_simple_path(const std::vector<std::vector<StationId>>& adj, int len, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<StationId> path{static_cast<StationId>(rng.uniform_int(std::size_t{0}, adj.size() - 1))};
    std::vector<char> used(adj.size(), 0);
    used[path[0]] = 1;
    while (static_cast<int>(path.size()) <= len) {
      std::vector<StationId> options;
      for (StationId t : adj[path.back()]) {
        if (!used[t]) options.push_back(t);
      }
      if (options.empty()) break;
      const StationId next = options[rng.uniform_int(std::size_t{0}, options.size() - 1)];
      used[next] = 1;
      path.push_back(next);
    }
    if (path.size() >= 3 || attempt == 99) return path;
  }
  return {};
}

inline void add_line(Dataset& ds, std::vector<StationId> path, int freq) {
  Line l;
  l.id = static_cast<LineId>(ds.lines.size());
  l.station_path = std::move(path);
  l.frequency = freq;
  ds.lines.push_back(std::move(l));
}

inline void add_extra_lines(Dataset& ds, int target, int len_lo, int len_hi, int f_lo, int f_hi, Rng& rng) {
  std::vector<std::vector<StationId>> adj(ds.stations.size());
  for (const auto& e : ds.edges) {
    adj[e.from].push_back(e.to);
    adj[e.to].push_back(e.from);
  }
  while (static_cast<int>(ds.lines.size()) < target) {
    auto path = random_simple_path(adj, static_cast<int>(rng.uniform_int(len_lo, len_hi)), rng);
    if (path.size() < 2) continue;
    add_line(ds, std::move(path), static_cast<int>(rng.uniform_int(f_lo, f_hi)));
  }
}

// Gravity-style demand: endpoints drawn proportionally to station degree.
inline void add_demand(Dataset& ds, const DemandSpec& spec, Rng& rng) {
  if (spec.groups < 0 || spec.weight_min < 1 || spec.weight_max < spec.weight_min || spec.departure_to < spec.departure_from) {
    throw ValidationError("invalid demand spec");
  }
  std::vector<double> cum(ds.stations.size(), 0.0);
  for (const auto& e : ds.edges) {
    cum[e.from] += 1.0;
    cum[e.to] += 1.0;
  }
  std::partial_sum(cum.begin(), cum.end(), cum.begin());
  auto draw = [&] {
    const double u = rng.uniform01() * cum.back();
    return static_cast<StationId>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
  };
  for (int g = 0; g < spec.groups; ++g) {
    PassengerGroup pg;
    pg.origin = draw();
    do {
      pg.destination = draw();
    } while (pg.destination == pg.origin);
    pg.earliest_departure = rng.uniform_int(spec.departure_from, spec.departure_to);
    pg.weight = static_cast<int>(rng.uniform_int(spec.weight_min, spec.weight_max));
    ds.groups.push_back(pg);
  }
}

}  // namespace detail

// rows x cols grid; one line per row and per column covers every edge, the
// remaining lines are random simple paths.
inline Dataset gen_grid(const GridSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1 || spec.rows * spec.cols < 2) throw ValidationError("grid needs at least 2 stations");
  Rng rng(spec.seed);
  Dataset ds;
  ds.params = spec.params;
  auto sid = [&](int r, int c) { return static_cast<StationId>(r * spec.cols + c); };
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) ds.stations.push_back({sid(r, c), "S" + std::to_string(r) + "_" + std::to_string(c)});
  }
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c + 1 < spec.cols; ++c) detail::add_edge(ds, sid(r, c), sid(r, c + 1), rng, spec.drive_min_lo, spec.drive_min_hi, spec.drive_spread_lo, spec.drive_spread_hi);
  }
  for (int c = 0; c < spec.cols; ++c) {
    for (int r = 0; r + 1 < spec.rows; ++r) detail::add_edge(ds, sid(r, c), sid(r + 1, c), rng, spec.drive_min_lo, spec.drive_min_hi, spec.drive_spread_lo, spec.drive_spread_hi);
  }
  detail::check_connected(ds);
  auto freq = [&] { return static_cast<int>(rng.uniform_int(spec.frequency_lo, spec.frequency_hi)); };
  if (spec.cols > 1) {
    for (int r = 0; r < spec.rows; ++r) {
      std::vector<StationId> p;
      for (int c = 0; c < spec.cols; ++c) p.push_back(sid(r, c));
      detail::add_line(ds, std::move(p), freq());
    }
  }
  if (spec.rows > 1) {
    for (int c = 0; c < spec.cols; ++c) {
      std::vector<StationId> p;
      for (int r = 0; r < spec.rows; ++r) p.push_back(sid(r, c));
      detail::add_line(ds, std::move(p), freq());
    }
  }
  detail::add_extra_lines(ds, spec.lines, spec.extra_line_edges_lo, spec.extra_line_edges_hi, spec.frequency_lo, spec.frequency_hi, rng);
  detail::add_demand(ds, spec.demand, rng);
  const auto problems = validate_dataset(ds);
  if (!problems.empty()) throw ValidationError("generated grid invalid: " + problems.front());
  return ds;
}

// Concentric rings around a center station joined by radial spokes. Each ring
// is served by two half-ring lines, each pair of opposite spokes by one line
// through the center.
inline Dataset gen_ring(const RingSpec& spec) {
  if (spec.rings < 1 || spec.spokes < 3 || spec.spokes % 2 != 0) throw ValidationError("ring needs >= 1 ring and an even spoke count >= 4");
  Rng rng(spec.seed);
  Dataset ds;
  ds.params = spec.params;
  ds.stations.push_back({0, "C"});
  auto sid = [&](int ring, int spoke) { return static_cast<StationId>(1 + ring * spec.spokes + spoke); };
  for (int r = 0; r < spec.rings; ++r) {
    for (int s = 0; s < spec.spokes; ++s) ds.stations.push_back({sid(r, s), "R" + std::to_string(r) + "_" + std::to_string(s)});
  }
  for (int r = 0; r < spec.rings; ++r) {
    for (int s = 0; s < spec.spokes; ++s) detail::add_edge(ds, sid(r, s), sid(r, (s + 1) % spec.spokes), rng, spec.drive_min_lo, spec.drive_min_hi, spec.drive_spread_lo, spec.drive_spread_hi);
  }
  for (int s = 0; s < spec.spokes; ++s) {
    detail::add_edge(ds, 0, sid(0, s), rng, spec.drive_min_lo, spec.drive_min_hi, spec.drive_spread_lo, spec.drive_spread_hi);
    for (int r = 0; r + 1 < spec.rings; ++r) detail::add_edge(ds, sid(r, s), sid(r + 1, s), rng, spec.drive_min_lo, spec.drive_min_hi, spec.drive_spread_lo, spec.drive_spread_hi);
  }
  detail::check_connected(ds);
  auto freq = [&] { return static_cast<int>(rng.uniform_int(spec.frequency_lo, spec.frequency_hi)); };
  const int half = spec.spokes / 2;
  for (int r = 0; r < spec.rings; ++r) {
    for (int part = 0; part < 2; ++part) {
      std::vector<StationId> p;
      for (int s = part * half; s <= part * half + half; ++s) p.push_back(sid(r, s % spec.spokes));
      detail::add_line(ds, std::move(p), freq());
    }
  }
  for (int s = 0; s < half; ++s) {
    std::vector<StationId> p;
    for (int r = spec.rings - 1; r >= 0; --r) p.push_back(sid(r, s));
    p.push_back(0);
    for (int r = 0; r < spec.rings; ++r) p.push_back(sid(r, s + half));
    detail::add_line(ds, std::move(p), freq());
  }
  detail::add_extra_lines(ds, spec.lines, spec.extra_line_edges_lo, spec.extra_line_edges_hi, spec.frequency_lo, spec.frequency_hi, rng);
  detail::add_demand(ds, spec.demand, rng);
  const auto problems = validate_dataset(ds);
  if (!problems.empty()) throw ValidationError("generated ring invalid: " + problems.front());
  return ds;
}

// ---------------------------------------------------------------------------
// Timetables, vehicle schedules, variants
// ---------------------------------------------------------------------------

enum class TimetableStrategy { EarliestFeasible, RandomSlack, UniformBuffer };
enum class ScheduleStrategy { FirstFit, Buffered };

struct VariantSpec {
  TimetableStrategy timetable = TimetableStrategy::EarliestFeasible;
  int slack_budget = 0;   // RandomSlack: total minutes distributed over drive/wait activities
  Minutes buffer = 0;     // UniformBuffer: per activity
  ScheduleStrategy schedule = ScheduleStrategy::FirstFit;
  Minutes turnaround_extra = 0;  // Buffered: required turnaround slack
  std::uint64_t seed = 1;

  void validate() const {
    if (slack_budget < 0 || buffer < 0 || turnaround_extra < 0) throw ValidationError("variant budgets must be >= 0");
  }

  std::string name() const {
    std::string s;
    switch (timetable) {
      case TimetableStrategy::EarliestFeasible: s = "earliest"; break;
      case TimetableStrategy::RandomSlack: s = "random:" + std::to_string(slack_budget); break;
      case TimetableStrategy::UniformBuffer: s = "uniform:" + std::to_string(buffer); break;
    }
    s += "/";
    s += schedule == ScheduleStrategy::FirstFit ? "firstfit" : "buffered:" + std::to_string(turnaround_extra);
    return s;
  }
};

// Parses "earliest/firstfit", "random:60/buffered:3", "uniform:1/firstfit".
inline VariantSpec parse_variant(const std::string& text, std::uint64_t seed) {
  const auto slash = text.find('/');
  const std::string tt = text.substr(0, slash);
  const std::string vs = slash == std::string::npos ? "firstfit" : text.substr(slash + 1);
  auto split = [](const std::string& s) -> std::pair<std::string, std::optional<long long>> {
    const auto colon = s.find(':');
    if (colon == std::string::npos) return {s, std::nullopt};
    try {
      return {s.substr(0, colon), std::stoll(s.substr(colon + 1))};
    } catch (const std::exception&) {
      throw ValidationError("bad variant parameter in '" + s + "'");
    }
  };
  VariantSpec v;
  v.seed = seed;
  const auto [tname, tparam] = split(tt);
  if (tname == "earliest") {
    v.timetable = TimetableStrategy::EarliestFeasible;
  } else if (tname == "random" && tparam) {
    v.timetable = TimetableStrategy::RandomSlack;
    v.slack_budget = static_cast<int>(*tparam);
  } else if (tname == "uniform" && tparam) {
    v.timetable = TimetableStrategy::UniformBuffer;
    v.buffer = *tparam;
  } else {
    throw ValidationError("unknown timetabling strategy '" + tt + "'");
  }
  const auto [sname, sparam] = split(vs);
  if (sname == "firstfit") {
    v.schedule = ScheduleStrategy::FirstFit;
  } else if (sname == "buffered" && sparam) {
    v.schedule = ScheduleStrategy::Buffered;
    v.turnaround_extra = *sparam;
  } else {
    throw ValidationError("unknown scheduling strategy '" + vs + "'");
  }
  v.validate();
  return v;
}

inline std::vector<std::string> default_variant_names() {
  return {"earliest/firstfit",   "earliest/buffered:5", "uniform:1/firstfit",  "uniform:2/buffered:3",
          "random:40/firstfit",  "random:100/buffered:2", "random:200/firstfit", "uniform:1/buffered:8"};
}

// Periodic timetable: every trip starts at a random line/direction offset plus
// r*T/f for repetition r; drive and wait activities get lower bound plus the
// strategy's slack. Transfer bounds span a full period, so any offsets are
// feasible.
inline PeriodicTimetable gen_timetable(const PeriodicNetwork& net, const VariantSpec& v, std::uint64_t seed) {
  v.validate();
  Rng rng(seed);
  const auto& ean = net.ean;
  const Minutes T = net.period;
  std::vector<ActivityId> chain_out(ean.events.size(), kNoId);
  std::vector<Minutes> extra(ean.activities.size(), 0);
  std::vector<ActivityId> chain;
  for (const auto& a : ean.activities) {
    if (a.kind == ActivityKind::Drive || a.kind == ActivityKind::Wait) {
      chain_out[a.tail] = a.id;
      chain.push_back(a.id);
    }
  }
  auto room = [&](ActivityId id) {
    const auto& a = ean.activities[id];
    return a.upper - a.lower - extra[id];
  };
  if (v.timetable == TimetableStrategy::UniformBuffer) {
    for (ActivityId id : chain) extra[id] = std::min(v.buffer, room(id));
  } else if (v.timetable == TimetableStrategy::RandomSlack) {
    std::vector<ActivityId> open;
    for (ActivityId id : chain) {
      if (room(id) > 0) open.push_back(id);
    }
    for (int u = 0; u < v.slack_budget && !open.empty(); ++u) {
      const auto k = rng.uniform_int(std::size_t{0}, open.size() - 1);
      ++extra[open[k]];
      if (room(open[k]) == 0) {
        open[k] = open.back();
        open.pop_back();
      }
    }
  }
  // One offset per (line, direction); repetitions are spread evenly.
  std::map<std::pair<LineId, int>, Minutes> offset;
  PeriodicTimetable tt;
  tt.period = T;
  tt.times.assign(ean.events.size(), kNoTime);
  for (std::size_t t = 0; t < ean.trips.size(); ++t) {
    const auto& info = net.trip_info[t];
    const auto key = std::make_pair(info.line, info.direction);
    if (!offset.count(key)) offset[key] = rng.uniform_int(Minutes{0}, T - 1);
    int freq = 0;
    for (const auto& ti : net.trip_info) {
      if (ti.line == info.line && ti.direction == info.direction) ++freq;
    }
    Minutes time = offset[key] + static_cast<Minutes>(info.repetition) * T / std::max(1, freq);
    for (EventId e : ean.trips[t].events) {
      tt.times[e] = floor_mod(time, T);
      if (chain_out[e] != kNoId) time += ean.activities[chain_out[e]].lower + extra[chain_out[e]];
    }
  }
  const auto viol = validate_periodic(tt, ean);
  if (!viol.empty()) throw ValidationError("generated timetable violates activity " + std::to_string(viol.front().activity));
  return tt;
}

// Greedy chaining in order of trip start: each trip joins the first tour
// whose last trip ends at its start station early enough (turnaround_min plus
// the strategy's extra); otherwise it opens a new tour.
inline VehicleSchedule gen_schedule(const EventActivityNetwork& ean, const std::vector<Minutes>& times, const NetworkParams& params,
                                    const VariantSpec& v) {
  v.validate();
  const Minutes need = params.turnaround_min + (v.schedule == ScheduleStrategy::Buffered ? v.turnaround_extra : 0);
  std::vector<TripId> order(ean.trips.size());
  std::iota(order.begin(), order.end(), TripId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](TripId a, TripId b) { return times[ean.trips[a].first_departure()] < times[ean.trips[b].first_departure()]; });
  VehicleSchedule sch;
  sch.vehicle_capacity = params.vehicle_capacity;
  for (TripId t : order) {
    const auto& trip = ean.trips[t];
    const StationId s = ean.events[trip.first_departure()].station;
    const Minutes start = times[trip.first_departure()];
    bool placed = false;
    for (auto& tour : sch.tours) {
      const auto& last = ean.trips[tour.back()];
      if (ean.events[last.last_arrival()].station != s) continue;
      const Minutes gap = start - times[last.last_arrival()];
      if (gap < need || (params.turnaround_max && gap > *params.turnaround_max)) continue;
      tour.push_back(t);
      placed = true;
      break;
    }
    if (!placed) sch.tours.push_back({t});
  }
  return sch;
}

// Full instance: periodic network, timetable, roll-out, schedule, routes.
inline Instance build_instance(const Dataset& ds, const PeriodicNetwork& net, const VariantSpec& v, std::uint64_t seed, const UtilityWeights& weights,
                               std::string id = {}) {
  const auto ptt = gen_timetable(net, v, seed);
  auto rolled = roll_out(net, ptt, ds.params.horizon_periods);
  Instance inst;
  inst.id = std::move(id);
  inst.dataset = ds;
  inst.ean = std::move(rolled.ean);
  inst.timetable = std::move(rolled.timetable);
  inst.schedule = gen_schedule(inst.ean, inst.timetable.times, ds.params, v);
  apply_schedule(inst.ean, inst.schedule, ds.params);
  const auto problems = validate_schedule(inst.schedule, inst.ean, inst.timetable.times, ds.params);
  if (!problems.empty()) throw ValidationError("generated schedule invalid: " + problems.front());
  plan_instance_routes(inst, weights);
  return inst;
}

inline Instance build_instance(const Dataset& ds, const VariantSpec& v, std::uint64_t seed, const UtilityWeights& weights, std::string id = {}) {
  return build_instance(ds, build_periodic_network(ds), v, seed, weights, std::move(id));
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

struct CorpusEntry {
  std::string id;
  std::size_t variant = 0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
};

struct Corpus {
  std::vector<CorpusEntry> entries;
  std::vector<std::vector<double>> features;
  std::vector<TestValues> raw;
  NormalizationResult labels;
  FeatureLayout layout;
};

inline std::uint64_t replicate_seed(const VariantSpec& v, std::size_t replicate) { return mix_seed(v.seed, replicate); }

inline std::string corpus_instance_id(std::size_t variant, std::size_t replicate) {
  return "v" + std::to_string(variant) + "_r" + std::to_string(replicate);
}

// One instance per variant x replicate, labelled with the true robustness
// tests and normalized across the corpus. Instances are produced in parallel;
// results are stored by index, so the output does not depend on `threads`.
// `on_instance` (if set) sees each built instance; it may be called
// concurrently.
inline Corpus gen_corpus(const Dataset& ds, const std::vector<VariantSpec>& variants, std::size_t replicates, const RobustnessConfig& rcfg,
                         const FeatureCaps& caps, unsigned threads = 1,
                         const std::function<void(std::size_t, const Instance&)>& on_instance = {}) {
  if (variants.empty()) throw ValidationError("corpus needs at least one variant");
  rcfg.validate();
  const auto net = build_periodic_network(ds);
  Corpus c;
  c.layout = FeatureLayout::make(ds.stations.size(), ds.edges.size(), caps);
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (std::size_t r = 0; r < replicates; ++r) c.entries.push_back({corpus_instance_id(v, r), v, r, replicate_seed(variants[v], r)});
  }
  struct Row {
    std::vector<double> features;
    TestValues raw{};
  };
  const auto rows = parallel_map(c.entries.size(), threads, [&](std::size_t i) {
    const auto& e = c.entries[i];
    const Instance inst = build_instance(ds, net, variants[e.variant], e.seed, rcfg.weights, e.id);
    if (on_instance) on_instance(i, inst);
    Row row;
    row.features = extract_features(inst, caps, rcfg.weights).values;
    row.raw = evaluate_robustness(inst, rcfg, 1).raw;
    return row;
  });
  for (const auto& r : rows) {
    c.features.push_back(r.features);
    c.raw.push_back(r.raw);
  }
  if (!c.raw.empty()) c.labels = normalize(c.raw);
  return c;
}

}  // namespace transit_robust
