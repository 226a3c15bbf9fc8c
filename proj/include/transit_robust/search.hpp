#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "transit_robust/common.hpp"
#include "transit_robust/features.hpp"
#include "transit_robust/network.hpp"
#include "transit_robust/parallel.hpp"
#include "transit_robust/robustness.hpp"
#include "transit_robust/simulation.hpp"
#include "transit_robust/surrogate.hpp"

namespace transit_robust {

struct SearchConfig {
  int neighborhood_per_kind = 20;  // N; the neighborhood has up to 4N members
  Minutes slack_increment = 1;
  int rerouting_interval = 10;
  double utility_budget = 0.10;  // max relative increase of total perceived time
  int max_iterations = 100;
  TestValues objective_weights{1.0, 1.0, 1.0, 1.0};
  FeatureCaps caps;
  UtilityWeights weights;

  void validate() const {
    if (neighborhood_per_kind < 1) throw ValidationError("neighborhood size N must be >= 1");
    if (slack_increment < 1) throw ValidationError("slack increment must be >= 1");
    if (rerouting_interval < 1) throw ValidationError("rerouting interval must be >= 1");
    if (utility_budget < 0.0) throw ValidationError("utility budget must be >= 0");
    if (max_iterations < 0) throw ValidationError("max_iterations must be >= 0");
  }

  double objective(const TestValues& v) const {
    double s = 0.0;
    for (std::size_t t = 0; t < kTestCount; ++t) s += objective_weights[t] * v[t];
    return s;
  }
};

// Smallest-key activities per kind: key = slack / max(1, load) for drive, wait
// and transfer activities, key = slack for turnarounds. Ties by activity id.
inline std::vector<ActivityId> build_neighborhood(const Instance& inst, std::span<const Minutes> times, int n_per_kind) {
  struct Keyed {
    double key;
    ActivityId id;
  };
  std::array<std::vector<Keyed>, kActivityKindCount> by_kind;
  for (const auto& a : inst.ean.activities) {
    const auto slack = static_cast<double>(times[a.head] - times[a.tail] - a.lower);
    const double key = a.kind == ActivityKind::Turnaround ? slack : slack / static_cast<double>(std::max<std::int64_t>(1, a.passenger_load));
    by_kind[static_cast<std::size_t>(a.kind)].push_back({key, a.id});
  }
  std::vector<ActivityId> out;
  for (auto& v : by_kind) {
    const auto take = std::min<std::size_t>(v.size(), static_cast<std::size_t>(n_per_kind));
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(take), v.end(),
                      [](const Keyed& a, const Keyed& b) { return a.key < b.key || (a.key == b.key && a.id < b.id); });
    for (std::size_t i = 0; i < take; ++i) out.push_back(v[i].id);
  }
  return out;
}

struct SlackInjection {
  std::vector<Minutes> times;
  std::size_t shifted_events = 0;
  bool crossed_horizon = false;  // some shifted event moved past horizon_end
};

// Delays the head of `activity` by delta and pushes every successor whose
// lower bound would be violated, until downstream slack absorbs the shift.
// Upper bounds are not checked.
inline SlackInjection inject_slack(const EventActivityNetwork& ean, std::span<const Minutes> times, ActivityId activity, Minutes delta,
                                   Minutes horizon_end = kUnbounded) {
  if (activity < 0 || static_cast<std::size_t>(activity) >= ean.activities.size()) throw ValidationError("unknown activity " + std::to_string(activity));
  if (delta < 0) throw ValidationError("slack increment must be >= 0");
  SlackInjection out;
  out.times.assign(times.begin(), times.end());
  if (delta == 0) return out;
  std::vector<char> moved(ean.events.size(), 0);
  std::vector<EventId> work;
  const EventId start = ean.activities[activity].head;
  out.times[start] += delta;
  moved[start] = 1;
  work.push_back(start);
  while (!work.empty()) {
    const EventId e = work.back();
    work.pop_back();
    if (out.times[e] > horizon_end) out.crossed_horizon = true;
    for (ActivityId aid : ean.outgoing[e]) {
      const auto& a = ean.activities[aid];
      const Minutes need = out.times[e] + a.lower;
      if (out.times[a.head] < need) {
        out.times[a.head] = need;
        moved[a.head] = 1;
        work.push_back(a.head);
      }
    }
  }
  out.shifted_events = static_cast<std::size_t>(std::count(moved.begin(), moved.end(), 1));
  return out;
}

// End of the planning day: the later of K periods and the latest scheduled
// event.
inline Minutes horizon_end(const Instance& inst) {
  Minutes end = static_cast<Minutes>(inst.timetable.horizon_periods) * inst.dataset.params.period;
  for (Minutes t : inst.timetable.times) end = std::max(end, t);
  return end;
}

// Robustness estimate of an instance evaluated on the given timetable with
// the instance's current routes and loads.
using RobustnessOracle = std::function<TestValues(const Instance&, std::span<const Minutes>)>;

inline RobustnessOracle mlp_oracle(const MlpModel& model, const FeatureCaps& caps, const UtilityWeights& weights) {
  return [&model, caps, weights](const Instance& inst, std::span<const Minutes> times) {
    const auto layout = FeatureLayout::make(inst.dataset.stations.size(), inst.dataset.edges.size(), caps);
    if (layout.size() != model.input_size()) {
      throw ValidationError("oracle expects " + std::to_string(model.input_size()) + " features, instance yields " + std::to_string(layout.size()));
    }
    const auto fv = extract_features(inst, times, caps, weights);
    const auto y = predict(model, fv.values);
    if (y.size() != kTestCount) throw ValidationError("oracle must emit 4 values");
    return TestValues{y[0], y[1], y[2], y[3]};
  };
}

struct SearchIteration {
  int iteration = 0;
  bool accepted = false;
  ActivityId activity = kNoId;  // accepted neighbor
  TestValues estimate{};       // of the current solution after this iteration
  double objective = 0.0;
  std::int64_t utility = 0;  // total weighted perceived time of the current solution
  bool rerouted = false;
  std::size_t candidates = 0;
  std::size_t gated = 0;  // neighbors rejected by the utility budget
};

struct SearchTrace {
  TestValues start_estimate{};
  double start_objective = 0.0;
  std::int64_t start_utility = 0;
  std::vector<SearchIteration> iterations;
  // Timetable after each accepted move; entry 0 is the start solution.
  std::vector<std::vector<Minutes>> accepted_timetables;
  std::vector<int> accepted_iterations;  // iteration of each accepted timetable (0 for the start)
  std::vector<TestValues> accepted_estimates;
  Instance final_solution;
};

// Hill climbing over slack injections. At the end of every
// rerouting_interval-th iteration all passengers are rerouted on the current
// timetable and the current solution is re-estimated; in between, routes and
// loads stay fixed. A worse estimate after
// rerouting is kept (no backtracking).
inline SearchTrace local_search(const Instance& start, const RobustnessOracle& oracle, const SearchConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  if (start.routes.size() != start.dataset.groups.size()) throw ValidationError("local search needs planned routes");
  SearchTrace trace;
  Instance cur = start;
  const Minutes end = horizon_end(start);
  trace.start_utility = total_perceived_time(cur, cur.timetable.times, cfg.weights);
  const auto budget = static_cast<double>(trace.start_utility) * (1.0 + cfg.utility_budget);
  TestValues est = oracle(cur, cur.timetable.times);
  double obj = cfg.objective(est);
  trace.start_estimate = est;
  trace.start_objective = obj;
  trace.accepted_timetables.push_back(cur.timetable.times);
  trace.accepted_iterations.push_back(0);
  trace.accepted_estimates.push_back(est);

  struct Eval {
    bool feasible = false;
    bool gated = false;
    double objective = 0.0;
    TestValues estimate{};
    std::int64_t utility = 0;
  };

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    SearchIteration rec;
    rec.iteration = it;
    const auto nb = build_neighborhood(cur, cur.timetable.times, cfg.neighborhood_per_kind);
    rec.candidates = nb.size();
    const auto evals = parallel_map(nb.size(), threads, [&](std::size_t i) {
      Eval ev;
      auto inj = inject_slack(cur.ean, cur.timetable.times, nb[i], cfg.slack_increment, end);
      if (inj.crossed_horizon) return ev;
      ev.utility = total_perceived_time(cur, inj.times, cfg.weights);
      if (static_cast<double>(ev.utility) > budget) {
        ev.gated = true;
        return ev;
      }
      ev.estimate = oracle(cur, inj.times);
      ev.objective = cfg.objective(ev.estimate);
      ev.feasible = true;
      return ev;
    });
    std::size_t best = nb.size();
    for (std::size_t i = 0; i < evals.size(); ++i) {
      if (evals[i].gated) ++rec.gated;
      if (!evals[i].feasible) continue;
      if (best == nb.size() || evals[i].objective < evals[best].objective) best = i;
    }
    if (best != nb.size() && evals[best].objective < obj) {
      cur.timetable.times = inject_slack(cur.ean, cur.timetable.times, nb[best], cfg.slack_increment, end).times;
      est = evals[best].estimate;
      obj = evals[best].objective;
      rec.accepted = true;
      rec.activity = nb[best];
      trace.accepted_timetables.push_back(cur.timetable.times);
      trace.accepted_iterations.push_back(it);
      trace.accepted_estimates.push_back(est);
    }
    if (it % cfg.rerouting_interval == 0) {
      plan_instance_routes(cur, cfg.weights);
      est = oracle(cur, cur.timetable.times);
      obj = cfg.objective(est);
      rec.rerouted = true;
    }
    rec.estimate = est;
    rec.objective = obj;
    rec.utility = total_perceived_time(cur, cur.timetable.times, cfg.weights);
    trace.iterations.push_back(rec);
    if (!rec.accepted) break;
  }
  trace.final_solution = std::move(cur);
  return trace;
}

struct RealPoint {
  int iteration = 0;
  TestValues estimate{};
  TestValues real{};  // normalized against the reference
  TestValues real_raw{};
  double estimated_objective = 0.0;
  double real_objective = 0.0;
};

struct RealEvaluation {
  std::vector<RealPoint> series;
  double estimated_improvement = 0.0;  // relative, (start - final) / start
  double real_improvement = 0.0;
  double gap = 0.0;  // estimated_improvement - real_improvement
};

// Reroutes every accepted solution of the trace and runs the robustness tests
// on it; values are normalized with the reference used for the oracle labels.
inline RealEvaluation reevaluate_real(const SearchTrace& trace, const Instance& start, const RobustnessConfig& rcfg, const TestValues& reference,
                                      const SearchConfig& scfg, unsigned threads = 1) {
  RealEvaluation out;
  for (std::size_t k = 0; k < trace.accepted_timetables.size(); ++k) {
    Instance inst = start;
    inst.timetable.times = trace.accepted_timetables[k];
    plan_instance_routes(inst, rcfg.weights);
    const auto rep = evaluate_robustness(inst, rcfg, threads);
    RealPoint p;
    p.iteration = trace.accepted_iterations[k];
    p.estimate = trace.accepted_estimates[k];
    p.real_raw = rep.raw;
    p.real = normalize_with_reference(rep.raw, reference);
    p.estimated_objective = scfg.objective(p.estimate);
    p.real_objective = scfg.objective(p.real);
    out.series.push_back(p);
  }
  if (!out.series.empty()) {
    const auto& a = out.series.front();
    const auto& b = out.series.back();
    auto rel = [](double from, double to) { return from != 0.0 ? (from - to) / from : 0.0; };
    out.estimated_improvement = rel(a.estimated_objective, b.estimated_objective);
    out.real_improvement = rel(a.real_objective, b.real_objective);
    out.gap = out.estimated_improvement - out.real_improvement;
  }
  return out;
}

}  // namespace transit_robust
