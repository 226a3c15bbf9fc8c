#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "transit_robust/common.hpp"
#include "transit_robust/network.hpp"
#include "transit_robust/parallel.hpp"
#include "transit_robust/rng.hpp"
#include "transit_robust/simulation.hpp"

namespace transit_robust {

inline constexpr std::size_t kTestCount = 4;
using TestValues = std::array<double, kTestCount>;

// Discrete delay distribution on {0, 1, ..., size-1} minutes.
struct DelayDistribution {
  std::vector<double> pmf{1.0};

  // With probability `prob` a delay occurs; its size is geometric on
  // {1, 2, ...} with the given mean and all mass beyond `cap` moved to `cap`.
  static DelayDistribution parametric(double prob, double mean, int cap) {
    if (prob < 0.0 || prob > 1.0) throw ValidationError("delay probability must lie in [0, 1]");
    if (cap < 0) throw ValidationError("delay cap must be >= 0");
    DelayDistribution d;
    d.pmf.assign(static_cast<std::size_t>(cap) + 1, 0.0);
    if (cap == 0 || prob == 0.0) {
      d.pmf[0] = 1.0;
      return d;
    }
    if (mean < 1.0) throw ValidationError("geometric delay mean must be >= 1");
    const double q = 1.0 / mean;
    d.pmf[0] = 1.0 - prob;
    double tail = prob;
    for (int k = 1; k < cap; ++k) {
      const double pk = prob * q * std::pow(1.0 - q, k - 1);
      d.pmf[static_cast<std::size_t>(k)] = pk;
      tail -= pk;
    }
    d.pmf[static_cast<std::size_t>(cap)] = std::max(0.0, tail);
    return d;
  }

  static DelayDistribution point_mass(int minutes) {
    DelayDistribution d;
    d.pmf.assign(static_cast<std::size_t>(minutes) + 1, 0.0);
    d.pmf.back() = 1.0;
    return d;
  }

  static DelayDistribution zero() { return point_mass(0); }

  void validate() const {
    if (pmf.empty()) throw ValidationError("delay distribution is empty");
    double sum = 0.0;
    for (double p : pmf) {
      if (!(p >= 0.0)) throw ValidationError("delay distribution has a negative entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("delay distribution not normalized (sum " + std::to_string(sum) + ")");
  }

  bool is_zero() const {
    for (std::size_t k = 1; k < pmf.size(); ++k) {
      if (pmf[k] > 0.0) return false;
    }
    return true;
  }

  // Inverse-CDF draw.
  Minutes sample(Rng& rng) const {
    const double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
      acc += pmf[k];
      if (u < acc) return static_cast<Minutes>(k);
    }
    return static_cast<Minutes>(pmf.size() - 1);
  }
};

enum class BlockAnchor { FirstDeparture, DayStart };

struct RobustnessConfig {
  Minutes rt1_start_delay = 5;
  Minutes rt2_extra = 2;
  Minutes rt3_block = 15;
  BlockAnchor rt3_anchor = BlockAnchor::FirstDeparture;
  int rt4_replications = 10;
  DelayDistribution rt4_drive = DelayDistribution::parametric(0.1, 2.0, 15);
  DelayDistribution rt4_trip_start = DelayDistribution::parametric(0.2, 3.0, 20);
  std::uint64_t master_seed = 1;
  UtilityWeights weights;

  void validate() const {
    if (rt1_start_delay < 0 || rt2_extra < 0 || rt3_block < 0 || rt4_replications < 0) throw ValidationError("robustness parameters must be >= 0");
    rt4_drive.validate();
    rt4_trip_start.validate();
    if (weights.transfer_penalty < 0 || weights.stranding_penalty < 0) throw ValidationError("utility weights must be >= 0");
  }
};

struct RobustnessReport {
  TestValues raw{};
  std::array<std::vector<double>, kTestCount> per_simulation;
};

// RT-1: one simulation per vehicle tour with a start delay at the tour's
// first departure; sum of aggregate delays.
inline double rt1(const Simulator& sim, const RobustnessConfig& cfg, unsigned threads, std::vector<double>* breakdown = nullptr) {
  const auto& tours = sim.instance().schedule.tours;
  std::vector<double> vals(tours.size(), 0.0);
  if (cfg.rt1_start_delay > 0) {
    vals = parallel_map(tours.size(), threads, [&](std::size_t v) {
      if (tours[v].empty()) return 0.0;
      DelayScenario s;
      s.source_delays.push_back({tours[v].front(), cfg.rt1_start_delay});
      return static_cast<double>(sim.simulate(s).aggregate_delay);
    });
  }
  if (breakdown) *breakdown = vals;
  return std::accumulate(vals.begin(), vals.end(), 0.0);
}

// RT-2: one simulation per network edge; every drive on it takes rt2_extra
// longer all day.
inline double rt2(const Simulator& sim, const RobustnessConfig& cfg, unsigned threads, std::vector<double>* breakdown = nullptr) {
  const auto m = sim.instance().dataset.edges.size();
  std::vector<double> vals(m, 0.0);
  if (cfg.rt2_extra > 0) {
    vals = parallel_map(m, threads, [&](std::size_t e) {
      if (sim.drives_on_edge(static_cast<EdgeId>(e)).empty()) return 0.0;
      DelayScenario s;
      s.edge_slowdowns.push_back({static_cast<EdgeId>(e), cfg.rt2_extra, std::numeric_limits<Minutes>::min() / 4, kUnbounded});
      return static_cast<double>(sim.simulate(s).aggregate_delay);
    });
  }
  if (breakdown) *breakdown = vals;
  return std::accumulate(vals.begin(), vals.end(), 0.0);
}

// RT-3: one simulation per station blocking its departures for rt3_block
// minutes, anchored at the station's first scheduled departure.
inline double rt3(const Simulator& sim, const RobustnessConfig& cfg, unsigned threads, std::vector<double>* breakdown = nullptr) {
  const auto& inst = sim.instance();
  const auto n = inst.dataset.stations.size();
  std::vector<Minutes> first_dep(n, kUnbounded);
  for (const auto& e : inst.ean.events) {
    if (e.kind == EventKind::Departure) first_dep[e.station] = std::min(first_dep[e.station], inst.timetable.times[e.id]);
  }
  std::vector<double> vals(n, 0.0);
  if (cfg.rt3_block > 0) {
    vals = parallel_map(n, threads, [&](std::size_t s) {
      if (first_dep[s] == kUnbounded) return 0.0;
      const Minutes start = cfg.rt3_anchor == BlockAnchor::FirstDeparture ? first_dep[s] : 0;
      DelayScenario sc;
      sc.station_blockings.push_back({static_cast<StationId>(s), start, cfg.rt3_block});
      return static_cast<double>(sim.simulate(sc).aggregate_delay);
    });
  }
  if (breakdown) *breakdown = vals;
  return std::accumulate(vals.begin(), vals.end(), 0.0);
}

// Scenario of RT-4 replication r: every drive activity and every trip start
// draws an independent delay; the stream seed is mix(master_seed, r).
inline DelayScenario rt4_scenario(const Instance& inst, const RobustnessConfig& cfg, std::size_t replication) {
  DelayScenario s;
  s.seed = mix_seed(cfg.master_seed, replication);
  Rng rng(s.seed);
  for (const auto& a : inst.ean.activities) {
    if (a.kind != ActivityKind::Drive) continue;
    const Minutes d = cfg.rt4_drive.sample(rng);
    if (d > 0) s.activity_delays.push_back({a.id, d});
  }
  for (const auto& t : inst.ean.trips) {
    const Minutes d = cfg.rt4_trip_start.sample(rng);
    if (d > 0) s.source_delays.push_back({t.id, d});
  }
  return s;
}

// RT-4: mean aggregate delay over rt4_replications random scenarios.
inline double rt4(const Simulator& sim, const RobustnessConfig& cfg, unsigned threads, std::vector<double>* breakdown = nullptr) {
  cfg.rt4_drive.validate();
  cfg.rt4_trip_start.validate();
  const auto reps = static_cast<std::size_t>(cfg.rt4_replications);
  std::vector<double> vals(reps, 0.0);
  if (!(cfg.rt4_drive.is_zero() && cfg.rt4_trip_start.is_zero())) {
    vals = parallel_map(reps, threads, [&](std::size_t r) {
      return static_cast<double>(sim.simulate(rt4_scenario(sim.instance(), cfg, r)).aggregate_delay);
    });
  }
  if (breakdown) *breakdown = vals;
  if (reps == 0) return 0.0;
  return std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(reps);
}

inline RobustnessReport evaluate_robustness(const Instance& inst, const RobustnessConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  const Simulator sim(inst, cfg.weights);
  RobustnessReport rep;
  rep.raw[0] = rt1(sim, cfg, threads, &rep.per_simulation[0]);
  rep.raw[1] = rt2(sim, cfg, threads, &rep.per_simulation[1]);
  rep.raw[2] = rt3(sim, cfg, threads, &rep.per_simulation[2]);
  rep.raw[3] = rt4(sim, cfg, threads, &rep.per_simulation[3]);
  return rep;
}

struct NormalizationResult {
  std::vector<TestValues> normalized;
  TestValues reference{};  // per-test maximum raw value
  std::vector<std::string> warnings;
};

// Scales each test column so its worst (largest) raw value maps to 100.
inline NormalizationResult normalize(const std::vector<TestValues>& raw) {
  if (raw.empty()) throw ValidationError("normalize: empty instance set");
  NormalizationResult out;
  for (std::size_t t = 0; t < kTestCount; ++t) {
    double mx = 0.0;
    for (const auto& r : raw) {
      if (r[t] < 0.0) throw ValidationError("normalize: negative raw value");
      mx = std::max(mx, r[t]);
    }
    out.reference[t] = mx;
    if (mx == 0.0) out.warnings.push_back("test " + std::to_string(t + 1) + ": all raw values are zero");
  }
  out.normalized.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (std::size_t t = 0; t < kTestCount; ++t) {
      out.normalized[i][t] = out.reference[t] > 0.0 ? (raw[i][t] == out.reference[t] ? 100.0 : 100.0 * raw[i][t] / out.reference[t]) : 0.0;
    }
  }
  return out;
}

// Scales raw values against a stored reference (values above the reference
// exceed 100).
inline TestValues normalize_with_reference(const TestValues& raw, const TestValues& reference) {
  TestValues out{};
  for (std::size_t t = 0; t < kTestCount; ++t) out[t] = reference[t] > 0.0 ? 100.0 * raw[t] / reference[t] : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Flat key=value configuration files ('#' starts a comment).
// ---------------------------------------------------------------------------

inline std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(path + ":" + std::to_string(lineno) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

namespace detail {
inline std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::string tok;
  std::istringstream ss(s);
  while (std::getline(ss, tok, ' ')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}
}  // namespace detail

// Recognized keys: rt1_start_delay, rt2_extra, rt3_block, rt3_anchor
// (first_departure|day_start), rt4_replications, master_seed,
// transfer_penalty, stranding_penalty, rt4_drive_prob/_mean/_cap,
// rt4_trip_prob/_mean/_cap, rt4_drive_pmf, rt4_trip_pmf (space-separated
// probabilities of 0, 1, 2, ... minutes; overrides the parametric keys).
inline RobustnessConfig robustness_config_from(const std::map<std::string, std::string>& kv) {
  RobustnessConfig c;
  double dp = 0.1, dm = 2.0, tp = 0.2, tm = 3.0;
  int dc = 15, tc = 20;
  for (const auto& [k, v] : kv) {
    try {
      if (k == "rt1_start_delay") c.rt1_start_delay = std::stoll(v);
      else if (k == "rt2_extra") c.rt2_extra = std::stoll(v);
      else if (k == "rt3_block") c.rt3_block = std::stoll(v);
      else if (k == "rt3_anchor") {
        if (v == "first_departure") c.rt3_anchor = BlockAnchor::FirstDeparture;
        else if (v == "day_start") c.rt3_anchor = BlockAnchor::DayStart;
        else throw ValidationError("rt3_anchor must be first_departure or day_start");
      } else if (k == "rt4_replications") c.rt4_replications = std::stoi(v);
      else if (k == "master_seed") c.master_seed = std::stoull(v);
      else if (k == "transfer_penalty") c.weights.transfer_penalty = std::stoll(v);
      else if (k == "stranding_penalty") c.weights.stranding_penalty = std::stoll(v);
      else if (k == "rt4_drive_prob") dp = std::stod(v);
      else if (k == "rt4_drive_mean") dm = std::stod(v);
      else if (k == "rt4_drive_cap") dc = std::stoi(v);
      else if (k == "rt4_trip_prob") tp = std::stod(v);
      else if (k == "rt4_trip_mean") tm = std::stod(v);
      else if (k == "rt4_trip_cap") tc = std::stoi(v);
      else if (k == "rt4_drive_pmf" || k == "rt4_trip_pmf") {
      } else throw ValidationError("unknown robustness config key '" + k + "'");
    } catch (const std::invalid_argument&) {
      throw ValidationError("bad value for config key '" + k + "': " + v);
    } catch (const std::out_of_range&) {
      throw ValidationError("value out of range for config key '" + k + "'");
    }
  }
  c.rt4_drive = DelayDistribution::parametric(dp, dm, dc);
  c.rt4_trip_start = DelayDistribution::parametric(tp, tm, tc);
  if (auto it = kv.find("rt4_drive_pmf"); it != kv.end()) c.rt4_drive.pmf = detail::parse_doubles(it->second);
  if (auto it = kv.find("rt4_trip_pmf"); it != kv.end()) c.rt4_trip_start.pmf = detail::parse_doubles(it->second);
  c.validate();
  return c;
}

inline RobustnessConfig load_robustness_config(const std::string& path) { return robustness_config_from(read_key_values(path)); }

}  // namespace transit_robust
