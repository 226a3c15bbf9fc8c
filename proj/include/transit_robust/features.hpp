#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "transit_robust/common.hpp"
#include "transit_robust/network.hpp"
#include "transit_robust/simulation.hpp"

namespace transit_robust {

inline constexpr int kFeatureGroupCount = 9;

struct FeatureCaps {
  int traveltime_max = 240;
  int transfers_max = 10;
  int turnaround_max = 30;

  void validate() const {
    if (traveltime_max <= 0 || transfers_max <= 0 || turnaround_max <= 0) throw ValidationError("feature caps must be positive");
  }
};

// Position of one key-feature vector inside the concatenated input.
struct FeatureSegment {
  int feature = 0;  // 1..9
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct FeatureLayout {
  std::size_t stations = 0;
  std::size_t edges = 0;
  FeatureCaps caps;
  std::array<FeatureSegment, kFeatureGroupCount> segments{};

  static FeatureLayout make(std::size_t n, std::size_t m, const FeatureCaps& caps) {
    caps.validate();
    FeatureLayout l;
    l.stations = n;
    l.edges = m;
    l.caps = caps;
    const std::array<std::size_t, kFeatureGroupCount> lengths = {
        m, static_cast<std::size_t>(caps.traveltime_max), static_cast<std::size_t>(caps.transfers_max) + 1, n, n, n, n, n,
        static_cast<std::size_t>(caps.turnaround_max)};
    std::size_t off = 0;
    for (int f = 0; f < kFeatureGroupCount; ++f) {
      l.segments[f] = {f + 1, off, lengths[f]};
      off += lengths[f];
    }
    return l;
  }

  std::size_t size() const { return segments.back().offset + segments.back().length; }
  const FeatureSegment& segment(int feature) const { return segments.at(static_cast<std::size_t>(feature - 1)); }

  // (feature number 1..9, index within the feature) of input position i.
  std::pair<int, std::size_t> locate(std::size_t i) const {
    for (const auto& s : segments) {
      if (i >= s.offset && i < s.offset + s.length) return {s.feature, i - s.offset};
    }
    throw ValidationError("feature index " + std::to_string(i) + " outside layout");
  }

  bool operator==(const FeatureLayout& o) const {
    return stations == o.stations && edges == o.edges && caps.traveltime_max == o.caps.traveltime_max &&
           caps.transfers_max == o.caps.transfers_max && caps.turnaround_max == o.caps.turnaround_max;
  }
};

struct FeatureVector {
  std::vector<double> values;
  FeatureLayout layout;

  std::span<const double> feature(int f) const {
    const auto& s = layout.segment(f);
    return std::span<const double>(values).subspan(s.offset, s.length);
  }
};

// Key features of an instance evaluated on `times` with the instance's
// planned routes and loads held fixed:
//  F1 mean occupancy (percent) of the drives on each edge
//  F2 number of groups per perceived travel time (1..cap minutes, last bin >= cap)
//  F3 weighted share of passengers per transfer count (0..cap, last bin >= cap)
//  F4 mean wait slack per station        F5 mean transfer slack per station
//  F6 weighted share of transfers per station
//  F7 sum of frequencies of lines serving the station
//  F8 share of events per station
//  F9 number of trips per outgoing turnaround slack (0..cap-1, last bin >= cap-1)
inline FeatureVector extract_features(const Instance& inst, std::span<const Minutes> times, const FeatureCaps& caps,
                                      const UtilityWeights& weights) {
  const auto& ds = inst.dataset;
  const auto& ean = inst.ean;
  if (inst.routes.size() != ds.groups.size()) throw ValidationError("feature extraction needs planned routes for every group");
  if (times.size() != ean.events.size()) throw ValidationError("timetable size does not match the network");
  const std::size_t n = ds.stations.size();
  const std::size_t m = ds.edges.size();
  FeatureVector fv;
  fv.layout = FeatureLayout::make(n, m, caps);
  fv.values.assign(fv.layout.size(), 0.0);
  auto seg = [&](int f) { return std::span<double>(fv.values).subspan(fv.layout.segment(f).offset, fv.layout.segment(f).length); };

  // F1, F4, F5
  {
    auto f1 = seg(1), f4 = seg(4), f5 = seg(5);
    std::vector<double> drive_cnt(m, 0.0), wait_cnt(n, 0.0), transfer_cnt(n, 0.0);
    const double cap = static_cast<double>(inst.schedule.vehicle_capacity);
    for (const auto& a : ean.activities) {
      const StationId s = ean.events[a.head].station;
      switch (a.kind) {
        case ActivityKind::Drive:
          f1[a.edge] += 100.0 * static_cast<double>(a.passenger_load) / cap;
          drive_cnt[a.edge] += 1.0;
          break;
        case ActivityKind::Wait:
          f4[s] += static_cast<double>(times[a.head] - times[a.tail] - a.lower);
          wait_cnt[s] += 1.0;
          break;
        case ActivityKind::Transfer:
          f5[s] += static_cast<double>(times[a.head] - times[a.tail] - a.lower);
          transfer_cnt[s] += 1.0;
          break;
        case ActivityKind::Turnaround:
          break;
      }
    }
    for (std::size_t e = 0; e < m; ++e) f1[e] = drive_cnt[e] > 0 ? f1[e] / drive_cnt[e] : 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      f4[s] = wait_cnt[s] > 0 ? f4[s] / wait_cnt[s] : 0.0;
      f5[s] = transfer_cnt[s] > 0 ? f5[s] / transfer_cnt[s] : 0.0;
    }
  }

  // F2, F3, F6
  {
    auto f2 = seg(2), f3 = seg(3), f6 = seg(6);
    double total_weight = 0.0, total_transfers = 0.0;
    for (std::size_t g = 0; g < ds.groups.size(); ++g) {
      const auto& od = ds.groups[g];
      const auto& r = inst.routes[g];
      const double w = od.weight;
      total_weight += w;
      Minutes perceived = weights.stranding_penalty;
      int tr = 0;
      if (!r.activities.empty()) {
        for (ActivityId aid : r.activities) {
          const auto& a = ean.activities[aid];
          if (a.kind != ActivityKind::Transfer) continue;
          ++tr;
          f6[ean.events[a.tail].station] += w;
          total_transfers += w;
        }
        perceived = times[ean.activities[r.activities.back()].head] - od.earliest_departure + weights.transfer_penalty * tr;
      }
      const Minutes bin2 = std::clamp<Minutes>(perceived, 1, caps.traveltime_max) - 1;
      f2[static_cast<std::size_t>(bin2)] += 1.0;
      f3[static_cast<std::size_t>(std::min(tr, caps.transfers_max))] += w;
    }
    if (total_weight > 0) {
      for (auto& v : f3) v /= total_weight;
    }
    if (total_transfers > 0) {
      for (auto& v : f6) v /= total_transfers;
    }
  }

  // F7
  {
    auto f7 = seg(7);
    for (const auto& line : ds.lines) {
      std::vector<bool> seen(n, false);
      for (StationId s : line.station_path) {
        if (seen[s]) continue;
        seen[s] = true;
        f7[s] += line.frequency;
      }
    }
  }

  // F8
  {
    auto f8 = seg(8);
    for (const auto& e : ean.events) f8[e.station] += 1.0;
    if (!ean.events.empty()) {
      for (auto& v : f8) v /= static_cast<double>(ean.events.size());
    }
  }

  // F9
  {
    auto f9 = seg(9);
    for (const auto& a : ean.activities) {
      if (a.kind != ActivityKind::Turnaround) continue;
      const Minutes slack = std::max<Minutes>(0, times[a.head] - times[a.tail] - a.lower);
      f9[static_cast<std::size_t>(std::min<Minutes>(slack, caps.turnaround_max - 1))] += 1.0;
    }
  }
  return fv;
}

inline FeatureVector extract_features(const Instance& inst, const FeatureCaps& caps, const UtilityWeights& weights) {
  return extract_features(inst, inst.timetable.times, caps, weights);
}

// Per-column z-score with population standard deviation. Columns with zero
// spread are only centered.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t size() const { return mean.size(); }

  static Scaler fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ValidationError("cannot fit scaler on an empty matrix");
    const std::size_t d = rows.front().size();
    Scaler s;
    s.mean.assign(d, 0.0);
    s.stddev.assign(d, 0.0);
    for (const auto& r : rows) {
      if (r.size() != d) throw ValidationError("ragged feature matrix");
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
    }
    const double nrows = static_cast<double>(rows.size());
    for (auto& v : s.mean) v /= nrows;
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < d; ++j) s.stddev[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
    }
    // Columns constant up to rounding noise are only centered.
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(s.stddev[j] / nrows);
      s.stddev[j] = sd > 1e-9 * std::max(1.0, std::abs(s.mean[j])) ? sd : 0.0;
    }
    return s;
  }

  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != mean.size()) throw ValidationError("scaler expects " + std::to_string(mean.size()) + " columns, got " + std::to_string(x.size()));
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      out[j] = x[j] - mean[j];
      if (stddev[j] > 0.0) out[j] /= stddev[j];
    }
    return out;
  }
};

}  // namespace transit_robust
