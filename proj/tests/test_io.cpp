#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"

using namespace transit_robust;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(Io, DoublesRoundTripExactly) {
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const double v = (rng.uniform01() - 0.5) * std::pow(10.0, static_cast<double>(rng.uniform_int(-12, 12)));
    EXPECT_EQ(io::parse_double(io::format_double(v), "x"), v);
  }
  EXPECT_THROW(io::parse_double("1.5x", "x"), ValidationError);
  EXPECT_THROW(io::parse_int("", "x"), ValidationError);
}

TEST(Io, DatasetRoundTrip) {
  TempDir dir("tr_io_dataset");
  GridSpec g;
  g.rows = 3;
  g.cols = 3;
  g.lines = 4;
  g.params.turnaround_max = 40;
  const auto ds = gen_grid(g);
  io::write_dataset(dir.path, ds);
  const auto back = io::read_dataset(dir.path);
  ASSERT_EQ(back.stations.size(), ds.stations.size());
  ASSERT_EQ(back.edges.size(), ds.edges.size());
  for (std::size_t e = 0; e < ds.edges.size(); ++e) {
    EXPECT_EQ(back.edges[e].from, ds.edges[e].from);
    EXPECT_EQ(back.edges[e].min_drive, ds.edges[e].min_drive);
    EXPECT_EQ(back.edges[e].max_drive, ds.edges[e].max_drive);
  }
  ASSERT_EQ(back.lines.size(), ds.lines.size());
  for (std::size_t l = 0; l < ds.lines.size(); ++l) EXPECT_EQ(back.lines[l].station_path, ds.lines[l].station_path);
  ASSERT_EQ(back.groups.size(), ds.groups.size());
  for (std::size_t i = 0; i < ds.groups.size(); ++i) {
    EXPECT_EQ(back.groups[i].origin, ds.groups[i].origin);
    EXPECT_EQ(back.groups[i].weight, ds.groups[i].weight);
    EXPECT_EQ(back.groups[i].earliest_departure, ds.groups[i].earliest_departure);
  }
  EXPECT_EQ(back.params.turnaround_max, std::optional<Minutes>(40));
  EXPECT_EQ(back.params.period, ds.params.period);
}

TEST(Io, InstanceRoundTripKeepsEverything) {
  TempDir dir("tr_io_instance");
  const auto inst = tr_test::small_grid_instance(3, "random:30/buffered:2");
  io::write_instance(dir.path / "inst", inst);
  const auto back = io::read_instance(dir.path / "inst");
  EXPECT_EQ(back.timetable.times, inst.timetable.times);
  EXPECT_EQ(back.schedule.tours, inst.schedule.tours);
  ASSERT_EQ(back.routes.size(), inst.routes.size());
  for (std::size_t g = 0; g < inst.routes.size(); ++g) EXPECT_EQ(back.routes[g].activities, inst.routes[g].activities);
  EXPECT_EQ(extract_features(back, FeatureCaps{}, UtilityWeights{}).values, extract_features(inst, FeatureCaps{}, UtilityWeights{}).values);
  RobustnessConfig rcfg;
  rcfg.rt4_replications = 2;
  EXPECT_EQ(evaluate_robustness(back, rcfg).raw, evaluate_robustness(inst, rcfg).raw);
  // Without routes.csv the routes are planned on load.
  fs::remove(dir.path / "inst" / "routes.csv");
  const auto planned = io::read_instance(dir.path / "inst");
  for (std::size_t g = 0; g < inst.routes.size(); ++g) EXPECT_EQ(planned.routes[g].activities, inst.routes[g].activities);
}

TEST(Io, InstanceErrors) {
  TempDir dir("tr_io_bad");
  EXPECT_THROW(io::read_instance(dir.path / "missing"), IoError);
  const auto inst = tr_test::build(tr_test::abc_chain());
  io::write_instance(dir.path / "a", inst);
  // Arrival before departure breaks the drive lower bound.
  write_file(dir.path / "a" / "timetable.csv", "event_id,time\n0,0\n1,5\n2,11\n3,21\n");
  EXPECT_THROW(io::read_instance(dir.path / "a"), ValidationError);
  io::write_instance(dir.path / "b", inst);
  write_file(dir.path / "b" / "activities.csv", "id,kind,tail,head,lower,upper,edge\n0,drive,0,9,10,70,0\n");
  EXPECT_THROW(io::read_instance(dir.path / "b"), ValidationError);
  io::write_instance(dir.path / "c", inst);
  write_file(dir.path / "c" / "routes.csv", "group_id,activity_sequence\n0,0 1 77\n");
  EXPECT_THROW(io::read_instance(dir.path / "c"), ValidationError);
}

TEST(Io, ScenarioRoundTrip) {
  TempDir dir("tr_io_scen");
  DelayScenario s;
  s.source_delays = {{0, 5}, {3, 2}};
  s.edge_slowdowns = {{1, 2, 0, 600}};
  s.station_blockings = {{2, 30, 15}};
  s.activity_delays = {{4, 7}};
  s.seed = 99;
  io::write_scenarios(dir.path / "s.jsonl", {s, DelayScenario{}});
  const auto back = io::read_scenarios(dir.path / "s.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].source_delays, s.source_delays);
  ASSERT_EQ(back[0].edge_slowdowns.size(), 1u);
  EXPECT_EQ(back[0].edge_slowdowns[0].end, 600);
  EXPECT_EQ(back[0].station_blockings[0].duration, 15);
  EXPECT_EQ(back[0].activity_delays, s.activity_delays);
  EXPECT_EQ(back[0].seed, 99u);
  EXPECT_TRUE(back[1].empty());
  write_file(dir.path / "bad.jsonl", "{\"source_delays\": [[1]]}\n");
  EXPECT_THROW(io::read_scenarios(dir.path / "bad.jsonl"), ValidationError);
}

TEST(Io, MatricesAndReference) {
  TempDir dir("tr_io_matrix");
  io::IdMatrix m;
  m.ids = {"a", "b"};
  m.columns = io::label_columns();
  m.rows = {{0.1, 1.0 / 3.0, 100.0, 0.0}, {2.5e-7, 42.0, 7.0, 1e300}};
  io::write_id_matrix(dir.path / "m.csv", m);
  const auto back = io::read_id_matrix(dir.path / "m.csv");
  EXPECT_EQ(back.ids, m.ids);
  EXPECT_EQ(back.columns, m.columns);
  EXPECT_EQ(back.rows, m.rows);
  write_file(dir.path / "ragged.csv", "instance_id,rt1\na,1,2\n");
  EXPECT_THROW(io::read_id_matrix(dir.path / "ragged.csv"), ValidationError);
  write_file(dir.path / "noid.csv", "x,rt1\na,1\n");
  EXPECT_THROW(io::read_id_matrix(dir.path / "noid.csv"), ValidationError);

  const TestValues ref{1.5, 2.0, 1.0 / 7.0, 9.0};
  io::write_reference(dir.path / "ref.json", ref);
  EXPECT_EQ(io::read_reference(dir.path / "ref.json"), ref);

  const auto layout = FeatureLayout::make(7, 11, FeatureCaps{});
  EXPECT_EQ(io::layout_from_json(io::layout_to_json(layout)), layout);
}

TEST(Io, TraceRoundTrip) {
  const auto inst = tr_test::build(tr_test::abc_chain());
  const auto trace = local_search(
      inst,
      [](const Instance& in, std::span<const Minutes> t) {
        double s = 0.0;
        for (const auto& a : in.ean.activities) s -= static_cast<double>(t[a.head] - t[a.tail] - a.lower);
        return TestValues{s, 0.5, 0.25, 0.0};
      },
      SearchConfig{});
  const auto back = io::trace_from_json(nlohmann::json::parse(io::trace_to_json(trace).dump()));
  EXPECT_EQ(back.accepted_timetables, trace.accepted_timetables);
  EXPECT_EQ(back.accepted_iterations, trace.accepted_iterations);
  EXPECT_EQ(back.accepted_estimates, trace.accepted_estimates);
  EXPECT_EQ(back.start_utility, trace.start_utility);
  EXPECT_THROW(io::trace_from_json(nlohmann::json::parse("{\"accepted\": 3}")), ValidationError);
}
