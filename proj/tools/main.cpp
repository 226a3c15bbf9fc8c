#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "transit_robust/transit_robust.hpp"

namespace fs = std::filesystem;
using namespace transit_robust;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitUsage = 64;

std::uint64_t fnv1a(const std::string& data, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

bool is_run_manifest(const fs::path& p) {
  const auto name = p.filename().string();
  return name == "run_manifest.json" || name.ends_with(".manifest.json");
}

// Content hash of a file or of every regular file under a directory, run
// manifests (which carry timings) excluded.
std::string hash_path(const fs::path& p) {
  std::uint64_t h = 1469598103934665603ULL;
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p)) {
      if (e.is_regular_file() && !is_run_manifest(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      h = fnv1a(fs::relative(f, p).generic_string(), h);
      h = fnv1a(io::read_text(f), h);
    }
  } else if (fs::exists(p)) {
    h = fnv1a(io::read_text(p), h);
  } else {
    return "missing";
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Run {
  std::string command;
  json config = json::object();
  json inputs = json::object();
  json seeds = json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void input(const std::string& name, const fs::path& p) { inputs[name] = {{"path", p.string()}, {"hash", hash_path(p)}}; }

  // Manifest goes next to the primary output; timings make it the only
  // non-reproducible file a run writes.
  void finish(const fs::path& manifest) const {
    json j;
    j["subcommand"] = command;
    j["tool_version"] = kVersion;
    j["config"] = config;
    j["inputs"] = inputs;
    j["seeds"] = seeds;
    j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    io::write_json(manifest, j);
  }
};

fs::path manifest_for_file(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

struct ThreadOpt {
  unsigned threads = 0;
  void add(CLI::App* app) { app->add_option("--threads", threads, "Worker threads (default: TRANSIT_ROBUST_THREADS or all cores)"); }
  unsigned resolve() const { return resolve_threads(threads > 0 ? std::optional<unsigned>(threads) : std::nullopt); }
};

struct CapsOpt {
  FeatureCaps caps;
  void add(CLI::App* app) {
    app->add_option("--traveltime-max", caps.traveltime_max, "Travel time cap (minutes)");
    app->add_option("--transfers-max", caps.transfers_max, "Transfer count cap");
    app->add_option("--turnaround-max", caps.turnaround_max, "Turnaround slack cap (minutes)");
  }
  json to_json() const { return {{"traveltime_max", caps.traveltime_max}, {"transfers_max", caps.transfers_max}, {"turnaround_max", caps.turnaround_max}}; }
};

struct TrainOpt {
  TrainConfig cfg;
  void add(CLI::App* app) {
    app->add_option("--depth", cfg.depth, "Hidden layers");
    app->add_option("--width", cfg.width, "Neurons per hidden layer");
    app->add_option("--phase1-epochs", cfg.phase1_epochs);
    app->add_option("--phase1-batch", cfg.phase1_batch);
    app->add_option("--phase2-max-epochs", cfg.phase2_max_epochs);
    app->add_option("--phase2-batch", cfg.phase2_batch);
    app->add_option("--patience", cfg.patience);
    app->add_option("--validation-fraction", cfg.validation_fraction);
    app->add_option("--learning-rate", cfg.adam.learning_rate);
    app->add_option("--seed", cfg.seed, "Initialization and split seed");
  }
  json to_json() const {
    return {{"depth", cfg.depth},
            {"width", cfg.width},
            {"phase1_epochs", cfg.phase1_epochs},
            {"phase1_batch", cfg.phase1_batch},
            {"phase2_max_epochs", cfg.phase2_max_epochs},
            {"phase2_batch", cfg.phase2_batch},
            {"patience", cfg.patience},
            {"validation_fraction", cfg.validation_fraction},
            {"learning_rate", cfg.adam.learning_rate},
            {"seed", cfg.seed}};
  }
};

RobustnessConfig load_config(const std::string& path) { return path.empty() ? RobustnessConfig{} : load_robustness_config(path); }

json config_json(const RobustnessConfig& c) {
  return {{"rt1_start_delay", c.rt1_start_delay},
          {"rt2_extra", c.rt2_extra},
          {"rt3_block", c.rt3_block},
          {"rt3_anchor", c.rt3_anchor == BlockAnchor::FirstDeparture ? "first_departure" : "day_start"},
          {"rt4_replications", c.rt4_replications},
          {"rt4_drive_pmf", c.rt4_drive.pmf},
          {"rt4_trip_pmf", c.rt4_trip_start.pmf},
          {"master_seed", c.master_seed},
          {"transfer_penalty", c.weights.transfer_penalty},
          {"stranding_penalty", c.weights.stranding_penalty}};
}

// Aligns label rows to feature rows by instance id.
std::vector<std::vector<double>> align_labels(const io::IdMatrix& features, const io::IdMatrix& labels) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < labels.ids.size(); ++i) pos[labels.ids[i]] = i;
  std::vector<std::vector<double>> out;
  for (const auto& id : features.ids) {
    auto it = pos.find(id);
    if (it == pos.end()) throw ValidationError("no label row for instance '" + id + "'");
    out.push_back(labels.rows[it->second]);
  }
  return out;
}

std::vector<std::vector<double>> subset(const std::vector<std::vector<double>>& rows, const std::vector<std::size_t>& idx) {
  std::vector<std::vector<double>> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(rows[i]);
  return out;
}

json report_json(const EvaluationReport& r) {
  return {{"rows", r.rows}, {"mae", r.mae}, {"stddev", r.stddev}, {"mean_mae", r.mean_mae}, {"within_1", r.within_1}, {"within_5", r.within_5}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robustness evaluation, surrogate learning and slack search for public transport timetables"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Run run;

  // gen-dataset ------------------------------------------------------------
  auto* gd = app.add_subcommand("gen-dataset", "Generate an artificial grid or ring dataset");
  std::string gd_kind = "grid", gd_out;
  GridSpec grid;
  RingSpec ring;
  int gd_groups = -1, gd_lines = -1, gd_horizon = -1, gd_wmin = -1, gd_wmax = -1;
  std::uint64_t gd_seed = 1;
  gd->add_option("--kind", gd_kind, "grid or ring")->check(CLI::IsMember({"grid", "ring"}));
  gd->add_option("--out", gd_out, "Output dataset directory")->required();
  gd->add_option("--seed", gd_seed);
  gd->add_option("--rows", grid.rows);
  gd->add_option("--cols", grid.cols);
  gd->add_option("--rings", ring.rings);
  gd->add_option("--spokes", ring.spokes);
  gd->add_option("--lines", gd_lines, "Number of lines");
  gd->add_option("--groups", gd_groups, "Number of OD groups");
  gd->add_option("--horizon", gd_horizon, "Roll-out horizon in periods");
  gd->add_option("--weight-min", gd_wmin, "Smallest group size");
  gd->add_option("--weight-max", gd_wmax, "Largest group size");
  gd->callback([&] {
    run.command = "gen-dataset";
    Dataset ds;
    if (gd_kind == "grid") {
      grid.seed = gd_seed;
      if (gd_lines >= 0) grid.lines = gd_lines;
      if (gd_groups >= 0) grid.demand.groups = gd_groups;
      if (gd_horizon > 0) grid.params.horizon_periods = gd_horizon;
      if (gd_wmin >= 0) grid.demand.weight_min = gd_wmin;
      if (gd_wmax >= 0) grid.demand.weight_max = gd_wmax;
      ds = gen_grid(grid);
      run.config = {{"kind", "grid"}, {"rows", grid.rows}, {"cols", grid.cols}, {"lines", grid.lines}, {"groups", grid.demand.groups},
                    {"weight_min", grid.demand.weight_min}, {"weight_max", grid.demand.weight_max}};
    } else {
      ring.seed = gd_seed;
      if (gd_lines >= 0) ring.lines = gd_lines;
      if (gd_groups >= 0) ring.demand.groups = gd_groups;
      if (gd_horizon > 0) ring.params.horizon_periods = gd_horizon;
      if (gd_wmin >= 0) ring.demand.weight_min = gd_wmin;
      if (gd_wmax >= 0) ring.demand.weight_max = gd_wmax;
      ds = gen_ring(ring);
      run.config = {{"kind", "ring"}, {"rings", ring.rings}, {"spokes", ring.spokes}, {"lines", ring.lines}, {"groups", ring.demand.groups},
                    {"weight_min", ring.demand.weight_min}, {"weight_max", ring.demand.weight_max}};
    }
    run.seeds["dataset"] = gd_seed;
    io::write_dataset(gd_out, ds);
    run.finish(fs::path(gd_out) / "run_manifest.json");
    std::cout << ds.stations.size() << " stations, " << ds.edges.size() << " edges, " << ds.lines.size() << " lines, " << ds.groups.size() << " groups\n";
  });

  // gen-corpus -------------------------------------------------------------
  auto* gc = app.add_subcommand("gen-corpus", "Generate and label a corpus of instances");
  std::string gc_dataset, gc_out, gc_config;
  std::vector<std::string> gc_variants;
  std::size_t gc_replicates = 10;
  std::uint64_t gc_seed = 1;
  bool gc_write_instances = false;
  ThreadOpt gc_threads;
  CapsOpt gc_caps;
  gc->add_option("--dataset", gc_dataset, "Dataset directory")->required();
  gc->add_option("--out", gc_out, "Output directory")->required();
  gc->add_option("--variants", gc_variants, "Variant list, e.g. earliest/firstfit random:60/buffered:3")->delimiter(',');
  gc->add_option("--replicates", gc_replicates, "Instances per variant");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--config", gc_config, "Robustness config (key=value)");
  gc->add_flag("--write-instances", gc_write_instances, "Also write every instance directory");
  gc_threads.add(gc);
  gc_caps.add(gc);
  gc->callback([&] {
    run.command = "gen-corpus";
    run.input("dataset", gc_dataset);
    if (!gc_config.empty()) run.input("config", gc_config);
    const Dataset ds = io::read_dataset(gc_dataset);
    const auto rcfg = load_config(gc_config);
    if (gc_variants.empty()) gc_variants = default_variant_names();
    std::vector<VariantSpec> variants;
    for (std::size_t v = 0; v < gc_variants.size(); ++v) variants.push_back(parse_variant(gc_variants[v], mix_seed(gc_seed, v)));
    const fs::path out(gc_out);
    fs::create_directories(out);
    std::function<void(std::size_t, const Instance&)> hook;
    if (gc_write_instances) hook = [&](std::size_t, const Instance& inst) { io::write_instance(out / "instances" / inst.id, inst); };
    const auto corpus = gen_corpus(ds, variants, gc_replicates, rcfg, gc_caps.caps, gc_threads.resolve(), hook);
    io::IdMatrix fm{{}, io::feature_columns(corpus.layout.size()), corpus.features};
    io::IdMatrix rm{{}, io::raw_columns(), io::from_test_values(corpus.raw)};
    io::IdMatrix lm{{}, io::label_columns(), io::from_test_values(corpus.labels.normalized)};
    json entries = json::array();
    for (const auto& e : corpus.entries) {
      fm.ids.push_back(e.id);
      rm.ids.push_back(e.id);
      lm.ids.push_back(e.id);
      entries.push_back({{"id", e.id}, {"variant", gc_variants[e.variant]}, {"replicate", e.replicate}, {"seed", e.seed}});
    }
    io::write_id_matrix(out / "features.csv", fm);
    io::write_id_matrix(out / "robustness.csv", rm);
    io::write_id_matrix(out / "labels.csv", lm);
    io::write_reference(out / "reference.json", corpus.labels.reference);
    io::write_json(out / "layout.json", io::layout_to_json(corpus.layout));
    json manifest;
    manifest["tool_version"] = kVersion;
    manifest["dataset_hash"] = hash_path(gc_dataset);
    manifest["corpus_seed"] = gc_seed;
    manifest["variants"] = json::array();
    for (std::size_t v = 0; v < variants.size(); ++v) manifest["variants"].push_back({{"spec", gc_variants[v]}, {"seed", variants[v].seed}});
    manifest["replicates"] = gc_replicates;
    manifest["robustness_config"] = config_json(rcfg);
    manifest["caps"] = gc_caps.to_json();
    manifest["instances"] = entries;
    io::write_json(out / "manifest.json", manifest);
    for (const auto& w : corpus.labels.warnings) std::cerr << "warning: " << w << "\n";
    run.config = {{"replicates", gc_replicates}, {"variants", gc_variants}, {"robustness", config_json(rcfg)}};
    run.seeds["corpus"] = gc_seed;
    run.finish(out / "run_manifest.json");
    std::cout << corpus.entries.size() << " instances written to " << out.string() << "\n";
  });

  // evaluate ---------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "Run the four robustness tests (or given scenarios) on instances");
  std::vector<std::string> ev_instances;
  std::string ev_config, ev_out = "robustness.csv", ev_scenarios;
  ThreadOpt ev_threads;
  ev->add_option("--instance", ev_instances, "Instance directory (repeatable)")->required();
  ev->add_option("--config", ev_config, "Robustness config (key=value)");
  ev->add_option("--out", ev_out, "Output CSV");
  ev->add_option("--scenarios", ev_scenarios, "JSON-lines scenario file; evaluates these instead of the test suite");
  ev_threads.add(ev);
  ev->callback([&] {
    run.command = "evaluate";
    const auto rcfg = load_config(ev_config);
    const unsigned threads = ev_threads.resolve();
    if (!ev_scenarios.empty()) {
      run.input("scenarios", ev_scenarios);
      const auto scenarios = io::read_scenarios(ev_scenarios);
      io::CsvWriter w({"instance_id", "scenario", "aggregate_delay", "rerouted", "stranded"});
      for (const auto& dir : ev_instances) {
        run.input("instance:" + dir, dir);
        const auto inst = io::read_instance(dir, rcfg.weights);
        for (const auto& s : scenarios) validate_scenario(s, inst);
        const Simulator sim(inst, rcfg.weights);
        const auto results = parallel_map(scenarios.size(), threads, [&](std::size_t i) { return sim.simulate(scenarios[i]); });
        for (std::size_t i = 0; i < results.size(); ++i) {
          int rer = 0, str = 0;
          for (const auto& g : results[i].groups) {
            rer += g.status == RouteStatus::Rerouted;
            str += g.status == RouteStatus::Stranded;
          }
          w.row({inst.id, std::to_string(i), std::to_string(results[i].aggregate_delay), std::to_string(rer), std::to_string(str)});
        }
      }
      w.save(ev_out);
    } else {
      io::IdMatrix m{{}, io::raw_columns(), {}};
      for (const auto& dir : ev_instances) {
        run.input("instance:" + dir, dir);
        const auto inst = io::read_instance(dir, rcfg.weights);
        const auto rep = evaluate_robustness(inst, rcfg, threads);
        m.ids.push_back(inst.id);
        m.rows.emplace_back(rep.raw.begin(), rep.raw.end());
      }
      io::write_id_matrix(ev_out, m);
    }
    run.config = config_json(rcfg);
    run.seeds["master_seed"] = rcfg.master_seed;
    run.finish(manifest_for_file(ev_out));
  });

  // normalize --------------------------------------------------------------
  auto* nm = app.add_subcommand("normalize", "Scale raw robustness values so the worst instance per test is 100");
  std::string nm_raw, nm_out = "labels.csv", nm_ref_out, nm_ref_in;
  nm->add_option("--raw", nm_raw, "robustness.csv")->required();
  nm->add_option("--out", nm_out, "labels.csv");
  nm->add_option("--reference-out", nm_ref_out, "Write the per-test maxima here");
  nm->add_option("--reference", nm_ref_in, "Normalize against a stored reference instead of this set's maxima");
  nm->callback([&] {
    run.command = "normalize";
    run.input("raw", nm_raw);
    const auto m = io::read_id_matrix(nm_raw);
    const auto raw = io::to_test_values(m);
    io::IdMatrix out{m.ids, io::label_columns(), {}};
    if (!nm_ref_in.empty()) {
      run.input("reference", nm_ref_in);
      const auto ref = io::read_reference(nm_ref_in);
      for (const auto& r : raw) {
        const auto v = normalize_with_reference(r, ref);
        out.rows.emplace_back(v.begin(), v.end());
      }
    } else {
      const auto res = normalize(raw);
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
      out.rows = io::from_test_values(res.normalized);
      if (!nm_ref_out.empty()) io::write_reference(nm_ref_out, res.reference);
    }
    io::write_id_matrix(nm_out, out);
    run.finish(manifest_for_file(nm_out));
  });

  // extract-features -------------------------------------------------------
  auto* ef = app.add_subcommand("extract-features", "Compute the key-feature vector of instances");
  std::vector<std::string> ef_instances;
  std::string ef_out = "features.csv", ef_layout;
  std::string ef_config;
  CapsOpt ef_caps;
  ThreadOpt ef_threads;
  ef->add_option("--instance", ef_instances, "Instance directory (repeatable)")->required();
  ef->add_option("--out", ef_out, "features.csv");
  ef->add_option("--layout-out", ef_layout, "Write layout.json here");
  ef->add_option("--config", ef_config, "Robustness config (utility weights)");
  ef_caps.add(ef);
  ef_threads.add(ef);
  ef->callback([&] {
    run.command = "extract-features";
    const auto rcfg = load_config(ef_config);
    const auto rows = parallel_map(ef_instances.size(), ef_threads.resolve(), [&](std::size_t i) {
      const auto inst = io::read_instance(ef_instances[i], rcfg.weights);
      return std::make_pair(inst.id, extract_features(inst, ef_caps.caps, rcfg.weights));
    });
    io::IdMatrix m;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      run.input("instance:" + ef_instances[i], ef_instances[i]);
      if (i > 0 && !(rows[i].second.layout == rows[0].second.layout)) throw ValidationError("instances have different feature layouts");
      m.ids.push_back(rows[i].first);
      m.rows.push_back(rows[i].second.values);
    }
    m.columns = io::feature_columns(rows.front().second.layout.size());
    io::write_id_matrix(ef_out, m);
    if (!ef_layout.empty()) io::write_json(ef_layout, io::layout_to_json(rows.front().second.layout));
    run.config = ef_caps.to_json();
    run.finish(manifest_for_file(ef_out));
  });

  // train ------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train the surrogate model");
  std::string tr_features, tr_labels, tr_out = "model.json", tr_history, tr_reference, tr_layout, tr_report;
  double tr_test_fraction = 0.1;
  TrainOpt tr_opt;
  tr->add_option("--features", tr_features, "features.csv")->required();
  tr->add_option("--labels", tr_labels, "labels.csv")->required();
  tr->add_option("--out", tr_out, "Model file");
  tr->add_option("--history", tr_history, "history.csv (default: next to the model)");
  tr->add_option("--reference", tr_reference, "reference.json of the labels (stored in the model)");
  tr->add_option("--layout", tr_layout, "layout.json (stored caps and shape)");
  tr->add_option("--test-fraction", tr_test_fraction, "Held-out test share");
  tr->add_option("--report", tr_report, "Test-set evaluation JSON (default: next to the model)");
  tr_opt.add(tr);
  tr->callback([&] {
    run.command = "train";
    run.input("features", tr_features);
    run.input("labels", tr_labels);
    const auto fm = io::read_id_matrix(tr_features);
    const auto lm = io::read_id_matrix(tr_labels);
    const auto labels = align_labels(fm, lm);
    const auto [train_idx, test_idx] = split_indices(fm.rows.size(), tr_test_fraction, mix_seed(tr_opt.cfg.seed, 99));
    auto result = train(subset(fm.rows, train_idx), subset(labels, train_idx), tr_opt.cfg);
    auto& model = result.model;
    if (!tr_reference.empty()) {
      run.input("reference", tr_reference);
      model.meta.label_reference = io::read_reference(tr_reference);
    }
    if (!tr_layout.empty()) {
      run.input("layout", tr_layout);
      const auto layout = io::layout_from_json(io::read_json(tr_layout));
      if (layout.size() != model.input_size()) throw ValidationError("layout size does not match feature columns");
      model.meta.caps = layout.caps;
      model.meta.stations = layout.stations;
      model.meta.edges = layout.edges;
    }
    model.meta.dataset_id = hash_path(tr_features);
    save_model(model, tr_out);
    const fs::path base = fs::path(tr_out).parent_path();
    io::write_history(tr_history.empty() ? base / "history.csv" : fs::path(tr_history), result.history);
    json rep;
    rep["train_rows"] = train_idx.size();
    rep["test_rows"] = test_idx.size();
    rep["epochs_run"] = model.meta.epochs_run;
    if (!test_idx.empty()) {
      const auto r = evaluate_model(model, subset(fm.rows, test_idx), subset(labels, test_idx));
      rep["test"] = report_json(r);
      std::cout << "test MAE " << r.mean_mae << ", within 1: " << r.within_1 << ", within 5: " << r.within_5 << "\n";
    }
    io::write_json(tr_report.empty() ? base / "report.json" : fs::path(tr_report), rep);
    run.config = tr_opt.to_json();
    run.seeds["train"] = tr_opt.cfg.seed;
    run.finish(manifest_for_file(tr_out));
  });

  // predict ----------------------------------------------------------------
  auto* pr = app.add_subcommand("predict", "Predict the four robustness values per feature row");
  std::string pr_model, pr_features, pr_out = "predictions.csv";
  pr->add_option("--model", pr_model)->required();
  pr->add_option("--features", pr_features)->required();
  pr->add_option("--out", pr_out);
  pr->callback([&] {
    run.command = "predict";
    run.input("model", pr_model);
    run.input("features", pr_features);
    const auto model = load_model(pr_model);
    const auto fm = io::read_id_matrix(pr_features);
    io::IdMatrix out{fm.ids, io::label_columns(), predict_rows(model, fm.rows)};
    io::write_id_matrix(pr_out, out);
    run.finish(manifest_for_file(pr_out));
  });

  // importance -------------------------------------------------------------
  auto* im = app.add_subcommand("importance", "First-layer weight mass per key feature");
  std::string im_model, im_layout, im_out = "importance.csv";
  im->add_option("--model", im_model)->required();
  im->add_option("--layout", im_layout, "layout.json (default: derived from the model metadata)");
  im->add_option("--out", im_out);
  im->callback([&] {
    run.command = "importance";
    run.input("model", im_model);
    const auto model = load_model(im_model);
    const FeatureLayout layout = im_layout.empty() ? FeatureLayout::make(model.meta.stations, model.meta.edges, model.meta.caps)
                                                   : io::layout_from_json(io::read_json(im_layout));
    const auto imp = feature_importance(model, layout);
    io::CsvWriter w({"feature", "importance"});
    for (int f = 1; f <= kFeatureGroupCount; ++f) w.row({"F" + std::to_string(f), io::format_double(imp[static_cast<std::size_t>(f - 1)])});
    w.save(im_out);
    run.finish(manifest_for_file(im_out));
  });

  // ablate -----------------------------------------------------------------
  auto* ab = app.add_subcommand("ablate", "Leave-one-feature-out study");
  std::string ab_features, ab_labels, ab_layout, ab_out = "ablation.csv";
  double ab_test_fraction = 0.1;
  TrainOpt ab_opt;
  ab->add_option("--features", ab_features)->required();
  ab->add_option("--labels", ab_labels)->required();
  ab->add_option("--layout", ab_layout)->required();
  ab->add_option("--out", ab_out);
  ab->add_option("--test-fraction", ab_test_fraction);
  ab_opt.add(ab);
  ab->callback([&] {
    run.command = "ablate";
    run.input("features", ab_features);
    run.input("labels", ab_labels);
    const auto fm = io::read_id_matrix(ab_features);
    const auto labels = align_labels(fm, io::read_id_matrix(ab_labels));
    const auto layout = io::layout_from_json(io::read_json(ab_layout));
    const auto res = leave_one_out_study(fm.rows, labels, layout, ab_opt.cfg, ab_test_fraction);
    io::CsvWriter w({"removed", "mae"});
    w.row({"none", io::format_double(res.baseline_mae)});
    for (int f = 1; f <= kFeatureGroupCount; ++f) w.row({"F" + std::to_string(f), io::format_double(res.mae_without[static_cast<std::size_t>(f - 1)])});
    w.save(ab_out);
    run.config = ab_opt.to_json();
    run.seeds["train"] = ab_opt.cfg.seed;
    run.finish(manifest_for_file(ab_out));
  });

  // search -----------------------------------------------------------------
  auto* se = app.add_subcommand("search", "Local search injecting slack, guided by the surrogate");
  std::string se_instance, se_model, se_out, se_config;
  SearchConfig scfg;
  ThreadOpt se_threads;
  se->add_option("--instance", se_instance, "Start instance directory")->required();
  se->add_option("--model", se_model)->required();
  se->add_option("--out", se_out, "Output directory (trace.csv, trace.json, solution/)")->required();
  se->add_option("--config", se_config, "Robustness config (utility weights)");
  se->add_option("--neighborhood", scfg.neighborhood_per_kind, "N: candidates per activity kind");
  se->add_option("--delta", scfg.slack_increment, "Slack increment (minutes)");
  se->add_option("--reroute-every", scfg.rerouting_interval);
  se->add_option("--utility-budget", scfg.utility_budget, "Max relative increase of total perceived travel time");
  se->add_option("--max-iterations", scfg.max_iterations);
  se_threads.add(se);
  se->callback([&] {
    run.command = "search";
    run.input("instance", se_instance);
    run.input("model", se_model);
    const auto rcfg = load_config(se_config);
    scfg.weights = rcfg.weights;
    const auto model = load_model(se_model);
    scfg.caps = model.meta.caps;
    const auto start = io::read_instance(se_instance, rcfg.weights);
    const auto trace = local_search(start, mlp_oracle(model, scfg.caps, scfg.weights), scfg, se_threads.resolve());
    const fs::path out(se_out);
    io::write_trace(out / "trace.csv", trace);
    io::write_json(out / "trace.json", io::trace_to_json(trace));
    io::write_instance(out / "solution", trace.final_solution);
    run.config = {{"neighborhood", scfg.neighborhood_per_kind},
                  {"delta", scfg.slack_increment},
                  {"reroute_every", scfg.rerouting_interval},
                  {"utility_budget", scfg.utility_budget},
                  {"max_iterations", scfg.max_iterations}};
    run.finish(out / "run_manifest.json");
    std::cout << "accepted " << trace.accepted_timetables.size() - 1 << " moves; estimated objective " << trace.start_objective << " -> "
              << (trace.iterations.empty() ? trace.start_objective : trace.iterations.back().objective) << "\n";
  });

  // reevaluate -------------------------------------------------------------
  auto* re = app.add_subcommand("reevaluate", "Run the true robustness tests on every accepted search solution");
  std::string re_instance, re_trace, re_model, re_reference, re_config, re_out = "trace_real.csv";
  ThreadOpt re_threads;
  re->add_option("--instance", re_instance, "Start instance directory")->required();
  re->add_option("--trace", re_trace, "trace.json written by search")->required();
  re->add_option("--model", re_model, "Model whose stored label reference normalizes the real values");
  re->add_option("--reference", re_reference, "reference.json (overrides the model's)");
  re->add_option("--config", re_config, "Robustness config");
  re->add_option("--out", re_out);
  re_threads.add(re);
  re->callback([&] {
    run.command = "reevaluate";
    run.input("instance", re_instance);
    run.input("trace", re_trace);
    const auto rcfg = load_config(re_config);
    std::optional<TestValues> ref;
    if (!re_reference.empty()) {
      ref = io::read_reference(re_reference);
    } else if (!re_model.empty()) {
      ref = load_model(re_model).meta.label_reference;
    }
    if (!ref) throw ValidationError("reevaluate needs --reference or a model with a stored label reference");
    const auto start = io::read_instance(re_instance, rcfg.weights);
    const auto trace = io::trace_from_json(io::read_json(re_trace));
    SearchConfig sc;
    sc.weights = rcfg.weights;
    const auto real = reevaluate_real(trace, start, rcfg, *ref, sc, re_threads.resolve());
    io::write_trace_real(re_out, real);
    run.config = config_json(rcfg);
    run.finish(manifest_for_file(re_out));
    std::cout << "estimated improvement " << 100.0 * real.estimated_improvement << "%, real improvement " << 100.0 * real.real_improvement
              << "%, gap " << 100.0 * real.gap << " points\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
