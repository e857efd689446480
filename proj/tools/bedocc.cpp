// bedocc: command-line front end for simulation, training, evaluation, detection and
// cough-rate reporting.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bedocc/bedocc.hpp"

namespace fs = std::filesystem;
using namespace bedocc;
using io::json;

namespace {

// Values from the JSON config; command-line flags that were given win.
struct Config {
  json j = json::object();

  template <typename T>
  T get(const std::string& key, const T& fallback) const {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
  }
};

Config load_config(const std::string& path) {
  Config c;
  if (path.empty()) return c;
  auto in = io::open_in(path);
  try {
    c.j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("config '" + path + "': " + e.what());
  }
  return c;
}

template <typename T>
void fill(T& value, const CLI::Option* opt, const Config& cfg, const std::string& key) {
  if (opt->count() == 0) value = cfg.get<T>(key, value);
}

std::vector<PatientRecord> load_dataset(const std::string& dir) {
  const fs::path root(dir);
  auto in = io::open_in((root / "dataset.json").string());
  const json manifest = json::parse(in);
  std::vector<PatientRecord> out;
  for (const auto& r : manifest.at("recordings")) {
    const std::string id = r.at("profile").at("id").get<std::string>();
    PatientRecord p;
    p.id = id;
    p.signal = io::read_signal_csv((root / r.at("signal").get<std::string>()).string(), id);
    p.truth = io::read_annotation_csv((root / r.at("annotation").get<std::string>()).string(), p.signal.duration(), p.signal.fs);
    out.push_back(std::move(p));
  }
  return out;
}

GridSpec grid_from_config(const Config& cfg, const std::string& d1_family, const std::string& d2_family, bool full) {
  if (cfg.j.contains("grid")) return io::grid_from_json(cfg.j.at("grid"));
  const auto f1 = nn::family_from_string(d1_family), f2 = nn::family_from_string(d2_family);
  return full ? default_grid(f1, f2) : desk_grid(f1, f2);
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

int run_simulate(const std::string& profiles_path, double compression, std::uint64_t seed, const std::string& out_dir) {
  require(compression > 0.0, "--compression must be positive");
  std::vector<PatientProfile> profiles;
  if (profiles_path.empty()) {
    profiles = default_profiles(compression, seed);
  } else {
    // hours in the file are uncompressed; seeds default to ones derived from the root seed
    auto in = io::open_in(profiles_path);
    const json pj = json::parse(in);
    std::size_t i = 0;
    for (const auto& p : pj.is_array() ? pj : pj.at("profiles")) {
      PatientProfile base;
      base.seed = derive_seed(seed, ++i);
      auto prof = io::profile_from_json(p, base);
      prof.total_hours /= compression;
      prof.occupied_hours /= compression;
      profiles.push_back(prof);
    }
  }
  const auto ds = generate_dataset(profiles);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < ds.recordings.size(); ++i) {
    const auto& r = ds.recordings[i];
    const fs::path base = fs::path(out_dir) / r.profile.id;
    io::write_signal_csv(base.string() + "_signal.csv", r.signal);
    io::write_segments_csv(base.string() + "_occupancy.csv", occupied_segments(r.truth));
    io::write_segments_csv(base.string() + "_coughs.csv", r.coughs);
    std::cerr << r.profile.id << ": " << r.signal.duration() / 3600.0 << " h, " << ds.manifest[i].changes << " changes\n";
  }
  auto out = io::open_out((fs::path(out_dir) / "dataset.json").string());
  out << io::manifest_json(ds, compression, seed).dump(2) << '\n';
  return 0;
}

int run_train(const Config& cfg, int detector, const std::string& family, std::size_t psi, std::size_t c,
              const std::string& data_dir, const std::string& out_path, std::uint64_t seed) {
  require(detector == 1 || detector == 2, "--detector must be 1 or 2");
  const auto patients = load_dataset(data_dir);
  nn::ModelSpec spec = nn::default_spec(nn::family_from_string(family));
  const std::string key = detector == 1 ? "detector1_spec" : "detector2_spec";
  if (cfg.j.contains(key)) spec = io::spec_from_json(cfg.j.at(key));
  spec.seed = seed;
  CvOptions opt;
  opt.root_seed = seed;
  nn::LabeledSet set;
  for (const auto& p : patients) {
    if (detector == 1) {
      NegativePolicy pol = opt.negatives;
      pol.seed = derive_seed(seed, 0xd1);
      set.append(detector1_items(p, psi, c, pol));
    } else {
      set.append(detector2_items(p, psi, c, opt.interval_chunk_s, opt.averaging));
    }
  }
  std::cerr << "training " << nn::describe(spec) << " on " << set.size() << " items\n";
  auto model = nn::train(spec, set);
  model.feature_spec = {psi, c, detector == 1 ? IntervalAveraging::Linear : opt.averaging};
  io::save_model(out_path, model);
  return 0;
}

int run_evaluate(const Config& cfg, const std::string& data_dir, const std::string& out_dir, const std::string& d1_family,
                 const std::string& d2_family, bool full, std::uint64_t seed, std::size_t threads) {
  const auto patients = load_dataset(data_dir);
  const GridSpec grid = grid_from_config(cfg, d1_family, d2_family, full);
  CvOptions opt;
  opt.root_seed = seed;
  opt.threads = threads;
  opt.log = log_line;
  if (cfg.j.contains("change_threshold")) opt.pipeline.change_threshold = cfg.j.at("change_threshold").get<double>();
  if (cfg.j.contains("interval_threshold")) opt.pipeline.interval_threshold = cfg.j.at("interval_threshold").get<double>();
  std::cerr << "nested LOPO over " << patients.size() << " patients, " << grid.size() << " grid points\n";
  const auto rep = nested_lopo_cv(patients, grid, opt);
  fs::create_directories(out_dir);
  const fs::path root(out_dir);
  {
    auto o = io::open_out((root / "report.json").string());
    o << io::to_json(rep).dump(2) << '\n';
  }
  const std::pair<io::Table, const char*> tables[] = {
      {io::Table::Detector1, "detector1.csv"}, {io::Table::Detector2, "detector2.csv"}, {io::Table::Final, "final.csv"}};
  for (const auto& [t, name] : tables) {
    auto o = io::open_out((root / name).string());
    io::write_cv_table_csv(o, rep, t);
  }
  {
    auto o = io::open_out((root / "roc.csv").string());
    io::write_roc_csv(o, rep);
  }
  std::printf("detector1: sens %.3f spec %.3f auc %.3f\n", rep.detector1.sensitivity, rep.detector1.specificity, rep.detector1.auc);
  std::printf("detector2: sens %.3f spec %.3f auc %.3f\n", rep.detector2.sensitivity, rep.detector2.specificity, rep.detector2.auc);
  std::printf("final:     sens %.3f spec %.3f acc %.3f auc %.3f (sd %.3f), baseline auc %.3f\n", rep.final.sensitivity,
              rep.final.specificity, rep.final.accuracy, rep.final.auc, rep.final.sd_auc, rep.baseline_auc);
  return 0;
}

int run_detect(const Config& cfg, const std::string& signal_path, const std::string& d1_path, const std::string& d2_path,
               double threshold, const std::string& out_occ, const std::string& out_hyp) {
  const auto signal = io::read_signal_csv(signal_path);
  const auto d1 = io::load_model(d1_path), d2 = io::load_model(d2_path);
  PipelineOptions opt;
  opt.change_threshold = threshold;
  opt.interval_threshold = cfg.get<double>("interval_threshold", opt.interval_threshold);
  const auto pred = predict_occupancy(signal, d1, d2, opt);
  io::write_segments_csv(out_occ, occupied_segments(pred.occupancy));
  io::save_hypothesis(out_hyp, pred.hypothesis);
  std::size_t kept = 0;
  for (const auto& c : pred.hypothesis.changes) kept += c.status == ChangeStatus::Change ? 1 : 0;
  std::cerr << pred.hypothesis.changes.size() << " hypothesised changes, " << kept << " kept\n";
  return 0;
}

int run_cough_rate(const std::string& occ_path, const std::string& signal_path, double duration_s,
                   const std::string& coughs_path, bool pass_through, const std::string& convention,
                   const std::string& out_path) {
  std::optional<MagnitudeSignal> signal;
  if (!signal_path.empty()) signal = io::read_signal_csv(signal_path);
  if (duration_s <= 0.0) {
    require(signal.has_value(), "give --duration or --signal to fix the recording length");
    duration_s = signal->duration();
  }
  const auto occupancy = io::read_annotation_csv(occ_path, duration_s);
  std::vector<CoughEvent> coughs;
  if (pass_through) {
    require(signal.has_value(), "--pass-through needs --signal");
    coughs = events_as_coughs(detect_events(*signal));
  } else {
    require(!coughs_path.empty(), "give --coughs or --pass-through");
    coughs = io::read_coughs_csv(coughs_path);
  }
  const auto days = daily_cough_reports(coughs, occupancy, rate_convention_from_string(convention), log_line);
  auto o = io::open_out(out_path);
  io::write_daily_csv(o, days);
  return 0;
}

int run_report(const std::string& daily_path, const std::string& labs_path, const std::string& cfu_mode,
               const std::string& out_prefix) {
  auto in = io::open_in(daily_path);
  const auto daily = io::read_daily_csv(in);
  std::vector<LabResult> labs;
  if (!labs_path.empty()) labs = io::read_lab_csv(labs_path);
  const auto rep = long_term_report(daily, labs, cfu_mode_from_string(cfu_mode));
  {
    auto o = io::open_out(out_prefix + "_trend.csv");
    write_trend_csv(o, rep);
  }
  {
    auto o = io::open_out(out_prefix + "_correlations.csv");
    write_trend_correlations(o, rep);
  }
  {
    auto o = io::open_out(out_prefix + "_plot.dat");
    write_trend_plot_data(o, rep);
  }
  std::printf("spearman(day, R) = %.3f%s\n", rep.day_rate.rho, rep.day_rate.ties ? " (ties)" : "");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bed occupancy detection and cough-rate monitoring"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config; flags override its values");

  std::uint64_t seed = 2024;
  double compression = 10.0;
  std::string profiles, out_dir = "data";
  auto* sim = app.add_subcommand("simulate", "generate a synthetic ward dataset");
  auto* sim_seed = sim->add_option("--seed", seed, "root seed");
  auto* sim_comp = sim->add_option("--compression", compression, "divide recording lengths by this factor");
  sim->add_option("--profiles", profiles, "JSON list of patient profiles (default: the seven built-in ones)");
  sim->add_option("--out", out_dir, "output directory");

  int detector = 2;
  std::string family = "LSTM", data_dir = "data", model_out = "model.json";
  std::size_t psi = 32, frames = 50;
  std::uint64_t train_seed = 1;
  auto* tr = app.add_subcommand("train", "train one detector on every patient of a dataset");
  tr->add_option("--detector", detector, "1 (change windows) or 2 (intervals)")->check(CLI::IsMember({1, 2}));
  tr->add_option("--family", family, "LR, MLP, CNN or LSTM");
  tr->add_option("--psi", psi, "frame length");
  tr->add_option("--frames", frames, "frames per matrix (C)");
  tr->add_option("--data", data_dir, "dataset directory");
  tr->add_option("--out", model_out, "checkpoint path");
  auto* tr_seed = tr->add_option("--seed", train_seed, "training seed");

  std::string eval_out = "results", d1_family = "LSTM", d2_family = "LSTM";
  bool full_grid = false;
  std::uint64_t eval_seed = 7;
  std::size_t threads = 0;
  auto* ev = app.add_subcommand("evaluate", "nested leave-one-patient-out evaluation");
  ev->add_option("--data", data_dir, "dataset directory");
  ev->add_option("--out", eval_out, "output directory");
  ev->add_option("--d1-family", d1_family, "detector-1 family");
  ev->add_option("--d2-family", d2_family, "detector-2 family");
  ev->add_flag("--full-grid", full_grid, "search the complete hyperparameter tables");
  auto* ev_seed = ev->add_option("--seed", eval_seed, "root seed");
  auto* ev_threads = ev->add_option("--threads", threads, "worker threads (0 = all cores)");

  std::string signal_path, d1_path, d2_path, occ_out = "occupancy.csv", hyp_out = "hypothesis.json";
  double threshold = 0.5;
  auto* det = app.add_subcommand("detect", "run the three-detector pipeline on one recording");
  det->add_option("--signal", signal_path, "signal CSV")->required();
  det->add_option("--d1", d1_path, "detector-1 checkpoint")->required();
  det->add_option("--d2", d2_path, "detector-2 checkpoint")->required();
  auto* det_thr = det->add_option("--threshold", threshold, "detector-1 decision threshold");
  det->add_option("--out-occupancy", occ_out, "predicted occupied segments");
  det->add_option("--out-hypothesis", hyp_out, "hypothesis JSON");

  std::string occ_path, coughs_path, convention = "extrapolated", daily_out = "daily.csv";
  double duration = 0.0;
  bool pass_through = false;
  auto* cr = app.add_subcommand("cough-rate", "daily cough rates from coughs and predicted occupancy");
  cr->add_option("--occupancy", occ_path, "occupied segments CSV")->required();
  cr->add_option("--signal", signal_path, "signal CSV (recording length, pass-through events)");
  cr->add_option("--duration", duration, "recording length in seconds");
  cr->add_option("--coughs", coughs_path, "cough events CSV");
  cr->add_flag("--pass-through", pass_through, "treat every threshold-detected event as a cough");
  auto* cr_conv = cr->add_option("--convention", convention, "extrapolated or as-printed");
  cr->add_option("--out", daily_out, "daily report CSV");

  std::string daily_path, labs_path, cfu_mode = "as-printed", report_prefix = "report";
  auto* rp = app.add_subcommand("report", "per-day trend table and rank correlations");
  rp->add_option("--daily", daily_path, "daily report CSV")->required();
  rp->add_option("--labs", labs_path, "lab results CSV");
  auto* rp_mode = rp->add_option("--cfu-mode", cfu_mode, "as-printed or log-of-product");
  rp->add_option("--out", report_prefix, "output prefix");

  CLI11_PARSE(app, argc, argv);

  try {
    const Config cfg = load_config(config_path);
    if (sim->parsed()) {
      fill(seed, sim_seed, cfg, "seed");
      fill(compression, sim_comp, cfg, "compression");
      return run_simulate(profiles, compression, seed, out_dir);
    }
    if (tr->parsed()) {
      fill(train_seed, tr_seed, cfg, "seed");
      return run_train(cfg, detector, family, psi, frames, data_dir, model_out, train_seed);
    }
    if (ev->parsed()) {
      fill(eval_seed, ev_seed, cfg, "seed");
      fill(threads, ev_threads, cfg, "threads");
      return run_evaluate(cfg, data_dir, eval_out, d1_family, d2_family, full_grid, eval_seed, threads);
    }
    if (det->parsed()) {
      fill(threshold, det_thr, cfg, "change_threshold");
      return run_detect(cfg, signal_path, d1_path, d2_path, threshold, occ_out, hyp_out);
    }
    if (cr->parsed()) {
      fill(convention, cr_conv, cfg, "convention");
      return run_cough_rate(occ_path, signal_path, duration, coughs_path, pass_through, convention, daily_out);
    }
    if (rp->parsed()) {
      fill(cfu_mode, rp_mode, cfg, "cfu_mode");
      return run_report(daily_path, labs_path, cfu_mode, report_prefix);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
