#pragma once

// File formats: signal / annotation / cough / lab CSVs, model checkpoints, detection
// hypotheses, cross-validation reports and dataset manifests.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bedocc/common.hpp"
#include "bedocc/cv.hpp"
#include "bedocc/detectors.hpp"
#include "bedocc/features.hpp"
#include "bedocc/monitor.hpp"
#include "bedocc/nn/model.hpp"
#include "bedocc/signal.hpp"
#include "bedocc/synthgen.hpp"

namespace bedocc::io {

using json = nlohmann::json;

inline constexpr const char* kModelFormat = "bedocc-model/1";
inline constexpr const char* kHypothesisFormat = "bedocc-hypothesis/1";

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  return out;
}

/// Shortest text that parses back to the same double.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, std::size_t line) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (s.empty() || end != begin + s.size()) throw FormatError("line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

// Reads a CSV with the given header; blank lines and '#' comments are skipped.
inline std::vector<std::vector<double>> read_table(std::istream& in, const std::vector<std::string>& header) {
  std::string line;
  std::size_t no = 0;
  bool have_header = false;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line);
    if (!have_header) {
      if (cells != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        throw FormatError("line " + std::to_string(no) + ": expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (cells.size() != header.size())
      throw FormatError("line " + std::to_string(no) + ": expected " + std::to_string(header.size()) + " fields");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c, no));
    rows.push_back(std::move(row));
  }
  if (!have_header) throw FormatError("missing CSV header");
  return rows;
}

inline std::vector<std::string> header_of(std::istream& in) {
  std::string line;
  const auto pos = in.tellg();
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    in.clear();
    in.seekg(pos);
    return split(line);
  }
  throw FormatError("empty CSV");
}

inline json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline double num_or_nan(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

}  // namespace detail

// ---- signals and annotations ----

/// Reads `t,ax,ay,az` (magnitude is taken) or `t,mag`. Timestamps must sit on the fs grid.
inline MagnitudeSignal read_signal_csv(std::istream& in, std::string patient_id = {}, double fs = kSampleRate) {
  const auto header = detail::header_of(in);
  MagnitudeSignal sig;
  std::vector<double> times;
  if (header == std::vector<std::string>{"t", "ax", "ay", "az"}) {
    const auto rows = detail::read_table(in, header);
    std::vector<TriaxialRecord> recs;
    for (const auto& r : rows) recs.push_back({r[0], r[1], r[2], r[3]});
    require(!recs.empty(), "signal file has no samples");
    sig = magnitude_from_triaxial(recs, patient_id, fs);
    for (const auto& r : rows) times.push_back(r[0]);
  } else if (header == std::vector<std::string>{"t", "mag"}) {
    const auto rows = detail::read_table(in, header);
    sig.patient_id = std::move(patient_id);
    sig.fs = fs;
    for (const auto& r : rows) {
      if (r[1] < 0.0) throw FormatError("negative magnitude at t=" + fmt(r[0]));
      times.push_back(r[0]);
      sig.samples.push_back(r[1]);
    }
  } else {
    throw FormatError("signal CSV header must be 't,ax,ay,az' or 't,mag'");
  }
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] * fs - static_cast<double>(i)) > 0.5)
      throw FormatError("sample " + std::to_string(i) + " at t=" + fmt(times[i]) + " is off the " + fmt(fs) + " Hz grid");
  if (!sig.samples.empty()) sig.normalized = *std::max_element(sig.samples.begin(), sig.samples.end()) == 1.0;
  return sig;
}

inline MagnitudeSignal read_signal_csv(const std::string& path, std::string patient_id = {}, double fs = kSampleRate) {
  auto in = open_in(path);
  return read_signal_csv(in, std::move(patient_id), fs);
}

inline void write_signal_csv(std::ostream& os, const MagnitudeSignal& s) {
  os << "t,mag\n";
  for (std::size_t i = 0; i < s.size(); ++i) os << fmt(static_cast<double>(i) / s.fs) << ',' << fmt(s.samples[i]) << '\n';
}

inline void write_signal_csv(const std::string& path, const MagnitudeSignal& s) {
  auto out = open_out(path);
  write_signal_csv(out, s);
}

/// `start_s,end_s` segments (occupied stretches, or cough events).
inline std::vector<Segment> read_segments_csv(std::istream& in) {
  std::vector<Segment> out;
  for (const auto& r : detail::read_table(in, {"start_s", "end_s"})) {
    if (!(r[1] > r[0])) throw FormatError("segment with end <= start at " + fmt(r[0]));
    out.push_back({r[0], r[1]});
  }
  return out;
}

inline std::vector<Segment> read_segments_csv(const std::string& path) {
  auto in = open_in(path);
  return read_segments_csv(in);
}

inline void write_segments_csv(std::ostream& os, const std::vector<Segment>& segs) {
  os << "start_s,end_s\n";
  for (const auto& s : segs) os << fmt(s.start_s) << ',' << fmt(s.end_s) << '\n';
}

inline void write_segments_csv(const std::string& path, const std::vector<Segment>& segs) {
  auto out = open_out(path);
  write_segments_csv(out, segs);
}

inline OccupancySignal read_annotation_csv(const std::string& path, double duration_s, double fs = kSampleRate) {
  const auto segs = read_segments_csv(path);
  return occupancy_from_segments(segs, duration_s, fs);
}

inline std::vector<CoughEvent> read_coughs_csv(const std::string& path) {
  std::vector<CoughEvent> out;
  for (const auto& s : read_segments_csv(path)) out.push_back({s.start_s, s.end_s, CoughSource::ExternalList});
  return merge_events(std::move(out));
}

inline void write_coughs_csv(const std::string& path, const std::vector<CoughEvent>& coughs) {
  std::vector<Segment> segs;
  for (const auto& c : coughs) segs.push_back({c.start_s, c.end_s});
  write_segments_csv(path, segs);
}

// ---- laboratory results ----

inline std::vector<LabResult> read_lab_csv(std::istream& in) {
  std::vector<LabResult> out;
  for (const auto& r : detail::read_table(in, {"day", "P1", "P2", "D", "H1", "H2"})) {
    if (r[0] < 0.0 || r[0] != std::floor(r[0])) throw FormatError("lab day must be a nonnegative integer");
    if (r[1] < 0.0 || r[2] < 0.0) throw FormatError("colony counts must be >= 0");
    if (!(r[4] > 0.0) || !(r[5] > 0.0)) throw FormatError("hours to positivity must be > 0");
    out.push_back({static_cast<std::size_t>(r[0]), r[1], r[2], r[3], r[4], r[5]});
  }
  return out;
}

inline std::vector<LabResult> read_lab_csv(const std::string& path) {
  auto in = open_in(path);
  return read_lab_csv(in);
}

inline void write_lab_csv(std::ostream& os, const std::vector<LabResult>& labs) {
  os << "day,P1,P2,D,H1,H2\n";
  for (const auto& l : labs)
    os << l.day << ',' << fmt(l.p1) << ',' << fmt(l.p2) << ',' << fmt(l.d) << ',' << fmt(l.h1) << ',' << fmt(l.h2) << '\n';
}

inline void write_daily_csv(std::ostream& os, const std::vector<DailyCoughReport>& days) {
  os << "day,C,B_hours,R,convention,excluded\n";
  for (const auto& d : days)
    os << d.day << ',' << d.coughs << ',' << fmt(d.occupied_hours) << ',' << fmt(d.rate) << ',' << to_string(d.convention) << ','
       << d.excluded.size() << '\n';
}

inline std::vector<DailyCoughReport> read_daily_csv(std::istream& in) {
  std::string line;
  std::size_t no = 0;
  bool have_header = false;
  std::vector<DailyCoughReport> out;
  while (std::getline(in, line)) {
    ++no;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto cells = detail::split(line);
    if (!have_header) {
      if (cells != std::vector<std::string>{"day", "C", "B_hours", "R", "convention", "excluded"})
        throw FormatError("daily report header must be 'day,C,B_hours,R,convention,excluded'");
      have_header = true;
      continue;
    }
    if (cells.size() != 6) throw FormatError("line " + std::to_string(no) + ": expected 6 fields");
    DailyCoughReport d;
    d.day = static_cast<std::size_t>(detail::parse_double(cells[0], no));
    d.coughs = static_cast<std::size_t>(detail::parse_double(cells[1], no));
    d.occupied_hours = detail::parse_double(cells[2], no);
    d.rate = detail::parse_double(cells[3], no);
    d.convention = rate_convention_from_string(cells[4]);
    d.excluded.resize(static_cast<std::size_t>(detail::parse_double(cells[5], no)));
    out.push_back(std::move(d));
  }
  if (!have_header) throw FormatError("missing CSV header");
  return out;
}

// ---- feature matrices ----

inline void write_feature_csv(std::ostream& os, const FeatureMatrix& m, std::size_t psi) {
  const auto names = feature_names(psi);
  require(names.size() == m.cols, "write_feature_csv: psi does not match the matrix width");
  os << "frame";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  for (std::size_t r = 0; r < m.rows; ++r) {
    os << r;
    for (std::size_t c = 0; c < m.cols; ++c) os << ',' << fmt(m(r, c));
    os << '\n';
  }
}

// ---- model specs and checkpoints ----

inline json to_json(const nn::ModelSpec& s) {
  return json{{"family", nn::to_string(s.family)},
              {"lr_strength", s.lr_strength},
              {"lr_l1_ratio", s.lr_l1_ratio},
              {"lr_l2_ratio", s.lr_l2_ratio},
              {"mlp_hidden", s.mlp_hidden},
              {"mlp_l2", s.mlp_l2},
              {"mlp_momentum", s.mlp_momentum},
              {"batch_size", s.batch_size},
              {"epochs", s.epochs},
              {"conv_filters", s.conv_filters},
              {"kernel_size", s.kernel_size},
              {"dropout", s.dropout},
              {"dense_units", s.dense_units},
              {"lstm_units", s.lstm_units},
              {"conv_layers", s.conv_layers},
              {"learning_rate", s.learning_rate},
              {"use_smote", s.use_smote},
              {"smote_k", s.smote_k},
              {"early_stopping", s.early_stopping},
              {"standardization", s.standardization == nn::Standardization::ZScore ? "zscore" : "log-zscore"},
              {"seed", s.seed}};
}

/// Missing keys keep the family defaults.
inline nn::ModelSpec spec_from_json(const json& j) {
  nn::ModelSpec s = nn::default_spec(nn::family_from_string(j.at("family").get<std::string>()));
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("lr_strength", s.lr_strength);
  get("lr_l1_ratio", s.lr_l1_ratio);
  get("lr_l2_ratio", s.lr_l2_ratio);
  get("mlp_hidden", s.mlp_hidden);
  get("mlp_l2", s.mlp_l2);
  get("mlp_momentum", s.mlp_momentum);
  get("batch_size", s.batch_size);
  get("epochs", s.epochs);
  get("conv_filters", s.conv_filters);
  get("kernel_size", s.kernel_size);
  get("dropout", s.dropout);
  get("dense_units", s.dense_units);
  get("lstm_units", s.lstm_units);
  get("conv_layers", s.conv_layers);
  get("learning_rate", s.learning_rate);
  get("use_smote", s.use_smote);
  get("smote_k", s.smote_k);
  get("early_stopping", s.early_stopping);
  get("seed", s.seed);
  if (j.contains("standardization")) {
    const auto m = j.at("standardization").get<std::string>();
    if (m == "zscore")
      s.standardization = nn::Standardization::ZScore;
    else if (m == "log-zscore")
      s.standardization = nn::Standardization::LogZScore;
    else
      throw FormatError("unknown standardization '" + m + "'");
  }
  return s;
}

inline const char* to_string(IntervalAveraging a) { return a == IntervalAveraging::Linear ? "linear" : "log-power"; }

inline IntervalAveraging averaging_from_string(const std::string& s) {
  if (s == "linear") return IntervalAveraging::Linear;
  if (s == "log-power") return IntervalAveraging::LogPower;
  throw InvalidArgument("unknown interval averaging '" + s + "'");
}

inline json to_json(const nn::TrainedModel& m) {
  require(m.network != nullptr, "cannot save an untrained model");
  json params = json::array();
  for (const auto& block : m.network->parameter_values()) params.push_back(block);
  json logc = json::array();
  for (auto v : m.standardizer.log_columns) logc.push_back(static_cast<int>(v));
  return json{
      {"format", kModelFormat},
      {"spec", to_json(m.spec)},
      {"shape", {{"steps", m.steps}, {"features", m.features}}},
      {"feature_spec",
       {{"psi", m.feature_spec.psi}, {"frames", m.feature_spec.frames}, {"averaging", to_string(m.feature_spec.averaging)}}},
      {"standardizer",
       {{"mode", m.standardizer.mode == nn::Standardization::ZScore ? "zscore" : "log-zscore"},
        {"mean", m.standardizer.mean},
        {"stddev", m.standardizer.stddev},
        {"log_columns", logc}}},
      {"parameters", params},
      {"info",
       {{"epochs_run", m.info.epochs_run},
        {"final_loss", detail::num_or_null(m.info.final_loss)},
        {"best_dev_auc", detail::num_or_null(m.info.best_dev_auc)},
        {"best_epoch", m.info.best_epoch},
        {"synthetic_added", m.info.synthetic_added}}}};
}

inline nn::TrainedModel model_from_json(const json& j) {
  if (!j.contains("format") || j.at("format") != kModelFormat)
    throw FormatError(std::string("not a model checkpoint (expected format '") + kModelFormat + "')");
  try {
    nn::TrainedModel m;
    m.spec = spec_from_json(j.at("spec"));
    m.steps = j.at("shape").at("steps").get<std::size_t>();
    m.features = j.at("shape").at("features").get<std::size_t>();
    const auto& fs = j.at("feature_spec");
    m.feature_spec = {fs.at("psi").get<std::size_t>(), fs.at("frames").get<std::size_t>(),
                      averaging_from_string(fs.at("averaging").get<std::string>())};
    const auto& st = j.at("standardizer");
    m.standardizer.mode = st.at("mode") == "zscore" ? nn::Standardization::ZScore : nn::Standardization::LogZScore;
    m.standardizer.mean = st.at("mean").get<std::vector<double>>();
    m.standardizer.stddev = st.at("stddev").get<std::vector<double>>();
    for (int v : st.at("log_columns").get<std::vector<int>>()) m.standardizer.log_columns.push_back(static_cast<std::uint8_t>(v));
    if (m.standardizer.mean.size() != m.features || m.standardizer.stddev.size() != m.features ||
        m.standardizer.log_columns.size() != m.features)
      throw FormatError("standardizer width does not match the feature count");
    Rng rng(0);
    auto net = std::make_shared<nn::Network>(m.spec, m.steps, m.features, rng);
    net->set_parameter_values(j.at("parameters").get<std::vector<std::vector<double>>>());
    m.network = std::move(net);
    const auto& info = j.at("info");
    m.info.epochs_run = info.at("epochs_run").get<std::size_t>();
    m.info.final_loss = detail::num_or_nan(info.at("final_loss"));
    m.info.best_dev_auc = detail::num_or_nan(info.at("best_dev_auc"));
    m.info.best_epoch = info.at("best_epoch").get<std::size_t>();
    m.info.synthetic_added = info.at("synthetic_added").get<std::size_t>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model checkpoint: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("malformed model checkpoint: ") + e.what());
  }
}

inline void save_model(const std::string& path, const nn::TrainedModel& m) {
  auto out = open_out(path);
  out << to_json(m).dump() << '\n';
}

inline nn::TrainedModel load_model(const std::string& path) {
  auto in = open_in(path);
  try {
    return model_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
}

// ---- detection hypotheses ----

inline json to_json(const DetectionHypothesis& h) {
  json changes = json::array(), intervals = json::array();
  for (const auto& c : h.changes)
    changes.push_back({{"tau", c.tau},
                       {"score", c.score},
                       {"status", c.status == ChangeStatus::Change ? "change" : "activity"},
                       {"direction", to_string(c.direction)}});
  for (const auto& iv : h.intervals)
    intervals.push_back({{"start_s", iv.start_s},
                         {"end_s", iv.end_s},
                         {"score", iv.score},
                         {"label", iv.occupied ? "occupied" : "unoccupied"},
                         {"k", iv.k}});
  return json{{"format", kHypothesisFormat}, {"reconciled", h.reconciled}, {"changes", changes}, {"intervals", intervals}};
}

inline Direction direction_from_string(const std::string& s) {
  if (s == to_string(Direction::In)) return Direction::In;
  if (s == to_string(Direction::Out)) return Direction::Out;
  if (s == to_string(Direction::Unknown)) return Direction::Unknown;
  throw FormatError("unknown direction '" + s + "'");
}

inline DetectionHypothesis hypothesis_from_json(const json& j) {
  if (!j.contains("format") || j.at("format") != kHypothesisFormat) throw FormatError("not a detection hypothesis");
  try {
    DetectionHypothesis h;
    h.reconciled = j.at("reconciled").get<bool>();
    for (const auto& c : j.at("changes")) {
      const auto status = c.at("status").get<std::string>();
      if (status != "change" && status != "activity") throw FormatError("unknown change status '" + status + "'");
      h.changes.push_back({c.at("tau").get<double>(), c.at("score").get<double>(),
                           status == "change" ? ChangeStatus::Change : ChangeStatus::Activity,
                           direction_from_string(c.at("direction").get<std::string>())});
    }
    for (const auto& iv : j.at("intervals")) {
      const auto label = iv.at("label").get<std::string>();
      if (label != "occupied" && label != "unoccupied") throw FormatError("unknown interval label '" + label + "'");
      IntervalHypothesis x;
      x.start_s = iv.at("start_s").get<double>();
      x.end_s = iv.at("end_s").get<double>();
      x.score = iv.at("score").get<double>();
      x.occupied = label == "occupied";
      x.k = iv.at("k").get<int>();
      h.intervals.push_back(x);
    }
    return h;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed hypothesis: ") + e.what());
  }
}

inline void save_hypothesis(const std::string& path, const DetectionHypothesis& h) {
  auto out = open_out(path);
  out << to_json(h).dump(2) << '\n';
}

inline DetectionHypothesis load_hypothesis(const std::string& path) {
  auto in = open_in(path);
  try {
    return hypothesis_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
}

// ---- grids and cross-validation reports ----

inline json to_json(const GridPoint& g) { return json{{"psi", g.psi}, {"c", g.c}, {"spec", to_json(g.spec)}}; }

inline GridPoint grid_point_from_json(const json& j) {
  return {j.at("psi").get<std::size_t>(), j.at("c").get<std::size_t>(), spec_from_json(j.at("spec"))};
}

inline json to_json(const GridSpec& g) {
  json d1 = json::array(), d2 = json::array();
  for (const auto& p : g.detector1) d1.push_back(to_json(p));
  for (const auto& p : g.detector2) d2.push_back(to_json(p));
  return json{{"detector1", d1}, {"detector2", d2}};
}

inline GridSpec grid_from_json(const json& j) {
  GridSpec g;
  for (const auto& p : j.at("detector1")) g.detector1.push_back(grid_point_from_json(p));
  for (const auto& p : j.at("detector2")) g.detector2.push_back(grid_point_from_json(p));
  return g;
}

inline json to_json(const MetricReport& r) {
  return json{{"sensitivity", detail::num_or_null(r.sensitivity)},
              {"specificity", detail::num_or_null(r.specificity)},
              {"accuracy", detail::num_or_null(r.accuracy)},
              {"auc", detail::num_or_null(r.auc)},
              {"tp", r.tp},
              {"fp", r.fp},
              {"tn", r.tn},
              {"fn", r.fn}};
}

inline json to_json(const Summary& s) {
  return json{{"sensitivity", detail::num_or_null(s.sensitivity)}, {"specificity", detail::num_or_null(s.specificity)},
              {"accuracy", detail::num_or_null(s.accuracy)},       {"auc", detail::num_or_null(s.auc)},
              {"sd_sensitivity", detail::num_or_null(s.sd_sensitivity)}, {"sd_specificity", detail::num_or_null(s.sd_specificity)},
              {"sd_accuracy", detail::num_or_null(s.sd_accuracy)}, {"sd_auc", detail::num_or_null(s.sd_auc)}};
}

inline json to_json(const CvReport& rep) {
  json folds = json::array();
  for (const auto& f : rep.folds) {
    json roc = json::array();
    for (const auto& p : f.roc) roc.push_back({p.threshold, p.fpr, p.tpr});
    folds.push_back({{"patient", f.patient_id},
                     {"detector1_choice", f.detector1_choice ? to_json(*f.detector1_choice) : json(nullptr)},
                     {"detector2_choice", f.detector2_choice ? to_json(*f.detector2_choice) : json(nullptr)},
                     {"detector1_inner_auc", detail::num_or_null(f.detector1_inner_auc)},
                     {"detector2_inner_auc", detail::num_or_null(f.detector2_inner_auc)},
                     {"detector1", to_json(f.detector1)},
                     {"detector2", to_json(f.detector2)},
                     {"final", to_json(f.final)},
                     {"baseline_auc", detail::num_or_null(f.baseline_auc)},
                     {"hypothesized_changes", f.hypothesized_changes},
                     {"surviving_changes", f.surviving_changes},
                     {"skipped", f.skipped},
                     {"roc", roc}});
  }
  return json{{"root_seed", rep.root_seed},
              {"runtime_s", rep.runtime_s},
              {"detector1", to_json(rep.detector1)},
              {"detector2", to_json(rep.detector2)},
              {"final", to_json(rep.final)},
              {"baseline_auc", detail::num_or_null(rep.baseline_auc)},
              {"folds", folds}};
}

namespace detail {

inline std::string cell(double v) { return std::isfinite(v) ? fmt(v) : std::string(); }

inline std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace detail

enum class Table { Detector1, Detector2, Final };

/// One row per outer fold plus a mean row: classifier, frame/segment sizes, specificity,
/// sensitivity, accuracy, AUC, SD of AUC and the selected hyperparameters.
inline void write_cv_table_csv(std::ostream& os, const CvReport& rep, Table table) {
  const bool fin = table == Table::Final;
  os << "fold,classifier";
  if (fin)
    os << ",psi_oc,c_oc,psi_oi,c_oi";
  else
    os << ",psi,c";
  os << ",specificity,sensitivity,accuracy,auc,sd_auc";
  if (fin) os << ",baseline_auc";
  os << ",hyperparameters\n";
  const auto metrics = [&](const FoldResult& f) -> const MetricReport& {
    return table == Table::Detector1 ? f.detector1 : table == Table::Detector2 ? f.detector2 : f.final;
  };
  const auto choice_cells = [&](const std::optional<GridPoint>& g) {
    return g ? std::to_string(g->psi) + "," + std::to_string(g->c) : std::string(",");
  };
  const auto name = [](const std::optional<GridPoint>& g) { return g ? std::string(nn::to_string(g->spec.family)) : std::string(); };
  for (const auto& f : rep.folds) {
    const auto& m = metrics(f);
    const auto& primary = table == Table::Detector2 ? f.detector2_choice : f.detector1_choice;
    std::string classifier = name(primary), hyper = primary ? nn::describe(primary->spec) : "";
    if (fin) {
      classifier = name(f.detector1_choice) + "+" + name(f.detector2_choice);
      hyper = (f.detector1_choice ? nn::describe(f.detector1_choice->spec) : "") + " | " +
              (f.detector2_choice ? nn::describe(f.detector2_choice->spec) : "");
    }
    os << f.patient_id << ',' << classifier << ',';
    if (fin)
      os << choice_cells(f.detector1_choice) << ',' << choice_cells(f.detector2_choice);
    else
      os << choice_cells(primary);
    os << ',' << detail::cell(m.specificity) << ',' << detail::cell(m.sensitivity) << ',' << detail::cell(m.accuracy) << ','
       << detail::cell(m.auc) << ',';
    if (fin) os << ',' << detail::cell(f.baseline_auc);
    os << ',' << detail::quoted(hyper) << '\n';
  }
  const Summary& s = table == Table::Detector1 ? rep.detector1 : table == Table::Detector2 ? rep.detector2 : rep.final;
  os << "mean,," << (fin ? ",,," : ",") << ',' << detail::cell(s.specificity) << ',' << detail::cell(s.sensitivity) << ','
     << detail::cell(s.accuracy) << ',' << detail::cell(s.auc) << ',' << detail::cell(s.sd_auc);
  if (fin) os << ',' << detail::cell(rep.baseline_auc);
  os << ",\n";
}

inline void write_roc_csv(std::ostream& os, const CvReport& rep) {
  os << "fold,threshold,fpr,tpr\n";
  for (const auto& f : rep.folds)
    for (const auto& p : f.roc) os << f.patient_id << ',' << fmt(p.threshold) << ',' << fmt(p.fpr) << ',' << fmt(p.tpr) << '\n';
}

// ---- synthetic dataset manifest ----

inline json to_json(const PatientProfile& p) {
  return json{{"id", p.id},
              {"total_hours", p.total_hours},
              {"occupied_hours", p.occupied_hours},
              {"n_changes", p.n_changes},
              {"quietness", p.quietness},
              {"burst_rate", p.burst_rate},
              {"sleep_burst_fraction", p.sleep_burst_fraction},
              {"awake_fraction", p.awake_fraction},
              {"burst_amplitude", p.burst_amplitude},
              {"transient_amplitude", p.transient_amplitude},
              {"reposition_fraction", p.reposition_fraction},
              {"still_stay_fraction", p.still_stay_fraction},
              {"transient_min_s", p.transient_min_s},
              {"transient_max_s", p.transient_max_s},
              {"heartbeat_amplitude", p.heartbeat_amplitude},
              {"ambient_min", p.ambient_min},
              {"ambient_max", p.ambient_max},
              {"ambient_segment_s", p.ambient_segment_s},
              {"sensor_noise", p.sensor_noise},
              {"full_scale", p.full_scale},
              {"blip_rate", p.blip_rate},
              {"cough_rate", p.cough_rate},
              {"capture_gate", p.capture_gate},
              {"seed", p.seed}};
}

/// Fields absent from `j` keep the values of `base`.
inline PatientProfile profile_from_json(const json& j, PatientProfile base = {}) {
  PatientProfile p = std::move(base);
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  try {
    get("id", p.id);
    get("total_hours", p.total_hours);
    get("occupied_hours", p.occupied_hours);
    get("n_changes", p.n_changes);
    get("quietness", p.quietness);
    get("burst_rate", p.burst_rate);
    get("sleep_burst_fraction", p.sleep_burst_fraction);
    get("awake_fraction", p.awake_fraction);
    get("burst_amplitude", p.burst_amplitude);
    get("transient_amplitude", p.transient_amplitude);
    get("reposition_fraction", p.reposition_fraction);
    get("still_stay_fraction", p.still_stay_fraction);
    get("transient_min_s", p.transient_min_s);
    get("transient_max_s", p.transient_max_s);
    get("heartbeat_amplitude", p.heartbeat_amplitude);
    get("ambient_min", p.ambient_min);
    get("ambient_max", p.ambient_max);
    get("ambient_segment_s", p.ambient_segment_s);
    get("sensor_noise", p.sensor_noise);
    get("full_scale", p.full_scale);
    get("blip_rate", p.blip_rate);
    get("cough_rate", p.cough_rate);
    get("capture_gate", p.capture_gate);
    get("seed", p.seed);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed profile: ") + e.what());
  }
  return p;
}

inline json manifest_json(const SyntheticDataset& ds, double compression, std::uint64_t root_seed) {
  json recs = json::array();
  for (std::size_t i = 0; i < ds.recordings.size(); ++i) {
    const auto& m = ds.manifest[i];
    recs.push_back({{"profile", to_json(ds.recordings[i].profile)},
                    {"signal", m.id + "_signal.csv"},
                    {"annotation", m.id + "_occupancy.csv"},
                    {"coughs", m.id + "_coughs.csv"},
                    {"truth",
                     {{"total_hours", m.total_hours},
                      {"occupied_hours", m.occupied_hours},
                      {"changes", m.changes},
                      {"coughs", m.coughs}}}});
  }
  return json{{"format", "bedocc-dataset/1"}, {"root_seed", root_seed}, {"compression", compression}, {"recordings", recs}};
}

}  // namespace bedocc::io
