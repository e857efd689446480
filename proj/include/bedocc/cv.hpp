#pragma once

// Nested leave-one-patient-out cross-validation with grid search for both
// detectors, per-detector and end-to-end evaluation, and an amplitude baseline.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "bedocc/common.hpp"
#include "bedocc/detectors.hpp"
#include "bedocc/features.hpp"
#include "bedocc/metrics.hpp"
#include "bedocc/nn/model.hpp"
#include "bedocc/signal.hpp"

namespace bedocc {

struct PatientRecord {
  std::string id;
  MagnitudeSignal signal;
  OccupancySignal truth;
};

struct GridPoint {
  std::size_t psi = 32;
  std::size_t c = 20;
  nn::ModelSpec spec;

  std::string label() const { return "psi=" + std::to_string(psi) + " C=" + std::to_string(c) + " " + nn::describe(spec); }
};

struct GridSpec {
  std::vector<GridPoint> detector1;
  std::vector<GridPoint> detector2;
  std::size_t size() const { return detector1.size() + detector2.size(); }
};

/// Every classifier setting of the hyperparameter table for one family.
inline std::vector<nn::ModelSpec> classifier_grid(nn::Family family) {
  using nn::Family;
  std::vector<nn::ModelSpec> out;
  const nn::ModelSpec base = nn::default_spec(family);
  auto steps = [](double lo, double hi, double step) {
    std::vector<double> v;
    for (int i = 0; lo + i * step <= hi + 1e-9; ++i) v.push_back(lo + i * step);
    return v;
  };
  std::vector<double> decades;
  for (int i = -7; i <= 7; ++i) decades.push_back(std::pow(10.0, i));
  switch (family) {
    case Family::LR:
      for (double nu1 : decades)
        for (double nu2 : steps(0.0, 1.0, 0.05))
          for (double nu3 : steps(0.0, 1.0, 0.05)) {
            auto s = base;
            s.lr_strength = nu1;
            s.lr_l1_ratio = nu2;
            s.lr_l2_ratio = nu3;
            out.push_back(s);
          }
      break;
    case Family::MLP:
      for (std::size_t h = 10; h <= 100; h += 10)
        for (double l2 : decades)
          for (double m : steps(0.0, 1.0, 0.05)) {
            auto s = base;
            s.mlp_hidden = h;
            s.mlp_l2 = l2;
            s.mlp_momentum = m;
            out.push_back(s);
          }
      break;
    case Family::CNN:
      for (std::size_t b : {64, 128, 256})
        for (std::size_t e = 10; e <= 190; e += 20)
          for (std::size_t f : {24, 48, 96})
            for (std::size_t k : {2, 3})
              for (double d : {0.1, 0.3, 0.5})
                for (std::size_t u : {16, 32}) {
                  auto s = base;
                  s.batch_size = b;
                  s.epochs = e;
                  s.conv_filters = f;
                  s.kernel_size = k;
                  s.dropout = d;
                  s.dense_units = u;
                  out.push_back(s);
                }
      break;
    case Family::LSTM:
      for (std::size_t b : {64, 128, 256})
        for (std::size_t e = 10; e <= 190; e += 20)
          for (double d : {0.1, 0.3, 0.5})
            for (std::size_t u : {16, 32})
              for (std::size_t units : {64, 128, 256})
                for (double lr : {1e-2, 1e-3, 1e-4}) {
                  auto s = base;
                  s.batch_size = b;
                  s.epochs = e;
                  s.dropout = d;
                  s.dense_units = u;
                  s.lstm_units = units;
                  s.learning_rate = lr;
                  out.push_back(s);
                }
      break;
  }
  return out;
}

/// Full cross product of the feature-plan and classifier tables.
inline GridSpec default_grid(nn::Family d1_family, nn::Family d2_family) {
  GridSpec g;
  const auto d1_specs = classifier_grid(d1_family);
  const auto d2_specs = classifier_grid(d2_family);
  for (std::size_t psi : {32, 64})
    for (std::size_t c : {20, 50})
      for (const auto& s : d1_specs) g.detector1.push_back({psi, c, s});
  for (std::size_t psi : {32, 64})
    for (std::size_t c : {50, 100})
      for (const auto& s : d2_specs) g.detector2.push_back({psi, c, s});
  return g;
}

/// Reduced grid for desk-scale runs: small networks and few epochs, at most 24 points.
inline GridSpec desk_grid(nn::Family d1_family = nn::Family::LSTM, nn::Family d2_family = nn::Family::LSTM) {
  auto small = [](nn::Family f, std::size_t epochs) {
    nn::ModelSpec s = nn::default_spec(f);
    s.batch_size = 64;
    s.dense_units = 16;
    s.lstm_units = 16;
    s.conv_filters = 24;
    s.dropout = 0.1;
    if (f == nn::Family::LSTM || f == nn::Family::CNN) {
      s.epochs = epochs;
      s.learning_rate = 3e-3;
    }
    return s;
  };
  GridSpec g;
  {
    auto s = small(d1_family, 8);
    g.detector1.push_back({32, 20, s});
    g.detector1.push_back({64, 20, s});
  }
  {
    auto s = small(d2_family, 60);
    g.detector2.push_back({32, 50, s});
    g.detector2.push_back({64, 50, s});
  }
  return g;
}

struct CvOptions {
  std::uint64_t root_seed = 7;
  bool rotate_dev = true;          // false: the first remaining patient is the only dev set
  NegativePolicy negatives{};
  double interval_chunk_s = 60.0; // detector-2 training adds pieces of this length cut from long intervals (0 = off)
  IntervalAveraging averaging = IntervalAveraging::LogPower;
  PipelineOptions pipeline{};
  double resolution_s = 1.0;
  std::vector<double> baseline_windows_s{10.0, 60.0};
  std::size_t threads = 0;  // 0 = hardware concurrency
  std::function<void(const std::string&)> log;
};

struct Summary {
  double sensitivity = 0.0, specificity = 0.0, accuracy = 0.0, auc = 0.0;
  double sd_sensitivity = 0.0, sd_specificity = 0.0, sd_accuracy = 0.0, sd_auc = 0.0;
};

struct FoldResult {
  std::string patient_id;
  std::optional<GridPoint> detector1_choice, detector2_choice;
  double detector1_inner_auc = std::numeric_limits<double>::quiet_NaN();
  double detector2_inner_auc = std::numeric_limits<double>::quiet_NaN();
  MetricReport detector1, detector2, final;
  double baseline_auc = std::numeric_limits<double>::quiet_NaN();
  std::vector<RocPoint> roc;
  std::vector<std::string> skipped;  // grid points whose training failed
  std::size_t hypothesized_changes = 0, surviving_changes = 0;
};

struct CvReport {
  std::vector<FoldResult> folds;
  Summary detector1, detector2, final;
  double baseline_auc = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t root_seed = 0;
  double runtime_s = 0.0;
};

/// Mean and population SD over folds, ignoring NaN entries.
inline std::pair<double, double> nan_mean_sd(const std::vector<double>& v) {
  double s = 0.0, n = 0.0;
  for (double x : v)
    if (!std::isnan(x)) s += x, n += 1.0;
  if (n == 0.0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double m = s / n;
  double q = 0.0;
  for (double x : v)
    if (!std::isnan(x)) q += (x - m) * (x - m);
  return {m, std::sqrt(q / n)};
}

inline Summary summarize(const std::vector<MetricReport>& reports) {
  std::vector<double> se, sp, ac, au;
  for (const auto& r : reports) {
    se.push_back(r.sensitivity);
    sp.push_back(r.specificity);
    ac.push_back(r.accuracy);
    au.push_back(r.auc);
  }
  Summary s;
  std::tie(s.sensitivity, s.sd_sensitivity) = nan_mean_sd(se);
  std::tie(s.specificity, s.sd_specificity) = nan_mean_sd(sp);
  std::tie(s.accuracy, s.sd_accuracy) = nan_mean_sd(ac);
  std::tie(s.auc, s.sd_auc) = nan_mean_sd(au);
  return s;
}

/// Runs fn(0..n-1) on a small pool; the first exception is rethrown after all jobs finish.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex m;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Centered moving mean of a(t); a single-threshold occupancy score.
inline std::vector<double> amplitude_baseline_scores(const MagnitudeSignal& signal, double window_s) {
  const std::size_t n = signal.size();
  std::vector<double> cs(n + 1, 0.0), out(n);
  for (std::size_t i = 0; i < n; ++i) cs[i + 1] = cs[i] + signal.samples[i];
  const auto half = static_cast<std::size_t>(std::llround(0.5 * window_s * signal.fs));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i > half ? i - half : 0, b = std::min(n, i + half + 1);
    out[i] = (cs[b] - cs[a]) / static_cast<double>(b - a);
  }
  return out;
}

inline double baseline_auc(const PatientRecord& p, const std::vector<double>& windows_s, double resolution_s = 1.0) {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (double w : windows_s) {
    const auto s = amplitude_baseline_scores(p.signal, w);
    OccupancySignal pred = p.truth;
    for (std::size_t i = 0; i < s.size(); ++i) pred.states[i] = 0;
    const auto r = per_sample_metrics(p.truth, pred, s, resolution_s);
    if (std::isnan(best) || r.auc > best) best = r.auc;
  }
  return best;
}

/// Detector-1 labeled windows of one patient (positives at true changes, sampled negatives).
inline nn::LabeledSet detector1_items(const PatientRecord& p, std::size_t psi, std::size_t c, const NegativePolicy& policy) {
  const FramePlan plan = change_plan(psi, c, p.signal.fs);
  nn::LabeledSet set;
  for (const auto& w : make_training_change_windows(p.signal, p.truth, policy))
    set.add(change_window_matrix(p.signal, w.start_s, plan), w.label, p.id);
  return set;
}

/// Detector-2 labeled intervals of one patient; when chunk_s > 0, long intervals also contribute their pieces.
inline nn::LabeledSet detector2_items(const PatientRecord& p, std::size_t psi, std::size_t c, double chunk_s,
                                      IntervalAveraging averaging) {
  nn::LabeledSet set;
  for (const auto& iv : true_intervals(p.truth)) {
    const double len = iv.segment.duration();
    set.add(interval_feature_matrix(p.signal, iv.segment, psi, c, averaging), iv.label, p.id);
    const std::size_t pieces = chunk_s > 0.0 ? static_cast<std::size_t>(len / chunk_s) : 0;
    for (std::size_t k = 0; pieces > 1 && k < pieces; ++k) {
      const Segment s{iv.segment.start_s + len * static_cast<double>(k) / static_cast<double>(pieces),
                      iv.segment.start_s + len * static_cast<double>(k + 1) / static_cast<double>(pieces)};
      set.add(interval_feature_matrix(p.signal, s, psi, c, averaging), iv.label, p.id);
    }
  }
  return set;
}

/// Whole true intervals (the detector-2 evaluation unit).
inline nn::LabeledSet detector2_eval_items(const PatientRecord& p, std::size_t psi, std::size_t c, IntervalAveraging averaging) {
  return detector2_items(p, psi, c, 0.0, averaging);
}

struct Detector1Evaluation {
  MetricReport report;
  WindowScores scores;  // every sliding window, reused for change detection
};

/// Per-window detector-1 metrics: the true change windows are positives, sliding windows that do not
/// overlap any of them are negatives.
inline Detector1Evaluation evaluate_detector1_on(const PatientRecord& p, const nn::TrainedModel& model,
                                                 const PipelineOptions& opt) {
  Detector1Evaluation ev;
  ev.scores = score_windows(p.signal, model, opt.stride_s, opt.candidate_floor);
  const FramePlan plan = change_plan(model.feature_spec.psi, model.feature_spec.frames, p.signal.fs);
  std::vector<double> s;
  std::vector<int> y;
  std::vector<Segment> positives;
  for (const auto& c : change_instants(p.truth)) {
    const Segment b = change_window_bounds(c.tau, c.direction);
    positives.push_back(b);
    s.push_back(nn::predict_proba(model, change_window_matrix(p.signal, b.start_s, plan)));
    y.push_back(1);
  }
  for (std::size_t i = 0; i < ev.scores.scores.size(); ++i) {
    const double a = ev.scores.start(i), b = a + ev.scores.window_s;
    const bool overlaps = std::any_of(positives.begin(), positives.end(), [&](const Segment& q) { return q.start_s < b && a < q.end_s; });
    if (overlaps || !ev.scores.candidate[i]) continue;
    s.push_back(ev.scores.scores[i]);
    y.push_back(0);
  }
  ev.report = scored_metrics(s, y, opt.change_threshold);
  return ev;
}

inline MetricReport evaluate_detector2_on(const PatientRecord& p, const nn::TrainedModel& model, double threshold = 0.5) {
  const auto items = detector2_eval_items(p, model.feature_spec.psi, model.feature_spec.frames, model.feature_spec.averaging);
  const auto scores = nn::predict_proba(model, items.items);
  return scored_metrics(scores, items.labels, threshold);
}

namespace detail {

struct SetCache {
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, nn::LabeledSet> sets;  // (patient, psi, c)
  const nn::LabeledSet& at(std::size_t p, std::size_t psi, std::size_t c) const { return sets.at({p, psi, c}); }
};

inline void log(const CvOptions& o, const std::string& msg) {
  if (o.log) o.log(msg);
}

}  // namespace detail

enum class DetectorKind { Change = 1, Interval = 2 };

/// Nested LOPO machinery for one detector: builds feature caches, runs the inner grid
/// search for every outer fold and retrains the winner on all non-held-out patients.
class DetectorSearch {
 public:
  struct Outcome {
    std::optional<GridPoint> choice;
    double inner_auc = std::numeric_limits<double>::quiet_NaN();
    std::optional<nn::TrainedModel> model;
    std::vector<std::string> skipped;
  };

  DetectorSearch(DetectorKind kind, const std::vector<PatientRecord>& patients, std::vector<GridPoint> grid,
                 const CvOptions& opt)
      : kind_(kind), patients_(patients), grid_(std::move(grid)), opt_(opt) {
    require(patients_.size() >= 3, "nested cross-validation needs at least three patients");
    require(!grid_.empty(), "empty hyperparameter grid");
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> keys;
    for (std::size_t p = 0; p < patients_.size(); ++p) {
      std::map<std::pair<std::size_t, std::size_t>, bool> seen;
      for (const auto& g : grid_)
        if (!seen[{g.psi, g.c}]) {
          seen[{g.psi, g.c}] = true;
          keys.emplace_back(p, g.psi, g.c);
        }
    }
    std::vector<nn::LabeledSet> built(keys.size()), eval_built(keys.size());
    parallel_for(keys.size(), opt_.threads, [&](std::size_t i) {
      const auto [p, psi, c] = keys[i];
      if (kind_ == DetectorKind::Change) {
        NegativePolicy pol = opt_.negatives;
        pol.seed = derive_seed(opt_.root_seed, 0xd1);
        built[i] = detector1_items(patients_[p], psi, c, pol);
      } else {
        built[i] = detector2_items(patients_[p], psi, c, opt_.interval_chunk_s, opt_.averaging);
        eval_built[i] = detector2_eval_items(patients_[p], psi, c, opt_.averaging);
      }
    });
    for (std::size_t i = 0; i < keys.size(); ++i) {
      train_cache_.sets[keys[i]] = std::move(built[i]);
      if (kind_ == DetectorKind::Interval) eval_cache_.sets[keys[i]] = std::move(eval_built[i]);
    }
  }

  /// Runs the whole search for every outer fold (indices into patients).
  std::vector<Outcome> run(const std::vector<std::size_t>& outer) const {
    // inner jobs: (outer fold, grid point, dev patient)
    struct Job {
      std::size_t fold, g, dev;
    };
    std::vector<Job> jobs;
    for (std::size_t f = 0; f < outer.size(); ++f)
      for (std::size_t g = 0; g < grid_.size(); ++g)
        for (std::size_t d : dev_patients(outer[f])) jobs.push_back({f, g, d});
    std::vector<double> aucs(jobs.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> errors(jobs.size());
    const bool single = grid_.size() == 1;
    parallel_for(single ? 0 : jobs.size(), opt_.threads, [&](std::size_t j) {
      const Job& job = jobs[j];
      std::vector<std::size_t> train_ids;
      for (std::size_t p = 0; p < patients_.size(); ++p)
        if (p != outer[job.fold] && p != job.dev) train_ids.push_back(p);
      try {
        const auto model = fit(grid_[job.g], train_ids);
        aucs[j] = dev_auc(model, job.dev);
      } catch (const nn::TrainingDivergence& e) {
        errors[j] = e.what();
      }
    });

    std::vector<Outcome> out(outer.size());
    for (std::size_t f = 0; f < outer.size(); ++f) {
      std::vector<double> sum(grid_.size(), 0.0), count(grid_.size(), 0.0);
      std::vector<bool> failed(grid_.size(), false);
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].fold != f) continue;
        if (!errors[j].empty()) {
          failed[jobs[j].g] = true;
          out[f].skipped.push_back(grid_[jobs[j].g].label() + ": " + errors[j]);
        } else if (!std::isnan(aucs[j])) {
          sum[jobs[j].g] += aucs[j];
          count[jobs[j].g] += 1.0;
        }
      }
      std::optional<std::size_t> best;
      double best_auc = -1.0;
      for (std::size_t g = 0; g < grid_.size(); ++g) {
        if (failed[g]) continue;
        const double m = count[g] > 0.0 ? sum[g] / count[g] : (single ? 0.0 : -1.0);
        if (count[g] == 0.0 && !single) continue;
        if (m > best_auc) {  // ties keep the earlier grid point
          best_auc = m;
          best = g;
        }
      }
      if (best) {
        out[f].choice = grid_[*best];
        out[f].inner_auc = single ? std::numeric_limits<double>::quiet_NaN() : best_auc;
      }
    }
    // retrain the winners on all six non-held-out patients
    parallel_for(outer.size(), opt_.threads, [&](std::size_t f) {
      if (!out[f].choice) return;
      std::vector<std::size_t> train_ids;
      for (std::size_t p = 0; p < patients_.size(); ++p)
        if (p != outer[f]) train_ids.push_back(p);
      try {
        out[f].model = fit(*out[f].choice, train_ids);
      } catch (const nn::TrainingDivergence& e) {
        out[f].skipped.push_back(out[f].choice->label() + ": " + e.what());
      }
    });
    return out;
  }

  std::vector<std::size_t> dev_patients(std::size_t held_out) const {
    std::vector<std::size_t> d;
    for (std::size_t p = 0; p < patients_.size(); ++p)
      if (p != held_out) d.push_back(p);
    if (!opt_.rotate_dev) d.resize(1);
    return d;
  }

  nn::TrainedModel fit(const GridPoint& g, const std::vector<std::size_t>& train_ids) const {
    nn::LabeledSet train;
    for (std::size_t p : train_ids) train.append(train_cache_.at(p, g.psi, g.c));
    nn::ModelSpec spec = g.spec;
    spec.seed = derive_seed(opt_.root_seed, static_cast<std::uint64_t>(kind_), hash_string(g.label()));
    auto model = nn::train(spec, train, nullptr);
    model.feature_spec = {g.psi, g.c, kind_ == DetectorKind::Interval ? opt_.averaging : IntervalAveraging::Linear};
    return model;
  }

  double dev_auc(const nn::TrainedModel& model, std::size_t dev) const {
    const auto& set = kind_ == DetectorKind::Change ? train_cache_.at(dev, model.feature_spec.psi, model.feature_spec.frames)
                                                    : eval_cache_.at(dev, model.feature_spec.psi, model.feature_spec.frames);
    if (set.count(1) == 0 || set.count(0) == 0) return std::numeric_limits<double>::quiet_NaN();
    return roc_auc(nn::predict_proba(model, set.items), set.labels);
  }

  const detail::SetCache& training_cache() const { return train_cache_; }

 private:
  DetectorKind kind_;
  const std::vector<PatientRecord>& patients_;
  std::vector<GridPoint> grid_;
  CvOptions opt_;
  detail::SetCache train_cache_, eval_cache_;
};

inline std::vector<std::size_t> all_folds(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

inline void finish(CvReport& rep) {
  std::vector<MetricReport> d1, d2, fin;
  std::vector<double> base;
  for (const auto& f : rep.folds) {
    d1.push_back(f.detector1);
    d2.push_back(f.detector2);
    fin.push_back(f.final);
    base.push_back(f.baseline_auc);
  }
  rep.detector1 = summarize(d1);
  rep.detector2 = summarize(d2);
  rep.final = summarize(fin);
  rep.baseline_auc = nan_mean_sd(base).first;
}

inline MetricReport nan_report() {
  MetricReport r;
  r.sensitivity = r.specificity = r.accuracy = r.auc = std::numeric_limits<double>::quiet_NaN();
  return r;
}

/// Nested LOPO evaluation of detector 1 alone (per-window metrics).
inline CvReport evaluate_detector1(const std::vector<PatientRecord>& patients, const GridSpec& grid, const CvOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  DetectorSearch search(DetectorKind::Change, patients, grid.detector1, opt);
  const auto outcomes = search.run(all_folds(patients.size()));
  CvReport rep;
  rep.root_seed = opt.root_seed;
  rep.folds.resize(patients.size());
  parallel_for(patients.size(), opt.threads, [&](std::size_t p) {
    FoldResult& f = rep.folds[p];
    f.patient_id = patients[p].id;
    f.detector1_choice = outcomes[p].choice;
    f.detector1_inner_auc = outcomes[p].inner_auc;
    f.skipped = outcomes[p].skipped;
    f.detector1 = outcomes[p].model ? evaluate_detector1_on(patients[p], *outcomes[p].model, opt.pipeline).report : nan_report();
    f.detector2 = f.final = nan_report();
  });
  finish(rep);
  rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

/// Nested LOPO evaluation of detector 2 alone (per-interval metrics on true intervals).
inline CvReport evaluate_detector2(const std::vector<PatientRecord>& patients, const GridSpec& grid, const CvOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  DetectorSearch search(DetectorKind::Interval, patients, grid.detector2, opt);
  const auto outcomes = search.run(all_folds(patients.size()));
  CvReport rep;
  rep.root_seed = opt.root_seed;
  rep.folds.resize(patients.size());
  parallel_for(patients.size(), opt.threads, [&](std::size_t p) {
    FoldResult& f = rep.folds[p];
    f.patient_id = patients[p].id;
    f.detector2_choice = outcomes[p].choice;
    f.detector2_inner_auc = outcomes[p].inner_auc;
    f.skipped = outcomes[p].skipped;
    f.detector2 = outcomes[p].model ? evaluate_detector2_on(patients[p], *outcomes[p].model, opt.pipeline.interval_threshold) : nan_report();
    f.detector1 = f.final = nan_report();
  });
  finish(rep);
  rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

/// Full nested LOPO run: both detectors selected and retrained per outer fold, then the
/// three-detector pipeline is scored per sample on the held-out patient.
inline CvReport nested_lopo_cv(const std::vector<PatientRecord>& patients, const GridSpec& grid, const CvOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto folds = all_folds(patients.size());
  detail::log(opt, "detector 1 search: " + std::to_string(grid.detector1.size()) + " grid points");
  const auto o1 = DetectorSearch(DetectorKind::Change, patients, grid.detector1, opt).run(folds);
  detail::log(opt, "detector 2 search: " + std::to_string(grid.detector2.size()) + " grid points");
  const auto o2 = DetectorSearch(DetectorKind::Interval, patients, grid.detector2, opt).run(folds);

  CvReport rep;
  rep.root_seed = opt.root_seed;
  rep.folds.resize(patients.size());
  parallel_for(patients.size(), opt.threads, [&](std::size_t p) {
    const PatientRecord& pt = patients[p];
    FoldResult& f = rep.folds[p];
    f.patient_id = pt.id;
    f.detector1_choice = o1[p].choice;
    f.detector2_choice = o2[p].choice;
    f.detector1_inner_auc = o1[p].inner_auc;
    f.detector2_inner_auc = o2[p].inner_auc;
    f.skipped = o1[p].skipped;
    f.skipped.insert(f.skipped.end(), o2[p].skipped.begin(), o2[p].skipped.end());
    f.baseline_auc = baseline_auc(pt, opt.baseline_windows_s, opt.resolution_s);
    f.detector1 = f.detector2 = f.final = nan_report();
    if (!o1[p].model || !o2[p].model) return;
    const auto d1 = evaluate_detector1_on(pt, *o1[p].model, opt.pipeline);
    f.detector1 = d1.report;
    f.detector2 = evaluate_detector2_on(pt, *o2[p].model, opt.pipeline.interval_threshold);
    const auto changes = consolidate(d1.scores, opt.pipeline.change_threshold, opt.pipeline.min_separation_s);
    const auto pred = predict_occupancy(pt.signal, changes, model_interval_scorer(pt.signal, *o2[p].model), opt.pipeline);
    f.final = per_sample_metrics(pt.truth, pred.occupancy, pred.scores, opt.resolution_s);
    f.hypothesized_changes = changes.size();
    f.surviving_changes = pred.hypothesis.intervals.size() - 1;
    std::vector<int> t;
    std::vector<double> s;
    const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opt.resolution_s * pt.truth.fs)));
    for (std::size_t i = 0; i < pt.truth.size(); i += step) {
      t.push_back(pt.truth.states[i]);
      s.push_back(pred.scores[i]);
    }
    if (std::count(t.begin(), t.end(), 1) > 0 && std::count(t.begin(), t.end(), 0) > 0) f.roc = roc_curve(s, t);
    detail::log(opt, "fold " + pt.id + ": final AUC " + std::to_string(f.final.auc));
  });
  finish(rep);
  rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace bedocc
