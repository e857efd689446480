#pragma once

// The three-detector occupancy pipeline:
//   detector 1 scores 5 s windows for an occupancy change,
//   detector 2 scores the intervals between hypothesised changes,
//   detector 3 discards changes whose flanking intervals agree.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "bedocc/common.hpp"
#include "bedocc/features.hpp"
#include "bedocc/nn/model.hpp"
#include "bedocc/signal.hpp"

namespace bedocc {

inline constexpr double kChangeWindowSeconds = 5.0;  // T_oc
inline constexpr double kIntervalTrimSeconds = 2.5;

struct ChangeWindow {
  double start_s = 0.0;
  double end_s = 0.0;
  int label = 0;  // 1 = change
  double score = 0.0;
  Direction direction = Direction::Unknown;
  bool clamped = false;  // window extends past the recording and is zero-padded
};

/// Change-window placement: entries look 1 s back and 4 s ahead, exits the reverse.
inline Segment change_window_bounds(double tau, Direction d) {
  const double before = d == Direction::Out ? 0.8 * kChangeWindowSeconds : 0.2 * kChangeWindowSeconds;
  return {tau - before, tau - before + kChangeWindowSeconds};
}

struct NegativePolicy {
  double stride_s = 0.5;
  double per_positive = 20.0;  // pool subsample ratio; <= 0 keeps every negative
  std::size_t minimum = 200;
  std::uint64_t seed = 0;
};

/// Positive windows at every true change plus non-overlapping negative sliding windows.
inline std::vector<ChangeWindow> make_training_change_windows(const MagnitudeSignal& signal,
                                                              const OccupancySignal& truth,
                                                              const NegativePolicy& policy = {}) {
  require(truth.size() == signal.size(), "make_training_change_windows: truth not aligned with signal");
  require(policy.stride_s > 0.0, "make_training_change_windows: stride must be positive");
  const double duration = signal.duration();
  std::vector<ChangeWindow> out;
  for (const auto& c : change_instants(truth)) {
    const Segment b = change_window_bounds(c.tau, c.direction);
    out.push_back({b.start_s, b.end_s, 1, 1.0, c.direction, b.start_s < 0.0 || b.end_s > duration});
  }
  const std::size_t n_pos = out.size();

  std::vector<double> pool;
  const auto stride = static_cast<std::size_t>(std::llround(policy.stride_s * signal.fs));
  const auto win = static_cast<std::size_t>(std::llround(kChangeWindowSeconds * signal.fs));
  std::size_t p = 0;  // positives are sorted by start
  for (std::size_t s = 0; s + win <= signal.size(); s += std::max<std::size_t>(stride, 1)) {
    const double start = static_cast<double>(s) / signal.fs, end = start + kChangeWindowSeconds;
    while (p < n_pos && out[p].end_s <= start) ++p;
    bool overlaps = false;
    for (std::size_t q = p; q < n_pos && out[q].start_s < end; ++q)
      if (out[q].end_s > start) overlaps = true;
    if (!overlaps) pool.push_back(start);
  }
  if (policy.per_positive > 0.0) {
    const auto want = std::max(policy.minimum, static_cast<std::size_t>(std::ceil(policy.per_positive * static_cast<double>(n_pos))));
    if (pool.size() > want) {
      Rng rng(derive_seed(policy.seed, hash_string(signal.patient_id)));
      std::vector<double> picked;
      std::sample(pool.begin(), pool.end(), std::back_inserter(picked), want, rng);
      pool = std::move(picked);
    }
  }
  for (double s : pool) out.push_back({s, s + kChangeWindowSeconds, 0, 0.0, Direction::Unknown, false});
  return out;
}

inline FramePlan change_plan(std::size_t psi, std::size_t c, double fs = kSampleRate) {
  return plan_frames(static_cast<std::size_t>(std::llround(kChangeWindowSeconds * fs)), psi, c);
}

/// Feature matrix of the window starting at start_s (zero-padded outside the recording).
inline FeatureMatrix change_window_matrix(const MagnitudeSignal& signal, double start_s, const FramePlan& plan) {
  const auto begin = static_cast<std::ptrdiff_t>(std::llround(start_s * signal.fs));
  const auto window = extract_padded(signal.samples, begin, plan.window_len);
  FeatureMatrix m = window_feature_matrix(window, plan);
  m.provenance = {signal.patient_id, start_s, start_s + static_cast<double>(plan.window_len) / signal.fs};
  return m;
}

struct WindowScores {
  double stride_s = 0.5;
  double window_s = kChangeWindowSeconds;
  std::vector<double> scores;    // window i starts at i * stride_s
  std::vector<char> candidate;   // passed the energy gate; the rest score 0 unevaluated

  double start(std::size_t i) const { return static_cast<double>(i) * stride_s; }
  double mid(std::size_t i) const { return start(i) + 0.5 * window_s; }
};

/// Energy gate: a window is a candidate when its peak reaches `floor` (fraction of full scale).
inline std::vector<char> candidate_windows(const MagnitudeSignal& signal, std::size_t window_len, std::size_t stride,
                                           std::size_t count, double floor) {
  std::vector<char> out(count, 1);
  if (floor <= 0.0 || count == 0) return out;
  const std::size_t blocks = (signal.size() + stride - 1) / stride;
  std::vector<double> bmax(blocks, 0.0);
  for (std::size_t i = 0; i < signal.size(); ++i) bmax[i / stride] = std::max(bmax[i / stride], signal.samples[i]);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t a = w * stride, b = a + window_len;
    double peak = 0.0;
    std::size_t i = a;
    for (; i < b && i % stride != 0; ++i) peak = std::max(peak, signal.samples[i]);
    for (; i + stride <= b; i += stride) peak = std::max(peak, bmax[i / stride]);
    for (; i < b; ++i) peak = std::max(peak, signal.samples[i]);
    out[w] = peak >= floor;
  }
  return out;
}

/// Detector-1 posterior of every sliding window that passes the energy gate (featurized in chunks).
inline WindowScores score_windows(const MagnitudeSignal& signal, const nn::TrainedModel& model, double stride_s = 0.5,
                                  double candidate_floor = 0.0) {
  const FramePlan plan = change_plan(model.feature_spec.psi, model.feature_spec.frames, signal.fs);
  const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(stride_s * signal.fs)));
  WindowScores ws;
  ws.stride_s = static_cast<double>(stride) / signal.fs;
  ws.window_s = static_cast<double>(plan.window_len) / signal.fs;
  if (signal.size() < plan.window_len) return ws;
  const std::size_t count = (signal.size() - plan.window_len) / stride + 1;
  ws.candidate = candidate_windows(signal, plan.window_len, stride, count, candidate_floor);
  ws.scores.assign(count, 0.0);
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < count; ++i)
    if (ws.candidate[i]) todo.push_back(i);
  constexpr std::size_t kChunk = 2048;
  std::vector<FeatureMatrix> batch;
  for (std::size_t b = 0; b < todo.size(); b += kChunk) {
    batch.clear();
    const std::size_t e = std::min(todo.size(), b + kChunk);
    for (std::size_t k = b; k < e; ++k) {
      const std::span<const double> w(signal.samples.data() + todo[k] * stride, plan.window_len);
      batch.push_back(window_feature_matrix(w, plan));
    }
    const auto p = nn::predict_proba(model, batch);
    for (std::size_t k = b; k < e; ++k) ws.scores[todo[k]] = p[k - b];
  }
  return ws;
}

struct DetectedChange {
  double tau = 0.0;
  double score = 0.0;  // peak window score of the run
};

/// Runs of windows scoring >= threshold become one instant at the score-weighted mean of
/// their window midpoints; instants closer than min_separation_s keep the higher peak.
inline std::vector<DetectedChange> consolidate(const WindowScores& ws, double threshold, double min_separation_s = 10.0) {
  std::vector<DetectedChange> runs;
  const auto& s = ws.scores;
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] < threshold) {
      ++i;
      continue;
    }
    double wsum = 0.0, tsum = 0.0, peak = 0.0;
    std::size_t j = i;
    for (; j < s.size() && s[j] >= threshold; ++j) {
      const double w = std::max(s[j], 1e-12);
      wsum += w;
      tsum += w * ws.mid(j);
      peak = std::max(peak, s[j]);
    }
    runs.push_back({tsum / wsum, peak});
    i = j;
  }
  std::vector<DetectedChange> out;
  for (const auto& r : runs) {
    if (!out.empty() && r.tau - out.back().tau < min_separation_s) {
      if (r.score > out.back().score) out.back() = r;
      continue;
    }
    out.push_back(r);
  }
  return out;
}

inline std::vector<DetectedChange> detect_changes(const MagnitudeSignal& signal, const nn::TrainedModel& model,
                                                  double threshold = 0.5, double min_separation_s = 10.0,
                                                  double stride_s = 0.5, double candidate_floor = 0.0) {
  return consolidate(score_windows(signal, model, stride_s, candidate_floor), threshold, min_separation_s);
}

enum class ChangeStatus { Change, Activity };

struct HypothesizedChange {
  double tau = 0.0;
  double score = 0.0;
  ChangeStatus status = ChangeStatus::Change;
  Direction direction = Direction::Unknown;
};

struct IntervalHypothesis {
  double start_s = 0.0;
  double end_s = 0.0;
  double score = 0.0;
  bool occupied = false;
  int k = 0;

  double duration() const { return end_s - start_s; }
  Segment segment() const { return {start_s, end_s}; }
};

/// `intervals` always has one more entry than there are changes with status Change.
struct DetectionHypothesis {
  std::vector<HypothesizedChange> changes;
  std::vector<IntervalHypothesis> intervals;
  bool reconciled = false;
};

/// K+1 intervals between the hypothesised changes, each side trimmed by half a change
/// window (untrimmed if trimming would empty the interval).
inline std::vector<IntervalHypothesis> derive_intervals(std::span<const double> taus, double duration_s,
                                                        double trim_s = kIntervalTrimSeconds) {
  require(duration_s > 0.0, "derive_intervals: duration must be positive");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    require(taus[i] > 0.0 && taus[i] < duration_s, "derive_intervals: change outside the recording");
    require(i == 0 || taus[i] > taus[i - 1], "derive_intervals: changes must be strictly increasing");
  }
  std::vector<IntervalHypothesis> out;
  const std::size_t k = taus.size();
  for (std::size_t i = 0; i <= k; ++i) {
    const double lo = i == 0 ? 0.0 : taus[i - 1];
    const double hi = i == k ? duration_s : taus[i];
    double a = i == 0 ? lo : lo + trim_s;
    double b = i == k ? hi : hi - trim_s;
    if (!(b > a)) {
      a = lo;
      b = hi;
    }
    out.push_back({a, b, 0.0, false, static_cast<int>(i)});
  }
  return out;
}

inline std::vector<IntervalHypothesis> derive_intervals(std::span<const DetectedChange> changes, double duration_s,
                                                        double trim_s = kIntervalTrimSeconds) {
  std::vector<double> taus;
  for (const auto& c : changes) taus.push_back(c.tau);
  return derive_intervals(taus, duration_s, trim_s);
}

using IntervalScorer = std::function<double(const Segment&)>;

inline IntervalScorer model_interval_scorer(const MagnitudeSignal& signal, const nn::TrainedModel& model) {
  return [&signal, &model](const Segment& seg) {
    return nn::predict_proba(model, interval_feature_matrix(signal, seg, model.feature_spec.psi,
                                                            model.feature_spec.frames, model.feature_spec.averaging));
  };
}

inline void classify_intervals(std::vector<IntervalHypothesis>& intervals, const IntervalScorer& scorer,
                               double threshold = 0.5) {
  for (auto& iv : intervals) {
    iv.score = scorer(iv.segment());
    iv.occupied = iv.score >= threshold;
  }
}

inline std::vector<IntervalHypothesis> classify_intervals(const MagnitudeSignal& signal,
                                                          std::vector<IntervalHypothesis> intervals,
                                                          const nn::TrainedModel& model, double threshold = 0.5) {
  classify_intervals(intervals, model_interval_scorer(signal, model), threshold);
  return intervals;
}

/// Detector 3. Interval 0 is taken as unoccupied; a change whose flanking intervals share a
/// label is retagged as activity and the two intervals merge (duration-weighted score).
inline DetectionHypothesis reconcile(DetectionHypothesis h) {
  std::vector<std::size_t> live;  // indices into h.changes with status Change
  for (std::size_t i = 0; i < h.changes.size(); ++i)
    if (h.changes[i].status == ChangeStatus::Change) live.push_back(i);
  require(h.intervals.size() == live.size() + 1, "reconcile: need one more interval than live changes");
  h.intervals.front().occupied = false;
  auto& iv = h.intervals;
  for (std::size_t j = 0; j + 1 < iv.size();) {
    if (iv[j].occupied != iv[j + 1].occupied) {
      ++j;
      continue;
    }
    const double da = iv[j].duration(), db = iv[j + 1].duration();
    iv[j].score = da + db > 0.0 ? (iv[j].score * da + iv[j + 1].score * db) / (da + db) : iv[j].score;
    iv[j].end_s = iv[j + 1].end_s;
    iv.erase(iv.begin() + static_cast<std::ptrdiff_t>(j + 1));
    h.changes[live[j]].status = ChangeStatus::Activity;
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(j));
  }
  for (std::size_t j = 0; j < iv.size(); ++j) iv[j].k = static_cast<int>(j);
  for (std::size_t j = 0; j < live.size(); ++j) h.changes[live[j]].direction = j % 2 == 0 ? Direction::In : Direction::Out;
  h.reconciled = true;
  return h;
}

struct OccupancyPrediction {
  OccupancySignal occupancy;
  std::vector<double> scores;  // per sample
  DetectionHypothesis hypothesis;
};

/// Per-sample n^(t) and scores; samples in a change gap take the following interval.
inline OccupancyPrediction render_occupancy(const DetectionHypothesis& h, std::size_t n_samples, double fs) {
  OccupancyPrediction out;
  out.occupancy.fs = fs;
  out.occupancy.source = OccupancySource::Predicted;
  out.occupancy.states.assign(n_samples, 0);
  out.scores.assign(n_samples, 0.0);
  std::size_t from = 0;
  for (std::size_t j = 0; j < h.intervals.size(); ++j) {
    const auto& iv = h.intervals[j];
    const std::size_t to = j + 1 == h.intervals.size() ? n_samples : std::min(sample_at_or_after(iv.end_s, fs), n_samples);
    for (std::size_t i = from; i < to; ++i) {
      out.occupancy.states[i] = iv.occupied ? 1 : 0;
      out.scores[i] = iv.score;
    }
    from = std::max(from, to);
  }
  out.hypothesis = h;
  return out;
}

struct PipelineOptions {
  double change_threshold = 0.5;
  double interval_threshold = 0.5;
  double min_separation_s = 10.0;
  double stride_s = 0.5;
  double trim_s = kIntervalTrimSeconds;
  double candidate_floor = 0.15;  // energy gate in front of detector 1 (0 = every window)
};

/// Detectors 2 and 3 applied to given change hypotheses.
inline OccupancyPrediction predict_occupancy(const MagnitudeSignal& signal, std::span<const DetectedChange> changes,
                                             const IntervalScorer& scorer, const PipelineOptions& opt = {}) {
  DetectionHypothesis h;
  for (const auto& c : changes) h.changes.push_back({c.tau, c.score, ChangeStatus::Change, Direction::Unknown});
  h.intervals = derive_intervals(changes, signal.duration(), opt.trim_s);
  classify_intervals(h.intervals, scorer, opt.interval_threshold);
  return render_occupancy(reconcile(std::move(h)), signal.size(), signal.fs);
}

inline OccupancyPrediction predict_occupancy(const MagnitudeSignal& signal, const nn::TrainedModel& d1,
                                             const nn::TrainedModel& d2, const PipelineOptions& opt = {}) {
  const auto changes = detect_changes(signal, d1, opt.change_threshold, opt.min_separation_s, opt.stride_s, opt.candidate_floor);
  return predict_occupancy(signal, changes, model_interval_scorer(signal, d2), opt);
}

struct LabeledInterval {
  Segment segment;
  int label = 0;
};

/// Detector-2 training intervals: the spans between true changes with the change windows excluded.
inline std::vector<LabeledInterval> true_intervals(const OccupancySignal& truth) {
  const auto changes = change_instants(truth);
  const double duration = truth.duration();
  std::vector<LabeledInterval> out;
  for (std::size_t i = 0; i <= changes.size(); ++i) {
    const double lo = i == 0 ? 0.0 : changes[i - 1].tau;
    const double hi = i == changes.size() ? duration : changes[i].tau;
    double a = i == 0 ? 0.0 : std::max(lo, change_window_bounds(lo, changes[i - 1].direction).end_s);
    double b = i == changes.size() ? duration : std::min(hi, change_window_bounds(hi, changes[i].direction).start_s);
    if (!(b > a)) {
      a = lo;
      b = hi;
    }
    if (b > a) out.push_back({{a, b}, i % 2 == 1 ? 1 : 0});
  }
  return out;
}

}  // namespace bedocc
