#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "bedocc/common.hpp"
#include "bedocc/signal.hpp"

namespace bedocc {

/// Area under the ROC curve via the Mann-Whitney rank statistic; tied scores count 1/2.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), "roc_auc: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) {
        pos_rank_sum += mid_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InvalidArgument("roc_auc: both classes must be present");
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

/// ROC operating points for every distinct threshold, from (0,0) to (1,1).
inline std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), "roc_curve: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double n_pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  require(n_pos > 0 && n_neg > 0, "roc_curve: both classes must be present");
  std::vector<RocPoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? tp : fp) += 1.0;
      ++j;
    }
    out.push_back({scores[order[i]], fp / n_neg, tp / n_pos});
    i = j;
  }
  return out;
}

struct MetricReport {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double accuracy = 0.0;
  double auc = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double resolution_s = 0.0;
};

/// Confusion counts with label 1 as positive. Sensitivity (specificity) is NaN when
/// there are no positives (negatives).
inline MetricReport confusion_metrics(std::span<const int> truth, std::span<const int> pred) {
  require(truth.size() == pred.size(), "confusion_metrics: length mismatch");
  MetricReport r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) (pred[i] ? r.tp : r.fn)++;
    else (pred[i] ? r.fp : r.tn)++;
  }
  const auto d = [](std::size_t a, std::size_t b) {
    return b ? static_cast<double>(a) / static_cast<double>(b) : std::numeric_limits<double>::quiet_NaN();
  };
  r.sensitivity = d(r.tp, r.tp + r.fn);
  r.specificity = d(r.tn, r.tn + r.fp);
  r.accuracy = d(r.tp + r.tn, truth.size());
  return r;
}

/// Confusion metrics at a threshold plus AUC (NaN if only one class is present).
inline MetricReport scored_metrics(std::span<const double> scores, std::span<const int> truth, double threshold) {
  std::vector<int> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= threshold ? 1 : 0;
  MetricReport r = confusion_metrics(truth, pred);
  const bool both = std::find(truth.begin(), truth.end(), 0) != truth.end() &&
                    std::find_if(truth.begin(), truth.end(), [](int v) { return v != 0; }) != truth.end();
  r.auc = both ? roc_auc(scores, truth) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

/// Compares n(t) and n^(t) on a per-sample basis after decimating to `resolution_s`
/// (the sample at the start of every block is kept).
inline MetricReport per_sample_metrics(const OccupancySignal& truth, const OccupancySignal& pred,
                                       std::span<const double> scores, double resolution_s = 1.0) {
  require(truth.size() == pred.size() && truth.size() == scores.size(), "per_sample_metrics: length mismatch");
  require(resolution_s > 0.0, "per_sample_metrics: resolution must be positive");
  const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(resolution_s * truth.fs)));
  std::vector<int> t, p;
  std::vector<double> s;
  for (std::size_t i = 0; i < truth.size(); i += step) {
    t.push_back(truth.states[i]);
    p.push_back(pred.states[i]);
    s.push_back(scores[i]);
  }
  MetricReport r = confusion_metrics(t, p);
  const bool both = std::find(t.begin(), t.end(), 0) != t.end() && std::find(t.begin(), t.end(), 1) != t.end();
  r.auc = both ? roc_auc(s, t) : std::numeric_limits<double>::quiet_NaN();
  r.resolution_s = static_cast<double>(step) / truth.fs;
  return r;
}

}  // namespace bedocc
