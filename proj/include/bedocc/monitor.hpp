#pragma once

// Long-term monitoring: candidate event detection, daily cough rate, culture
// indicators and the per-day trend report.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bedocc/common.hpp"
#include "bedocc/signal.hpp"

namespace bedocc {

enum class CoughSource { ExternalList, ThresholdDetector };

inline const char* to_string(CoughSource s) {
  return s == CoughSource::ExternalList ? "external-list" : "threshold-detector";
}

struct CoughEvent {
  double start_s = 0.0;
  double end_s = 0.0;
  CoughSource source = CoughSource::ExternalList;

  double duration() const { return end_s - start_s; }
};

/// Sorts events and merges the overlapping ones.
inline std::vector<CoughEvent> merge_events(std::vector<CoughEvent> events) {
  for (const auto& e : events) require(e.end_s > e.start_s, "cough event must have end > start");
  std::sort(events.begin(), events.end(), [](const CoughEvent& a, const CoughEvent& b) { return a.start_s < b.start_s; });
  std::vector<CoughEvent> out;
  for (const auto& e : events) {
    if (!out.empty() && e.start_s < out.back().end_s)
      out.back().end_s = std::max(out.back().end_s, e.end_s);
    else
      out.push_back(e);
  }
  return out;
}

/// Segments where the centred 0.5 s running mean of a(t) exceeds threshold_frac for more
/// than min_dur_s. Each run is shrunk by half the averaging window on both sides, so an
/// isolated burst maps back onto itself.
inline std::vector<Segment> detect_events(const MagnitudeSignal& signal, double threshold_frac = 0.01,
                                          double min_dur_s = 0.5) {
  require(threshold_frac > 0.0, "detect_events: threshold must be positive");
  std::vector<Segment> out;
  const std::size_t n = signal.size();
  if (n == 0) return out;
  const auto win = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.5 * signal.fs)));
  const std::size_t half = win / 2;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + signal.samples[i];
  std::vector<char> above(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, lo + win);
    above[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(win) > threshold_frac;
  }
  for (std::size_t i = 0; i < n;) {
    if (!above[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && above[j]) ++j;
    const std::size_t a = i == 0 ? i : i + half;
    const std::size_t b = j == n ? j : (j > half ? j - half : 0);
    if (b > a) {
      const Segment s{static_cast<double>(a) / signal.fs, static_cast<double>(b) / signal.fs};
      if (s.duration() > min_dur_s) out.push_back(s);
    }
    i = j;
  }
  return out;
}

/// Pass-through mode: every candidate event is taken as a cough.
inline std::vector<CoughEvent> events_as_coughs(std::span<const Segment> events) {
  std::vector<CoughEvent> out;
  for (const auto& e : events) out.push_back({e.start_s, e.end_s, CoughSource::ThresholdDetector});
  return out;
}

inline constexpr double kDaySeconds = 86400.0;

enum class RateConvention { Extrapolated, AsPrinted };

inline const char* to_string(RateConvention c) { return c == RateConvention::Extrapolated ? "extrapolated" : "as-printed"; }

inline RateConvention rate_convention_from_string(const std::string& s) {
  if (s == "extrapolated") return RateConvention::Extrapolated;
  if (s == "as-printed") return RateConvention::AsPrinted;
  throw InvalidArgument("unknown cough-rate convention '" + s + "'");
}

/// R from C coughs over B occupied hours.
inline double daily_rate(double coughs, double occupied_hours, RateConvention convention) {
  require(coughs >= 0.0, "cough count must be >= 0");
  require(occupied_hours >= 0.0 && occupied_hours <= 24.0 + 1e-9, "occupied hours must lie in [0,24]");
  if (coughs == 0.0) return 0.0;
  if (occupied_hours == 0.0) throw InvalidArgument("coughs counted with zero occupied hours");
  return convention == RateConvention::Extrapolated ? coughs * 24.0 / occupied_hours : coughs * occupied_hours / 24.0;
}

struct DailyCoughReport {
  std::size_t day = 0;
  std::size_t coughs = 0;        // C
  double occupied_hours = 0.0;   // B
  double rate = 0.0;             // R
  RateConvention convention = RateConvention::Extrapolated;
  std::vector<double> excluded;  // starts of coughs that fell in unoccupied time
};

/// Daily report for the 24 h window starting day * 24 h after the recording start.
inline DailyCoughReport cough_rate(std::span<const CoughEvent> coughs, const OccupancySignal& occupancy, std::size_t day,
                                   RateConvention convention = RateConvention::Extrapolated,
                                   const std::function<void(const std::string&)>& log = {}) {
  DailyCoughReport r;
  r.day = day;
  r.convention = convention;
  const double t0 = static_cast<double>(day) * kDaySeconds, t1 = t0 + kDaySeconds;
  const std::size_t n = occupancy.size();
  const std::size_t a = std::min(sample_at_or_after(t0, occupancy.fs), n);
  const std::size_t b = std::min(sample_at_or_after(t1, occupancy.fs), n);
  std::size_t occupied = 0;
  for (std::size_t i = a; i < b; ++i) occupied += occupancy.states[i] ? 1 : 0;
  r.occupied_hours = static_cast<double>(occupied) / occupancy.fs / 3600.0;
  for (const auto& c : coughs) {
    if (c.start_s < t0 || c.start_s >= t1) continue;
    const std::size_t i = sample_at_or_after(c.start_s, occupancy.fs);
    if (i < n && occupancy.states[i]) {
      ++r.coughs;
    } else {
      r.excluded.push_back(c.start_s);
      if (log) log("cough at " + std::to_string(c.start_s) + " s excluded: bed predicted unoccupied");
    }
  }
  r.rate = daily_rate(static_cast<double>(r.coughs), r.occupied_hours, convention);
  return r;
}

/// One report per started 24 h window of the occupancy signal.
inline std::vector<DailyCoughReport> daily_cough_reports(std::span<const CoughEvent> coughs, const OccupancySignal& occupancy,
                                                         RateConvention convention = RateConvention::Extrapolated,
                                                         const std::function<void(const std::string&)>& log = {}) {
  const auto days = static_cast<std::size_t>(std::ceil(occupancy.duration() / kDaySeconds - 1e-9));
  std::vector<DailyCoughReport> out;
  for (std::size_t d = 0; d < days; ++d) out.push_back(cough_rate(coughs, occupancy, d, convention, log));
  return out;
}

enum class CfuMode { AsPrinted, LogOfProduct };

inline const char* to_string(CfuMode m) { return m == CfuMode::AsPrinted ? "as-printed" : "log-of-product"; }

inline CfuMode cfu_mode_from_string(const std::string& s) {
  if (s == "as-printed") return CfuMode::AsPrinted;
  if (s == "log-of-product") return CfuMode::LogOfProduct;
  throw InvalidArgument("unknown cfu mode '" + s + "'");
}

inline double cfu(double p1, double p2, double d, CfuMode mode = CfuMode::AsPrinted) {
  const double mean = 0.5 * (p1 + p2);
  const double scale = 2.0 * 5.0 * std::pow(10.0, d);
  if (mode == CfuMode::AsPrinted) {
    require(mean > 0.0, "cfu: mean colony count must be positive");
    return std::log10(mean) * scale;
  }
  require(mean * scale > 0.0, "cfu: scaled colony count must be positive");
  return std::log10(mean * scale);
}

inline double ttp(double h1, double h2) {
  require(h1 > 0.0 && h2 > 0.0, "ttp: hours to positivity must be positive");
  return 0.5 * (h1 + h2);
}

struct LabResult {
  std::size_t day = 0;
  double p1 = 0.0, p2 = 0.0, d = 0.0;
  double h1 = 0.0, h2 = 0.0;
};

struct Correlation {
  double rho = 0.0;
  bool ties = false;
  std::size_t n = 0;
};

namespace detail {

inline std::vector<double> average_ranks(std::span<const double> v, bool& ties) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    if (j - i > 1) ties = true;
    for (std::size_t t = i; t < j; ++t) rank[order[t]] = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    i = j;
  }
  return rank;
}

}  // namespace detail

/// Spearman rank correlation (Pearson on average ranks); NaN pairs are dropped.
/// A constant series gives 0 with the ties flag set.
inline Correlation spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "spearman: size mismatch");
  std::vector<double> a, b;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isnan(x[i]) && !std::isnan(y[i])) {
      a.push_back(x[i]);
      b.push_back(y[i]);
    }
  Correlation c;
  c.n = a.size();
  if (c.n < 2) {
    c.rho = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  const auto ra = detail::average_ranks(a, c.ties), rb = detail::average_ranks(b, c.ties);
  const double m = 0.5 * static_cast<double>(c.n + 1);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < c.n; ++i) {
    sab += (ra[i] - m) * (rb[i] - m);
    saa += (ra[i] - m) * (ra[i] - m);
    sbb += (rb[i] - m) * (rb[i] - m);
  }
  c.rho = (saa == 0.0 || sbb == 0.0) ? 0.0 : sab / std::sqrt(saa * sbb);
  return c;
}

struct TrendRow {
  std::size_t day = 0;
  double rate = std::numeric_limits<double>::quiet_NaN();
  double cfu = std::numeric_limits<double>::quiet_NaN();
  double ttp = std::numeric_limits<double>::quiet_NaN();
};

struct TrendReport {
  std::vector<TrendRow> rows;
  Correlation day_rate, day_ttp, day_cfu;
  RateConvention convention = RateConvention::Extrapolated;
  CfuMode cfu_mode = CfuMode::AsPrinted;
};

/// Per-day table of R, CFU and TTP with rank correlations against the day index.
inline TrendReport long_term_report(std::span<const DailyCoughReport> daily, std::span<const LabResult> labs,
                                    CfuMode cfu_mode = CfuMode::AsPrinted) {
  TrendReport rep;
  rep.cfu_mode = cfu_mode;
  if (!daily.empty()) rep.convention = daily.front().convention;
  std::vector<std::size_t> days;
  for (const auto& d : daily) days.push_back(d.day);
  for (const auto& l : labs) days.push_back(l.day);
  std::sort(days.begin(), days.end());
  days.erase(std::unique(days.begin(), days.end()), days.end());
  require(days.size() >= 2, "long_term_report: at least two days are needed");
  for (std::size_t day : days) {
    TrendRow row;
    row.day = day;
    for (const auto& d : daily)
      if (d.day == day) row.rate = d.rate;
    for (const auto& l : labs)
      if (l.day == day) {
        row.cfu = cfu(l.p1, l.p2, l.d, cfu_mode);
        row.ttp = ttp(l.h1, l.h2);
      }
    rep.rows.push_back(row);
  }
  std::vector<double> x, r, c, t;
  for (const auto& row : rep.rows) {
    x.push_back(static_cast<double>(row.day));
    r.push_back(row.rate);
    c.push_back(row.cfu);
    t.push_back(row.ttp);
  }
  rep.day_rate = spearman(x, r);
  rep.day_ttp = spearman(x, t);
  rep.day_cfu = spearman(x, c);
  return rep;
}

namespace detail {

inline std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

/// day,R,CFU,TTP table; the header names the conventions in use.
inline void write_trend_csv(std::ostream& os, const TrendReport& rep) {
  os << "# rate_convention=" << to_string(rep.convention) << " cfu_mode=" << to_string(rep.cfu_mode) << "\n";
  os << "day,R,CFU,TTP\n";
  for (const auto& row : rep.rows)
    os << row.day << ',' << detail::num(row.rate) << ',' << detail::num(row.cfu) << ',' << detail::num(row.ttp) << "\n";
}

inline void write_trend_correlations(std::ostream& os, const TrendReport& rep) {
  os << "series,spearman_rho,n,ties\n";
  const auto line = [&](const char* name, const Correlation& c) {
    os << name << ',' << detail::num(c.rho) << ',' << c.n << ',' << (c.ties ? 1 : 0) << "\n";
  };
  line("R", rep.day_rate);
  line("TTP", rep.day_ttp);
  line("CFU", rep.day_cfu);
}

/// Whitespace-separated columns for plotting tools; missing values are written as NaN.
inline void write_trend_plot_data(std::ostream& os, const TrendReport& rep) {
  os << "# day R CFU TTP\n";
  const auto v = [](double x) { return std::isnan(x) ? std::string("NaN") : detail::num(x); };
  for (const auto& row : rep.rows) os << row.day << ' ' << v(row.rate) << ' ' << v(row.cfu) << ' ' << v(row.ttp) << "\n";
}

}  // namespace bedocc
