#pragma once

// Raw signal representation: tri-axial magnitude, per-recording normalization,
// capture gating and occupancy annotations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bedocc/common.hpp"

namespace bedocc {

struct TriaxialRecord {
  double t = 0.0;  // seconds from recording start
  double ax = 0.0;
  double ay = 0.0;
  double az = 0.0;
};

struct MagnitudeSignal {
  std::string patient_id;
  double fs = kSampleRate;
  std::vector<double> samples;
  bool normalized = false;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / fs; }
};

/// Half-open time segment [start_s, end_s).
struct Segment {
  double start_s = 0.0;
  double end_s = 0.0;

  double duration() const { return end_s - start_s; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

enum class OccupancySource { GroundTruth, Predicted };

struct OccupancySignal {
  double fs = kSampleRate;
  std::vector<std::uint8_t> states;
  OccupancySource source = OccupancySource::GroundTruth;

  std::size_t size() const { return states.size(); }
  double duration() const { return static_cast<double>(states.size()) / fs; }
};

enum class Direction { In, Out, Unknown };

struct ChangeInstant {
  double tau = 0.0;  // seconds
  int k = 0;         // 1-based ordinal
  Direction direction = Direction::In;
};

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::In: return "in";
    case Direction::Out: return "out";
    default: return "unknown";
  }
}

/// Vector magnitude of each tri-axial sample. Timestamps must be strictly increasing.
inline MagnitudeSignal magnitude_from_triaxial(std::span<const TriaxialRecord> records,
                                               std::string patient_id = {},
                                               double fs = kSampleRate) {
  require(!records.empty(), "magnitude_from_triaxial: empty input");
  MagnitudeSignal out;
  out.patient_id = std::move(patient_id);
  out.fs = fs;
  out.samples.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i > 0 && !(r.t > records[i - 1].t)) {
      throw InvalidArgument("magnitude_from_triaxial: timestamps not strictly increasing at row " +
                            std::to_string(i));
    }
    out.samples.push_back(std::sqrt(r.ax * r.ax + r.ay * r.ay + r.az * r.az));
  }
  return out;
}

/// Divides every sample by the recording-wide maximum.
inline MagnitudeSignal normalize(const MagnitudeSignal& signal) {
  require(!signal.samples.empty(), "normalize: empty signal");
  const double peak = *std::max_element(signal.samples.begin(), signal.samples.end());
  if (!(peak > 0.0)) throw InvalidArgument("normalize: signal maximum is zero");
  MagnitudeSignal out = signal;
  for (double& v : out.samples) v /= peak;
  out.normalized = true;
  return out;
}

/// Energy-gate emulation: segments where the signal reaches `floor`, with quiet gaps
/// shorter than `min_quiet_s` bridged.
inline std::vector<Segment> capture_gate(const MagnitudeSignal& signal, double floor = 0.01,
                                         double min_quiet_s = 60.0) {
  require(floor > 0.0 && floor < 1.0, "capture_gate: floor must lie in (0,1)");
  require(min_quiet_s > 0.0, "capture_gate: min_quiet must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> runs;  // [begin, end) sample indices
  const auto& x = signal.samples;
  for (std::size_t i = 0; i < x.size();) {
    if (x[i] < floor) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < x.size() && x[j] >= floor) ++j;
    if (!runs.empty()) {
      const double gap = static_cast<double>(i - runs.back().second) / signal.fs;
      if (gap < min_quiet_s) {
        runs.back().second = j;
        i = j;
        continue;
      }
    }
    runs.emplace_back(i, j);
    i = j;
  }
  std::vector<Segment> out;
  out.reserve(runs.size());
  for (auto [b, e] : runs) {
    out.push_back({static_cast<double>(b) / signal.fs, static_cast<double>(e) / signal.fs});
  }
  return out;
}

// First sample index whose time is >= t, tolerant to decimal round-off.
inline std::size_t sample_at_or_after(double t, double fs) {
  const double idx = std::ceil(t * fs - 1e-7);
  return idx <= 0.0 ? 0 : static_cast<std::size_t>(idx);
}

/// Ground-truth occupancy from occupied segments; sample i is occupied iff start <= i/fs < end.
inline OccupancySignal occupancy_from_segments(std::span<const Segment> segments, double duration_s,
                                               double fs = kSampleRate) {
  require(duration_s > 0.0 && fs > 0.0, "occupancy_from_segments: invalid duration or rate");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  OccupancySignal occ;
  occ.fs = fs;
  occ.states.assign(n, 0);
  occ.source = OccupancySource::GroundTruth;
  double prev_end = 0.0;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    if (!(seg.end_s > seg.start_s)) throw InvalidArgument("occupancy_from_segments: empty or reversed segment");
    if (seg.start_s <= 0.0) throw InvalidArgument("occupancy_from_segments: segment starts at t=0 (bed must be empty initially)");
    if (seg.end_s > duration_s + 1e-9) throw InvalidArgument("occupancy_from_segments: segment exceeds recording");
    if (s > 0 && seg.start_s < prev_end) throw InvalidArgument("occupancy_from_segments: overlapping or unsorted segments");
    prev_end = seg.end_s;
    const std::size_t b = std::min(sample_at_or_after(seg.start_s, fs), n);
    const std::size_t e = std::min(sample_at_or_after(seg.end_s, fs), n);
    std::fill(occ.states.begin() + static_cast<std::ptrdiff_t>(b), occ.states.begin() + static_cast<std::ptrdiff_t>(e), 1);
  }
  return occ;
}

/// One instant per 0<->1 transition; odd ordinals are entries.
inline std::vector<ChangeInstant> change_instants(const OccupancySignal& occ) {
  std::vector<ChangeInstant> out;
  if (occ.states.empty()) return out;
  require(occ.states[0] == 0, "change_instants: occupancy must start empty");
  for (std::size_t i = 1; i < occ.states.size(); ++i) {
    if (occ.states[i] != occ.states[i - 1]) {
      ChangeInstant c;
      c.tau = static_cast<double>(i) / occ.fs;
      c.k = static_cast<int>(out.size()) + 1;
      c.direction = occ.states[i] ? Direction::In : Direction::Out;
      out.push_back(c);
    }
  }
  return out;
}

/// Occupied segments of an occupancy signal (inverse of occupancy_from_segments).
inline std::vector<Segment> occupied_segments(const OccupancySignal& occ) {
  std::vector<Segment> out;
  const auto& s = occ.states;
  for (std::size_t i = 0; i < s.size();) {
    if (!s[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && s[j]) ++j;
    out.push_back({static_cast<double>(i) / occ.fs, static_cast<double>(j) / occ.fs});
    i = j;
  }
  return out;
}

/// Copies `len` samples starting at `begin` (may be negative); out-of-range samples are zero.
inline std::vector<double> extract_padded(std::span<const double> x, std::ptrdiff_t begin, std::size_t len) {
  std::vector<double> out(len, 0.0);
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  for (std::size_t i = 0; i < len; ++i) {
    const std::ptrdiff_t j = begin + static_cast<std::ptrdiff_t>(i);
    if (j >= 0 && j < n) out[i] = x[static_cast<std::size_t>(j)];
  }
  return out;
}

}  // namespace bedocc
