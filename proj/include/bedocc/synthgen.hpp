#pragma once

// Synthetic ward recordings with ground truth. The waveform model is made up:
//  - white sensor noise on each axis, plus narrowband low-frequency ambient vibration whose level
//    wanders independently of occupancy;
//  - while in bed, ballistocardiographic heartbeat pulses and activity bursts that
//    are dense while awake and sparse while asleep (both weaker for quiet sleepers);
//  - 2-5 s entry/exit transients, energy after an entry and before an exit;
//  - short cough transients at a configurable rate, rare blips out of bed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "bedocc/common.hpp"
#include "bedocc/signal.hpp"

namespace bedocc {

struct PatientProfile {
  std::string id = "P";
  double total_hours = 1.0;
  double occupied_hours = 0.0;
  int n_changes = 0;

  double quietness = 0.5;             // 1 = motionless sleeper
  double burst_rate = 360.0;          // bursts per hour while awake in bed (before quietness scaling)
  double sleep_burst_fraction = 0.05; // burst rate while asleep, relative to awake
  double awake_fraction = 0.35;       // long-run share of in-bed time spent awake
  double burst_amplitude = 0.2;       // median peak
  double transient_amplitude = 0.4;   // median peak of entry/exit transients
  double reposition_fraction = 0.15;  // awake bursts shaped like an entry or exit
  double still_stay_fraction = 0.3;   // times quietness: share of stays spent almost motionless
  double transient_min_s = 2.0;
  double transient_max_s = 5.0;
  double heartbeat_amplitude = 0.03;
  double ambient_min = 0.001;         // ambient vibration sd range (per axis)
  double ambient_max = 0.004;
  double ambient_segment_s = 1200.0;  // mean length of a constant-level ambient stretch
  double sensor_noise = 0.003;
  double full_scale = 0.4;            // the sensor saturates at this magnitude (0 = unlimited)
  double blip_rate = 3.0;             // per unoccupied hour
  double cough_rate = 0.0;            // per occupied hour
  bool capture_gate = true;
  std::uint64_t seed = 1;
};

struct SyntheticSchedule {
  std::vector<Segment> occupied;
  std::vector<double> coughs;  // cough onset times, seconds
  double duration_s = 0.0;
};

struct SyntheticRecording {
  PatientProfile profile;
  MagnitudeSignal signal;
  OccupancySignal truth;
  std::vector<ChangeInstant> changes;
  std::vector<Segment> coughs;
};

inline void validate(const PatientProfile& p) {
  require(p.total_hours > 0.0, "profile " + p.id + ": total_hours must be positive");
  require(p.occupied_hours >= 0.0 && p.occupied_hours < p.total_hours,
          "profile " + p.id + ": occupied_hours must lie in [0, total_hours)");
  require(p.n_changes >= 0 && p.n_changes % 2 == 0, "profile " + p.id + ": n_changes must be even and >= 0");
  require((p.n_changes == 0) == (p.occupied_hours == 0.0),
          "profile " + p.id + ": occupied time requires changes and vice versa");
  require(p.quietness >= 0.0 && p.quietness <= 1.0, "profile " + p.id + ": quietness must lie in [0,1]");
  require(p.burst_rate >= 0.0 && p.cough_rate >= 0.0 && p.blip_rate >= 0.0, "profile " + p.id + ": rates must be >= 0");
  require(p.still_stay_fraction >= 0.0 && p.still_stay_fraction <= 1.0, "profile " + p.id + ": still_stay_fraction must lie in [0,1]");
  require(p.reposition_fraction >= 0.0 && p.reposition_fraction <= 1.0, "profile " + p.id + ": reposition_fraction must lie in [0,1]");
  require(p.full_scale >= 0.0, "profile " + p.id + ": full_scale must be >= 0");
  require(p.transient_max_s >= p.transient_min_s && p.transient_min_s > 0.0, "profile " + p.id + ": bad transient durations");
}

namespace detail {

// Splits `total` into `parts` random pieces, each at least `minimum`.
inline std::vector<double> random_partition(double total, std::size_t parts, double minimum, Rng& rng) {
  std::vector<double> out(parts, 0.0);
  if (parts == 0) return out;
  const double spare = total - minimum * static_cast<double>(parts);
  if (spare < 0.0) throw InvalidArgument("infeasible schedule: intervals do not fit the recording");
  std::gamma_distribution<double> g(1.5, 1.0);
  double sum = 0.0;
  for (double& w : out) sum += (w = g(rng));
  for (double& w : out) w = minimum + spare * w / sum;
  return out;
}

struct Axes {
  std::vector<double> x, y, z;
  explicit Axes(std::size_t n) : x(n, 0.0), y(n, 0.0), z(n, 0.0) {}
  std::size_t size() const { return x.size(); }
  void add(std::ptrdiff_t i, double v, const double (&dir)[3]) {
    if (i < 0 || static_cast<std::size_t>(i) >= x.size()) return;
    const auto k = static_cast<std::size_t>(i);
    x[k] += v * dir[0];
    y[k] += v * dir[1];
    z[k] += v * dir[2];
  }
};

inline void random_direction(Rng& rng, double (&dir)[3]) {
  std::normal_distribution<double> n(0.0, 1.0);
  double norm = 0.0;
  do {
    for (double& d : dir) d = n(rng);
    norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
  } while (norm < 1e-6);
  for (double& d : dir) d /= norm;
}

// Movement-like waveform: a few low-frequency components plus broadband jitter,
// shaped by `env(u)` for u in [0,1) over `len` samples starting at `start`.
template <typename Envelope>
void add_motion(Axes& a, std::ptrdiff_t start, std::size_t len, double amplitude, double fs, Rng& rng, Envelope env) {
  std::uniform_real_distribution<double> uf(0.6, 4.0), ph(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> n(0.0, 1.0);
  double dirs[3][3];
  double freq[3], phase[3];
  for (int c = 0; c < 3; ++c) {
    random_direction(rng, dirs[c]);
    freq[c] = uf(rng);
    phase[c] = ph(rng);
  }
  double jdir[3];
  random_direction(rng, jdir);
  for (std::size_t i = 0; i < len; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(len);
    const double e = amplitude * env(u);
    const double t = static_cast<double>(i) / fs;
    const auto idx = start + static_cast<std::ptrdiff_t>(i);
    for (int c = 0; c < 3; ++c) a.add(idx, e * 0.55 * std::sin(2.0 * std::numbers::pi * freq[c] * t + phase[c]), dirs[c]);
    a.add(idx, e * 0.35 * n(rng), jdir);
  }
}

inline double hann(double u) { return 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * u); }

}  // namespace detail

/// Occupancy schedule and cough times only (no waveform).
inline SyntheticSchedule generate_schedule(const PatientProfile& p) {
  validate(p);
  Rng rng(derive_seed(p.seed, 0x5c4ed));
  SyntheticSchedule s;
  s.duration_s = p.total_hours * 3600.0;
  const std::size_t stays = static_cast<std::size_t>(p.n_changes / 2);
  if (stays > 0) {
    const double occ = p.occupied_hours * 3600.0;
    const double empty = s.duration_s - occ;
    const double min_stay = std::min(60.0, 0.5 * occ / static_cast<double>(stays));
    const double min_gap = std::min(60.0, 0.5 * empty / static_cast<double>(stays + 1));
    const auto stay_len = detail::random_partition(occ, stays, min_stay, rng);
    const auto gap_len = detail::random_partition(empty, stays + 1, min_gap, rng);
    double t = gap_len[0];
    for (std::size_t i = 0; i < stays; ++i) {
      s.occupied.push_back({t, t + stay_len[i]});
      t += stay_len[i] + gap_len[i + 1];
    }
    // absorb round-off so the last stay ends inside the recording
    if (s.occupied.back().end_s >= s.duration_s) s.occupied.back().end_s = s.duration_s - min_gap;
  }
  std::exponential_distribution<double> gap(1.0);
  for (const auto& seg : s.occupied) {
    if (p.cough_rate <= 0.0) break;
    const double rate = p.cough_rate / 3600.0;
    for (double t = seg.start_s + 10.0 + gap(rng) / rate; t < seg.end_s - 10.0; t += gap(rng) / rate) s.coughs.push_back(t);
  }
  return s;
}

/// Full recording: normalized magnitude signal, ground truth, change instants, coughs.
inline SyntheticRecording generate_patient(const PatientProfile& p) {
  const SyntheticSchedule sched = generate_schedule(p);
  const double fs = kSampleRate;
  const auto n = static_cast<std::size_t>(std::llround(sched.duration_s * fs));
  Rng rng(derive_seed(p.seed, 0x5167a1));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);

  SyntheticRecording rec;
  rec.profile = p;
  rec.truth = occupancy_from_segments(sched.occupied, sched.duration_s, fs);
  rec.changes = change_instants(rec.truth);
  detail::Axes a(n);

  // sensor noise plus narrowband low-frequency ambient vibration (AR(2) resonator per axis)
  // whose level and centre frequency change from one stretch to the next
  {
    const double lo = std::log(std::max(p.ambient_min, 1e-9)), hi = std::log(std::max(p.ambient_max, p.ambient_min));
    std::size_t i = 0;
    while (i < n) {
      const double seg_s = p.ambient_segment_s * (0.5 + unit(rng));
      const std::size_t end = std::min(n, i + std::max<std::size_t>(1, static_cast<std::size_t>(seg_s * fs)));
      const double level = std::exp(lo + (hi - lo) * unit(rng));
      const double w = 2.0 * std::numbers::pi * (0.5 + 2.5 * unit(rng)) / fs;
      const double r = std::exp(-std::numbers::pi * 0.4 / fs);
      const double phi1 = 2.0 * r * std::cos(w), phi2 = -r * r;
      const double var = (1.0 - phi2) / ((1.0 + phi2) * ((1.0 - phi2) * (1.0 - phi2) - phi1 * phi1));
      const double drive = level / std::sqrt(var);
      double st[3][2] = {};
      for (; i < end; ++i) {
        double* axes[3] = {&a.x[i], &a.y[i], &a.z[i]};
        for (int c = 0; c < 3; ++c) {
          const double v = phi1 * st[c][0] + phi2 * st[c][1] + drive * gauss(rng);
          st[c][1] = st[c][0];
          st[c][0] = v;
          *axes[c] = v + p.sensor_noise * gauss(rng);
        }
      }
    }
  }

  const auto at = [fs](double t) { return static_cast<std::ptrdiff_t>(std::llround(t * fs)); };
  const double quiet = p.quietness;
  const double awake_rate = p.burst_rate * (1.0 - 0.7 * quiet) / 3600.0;
  const double sleep_rate = awake_rate * p.sleep_burst_fraction * (1.0 - quiet);
  std::lognormal_distribution<double> burst_amp(std::log(std::max(p.burst_amplitude, 1e-9)), 0.8);
  std::lognormal_distribution<double> burst_len(std::log(2.0), 0.5);
  std::lognormal_distribution<double> tr_amp(std::log(p.transient_amplitude), 0.35);
  std::uniform_real_distribution<double> tr_len(p.transient_min_s, p.transient_max_s);
  const auto entry_env = [](double u) { return std::min(1.0, u / 0.08) * std::exp(-2.2 * u); };
  const auto exit_env = [](double u) { return std::min(1.0, (1.0 - u) / 0.08) * std::exp(-2.2 * (1.0 - u)); };

  // still stays are drawn among the shorter half of the stays (brief lie-downs)
  double median_stay = 0.0;
  if (!sched.occupied.empty()) {
    std::vector<double> lens;
    for (const auto& s : sched.occupied) lens.push_back(s.duration());
    std::nth_element(lens.begin(), lens.begin() + static_cast<std::ptrdiff_t>(lens.size() / 2), lens.end());
    median_stay = lens[lens.size() / 2];
  }
  for (const auto& stay : sched.occupied) {
    // a still stay: asleep almost at once, weakly coupled to the sensor
    const bool still = unit(rng) < 2.0 * p.still_stay_fraction * quiet && stay.duration() < median_stay;
    const double coupling = still ? 0.03 + 0.07 * unit(rng) : 1.0;
    const double activity = still ? 0.0 : 1.0;

    // heartbeat: damped sinusoid per beat, respiration-modulated
    const double hb_amp = coupling * p.heartbeat_amplitude * (1.0 - 0.75 * quiet);
    const double rate_hz = (60.0 + 30.0 * unit(rng)) / 60.0;
    const double f0 = 6.0 + 3.0 * unit(rng);
    double hb_dir[3];
    detail::random_direction(rng, hb_dir);
    const std::size_t pulse = static_cast<std::size_t>(0.3 * fs);
    for (double t = stay.start_s + 1.0; t < stay.end_s - 0.3; t += (1.0 + 0.04 * gauss(rng)) / rate_hz) {
      const double amp = hb_amp * (1.0 + 0.25 * std::sin(2.0 * std::numbers::pi * 0.25 * t)) * (0.85 + 0.3 * unit(rng));
      const auto s0 = at(t);
      for (std::size_t k = 0; k < pulse; ++k) {
        const double u = static_cast<double>(k) / fs;
        a.add(s0 + static_cast<std::ptrdiff_t>(k), amp * std::exp(-u / 0.06) * std::sin(2.0 * std::numbers::pi * f0 * u), hb_dir);
      }
    }

    // awake/asleep episodes: awake right after entering and before leaving
    const double settle_in = std::min(stay.duration() * 0.3, still ? 5.0 + 15.0 * unit(rng) : 60.0 + 120.0 * unit(rng));
    const double settle_out = std::min(stay.duration() * 0.2, still ? 5.0 + 15.0 * unit(rng) : 30.0 + 90.0 * unit(rng));
    const double awake_mean = 240.0, sleep_mean = awake_mean * (1.0 - p.awake_fraction) / std::max(p.awake_fraction, 1e-3);
    std::vector<std::pair<Segment, bool>> episodes{{{stay.start_s, stay.start_s + settle_in}, true}};
    for (bool awake = false; episodes.back().first.end_s < stay.end_s - settle_out; awake = !awake) {
      const double from = episodes.back().first.end_s;
      const double len = expo(rng) * (awake ? awake_mean : sleep_mean);
      episodes.push_back({{from, std::min(from + len, stay.end_s - settle_out)}, awake});
    }
    episodes.push_back({{stay.end_s - settle_out, stay.end_s}, true});
    for (const auto& [ep, awake] : episodes) {
      const double rate = activity * (awake ? awake_rate : sleep_rate);
      if (rate <= 0.0) continue;
      for (double t = ep.start_s + expo(rng) / rate; t < ep.end_s; t += expo(rng) / rate) {
        if (t < stay.start_s + 6.0 || t > stay.end_s - 6.0) continue;
        if (awake && !still && unit(rng) < p.reposition_fraction) {
          const auto len = static_cast<std::size_t>(tr_len(rng) * fs);
          const double amp = std::min(1.0, tr_amp(rng));
          if (unit(rng) < 0.5)
            detail::add_motion(a, at(t), len, amp, fs, rng, entry_env);
          else
            detail::add_motion(a, at(t), len, amp, fs, rng, exit_env);
          continue;
        }
        const double len_s = std::clamp(burst_len(rng), 0.4, 6.0);
        const double amp = std::min(1.0, burst_amp(rng));
        detail::add_motion(a, at(t), static_cast<std::size_t>(len_s * fs), amp, fs, rng, detail::hann);
      }
    }

    // entry and exit transients
    for (int side = 0; side < 2; ++side) {
      const double len_s = tr_len(rng);
      const double amp = std::min(1.0, tr_amp(rng));
      const auto len = static_cast<std::size_t>(len_s * fs);
      if (side == 0) {
        detail::add_motion(a, at(stay.start_s), len, amp, fs, rng,
                           entry_env);
      } else {
        detail::add_motion(a, at(stay.end_s) - static_cast<std::ptrdiff_t>(len), len, amp, fs, rng,
                           exit_env);
      }
    }
  }

  // coughs: short broadband bursts
  {
    std::lognormal_distribution<double> c_amp(std::log(0.08), 0.4);
    double dir[3];
    for (double tc : sched.coughs) {
      const double len_s = 0.3 + 0.3 * unit(rng);
      detail::random_direction(rng, dir);
      const auto s0 = at(tc);
      const auto len = static_cast<std::size_t>(len_s * fs);
      const double amp = c_amp(rng);
      for (std::size_t k = 0; k < len; ++k)
        a.add(s0 + static_cast<std::ptrdiff_t>(k), amp * detail::hann(static_cast<double>(k) / static_cast<double>(len)) * gauss(rng), dir);
      rec.coughs.push_back({tc, tc + len_s});
    }
  }

  // rare blips while the bed is empty
  {
    std::vector<Segment> empty;
    double prev = 0.0;
    for (const auto& s : sched.occupied) {
      empty.push_back({prev, s.start_s});
      prev = s.end_s;
    }
    empty.push_back({prev, sched.duration_s});
    const double rate = p.blip_rate / 3600.0;
    for (const auto& e : empty) {
      if (rate <= 0.0) break;
      for (double t = e.start_s + 10.0 + expo(rng) / rate; t < e.end_s - 10.0; t += expo(rng) / rate) {
        const double len_s = 0.2 + 0.8 * unit(rng);
        detail::add_motion(a, at(t), static_cast<std::size_t>(len_s * fs), 0.02 + 0.04 * unit(rng), fs, rng, detail::hann);
      }
    }
  }

  MagnitudeSignal mag;
  mag.patient_id = p.id;
  mag.fs = fs;
  mag.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    mag.samples[i] = std::sqrt(a.x[i] * a.x[i] + a.y[i] * a.y[i] + a.z[i] * a.z[i]);
    if (p.full_scale > 0.0) mag.samples[i] = std::min(mag.samples[i], p.full_scale);
  }
  if (n > 0) {
    mag = normalize(mag);
    if (p.capture_gate) {
      // excluded stretches are stored as zeros
      std::vector<std::uint8_t> keep(n, 0);
      for (const auto& s : capture_gate(mag)) {
        const std::size_t b = std::min(sample_at_or_after(s.start_s, fs), n), e = std::min(sample_at_or_after(s.end_s, fs), n);
        std::fill(keep.begin() + static_cast<std::ptrdiff_t>(b), keep.begin() + static_cast<std::ptrdiff_t>(e), 1);
      }
      for (std::size_t i = 0; i < n; ++i)
        if (!keep[i]) mag.samples[i] = 0.0;
    }
  }
  rec.signal = std::move(mag);
  return rec;
}

/// Seven profiles mirroring the ground-truth table (hours, occupied hours, changes),
/// with durations divided by `compression`. Patients 3 and 6 are quiet sleepers.
inline std::vector<PatientProfile> default_profiles(double compression = 1.0, std::uint64_t root_seed = 2024) {
  require(compression > 0.0, "default_profiles: compression must be positive");
  struct Row {
    double hours, occupied;
    int changes;
    double quietness;
  };
  const Row rows[] = {{65, 23.33, 18, 0.4}, {57, 14.47, 20, 0.5}, {45, 11.67, 18, 0.85}, {21, 9.02, 10, 0.45},
                      {21, 15.89, 12, 0.55}, {19, 9.42, 14, 0.85}, {21, 11.71, 12, 0.5}};
  std::vector<PatientProfile> out;
  for (std::size_t i = 0; i < std::size(rows); ++i) {
    PatientProfile p;
    p.id = "P" + std::to_string(i + 1);
    p.total_hours = rows[i].hours / compression;
    p.occupied_hours = rows[i].occupied / compression;
    p.n_changes = rows[i].changes;
    p.quietness = rows[i].quietness;
    p.seed = derive_seed(root_seed, i + 1);
    out.push_back(p);
  }
  return out;
}

struct DatasetManifestEntry {
  std::string id;
  std::uint64_t seed = 0;
  double total_hours = 0.0;
  double occupied_hours = 0.0;  // measured from truth
  std::size_t changes = 0;
  std::size_t coughs = 0;
};

struct SyntheticDataset {
  std::vector<SyntheticRecording> recordings;
  std::vector<DatasetManifestEntry> manifest;
};

inline DatasetManifestEntry summarize(const SyntheticRecording& r) {
  DatasetManifestEntry e;
  e.id = r.profile.id;
  e.seed = r.profile.seed;
  e.total_hours = r.signal.duration() / 3600.0;
  std::size_t occ = 0;
  for (auto s : r.truth.states) occ += s;
  e.occupied_hours = static_cast<double>(occ) / r.truth.fs / 3600.0;
  e.changes = r.changes.size();
  e.coughs = r.coughs.size();
  return e;
}

inline SyntheticDataset generate_dataset(const std::vector<PatientProfile>& profiles) {
  require(!profiles.empty(), "generate_dataset: no profiles");
  SyntheticDataset d;
  for (const auto& p : profiles) {
    d.recordings.push_back(generate_patient(p));
    d.manifest.push_back(summarize(d.recordings.back()));
  }
  return d;
}

}  // namespace bedocc
