#include <gtest/gtest.h>

#include "bedocc/synthgen.hpp"

using namespace bedocc;

namespace {

PatientProfile small(std::uint64_t seed, double quietness = 0.5) {
  PatientProfile p;
  p.id = "G";
  p.total_hours = 1.0;
  p.occupied_hours = 0.5;
  p.n_changes = 6;
  p.quietness = quietness;
  p.seed = seed;
  return p;
}

double energy(const MagnitudeSignal& s, double a, double b) {
  double e = 0;
  const auto i0 = static_cast<std::size_t>(std::max(0.0, a) * s.fs);
  const auto i1 = std::min(s.size(), static_cast<std::size_t>(b * s.fs));
  for (std::size_t i = i0; i < i1; ++i) e += s.samples[i] * s.samples[i];
  return e;
}

}  // namespace

TEST(Generate, EmptyProfile) {
  PatientProfile p;
  p.total_hours = 0.2;
  p.seed = 3;
  const auto r = generate_patient(p);
  EXPECT_TRUE(r.changes.empty());
  for (auto v : r.truth.states) ASSERT_EQ(v, 0);
  EXPECT_NEAR(r.signal.duration(), 720.0, 1e-9);
}

TEST(Generate, PatientFourRow) {
  PatientProfile p;
  p.id = "P4";
  p.total_hours = 21;
  p.occupied_hours = 9.02;
  p.n_changes = 10;
  p.seed = 4;
  const auto r = generate_patient(p);
  EXPECT_EQ(r.changes.size(), 10u);
  EXPECT_NEAR(summarize(r).occupied_hours, 9.02, 0.1);
  EXPECT_EQ(r.truth.states.front(), 0);
  EXPECT_EQ(r.truth.states.back(), 0);
}

TEST(Generate, Deterministic) {
  const auto a = generate_patient(small(11)), b = generate_patient(small(11)), c = generate_patient(small(12));
  EXPECT_EQ(a.signal.samples, b.signal.samples);
  EXPECT_EQ(a.truth.states, b.truth.states);
  EXPECT_NE(a.signal.samples, c.signal.samples);
}

TEST(Generate, InvalidProfiles) {
  auto p = small(1);
  p.n_changes = 5;
  EXPECT_THROW(generate_patient(p), InvalidArgument);
  p = small(1);
  p.occupied_hours = 2.0;
  EXPECT_THROW(generate_patient(p), InvalidArgument);
  p = small(1);
  p.quietness = 1.5;
  EXPECT_THROW(generate_patient(p), InvalidArgument);
}

TEST(Generate, InBedEnergyExceedsEmpty) {
  for (double q : {0.0, 0.5, 0.85}) {
    const auto r = generate_patient(small(21, q));
    double occ = 0, emp = 0, n_occ = 0, n_emp = 0;
    for (std::size_t i = 0; i < r.signal.size(); ++i) {
      const double e = r.signal.samples[i] * r.signal.samples[i];
      if (r.truth.states[i]) occ += e, n_occ += 1;
      else emp += e, n_emp += 1;
    }
    EXPECT_GT(occ / n_occ, emp / n_emp) << "quietness " << q;
  }
}

TEST(Generate, TransientEnergySide) {
  for (std::uint64_t seed : {31, 32, 33}) {
    const auto r = generate_patient(small(seed));
    for (const auto& c : r.changes) {
      const double before = energy(r.signal, c.tau - 5.0, c.tau), after = energy(r.signal, c.tau, c.tau + 5.0);
      const double share = (c.direction == Direction::In ? after : before) / (before + after);
      EXPECT_GE(share, 0.8) << "seed " << seed << " k " << c.k;
    }
  }
}

TEST(Generate, CoughsInsideStays) {
  auto p = small(41);
  p.cough_rate = 30;
  const auto r = generate_patient(p);
  EXPECT_FALSE(r.coughs.empty());
  for (const auto& c : r.coughs) EXPECT_EQ(r.truth.states[static_cast<std::size_t>(c.start_s * r.truth.fs)], 1);
}

TEST(Dataset, CohortTotalsUncompressed) {
  // schedules only: the uncompressed signals would need several GB
  double total = 0, occ = 0;
  std::size_t changes = 0;
  for (const auto& p : default_profiles(1.0)) {
    const auto s = generate_schedule(p);
    total += s.duration_s / 3600.0;
    for (const auto& seg : s.occupied) occ += seg.duration() / 3600.0;
    changes += 2 * s.occupied.size();
  }
  EXPECT_NEAR(total, 249.0, 2.49);
  EXPECT_NEAR(occ, 95.51, 0.9551);
  EXPECT_EQ(changes, 104u);
}

TEST(Dataset, CompressionTen) {
  const auto ds = generate_dataset(default_profiles(10.0));
  ASSERT_EQ(ds.recordings.size(), 7u);
  double total = 0, occ = 0;
  std::size_t changes = 0;
  for (const auto& m : ds.manifest) {
    total += m.total_hours;
    occ += m.occupied_hours;
    changes += m.changes;
  }
  EXPECT_NEAR(total, 24.9, 0.249);
  EXPECT_NEAR(occ, 9.551, 0.1);
  EXPECT_EQ(changes, 104u);
  for (const auto& r : ds.recordings) {
    EXPECT_EQ(r.truth.states.front(), 0);
    EXPECT_EQ(r.changes.size() % 2, 0u);
    EXPECT_TRUE(r.signal.normalized);
  }
}

TEST(Dataset, EmptyListIsError) { EXPECT_THROW(generate_dataset({}), InvalidArgument); }
