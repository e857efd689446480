#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "bedocc/io.hpp"

using namespace bedocc;
using nn::Family;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "bedocc_test_io";
  fs::create_directories(dir);
  return dir / name;
}

nn::LabeledSet toy_set(std::size_t steps, std::size_t features, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> g(0.0, 0.5);
  nn::LabeledSet s;
  for (int i = 0; i < 40; ++i) {
    FeatureMatrix m(steps, features);
    for (auto& v : m.data) v = g(rng) * (i % 2 ? 2.0 : 1.0);
    s.add(std::move(m), i % 2, "g" + std::to_string(i % 4));
  }
  return s;
}

}  // namespace

TEST(SignalCsv, RoundTripIsLossless) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MagnitudeSignal s;
  s.fs = kSampleRate;
  for (int i = 0; i < 500; ++i) s.samples.push_back(u(rng));
  std::stringstream a;
  io::write_signal_csv(a, s);
  const auto back = io::read_signal_csv(a, "x");
  ASSERT_EQ(back.samples.size(), s.samples.size());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(back.samples[i], s.samples[i]);
  std::stringstream b;
  io::write_signal_csv(b, back);
  std::stringstream a2;
  io::write_signal_csv(a2, s);
  EXPECT_EQ(a2.str(), b.str());
}

TEST(SignalCsv, TriaxialInputTakesMagnitude) {
  std::stringstream in("t,ax,ay,az\n0,3,4,0\n0.01,0,0,2\n0.02,1,2,2\n");
  const auto s = io::read_signal_csv(in, "p", 100.0);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_DOUBLE_EQ(s.samples[0], 5.0);
  EXPECT_DOUBLE_EQ(s.samples[1], 2.0);
  EXPECT_DOUBLE_EQ(s.samples[2], 3.0);
}

TEST(SignalCsv, RejectsBadInput) {
  std::stringstream hdr("time,value\n0,1\n");
  EXPECT_THROW(io::read_signal_csv(hdr), FormatError);
  std::stringstream grid("t,mag\n0,1\n0.5,1\n");
  EXPECT_THROW(io::read_signal_csv(grid, "p", 100.0), FormatError);
  std::stringstream neg("t,mag\n0,-1\n");
  EXPECT_THROW(io::read_signal_csv(neg), FormatError);
  EXPECT_THROW(io::read_signal_csv(std::string("/nonexistent/dir/x.csv")), FormatError);
}

TEST(SegmentsCsv, RoundTrip) {
  const std::vector<Segment> segs{{0.5, 12.25}, {100.0, 3600.125}};
  std::stringstream ss;
  io::write_segments_csv(ss, segs);
  EXPECT_EQ(io::read_segments_csv(ss), segs);
  std::stringstream bad("start_s,end_s\n5,5\n");
  EXPECT_THROW(io::read_segments_csv(bad), FormatError);
}

TEST(CoughsCsv, OverlapsMergedOnRead) {
  const auto path = scratch("coughs.csv").string();
  io::write_coughs_csv(path, {{10.0, 10.5}, {10.4, 11.0}, {20.0, 20.3}});
  const auto back = io::read_coughs_csv(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_DOUBLE_EQ(back[0].start_s, 10.0);
  EXPECT_DOUBLE_EQ(back[0].end_s, 11.0);
}

TEST(LabCsv, RoundTripAndValidation) {
  const std::vector<LabResult> labs{{0, 120, 80, 10, 96.5, 101}, {3, 0, 4, 10, 150, 170.25}};
  std::stringstream ss;
  io::write_lab_csv(ss, labs);
  const auto back = io::read_lab_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].day, labs[i].day);
    EXPECT_EQ(back[i].p1, labs[i].p1);
    EXPECT_EQ(back[i].p2, labs[i].p2);
    EXPECT_EQ(back[i].d, labs[i].d);
    EXPECT_EQ(back[i].h1, labs[i].h1);
    EXPECT_EQ(back[i].h2, labs[i].h2);
  }
  std::stringstream zero_ttp("day,P1,P2,D,H1,H2\n0,1,1,10,0,5\n");
  EXPECT_THROW(io::read_lab_csv(zero_ttp), FormatError);
  std::stringstream frac("day,P1,P2,D,H1,H2\n1.5,1,1,10,4,5\n");
  EXPECT_THROW(io::read_lab_csv(frac), FormatError);
}

TEST(DailyCsv, RoundTrip) {
  DailyCoughReport d;
  d.day = 4;
  d.coughs = 37;
  d.occupied_hours = 11.75;
  d.rate = 37.0 * 24.0 / 11.75;
  d.convention = RateConvention::Extrapolated;
  d.excluded = {1.0, 2.0};
  std::stringstream ss;
  io::write_daily_csv(ss, {d});
  const auto back = io::read_daily_csv(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].day, 4u);
  EXPECT_EQ(back[0].coughs, 37u);
  EXPECT_EQ(back[0].occupied_hours, d.occupied_hours);
  EXPECT_EQ(back[0].rate, d.rate);
  EXPECT_EQ(back[0].convention, d.convention);
  EXPECT_EQ(back[0].excluded.size(), 2u);
}

class ModelCheckpoint : public ::testing::TestWithParam<Family> {};

TEST_P(ModelCheckpoint, ReloadGivesBitIdenticalPredictions) {
  auto spec = nn::default_spec(GetParam());
  spec.epochs = 3;
  spec.seed = 11;
  if (GetParam() == Family::CNN) spec.kernel_size = 2;
  const auto set = toy_set(4, 5, 1);
  auto model = nn::train(spec, set);
  model.feature_spec = {32, 4, IntervalAveraging::LogPower};
  const auto path = scratch(std::string("model_") + nn::to_string(GetParam()) + ".json").string();
  io::save_model(path, model);
  const auto back = io::load_model(path);
  EXPECT_EQ(back.steps, model.steps);
  EXPECT_EQ(back.features, model.features);
  EXPECT_EQ(back.feature_spec.psi, 32u);
  EXPECT_EQ(back.feature_spec.averaging, IntervalAveraging::LogPower);
  EXPECT_EQ(io::to_json(back.spec), io::to_json(model.spec));
  const auto probe = toy_set(4, 5, 2);
  const auto p0 = nn::predict_proba(model, probe.items);
  const auto p1 = nn::predict_proba(back, probe.items);
  ASSERT_EQ(p0.size(), p1.size());
  for (std::size_t i = 0; i < p0.size(); ++i) EXPECT_EQ(p0[i], p1[i]);
}

INSTANTIATE_TEST_SUITE_P(Families, ModelCheckpoint, ::testing::Values(Family::LR, Family::MLP, Family::CNN, Family::LSTM),
                         [](const auto& info) { return std::string(nn::to_string(info.param)); });

TEST(ModelCheckpointErrors, WrongFormatAndTruncation) {
  EXPECT_THROW(io::model_from_json(io::json{{"format", "other"}}), FormatError);
  const auto path = scratch("truncated.json").string();
  {
    std::ofstream out(path);
    out << "{\"format\": \"bedocc-model/1\", \"spec\": ";
  }
  EXPECT_THROW(io::load_model(path), FormatError);
}

TEST(Hypothesis, JsonRoundTrip) {
  DetectionHypothesis h;
  h.reconciled = true;
  h.changes = {{100.25, 0.91, ChangeStatus::Change, Direction::In}, {250.0, 0.6, ChangeStatus::Activity, Direction::Unknown}};
  IntervalHypothesis a;
  a.start_s = 0;
  a.end_s = 97.75;
  a.score = 0.1;
  a.occupied = false;
  a.k = 0;
  IntervalHypothesis b = a;
  b.start_s = 102.75;
  b.end_s = 500;
  b.score = 0.8;
  b.occupied = true;
  b.k = 1;
  h.intervals = {a, b};
  const auto path = scratch("hyp.json").string();
  io::save_hypothesis(path, h);
  const auto back = io::load_hypothesis(path);
  EXPECT_EQ(io::to_json(back), io::to_json(h));
  ASSERT_EQ(back.changes.size(), 2u);
  EXPECT_EQ(back.changes[1].status, ChangeStatus::Activity);
  EXPECT_EQ(back.intervals[1].occupied, true);
  EXPECT_THROW(io::hypothesis_from_json(io::json{{"format", "bedocc-model/1"}}), FormatError);
}

TEST(Grid, JsonRoundTrip) {
  const auto g = desk_grid();
  const auto back = io::grid_from_json(io::to_json(g));
  ASSERT_EQ(back.detector1.size(), g.detector1.size());
  ASSERT_EQ(back.detector2.size(), g.detector2.size());
  EXPECT_EQ(io::to_json(back), io::to_json(g));
}

TEST(Spec, MissingKeysKeepFamilyDefaults) {
  const auto s = io::spec_from_json(io::json{{"family", "mlp"}, {"epochs", 7}});
  const auto d = nn::default_spec(Family::MLP);
  EXPECT_EQ(s.family, Family::MLP);
  EXPECT_EQ(s.epochs, 7u);
  EXPECT_EQ(s.mlp_hidden, d.mlp_hidden);
  EXPECT_EQ(s.learning_rate, d.learning_rate);
  EXPECT_THROW(io::spec_from_json(io::json{{"family", "mlp"}, {"standardization", "minmax"}}), FormatError);
}

TEST(Profile, JsonRoundTripAndPartialOverride) {
  const auto p = default_profiles(10).at(3);
  const auto back = io::profile_from_json(io::to_json(p));
  EXPECT_EQ(io::to_json(back), io::to_json(p));
  const auto q = io::profile_from_json(io::json{{"quietness", 0.2}}, p);
  EXPECT_EQ(q.quietness, 0.2);
  EXPECT_EQ(q.n_changes, p.n_changes);
}
