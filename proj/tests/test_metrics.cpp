#include <gtest/gtest.h>

#include <random>

#include "bedocc/metrics.hpp"

using namespace bedocc;

namespace {

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!y[i] || y[j]) continue;
      den += 1;
      num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  return num / den;
}

OccupancySignal occ(std::vector<std::uint8_t> v, double fs = 1.0) {
  OccupancySignal o;
  o.fs = fs;
  o.states = std::move(v);
  return o;
}

}  // namespace

TEST(RocAuc, Examples) {
  const std::vector<double> sep{0.1, 0.2, 0.8, 0.9};
  const std::vector<int> y{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(roc_auc(sep, y), 1.0);
  const std::vector<double> flat(4, 0.3);
  EXPECT_DOUBLE_EQ(roc_auc(flat, y), 0.5);
  const std::vector<int> one{1, 1, 1, 1};
  EXPECT_THROW(roc_auc(sep, one), InvalidArgument);
}

TEST(RocAuc, MatchesBruteForceWithTies) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> level(0, 9), bit(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(100);
    std::vector<int> y(100);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = level(rng) / 10.0;  // heavy ties
      y[i] = bit(rng);
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_DOUBLE_EQ(roc_auc(s, y), brute_auc(s, y));
  }
}

TEST(RocAuc, MonotoneInvarianceAndFlip) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> g;
  std::vector<double> s(300), t(300);
  std::vector<int> y(300), f(300);
  for (std::size_t i = 0; i < s.size(); ++i) {
    y[i] = i % 3 == 0;
    f[i] = !y[i];
    s[i] = g(rng) + y[i];
    t[i] = std::exp(3.0 * s[i]) - 7.0;
  }
  EXPECT_NEAR(roc_auc(t, y), roc_auc(s, y), 1e-12);
  EXPECT_NEAR(roc_auc(s, f), 1.0 - roc_auc(s, y), 1e-12);
}

TEST(RocCurve, EndPoints) {
  const std::vector<double> s{0.9, 0.1, 0.5, 0.5};
  const std::vector<int> y{1, 0, 1, 0};
  const auto c = roc_curve(s, y);
  EXPECT_EQ(c.front().fpr, 0.0);
  EXPECT_EQ(c.front().tpr, 0.0);
  EXPECT_EQ(c.back().fpr, 1.0);
  EXPECT_EQ(c.back().tpr, 1.0);
  double area = 0;
  for (std::size_t i = 1; i < c.size(); ++i) area += (c[i].fpr - c[i - 1].fpr) * 0.5 * (c[i].tpr + c[i - 1].tpr);
  EXPECT_DOUBLE_EQ(area, roc_auc(s, y));
}

TEST(PerSample, PerfectAndInverted) {
  const auto t = occ({0, 0, 1, 1, 1, 0});
  const std::vector<double> s{0, 0, 1, 1, 1, 0};
  const auto r = per_sample_metrics(t, t, s);
  EXPECT_EQ(r.sensitivity, 1.0);
  EXPECT_EQ(r.specificity, 1.0);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.auc, 1.0);
  const auto inv = occ({1, 1, 0, 0, 0, 1});
  EXPECT_EQ(per_sample_metrics(t, inv, s).accuracy, 0.0);
  EXPECT_EQ(r.accuracy, static_cast<double>(r.tp + r.tn) / static_cast<double>(r.tp + r.tn + r.fp + r.fn));
}

TEST(PerSample, RandomPredictionOnBalancedTruth) {
  std::mt19937_64 rng(23);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::uint8_t> t(10000), p(10000);
  std::vector<double> s(10000);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = i % 2;
    p[i] = coin(rng);
    s[i] = p[i];
  }
  const auto r = per_sample_metrics(occ(t), occ(p), s);
  EXPECT_NEAR(r.accuracy, 0.5, 0.02);
}

TEST(PerSample, Decimation) {
  // 100 Hz signals compared at 1 s: one sample per second
  std::vector<std::uint8_t> t(1000, 0), p(1000, 0);
  std::fill(t.begin() + 300, t.begin() + 700, 1);
  std::fill(p.begin() + 350, p.begin() + 700, 1);
  const std::vector<double> s(p.begin(), p.end());
  const auto r = per_sample_metrics(occ(t, 100.0), occ(p, 100.0), s, 1.0);
  EXPECT_EQ(r.tp + r.fp + r.tn + r.fn, 10u);
  EXPECT_EQ(r.tp, 3u);  // samples at 4, 5, 6 s
  EXPECT_EQ(r.fn, 1u);  // 3 s
  EXPECT_DOUBLE_EQ(r.resolution_s, 1.0);
}

TEST(PerSample, LengthMismatch) {
  const std::vector<double> s(3, 0.0);
  EXPECT_THROW(per_sample_metrics(occ({0, 1, 0}), occ({0, 1}), s), InvalidArgument);
}

TEST(Confusion, EmptyClassGivesNan) {
  const std::vector<int> t{0, 0, 0}, p{0, 0, 0};
  const auto r = confusion_metrics(t, p);
  EXPECT_TRUE(std::isnan(r.sensitivity));
  EXPECT_EQ(r.specificity, 1.0);
}
