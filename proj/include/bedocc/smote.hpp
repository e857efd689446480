#pragma once

// Synthetic minority over-sampling: each synthetic point interpolates between a
// minority point and one of its k nearest minority neighbours.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "bedocc/common.hpp"

namespace bedocc {

using Point = std::vector<double>;

/// Indices of the k nearest neighbours (squared Euclidean, ties by index) of every point.
inline std::vector<std::vector<std::size_t>> nearest_neighbours(const std::vector<Point>& pts, std::size_t k) {
  const std::size_t n = pts.size();
  std::vector<std::vector<double>> d2(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < pts[i].size(); ++c) {
        const double diff = pts[i][c] - pts[j][c];
        s += diff * diff;
      }
      d2[i][j] = d2[j][i] = s;
    }
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) idx.push_back(j);
    const std::size_t kk = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(),
                      [&](std::size_t a, std::size_t b) { return d2[i][a] != d2[i][b] ? d2[i][a] < d2[i][b] : a < b; });
    idx.resize(kk);
    out[i] = std::move(idx);
  }
  return out;
}

struct SmoteSample {
  Point point;
  std::size_t base = 0;       // index of the minority point
  std::size_t neighbour = 0;  // index of the chosen neighbour
  double gap = 0.0;           // interpolation coefficient in [0,1]
};

/// Full SMOTE draw with provenance of every synthetic point.
inline std::vector<SmoteSample> smote_detailed(const std::vector<Point>& minority, std::size_t k_neighbors,
                                               std::size_t n_synthetic, std::uint64_t seed) {
  if (minority.size() < 2) throw InvalidArgument("smote: minority class needs at least two points");
  require(k_neighbors >= 1, "smote: k_neighbors must be >= 1");
  const std::size_t dim = minority.front().size();
  for (const auto& p : minority) require(p.size() == dim, "smote: inconsistent dimensions");

  const auto nn = nearest_neighbours(minority, k_neighbors);
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, minority.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SmoteSample> out;
  out.reserve(n_synthetic);
  for (std::size_t s = 0; s < n_synthetic; ++s) {
    const std::size_t i = pick(rng);
    std::uniform_int_distribution<std::size_t> which(0, nn[i].size() - 1);
    const std::size_t j = nn[i][which(rng)];
    const double u = unit(rng);
    SmoteSample sample{Point(dim), i, j, u};
    for (std::size_t c = 0; c < dim; ++c) sample.point[c] = minority[i][c] + u * (minority[j][c] - minority[i][c]);
    out.push_back(std::move(sample));
  }
  return out;
}

inline std::vector<Point> smote(const std::vector<Point>& minority, std::size_t k_neighbors, std::size_t n_synthetic,
                                std::uint64_t seed) {
  auto detailed = smote_detailed(minority, k_neighbors, n_synthetic, seed);
  std::vector<Point> out;
  out.reserve(detailed.size());
  for (auto& s : detailed) out.push_back(std::move(s.point));
  return out;
}

}  // namespace bedocc
