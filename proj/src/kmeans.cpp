#include "posemfa/kmeans.hpp"

#include "posemfa/errors.hpp"

#include <limits>
#include <random>

namespace posemfa {
namespace {

// Platform-independent uniform draws (std distributions are not).
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Eigen::MatrixXd seed_plus_plus(const Eigen::MatrixXd& points, std::size_t k,
                               std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(points.cols());
  Eigen::MatrixXd centers(points.rows(), k);
  centers.col(0) = points.col(static_cast<Eigen::Index>(rng() % n));

  Eigen::VectorXd d2(n);
  for (std::size_t j = 0; j < n; ++j) {
    d2[j] = (points.col(j) - centers.col(0)).squaredNorm();
  }
  for (std::size_t c = 1; c < k; ++c) {
    const double total = d2.sum();
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = uniform01(rng) * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        target -= d2[pick];
        if (target < 0.0) break;
      }
      // Never pick an already-chosen point.
      while (d2[pick] == 0.0 && pick > 0) --pick;
    } else {
      pick = rng() % n;
    }
    centers.col(c) = points.col(pick);
    for (std::size_t j = 0; j < n; ++j) {
      d2[j] = std::min(d2[j], (points.col(j) - centers.col(c)).squaredNorm());
    }
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k,
                    std::uint64_t seed, int max_iter) {
  const auto n = static_cast<std::size_t>(points.cols());
  if (k == 0) throw InvalidArgument("k-means needs k >= 1");
  if (k > n) {
    throw InvalidArgument("k-means with k=" + std::to_string(k) + " but only " +
                          std::to_string(n) + " points");
  }
  std::mt19937_64 rng(seed);
  KMeansResult result;
  result.centers = seed_plus_plus(points, k, rng);
  result.labels.assign(n, -1);

  Eigen::VectorXd dist(n);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t j = 0; j < n; ++j) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = (points.col(j) - result.centers.col(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      dist[j] = best_d;
      if (result.labels[j] != best) {
        result.labels[j] = best;
        changed = true;
      }
    }
    result.iterations = it + 1;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), k);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t j = 0; j < n; ++j) {
      sums.col(result.labels[j]) += points.col(j);
      ++counts[result.labels[j]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        result.centers.col(c) = sums.col(c) / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the worst-fitted point.
      Eigen::Index far = 0;
      dist.maxCoeff(&far);
      result.centers.col(c) = points.col(far);
      result.labels[far] = static_cast<int>(c);
      dist[far] = 0.0;
      changed = true;
    }
    if (!changed) break;
  }
  return result;
}

}  // namespace posemfa
