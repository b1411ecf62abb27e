#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace posemfa {

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centers;  // dim x k
  int iterations = 0;
};

/// Lloyd's algorithm on the columns of `points` with k-means++ seeding.
/// Deterministic for a fixed seed.
KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k,
                    std::uint64_t seed, int max_iter = 300);

}  // namespace posemfa
