#pragma once

// Ground-truth articulated chains and brute-force oracles used to check the
// fitted models. Nothing here is on the fitting path.

#include "posemfa/geometry.hpp"
#include "posemfa/mesh_io.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <vector>

namespace posemfa {

struct ChainPart {
  Vec3 dims = Vec3(1.0, 0.3, 0.2);  // length (x), width (y), height (z)
  int vertices = 80;                // multiple of 4, >= 12
};

struct ChainJoint {
  Vec3 axis = Vec3::UnitZ();
  std::vector<double> angles;  // radians, one per pose
};

struct ChainSpec {
  std::vector<ChainPart> parts;
  std::vector<ChainJoint> joints;  // parts.size() - 1 hinges
  int poses = 5;
  double noise_sigma = 0.0;
  std::uint64_t rng_seed = 1;

  /// 3 parts x 80 vertices, 5 poses, hinges spanning more than 60 degrees,
  /// noise 1e-3.
  static ChainSpec default_spec();
  void validate() const;
};

/// Per-part rigid motion of each pose: x_pose = R x_rest + t.
struct ChainTruth {
  std::vector<int> labels;
  std::vector<Vec3> rest;                          // rest-pose vertices
  std::vector<std::vector<Mat3>> rotations;        // [part][pose]
  std::vector<std::vector<Vec3>> translations;     // [part][pose]
  std::vector<std::vector<Vec3>> noise;            // [pose][vertex]

  std::size_t num_parts() const { return rotations.size(); }
};

struct SyntheticChain {
  TrainingSet set;
  ChainTruth truth;
};

SyntheticChain generate_chain(const ChainSpec& spec);

/// Normalizes the set into the unit box and maps the ground truth along.
SyntheticChain normalize_chain(const SyntheticChain& chain);

namespace oracle {

struct DenseGaussian {
  double log_density = 0.0;
  Eigen::VectorXd posterior_mean;
  Eigen::MatrixXd posterior_covariance;
};

/// Forms the full covariance A A^T + diag(phi) and inverts it directly.
DenseGaussian dense_gaussian(const Eigen::VectorXd& h, const Eigen::VectorXd& b,
                             const Eigen::MatrixXd& a,
                             const Eigen::VectorXd& phi);

struct RigidFit {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double rms = 0.0;
};

/// Least-squares rigid motion taking p onto q (Horn's quaternion method;
/// always a proper rotation).
RigidFit kabsch(const std::vector<Vec3>& p, const std::vector<Vec3>& q);

/// Uniformly distributed rotation.
template <class Rng>
Mat3 random_rotation(Rng& rng);

}  // namespace oracle

/// Platform-independent uniform draw in [0, 1).
template <class Rng>
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Platform-independent standard normal draw (Box-Muller).
template <class Rng>
double standard_normal(Rng& rng) {
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

template <class Rng>
Mat3 oracle::random_rotation(Rng& rng) {
  Eigen::Quaterniond q(standard_normal(rng), standard_normal(rng),
                       standard_normal(rng), standard_normal(rng));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace posemfa
