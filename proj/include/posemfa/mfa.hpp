#pragma once

// Rotation-constrained mixtures of factor analyzers.
//
// Each component models a stacked data vector h (3 coordinates per shape) as
//
//   h = A z + b + e,   A = [R^1; ...; R^ns] * Lambda,   z ~ N(0, I_3),
//   e ~ N(0, diag(s^1 I_3, ..., s^ns I_3)),
//
// so one component is one rigid part: R^i and b^i are its pose in shape i,
// Lambda * z its reference geometry and s^i the per-shape residual variance.
// Because every R^i is orthogonal, A^T Phi^{-1} A = Lambda^2 * sum_i 1/s^i is
// diagonal and all marginal/posterior quantities reduce to 3x3 work.

#include "posemfa/geometry.hpp"
#include "posemfa/mesh_io.hpp"

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace posemfa {

/// Lower bound on every per-shape noise variance s_k^i.
inline constexpr double kNoiseFloor = 1e-12;
/// A component whose responsibility mass falls below this fraction of n_v is
/// dropped by aecm_fit.
inline constexpr double kEmptyComponentFraction = 1e-6;
/// Eigenvalues of a mixture covariance below -kEigenTolerance are an error;
/// those in (-kEigenTolerance, 0) are clamped to zero.
inline constexpr double kEigenTolerance = 1e-12;

struct FactorAnalyzer {
  std::vector<Mat3> rotations;   // R_k^i, one per shape
  Vec3 scale = Vec3::Zero();     // diagonal of Lambda_k, descending
  Eigen::VectorXd mean;          // b_k, stacked per shape
  std::vector<double> noise;     // s_k^i
  double weight = 1.0;           // pi_k

  std::size_t num_shapes() const { return rotations.size(); }
  Vec3 mean_of(std::size_t shape) const { return mean.segment<3>(3 * shape); }
  /// A^i = R^i Lambda.
  Mat3 loading_block(std::size_t shape) const {
    return rotations[shape] * scale.asDiagonal();
  }
  /// trace(Phi_k) = 3 * sum_i s_k^i.
  double noise_trace() const;
};

struct PosteriorMoments {
  Vec3 mean;           // E(z | h)
  Mat3 second_moment;  // E(z z^T | h)
};

/// Posterior of z for every column of a data matrix under one component. The
/// posterior covariance I - beta A does not depend on h and is diagonal.
struct LatentPosterior {
  Eigen::Matrix3Xd means;
  Vec3 covariance;
};

struct MixtureModel {
  std::vector<FactorAnalyzer> components;
  Eigen::MatrixXd responsibilities;  // m x n_v
  std::vector<int> labels;
  std::vector<double> log_likelihood_trace;  // after each full iteration
  double initial_log_likelihood = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool converged = false;
  /// Iterations (1-based) at which empty components were removed.
  std::vector<int> drop_iterations;

  std::size_t num_components() const { return components.size(); }
};

double component_log_density(const Eigen::Ref<const Eigen::VectorXd>& h,
                             const FactorAnalyzer& fa);

PosteriorMoments posterior_moments(const Eigen::Ref<const Eigen::VectorXd>& h,
                                   const FactorAnalyzer& fa);

LatentPosterior latent_posterior(const DataMatrix& data,
                                 const FactorAnalyzer& fa);

/// log N(h_j; b_k, A_k A_k^T + Phi_k) for all k, j (m x n_v).
Eigen::MatrixXd log_density_matrix(const DataMatrix& data,
                                   std::span<const FactorAnalyzer> components);

struct Expectation {
  Eigen::MatrixXd responsibilities;  // m x n_v
  double log_likelihood = 0.0;
};

Expectation expectation(const DataMatrix& data,
                        std::span<const FactorAnalyzer> components);

Eigen::MatrixXd responsibilities(const DataMatrix& data,
                                 std::span<const FactorAnalyzer> components);

double log_likelihood(const DataMatrix& data,
                      std::span<const FactorAnalyzer> components);

/// argmax_k gamma_kj, ties to the lowest k.
std::vector<int> argmax_labels(const Eigen::MatrixXd& gamma);

struct WeightsAndMeans {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
};

/// Cycle-1 CM step. Throws EmptyComponent for a component with mass below
/// kEmptyComponentFraction * n_v.
WeightsAndMeans update_pi_b(const Eigen::MatrixXd& gamma,
                            const DataMatrix& data);

/// Responsibility-weighted covariance of component k's points in one shape,
/// normalized by the total responsibility mass of the component.
Mat3 mixture_covariance(const Eigen::Ref<const Eigen::RowVectorXd>& gamma_k,
                        const DataMatrix& data, const Eigen::VectorXd& mean_k,
                        std::size_t shape);

/// Lambda = sqrt(mean over shapes of the descending eigenvalues of C_ki).
Vec3 update_lambda(std::span<const Mat3> covariances);

/// Right-handed R maximizing trace(B R): V U^T, or V diag(1,1,-1) U^T when
/// V U^T is a reflection.
Mat3 constrained_rotation(const Mat3& b);

std::vector<Mat3> update_rotations(
    const Eigen::Ref<const Eigen::RowVectorXd>& gamma_k,
    const LatentPosterior& moments, const DataMatrix& data,
    const Eigen::VectorXd& mean_k, const Vec3& scale);

/// Diagonal of the Phi update (length 3 n_s) for loading A = R Lambda.
Eigen::VectorXd noise_diagonal(
    const Eigen::Ref<const Eigen::RowVectorXd>& gamma_k,
    const LatentPosterior& moments, const DataMatrix& data,
    const Eigen::VectorXd& mean_k, std::span<const Mat3> rotations,
    const Vec3& scale);

/// Per-shape isotropic noise: mean of each shape's three diagonal entries,
/// floored at kNoiseFloor.
std::vector<double> update_phi(
    const Eigen::Ref<const Eigen::RowVectorXd>& gamma_k,
    const LatentPosterior& moments, const DataMatrix& data,
    const Eigen::VectorXd& mean_k, std::span<const Mat3> rotations,
    const Vec3& scale);

/// Starting parameters from a (possibly soft) partition: weights and means
/// from gamma, identity rotations, Lambda from the partition covariances and
/// noise from the within-cluster variance.
std::vector<FactorAnalyzer> init_from_responsibilities(
    const DataMatrix& data, const Eigen::MatrixXd& gamma);

Eigen::MatrixXd one_hot(std::span<const int> labels, std::size_t m);

struct AecmOptions {
  int max_iter = 200;
  double tol = 1e-7;  // relative log-likelihood change
  /// Called after every iteration with (iteration, log-likelihood).
  std::function<void(int, double)> on_iteration;
};

MixtureModel aecm_fit(const DataMatrix& data,
                      std::vector<FactorAnalyzer> init,
                      const AecmOptions& options = {});

MixtureModel aecm_fit(const DataMatrix& data, const Eigen::MatrixXd& init_gamma,
                      const AecmOptions& options = {});

MixtureModel aecm_fit_labels(const DataMatrix& data, std::span<const int> labels,
                             const AecmOptions& options = {});

/// k-means++ partition of the data vectors, then aecm_fit.
MixtureModel aecm_fit_kmeans(const DataMatrix& data, std::size_t m,
                             std::uint64_t seed,
                             const AecmOptions& options = {});

}  // namespace posemfa
