#include "posemfa/mfa.hpp"

#include "posemfa/errors.hpp"
#include "posemfa/kmeans.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace posemfa {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // ln(2 pi)

void check_component(const FactorAnalyzer& fa, Eigen::Index dim) {
  const auto n_s = fa.num_shapes();
  if (fa.noise.size() != n_s || static_cast<Eigen::Index>(3 * n_s) != dim ||
      fa.mean.size() != dim) {
    throw InvalidArgument("factor analyzer dimensions do not match data (" +
                          std::to_string(dim) + ")");
  }
  for (double s : fa.noise) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw SingularCovariance("noise variance " + std::to_string(s) +
                               " leaves a covariance block singular");
    }
  }
}

// Diagonal of M = I + A^T Phi^{-1} A = I + Lambda^2 * sum_i 1/s^i.
Vec3 latent_precision(const FactorAnalyzer& fa) {
  double w = 0.0;
  for (double s : fa.noise) w += 1.0 / s;
  return Vec3::Ones() + fa.scale.cwiseAbs2() * w;
}

// M^{-1} Lambda sum_i R^iT (h^i - b^i) / s^i
Vec3 posterior_mean(const Eigen::Ref<const Eigen::VectorXd>& h,
                    const FactorAnalyzer& fa, const Vec3& precision) {
  Vec3 u = Vec3::Zero();
  for (std::size_t i = 0; i < fa.num_shapes(); ++i) {
    u += fa.rotations[i].transpose() *
         (h.segment<3>(3 * i) - fa.mean.segment<3>(3 * i)) / fa.noise[i];
  }
  return fa.scale.cwiseProduct(u).cwiseQuotient(precision);
}

// log N(h; b, A A^T + Phi). Uses the determinant lemma for the log-det and
// (h-b)^T S^{-1} (h-b) = |r - A z*|^2_{Phi^{-1}} + |z*|^2, which is a sum of
// non-negative terms and stays accurate when s is tiny.
double log_density(const Eigen::Ref<const Eigen::VectorXd>& h,
                   const FactorAnalyzer& fa, const Vec3& precision,
                   double log_det_phi) {
  const Vec3 z = posterior_mean(h, fa, precision);
  const Vec3 lz = fa.scale.cwiseProduct(z);
  double quad = z.squaredNorm();
  for (std::size_t i = 0; i < fa.num_shapes(); ++i) {
    const Vec3 r = h.segment<3>(3 * i) - fa.mean.segment<3>(3 * i) -
                   fa.rotations[i] * lz;
    quad += r.squaredNorm() / fa.noise[i];
  }
  const double log_det = log_det_phi + precision.array().log().sum();
  return -0.5 * (static_cast<double>(h.size()) * kLog2Pi + log_det + quad);
}

double log_det_noise(const FactorAnalyzer& fa) {
  double acc = 0.0;
  for (double s : fa.noise) acc += 3.0 * std::log(s);
  return acc;
}

double log_sum_exp_column(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

}  // namespace

double FactorAnalyzer::noise_trace() const {
  double acc = 0.0;
  for (double s : noise) acc += 3.0 * s;
  return acc;
}

double component_log_density(const Eigen::Ref<const Eigen::VectorXd>& h,
                             const FactorAnalyzer& fa) {
  check_component(fa, h.size());
  return log_density(h, fa, latent_precision(fa), log_det_noise(fa));
}

PosteriorMoments posterior_moments(const Eigen::Ref<const Eigen::VectorXd>& h,
                                   const FactorAnalyzer& fa) {
  check_component(fa, h.size());
  const Vec3 precision = latent_precision(fa);
  PosteriorMoments out;
  out.mean = posterior_mean(h, fa, precision);
  out.second_moment = Mat3(precision.cwiseInverse().asDiagonal()) +
                      out.mean * out.mean.transpose();
  return out;
}

LatentPosterior latent_posterior(const DataMatrix& data,
                                 const FactorAnalyzer& fa) {
  check_component(fa, data.rows());
  const Vec3 precision = latent_precision(fa);
  LatentPosterior out;
  out.covariance = precision.cwiseInverse();
  out.means.resize(3, data.cols());
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    out.means.col(j) = posterior_mean(data.col(j), fa, precision);
  }
  return out;
}

Eigen::MatrixXd log_density_matrix(const DataMatrix& data,
                                   std::span<const FactorAnalyzer> components) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(components.size()),
                      data.cols());
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& fa = components[k];
    check_component(fa, data.rows());
    const Vec3 precision = latent_precision(fa);
    const double ldp = log_det_noise(fa);
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      out(static_cast<Eigen::Index>(k), j) =
          log_density(data.col(j), fa, precision, ldp);
    }
  }
  return out;
}

Expectation expectation(const DataMatrix& data,
                        std::span<const FactorAnalyzer> components) {
  if (components.empty()) throw InvalidArgument("mixture has no components");
  Eigen::MatrixXd log_joint = log_density_matrix(data, components);
  for (std::size_t k = 0; k < components.size(); ++k) {
    log_joint.row(static_cast<Eigen::Index>(k)).array() +=
        std::log(components[k].weight);
  }
  Expectation out;
  out.responsibilities.resize(log_joint.rows(), log_joint.cols());
  for (Eigen::Index j = 0; j < log_joint.cols(); ++j) {
    const double lse = log_sum_exp_column(log_joint.col(j));
    if (!std::isfinite(lse)) {
      throw AllZeroLikelihood("every component assigns zero density to data "
                              "vector " + std::to_string(j));
    }
    out.log_likelihood += lse;
    out.responsibilities.col(j) = (log_joint.col(j).array() - lse).exp();
    // Exact unit column sum.
    out.responsibilities.col(j) /= out.responsibilities.col(j).sum();
  }
  return out;
}

Eigen::MatrixXd responsibilities(const DataMatrix& data,
                                 std::span<const FactorAnalyzer> components) {
  return expectation(data, components).responsibilities;
}

double log_likelihood(const DataMatrix& data,
                      std::span<const FactorAnalyzer> components) {
  return expectation(data, components).log_likelihood;
}

std::vector<int> argmax_labels(const Eigen::MatrixXd& gamma) {
  std::vector<int> labels(static_cast<std::size_t>(gamma.cols()), 0);
  for (Eigen::Index j = 0; j < gamma.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < gamma.rows(); ++k) {
      if (gamma(k, j) > gamma(best, j)) best = k;
    }
    labels[static_cast<std::size_t>(j)] = static_cast<int>(best);
  }
  return labels;
}

WeightsAndMeans update_pi_b(const Eigen::MatrixXd& gamma,
                            const DataMatrix& data) {
  if (gamma.cols() != data.cols()) {
    throw InvalidArgument("responsibilities and data disagree on n_v");
  }
  const double n_v = static_cast<double>(data.cols());
  WeightsAndMeans out;
  for (Eigen::Index k = 0; k < gamma.rows(); ++k) {
    const double mass = gamma.row(k).sum();
    if (mass < kEmptyComponentFraction * n_v) {
      throw EmptyComponent(static_cast<std::size_t>(k), mass);
    }
    out.weights.push_back(mass / n_v);
    out.means.emplace_back(data * gamma.row(k).transpose() / mass);
  }
  return out;
}

Mat3 mixture_covariance(const Eigen::Ref<const Eigen::RowVectorXd>& gamma_k,
                        const DataMatrix& data, const Eigen::VectorXd& mean_k,
                        std::size_t shape) {
  const auto row = static_cast<Eigen::Index>(3 * shape);
  const Vec3 b = mean_k.segment<3>(row);
  Mat3 c = Mat3::Zero();
  double mass = 0.0;
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const double g = gamma_k[j];
    if (g == 0.0) continue;
    const Vec3 d = data.block<3, 1>(row, j) - b;
    c.noalias() += g * d * d.transpose();
    mass += g;
  }
  if (mass > 0.0) c /= mass;
  return 0.5 * (c + c.transpose());
}

Vec3 update_lambda(std::span<const Mat3> covariances) {
  if (covariances.empty()) throw InvalidArgument("no covariance matrices");
  Vec3 acc = Vec3::Zero();
  Eigen::SelfAdjointEigenSolver<Mat3> eig;
  for (const Mat3& c : covariances) {
    eig.compute(c, Eigen::EigenvaluesOnly);
    Vec3 ev = eig.eigenvalues();  // ascending
    for (int d = 0; d < 3; ++d) {
      if (ev[d] < -kEigenTolerance) {
        throw NegativeEigenvalue("mixture covariance eigenvalue " +
                                 std::to_string(ev[d]));
      }
      ev[d] = std::max(ev[d], 0.0);
    }
    acc += ev.reverse();
  }
  acc /= static_cast<double>(covariances.size());
  return acc.cwiseSqrt();
}

Mat3 constrained_rotation(const Mat3& b) {
  // Singular values come back in descending order.
  const Eigen::JacobiSVD<Mat3> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 r = v * u.transpose();
  if (r.determinant() < 0.0) {
    const Vec3 flip(1.0, 1.0, -1.0);
    r = v * flip.asDiagonal() * u.transpose();
  }
  return r;
}

std::vector<Mat3> update_rotations(
    const Eigen::Ref<const Eigen::RowVectorXd>& gamma_k,
    const LatentPosterior& moments, const DataMatrix& data,
    const Eigen::VectorXd& mean_k, const Vec3& scale) {
  const auto n_s = static_cast<std::size_t>(data.rows() / 3);
  std::vector<Mat3> out(n_s);
  for (std::size_t i = 0; i < n_s; ++i) {
    const auto row = static_cast<Eigen::Index>(3 * i);
    const Vec3 b = mean_k.segment<3>(row);
    Mat3 acc = Mat3::Zero();
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      const double g = gamma_k[j];
      if (g == 0.0) continue;
      acc.noalias() +=
          g * moments.means.col(j) * (data.block<3, 1>(row, j) - b).transpose();
    }
    out[i] = constrained_rotation(scale.asDiagonal() * acc);
  }
  return out;
}

Eigen::VectorXd noise_diagonal(
    const Eigen::Ref<const Eigen::RowVectorXd>& gamma_k,
    const LatentPosterior& moments, const DataMatrix& data,
    const Eigen::VectorXd& mean_k, std::span<const Mat3> rotations,
    const Vec3& scale) {
  const auto n_s = rotations.size();
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(data.rows());
  const double mass = gamma_k.sum();
  if (!(mass > 0.0)) return diag;

  for (std::size_t i = 0; i < n_s; ++i) {
    const auto row = static_cast<Eigen::Index>(3 * i);
    const Mat3 a = rotations[i] * scale.asDiagonal();
    const Vec3 b = mean_k.segment<3>(row);
    // diag(A Cov A^T) is shared by every j.
    const Vec3 cov_term =
        (a * moments.covariance.asDiagonal() * a.transpose()).diagonal();
    Vec3 acc = Vec3::Zero();
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      const double g = gamma_k[j];
      if (g == 0.0) continue;
      // (r r^T - 2 r E[z]^T A^T + A E[zz^T] A^T)_dd
      //   = (r - A E[z])_d^2 + (A Cov A^T)_dd
      const Vec3 e = data.block<3, 1>(row, j) - b - a * moments.means.col(j);
      acc += g * e.cwiseAbs2();
    }
    diag.segment<3>(row) = acc / mass + cov_term;
  }
  return diag;
}

std::vector<double> update_phi(
    const Eigen::Ref<const Eigen::RowVectorXd>& gamma_k,
    const LatentPosterior& moments, const DataMatrix& data,
    const Eigen::VectorXd& mean_k, std::span<const Mat3> rotations,
    const Vec3& scale) {
  const Eigen::VectorXd diag =
      noise_diagonal(gamma_k, moments, data, mean_k, rotations, scale);
  std::vector<double> s(rotations.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = std::max(diag.segment<3>(static_cast<Eigen::Index>(3 * i)).mean(),
                    kNoiseFloor);
  }
  return s;
}

std::vector<FactorAnalyzer> init_from_responsibilities(
    const DataMatrix& data, const Eigen::MatrixXd& gamma) {
  const auto n_s = static_cast<std::size_t>(data.rows() / 3);
  const auto [weights, means] = update_pi_b(gamma, data);
  std::vector<FactorAnalyzer> out(weights.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    auto& fa = out[k];
    const auto g = gamma.row(static_cast<Eigen::Index>(k));
    fa.weight = weights[k];
    fa.mean = means[k];
    fa.rotations.assign(n_s, Mat3::Identity());
    std::vector<Mat3> cov(n_s);
    fa.noise.resize(n_s);
    for (std::size_t i = 0; i < n_s; ++i) {
      cov[i] = mixture_covariance(g, data, fa.mean, i);
      fa.noise[i] = std::max(cov[i].trace() / 3.0, kNoiseFloor);
    }
    fa.scale = update_lambda(cov);
  }
  return out;
}

Eigen::MatrixXd one_hot(std::span<const int> labels, std::size_t m) {
  Eigen::MatrixXd gamma =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                            static_cast<Eigen::Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 0 || static_cast<std::size_t>(labels[j]) >= m) {
      throw InvalidArgument("label " + std::to_string(labels[j]) +
                            " outside [0, " + std::to_string(m) + ")");
    }
    gamma(labels[j], static_cast<Eigen::Index>(j)) = 1.0;
  }
  return gamma;
}

namespace {

// Removes components whose mass is below the empty threshold and renormalizes
// the remaining weights. Returns true when something was removed.
bool drop_empty(std::vector<FactorAnalyzer>& comps, const Eigen::MatrixXd& gamma,
                double n_v) {
  std::vector<FactorAnalyzer> kept;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    if (gamma.row(static_cast<Eigen::Index>(k)).sum() >=
        kEmptyComponentFraction * n_v) {
      kept.push_back(std::move(comps[k]));
    }
  }
  if (kept.size() == comps.size()) {
    comps = std::move(kept);
    return false;
  }
  if (kept.empty()) throw EmptyComponent(0, 0.0);
  double total = 0.0;
  for (const auto& fa : kept) total += fa.weight;
  for (auto& fa : kept) fa.weight /= total;
  comps = std::move(kept);
  return true;
}

}  // namespace

MixtureModel aecm_fit(const DataMatrix& data, std::vector<FactorAnalyzer> init,
                      const AecmOptions& options) {
  if (init.empty()) throw InvalidArgument("aecm_fit needs m >= 1");
  if (options.max_iter < 0 || options.tol < 0.0) {
    throw InvalidArgument("aecm_fit: max_iter and tol must be non-negative");
  }
  const double n_v = static_cast<double>(data.cols());
  const auto n_s = static_cast<std::size_t>(data.rows() / 3);

  MixtureModel model;
  model.components = std::move(init);
  Expectation e = expectation(data, model.components);
  model.initial_log_likelihood = e.log_likelihood;
  double previous = e.log_likelihood;

  for (int it = 1; it <= options.max_iter; ++it) {
    // Cycle 1: E-step under the current parameters, then pi and b.
    if (drop_empty(model.components, e.responsibilities, n_v)) {
      model.drop_iterations.push_back(it);
      e = expectation(data, model.components);
      previous = e.log_likelihood;
    }
    const auto [weights, means] = update_pi_b(e.responsibilities, data);
    for (std::size_t k = 0; k < model.components.size(); ++k) {
      model.components[k].weight = weights[k];
      model.components[k].mean = means[k];
    }

    // Cycle 2: E-step with new pi, b and old A, Phi; then Lambda, R, Phi.
    e = expectation(data, model.components);
    for (std::size_t k = 0; k < model.components.size(); ++k) {
      auto& fa = model.components[k];
      const auto g = e.responsibilities.row(static_cast<Eigen::Index>(k));
      if (!(g.sum() > 0.0)) continue;
      const LatentPosterior moments = latent_posterior(data, fa);

      std::vector<Mat3> cov(n_s);
      for (std::size_t i = 0; i < n_s; ++i) {
        cov[i] = mixture_covariance(g, data, fa.mean, i);
      }
      fa.scale = update_lambda(cov);
      fa.rotations = update_rotations(g, moments, data, fa.mean, fa.scale);
      fa.noise = update_phi(g, moments, data, fa.mean, fa.rotations, fa.scale);
    }

    e = expectation(data, model.components);
    model.log_likelihood_trace.push_back(e.log_likelihood);
    model.iterations = it;
    if (options.on_iteration) options.on_iteration(it, e.log_likelihood);

    const double change = std::abs(e.log_likelihood - previous);
    previous = e.log_likelihood;
    if (change < options.tol * std::max(std::abs(e.log_likelihood), 1e-300)) {
      model.converged = true;
      break;
    }
  }

  model.responsibilities = std::move(e.responsibilities);
  model.labels = argmax_labels(model.responsibilities);
  return model;
}

MixtureModel aecm_fit(const DataMatrix& data, const Eigen::MatrixXd& init_gamma,
                      const AecmOptions& options) {
  return aecm_fit(data, init_from_responsibilities(data, init_gamma), options);
}

MixtureModel aecm_fit_labels(const DataMatrix& data, std::span<const int> labels,
                             const AecmOptions& options) {
  if (labels.size() != static_cast<std::size_t>(data.cols())) {
    throw InvalidArgument("one label per data vector required");
  }
  // Compact the ids so unused labels do not become empty components.
  std::vector<int> ids(labels.begin(), labels.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<int> compact(labels.size());
  for (std::size_t j = 0; j < labels.size(); ++j) {
    compact[j] = static_cast<int>(
        std::lower_bound(ids.begin(), ids.end(), labels[j]) - ids.begin());
  }
  return aecm_fit(data, one_hot(compact, ids.size()), options);
}

MixtureModel aecm_fit_kmeans(const DataMatrix& data, std::size_t m,
                             std::uint64_t seed, const AecmOptions& options) {
  const KMeansResult km = kmeans(data, m, seed);
  return aecm_fit(data, one_hot(km.labels, m), options);
}

}  // namespace posemfa
