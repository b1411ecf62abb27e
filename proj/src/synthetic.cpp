#include "posemfa/synthetic.hpp"

#include "posemfa/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <random>

namespace posemfa {

ChainSpec ChainSpec::default_spec() {
  ChainSpec spec;
  spec.parts = {ChainPart{}, ChainPart{}, ChainPart{}};
  spec.joints = {
      ChainJoint{Vec3::UnitZ(), {0.0, 0.5, 1.1, -0.3, 0.8}},
      ChainJoint{Vec3::UnitY(), {0.0, -0.6, 0.4, 0.9, -0.2}},
  };
  spec.poses = 5;
  spec.noise_sigma = 1e-3;
  spec.rng_seed = 7;
  return spec;
}

void ChainSpec::validate() const {
  if (parts.empty()) throw InvalidArgument("chain needs at least one part");
  if (poses < 2) throw TooFewShapes("chain needs at least 2 poses");
  if (joints.size() + 1 != parts.size()) {
    throw InvalidArgument("chain with " + std::to_string(parts.size()) +
                          " parts needs " + std::to_string(parts.size() - 1) +
                          " joints");
  }
  for (const auto& p : parts) {
    if (p.vertices < 12 || p.vertices % 4 != 0) {
      throw InvalidArgument("part vertex count must be a multiple of 4 and >= 12");
    }
    if ((p.dims.array() <= 0.0).any()) {
      throw InvalidArgument("part dimensions must be positive");
    }
  }
  for (const auto& j : joints) {
    if (j.angles.size() != static_cast<std::size_t>(poses)) {
      throw InvalidArgument("every joint needs one angle per pose");
    }
    if (!(j.axis.norm() > 0.0)) throw InvalidArgument("zero hinge axis");
  }
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("negative noise");
}

SyntheticChain generate_chain(const ChainSpec& spec) {
  spec.validate();
  const std::size_t n_parts = spec.parts.size();
  const auto n_s = static_cast<std::size_t>(spec.poses);

  // Rest geometry: square-section tubes laid along +x, one ring of four
  // corners per station, rings evenly spaced inside each part.
  ChainTruth truth;
  std::vector<Vec3> hinge(n_parts, Vec3::Zero());
  double x0 = 0.0;
  for (std::size_t c = 0; c < n_parts; ++c) {
    const auto& part = spec.parts[c];
    hinge[c] = Vec3(x0, 0.0, 0.0);
    const int rings = part.vertices / 4;
    const double hy = 0.5 * part.dims.y(), hz = 0.5 * part.dims.z();
    for (int r = 0; r < rings; ++r) {
      const double x = x0 + part.dims.x() * (r + 0.5) / rings;
      for (const auto& [y, z] :
           {std::pair{-hy, -hz}, {hy, -hz}, {hy, hz}, {-hy, hz}}) {
        truth.rest.emplace_back(x, y, z);
        truth.labels.push_back(static_cast<int>(c));
      }
    }
    x0 += part.dims.x();
  }

  const int total_rings = static_cast<int>(truth.rest.size() / 4);
  std::vector<Triangle> tris;
  for (int r = 0; r + 1 < total_rings; ++r) {
    for (int q = 0; q < 4; ++q) {
      const int a = 4 * r + q, b = 4 * r + (q + 1) % 4;
      const int c = b + 4, d = a + 4;
      tris.push_back({a, b, c});
      tris.push_back({a, c, d});
    }
  }
  const int last = 4 * (total_rings - 1);
  tris.push_back({0, 2, 1});
  tris.push_back({0, 3, 2});
  tris.push_back({last, last + 1, last + 2});
  tris.push_back({last, last + 2, last + 3});

  truth.rotations.assign(n_parts, std::vector<Mat3>(n_s));
  truth.translations.assign(n_parts, std::vector<Vec3>(n_s));
  for (std::size_t i = 0; i < n_s; ++i) {
    Mat3 r = Mat3::Identity();
    Vec3 t = Vec3::Zero();
    for (std::size_t c = 0; c < n_parts; ++c) {
      if (c > 0) {
        // Compose with the hinge about hinge[c]: x -> H (x - p) + p.
        const Mat3 h = axis_angle(spec.joints[c - 1].axis,
                                  spec.joints[c - 1].angles[i]);
        t = r * (hinge[c] - h * hinge[c]) + t;
        r = r * h;
      }
      truth.rotations[c][i] = r;
      truth.translations[c][i] = t;
    }
  }

  std::mt19937_64 rng(spec.rng_seed);
  std::vector<std::vector<Vec3>> shapes(n_s);
  truth.noise.assign(n_s, std::vector<Vec3>(truth.rest.size(), Vec3::Zero()));
  for (std::size_t i = 0; i < n_s; ++i) {
    shapes[i].reserve(truth.rest.size());
    for (std::size_t j = 0; j < truth.rest.size(); ++j) {
      const auto c = static_cast<std::size_t>(truth.labels[j]);
      Vec3 v = truth.rotations[c][i] * truth.rest[j] + truth.translations[c][i];
      if (spec.noise_sigma > 0.0) {
        Vec3 e(standard_normal(rng), standard_normal(rng), standard_normal(rng));
        e *= spec.noise_sigma;
        truth.noise[i][j] = e;
        v += e;
      }
      shapes[i].push_back(v);
    }
  }
  return {TrainingSet(std::move(shapes), std::move(tris)), std::move(truth)};
}

SyntheticChain normalize_chain(const SyntheticChain& chain) {
  SyntheticChain out{normalize_unit_box(chain.set), chain.truth};
  const UnitBoxTransform& tf = out.set.normalization();
  // v' = s (R x + t - o) = R (s x) + s (t - o)
  for (auto& x : out.truth.rest) x *= tf.scale;
  for (auto& per_part : out.truth.translations) {
    for (auto& t : per_part) t = tf.scale * (t - tf.origin);
  }
  for (auto& per_pose : out.truth.noise) {
    for (auto& e : per_pose) e *= tf.scale;
  }
  return out;
}

namespace oracle {

DenseGaussian dense_gaussian(const Eigen::VectorXd& h, const Eigen::VectorXd& b,
                             const Eigen::MatrixXd& a,
                             const Eigen::VectorXd& phi) {
  const Eigen::Index d = h.size();
  const Eigen::MatrixXd cov = a * a.transpose() + Eigen::MatrixXd(phi.asDiagonal());
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw SingularCovariance("dense covariance is not positive definite");
  }
  const Eigen::VectorXd r = h - b;
  const Eigen::VectorXd sol = llt.solve(r);
  const Eigen::MatrixXd l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();

  DenseGaussian out;
  out.log_density = -0.5 * (static_cast<double>(d) * std::log(2.0 * M_PI) +
                            log_det + r.dot(sol));
  // beta = A^T cov^{-1}
  const Eigen::MatrixXd beta = llt.solve(a).transpose();
  out.posterior_mean = beta * r;
  out.posterior_covariance =
      Eigen::MatrixXd::Identity(a.cols(), a.cols()) - beta * a;
  return out;
}

RigidFit kabsch(const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
  if (p.size() != q.size()) throw InvalidArgument("point sets differ in size");
  if (p.size() < 3) throw DegenerateConfiguration("need at least 3 points");
  const double n = static_cast<double>(p.size());
  Vec3 cp = Vec3::Zero(), cq = Vec3::Zero();
  for (std::size_t k = 0; k < p.size(); ++k) {
    cp += p[k];
    cq += q[k];
  }
  cp /= n;
  cq /= n;

  Mat3 s = Mat3::Zero();
  Mat3 spread = Mat3::Zero();
  for (std::size_t k = 0; k < p.size(); ++k) {
    const Vec3 a = p[k] - cp;
    s += a * (q[k] - cq).transpose();
    spread += a * a.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> sp(spread, Eigen::EigenvaluesOnly);
  if (sp.eigenvalues()[1] <= 1e-14 * std::max(sp.eigenvalues()[2], 1e-300)) {
    throw DegenerateConfiguration("points are collinear");
  }

  // Horn (1987): the optimal unit quaternion is the top eigenvector of N.
  Eigen::Matrix4d nm;
  const double sxx = s(0, 0), sxy = s(0, 1), sxz = s(0, 2);
  const double syx = s(1, 0), syy = s(1, 1), syz = s(1, 2);
  const double szx = s(2, 0), szy = s(2, 1), szz = s(2, 2);
  nm << sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
        syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
        szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
        sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(nm);
  const Eigen::Vector4d v = eig.eigenvectors().col(3);
  const Eigen::Quaterniond quat(v[0], v[1], v[2], v[3]);

  RigidFit out;
  out.rotation = quat.normalized().toRotationMatrix();
  out.translation = cq - out.rotation * cp;
  double sq = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    sq += (out.rotation * p[k] + out.translation - q[k]).squaredNorm();
  }
  out.rms = std::sqrt(sq / n);
  return out;
}

}  // namespace oracle
}  // namespace posemfa
