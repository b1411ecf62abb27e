#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "posemfa/errors.hpp"
#include "posemfa/synthetic.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace posemfa;

namespace {

double max_angle_span(const ChainJoint& j) {
  const auto [lo, hi] = std::minmax_element(j.angles.begin(), j.angles.end());
  return *hi - *lo;
}

}  // namespace

TEST_CASE("default spec matches the acceptance chain") {
  const ChainSpec spec = ChainSpec::default_spec();
  CHECK(spec.parts.size() == 3);
  for (const auto& p : spec.parts) CHECK(p.vertices == 80);
  CHECK(spec.poses == 5);
  CHECK(spec.noise_sigma == 1e-3);
  for (const auto& j : spec.joints) {
    CHECK(max_angle_span(j) * 180.0 / M_PI >= 60.0);
  }
  const SyntheticChain chain = generate_chain(spec);
  CHECK(chain.set.num_shapes() == 5);
  CHECK(chain.set.num_vertices() == 240);
  CHECK(chain.truth.num_parts() == 3);
}

TEST_CASE("spec validation") {
  ChainSpec spec = ChainSpec::default_spec();
  spec.parts[1].vertices = 10;
  CHECK_THROWS_AS(generate_chain(spec), InvalidArgument);
  spec = ChainSpec::default_spec();
  spec.joints[0].angles.pop_back();
  CHECK_THROWS_AS(generate_chain(spec), InvalidArgument);
  spec = ChainSpec::default_spec();
  spec.joints.pop_back();
  CHECK_THROWS_AS(generate_chain(spec), InvalidArgument);
  spec = ChainSpec::default_spec();
  spec.poses = 1;
  CHECK_THROWS_AS(generate_chain(spec), TooFewShapes);
}

TEST_CASE("one part: every pose is congruent to the rest shape") {
  ChainSpec spec = ChainSpec::default_spec();
  spec.parts.resize(1);
  spec.joints.clear();
  spec.noise_sigma = 0.0;
  const SyntheticChain chain = generate_chain(spec);
  for (std::size_t i = 0; i < chain.set.num_shapes(); ++i) {
    CHECK(oracle::kabsch(chain.truth.rest, chain.set.shape(i)).rms <= 1e-12);
  }
}

TEST_CASE("noiseless forward model reproduces the shapes") {
  ChainSpec spec = ChainSpec::default_spec();
  spec.noise_sigma = 0.0;
  for (const SyntheticChain& chain :
       {generate_chain(spec), normalize_chain(generate_chain(spec))}) {
    for (std::size_t i = 0; i < chain.set.num_shapes(); ++i)
      for (std::size_t j = 0; j < chain.set.num_vertices(); ++j) {
        const auto c = static_cast<std::size_t>(chain.truth.labels[j]);
        const Vec3 v = chain.truth.rotations[c][i] * chain.truth.rest[j] +
                       chain.truth.translations[c][i];
        CHECK((v - chain.set.vertex(i, j)).norm() <= 1e-14);
      }
  }
}

TEST_CASE("neighbouring parts stay welded at the hinge") {
  const SyntheticChain chain = generate_chain(ChainSpec::default_spec());
  // hinge between part c-1 and c sits at x = c (unit-length parts)
  for (std::size_t c = 1; c < 3; ++c) {
    const Vec3 hinge(static_cast<double>(c), 0, 0);
    for (std::size_t i = 0; i < chain.set.num_shapes(); ++i) {
      const Vec3 a = chain.truth.rotations[c - 1][i] * hinge + chain.truth.translations[c - 1][i];
      const Vec3 b = chain.truth.rotations[c][i] * hinge + chain.truth.translations[c][i];
      CHECK((a - b).norm() <= 1e-14);
    }
  }
}

TEST_CASE("noise level: residual RMS near sigma * sqrt(3)") {
  ChainSpec spec = ChainSpec::default_spec();
  spec.noise_sigma = 0.002;
  const SyntheticChain chain = generate_chain(spec);
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < chain.set.num_shapes(); ++i)
    for (std::size_t j = 0; j < chain.set.num_vertices(); ++j) {
      const auto c = static_cast<std::size_t>(chain.truth.labels[j]);
      const Vec3 clean = chain.truth.rotations[c][i] * chain.truth.rest[j] +
                         chain.truth.translations[c][i];
      sq += (chain.set.vertex(i, j) - clean).squaredNorm();
      ++n;
    }
  const double rms = std::sqrt(sq / static_cast<double>(n));
  CHECK(std::abs(rms - 0.002 * std::sqrt(3.0)) <= 0.1 * 0.002 * std::sqrt(3.0));
}

TEST_CASE("generation is deterministic per seed") {
  const ChainSpec spec = ChainSpec::default_spec();
  const SyntheticChain a = generate_chain(spec), b = generate_chain(spec);
  ChainSpec other = spec;
  other.rng_seed = spec.rng_seed + 1;
  const SyntheticChain c = generate_chain(other);
  CHECK(a.set.shape(3) == b.set.shape(3));
  CHECK(a.set.shape(3) != c.set.shape(3));
}

TEST_CASE("dense oracle: zero loading and a singular covariance") {
  Eigen::VectorXd h(6), b(6), phi(6);
  h << 1, 2, 3, 4, 5, 6;
  b.setZero();
  phi.setConstant(0.5);
  const auto r = oracle::dense_gaussian(h, b, Eigen::MatrixXd::Zero(6, 3), phi);
  CHECK(r.posterior_mean.isZero(0.0));
  CHECK(r.posterior_covariance.isIdentity(1e-15));
  CHECK(r.log_density == doctest::Approx(-0.5 * (6 * std::log(2 * M_PI * 0.5) + h.squaredNorm() / 0.5)));
  CHECK_THROWS_AS(oracle::dense_gaussian(h, b, Eigen::MatrixXd::Zero(6, 3), Eigen::VectorXd::Zero(6)),
                  SingularCovariance);
}

TEST_CASE("kabsch: exact rotation") {
  std::mt19937_64 rng(5);
  std::vector<Vec3> p, q;
  const Mat3 r = oracle::random_rotation(rng);
  const Vec3 t(0.3, -2, 1);
  for (int k = 0; k < 20; ++k) {
    p.push_back(testing::random_vec(rng));
    q.push_back(r * p.back() + t);
  }
  const auto fit = oracle::kabsch(p, q);
  CHECK((fit.rotation - r).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((fit.translation - t).norm() <= 1e-12);
  CHECK(fit.rms <= 1e-12);
}

TEST_CASE("kabsch: a mirror image cannot be matched by a rotation") {
  std::mt19937_64 rng(6);
  std::vector<Vec3> p, q;
  for (int k = 0; k < 20; ++k) {
    p.push_back(testing::random_vec(rng));
    q.push_back(Vec3(-p.back().x(), p.back().y(), p.back().z()));
  }
  const auto fit = oracle::kabsch(p, q);
  CHECK(fit.rms > 1e-3);
  CHECK(fit.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(orthogonality_error(fit.rotation) <= 1e-12);
}

TEST_CASE("kabsch: noisy copy gives RMS near the noise level") {
  std::mt19937_64 rng(7);
  const double sigma = 0.01;
  std::vector<Vec3> p, q;
  const Mat3 r = oracle::random_rotation(rng);
  for (int k = 0; k < 2000; ++k) {
    p.push_back(testing::random_vec(rng));
    q.push_back(r * p.back() + sigma * Vec3(standard_normal(rng), standard_normal(rng),
                                            standard_normal(rng)));
  }
  const auto fit = oracle::kabsch(p, q);
  // six fitted parameters barely reduce the residual for 2000 points
  CHECK(std::abs(fit.rms - sigma * std::sqrt(3.0)) <= 0.05 * sigma * std::sqrt(3.0));
  CHECK(rotation_angle(fit.rotation, r) <= 1e-3);
}

TEST_CASE("kabsch: degenerate inputs") {
  const std::vector<Vec3> two{{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(oracle::kabsch(two, two), DegenerateConfiguration);
  const std::vector<Vec3> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {-1, -1, -1}};
  CHECK_THROWS_AS(oracle::kabsch(line, line), DegenerateConfiguration);
}

TEST_CASE("normalized chain: truth follows the data into the unit box") {
  const SyntheticChain raw = generate_chain(ChainSpec::default_spec());
  const SyntheticChain n = normalize_chain(raw);
  const double s = n.set.normalization().scale;
  for (std::size_t i = 0; i < n.set.num_shapes(); ++i)
    for (std::size_t j = 0; j < n.set.num_vertices(); j += 7) {
      const auto c = static_cast<std::size_t>(n.truth.labels[j]);
      const Vec3 v = n.truth.rotations[c][i] * n.truth.rest[j] + n.truth.translations[c][i] +
                     n.truth.noise[i][j];
      CHECK((v - n.set.vertex(i, j)).norm() <= 1e-14);
      CHECK((n.truth.noise[i][j] - s * raw.truth.noise[i][j]).norm() <= 1e-18);
    }
}
