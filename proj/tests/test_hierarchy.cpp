#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "posemfa/errors.hpp"
#include "posemfa/hierarchy.hpp"
#include "posemfa/synthetic.hpp"
#include "test_support.hpp"

#include <cmath>
#include <set>

using namespace posemfa;

namespace {

SyntheticChain chain_with(double noise, int parts = 3) {
  ChainSpec spec = ChainSpec::default_spec();
  spec.noise_sigma = noise;
  if (parts == 1) {
    spec.parts.resize(1);
    spec.joints.clear();
  }
  return normalize_chain(generate_chain(spec));
}

HierarchyOptions options_with(std::size_t m_init) {
  HierarchyOptions o;
  o.m_init = m_init;
  o.seed = 1;
  return o;
}

double rms(const std::vector<Vec3>& v) {
  double sq = 0.0;
  for (const auto& x : v) sq += x.squaredNorm();
  return std::sqrt(sq / static_cast<double>(v.size()));
}

}  // namespace

TEST_CASE("assign_labels with a single component") {
  const SyntheticChain chain = chain_with(1e-3);
  const DataMatrix h = assemble_data(chain.set);
  const std::vector<int> zeros(chain.set.num_vertices(), 0);
  const MixtureModel m = aecm_fit_labels(h, zeros);
  CHECK(assign_labels(h, m) == zeros);
}

TEST_CASE("minimum split size") {
  CHECK(min_split_size(5) == 48);
  CHECK(min_split_size(11) == 102);
}

TEST_CASE("rigid single part is not split") {
  const SyntheticChain chain = chain_with(0.0, 1);
  const HierarchyResult r = hierarchical_fit(chain.set, options_with(1));
  CHECK(r.report.final_n == 1);
  REQUIRE(r.report.parts.size() == 1);
  CHECK(r.report.parts[0].chosen_m == 1);
  CHECK(r.report.parts[0].reason == StopReason::Threshold);
}

TEST_CASE("three-part chain from two coarse components") {
  const SyntheticChain chain = chain_with(1e-3);
  const HierarchyResult r = hierarchical_fit(chain.set, options_with(2));
  const MixtureModel& m = r.model;
  CHECK(r.report.initial_m == 2);
  CHECK(r.report.final_n == 3);
  REQUIRE(m.num_components() == 3);
  CHECK(testing::label_agreement(chain.truth.labels, m.labels) >= 0.99);

  // Every vertex has exactly one label in [0, N) and every label is used.
  std::set<int> used(m.labels.begin(), m.labels.end());
  CHECK(used.size() == 3);
  CHECK(*used.begin() == 0);
  CHECK(*used.rbegin() == 2);

  const auto map = testing::majority_map(chain.truth.labels, m.labels);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto c = static_cast<std::size_t>(map[k]);
    const auto& fa = m.components[k];
    for (std::size_t i = 0; i < chain.set.num_shapes(); ++i) {
      const Mat3 found = fa.rotations[i] * fa.rotations[0].transpose();
      const Mat3 truth = chain.truth.rotations[c][i] * chain.truth.rotations[c][0].transpose();
      CHECK(rotation_angle(found, truth) <= 0.01);
    }
  }
}

TEST_CASE("refinement report is consistent") {
  const SyntheticChain chain = chain_with(1e-3);
  const HierarchyResult r = hierarchical_fit(chain.set, options_with(1));
  int total = 0;
  for (const auto& part : r.report.parts) {
    REQUIRE_FALSE(part.history.empty());
    for (const auto& [mk, err] : part.history) CHECK(err >= 0.0);
    // err over the accepted steps never increases
    for (std::size_t s = 1; s < part.history.size(); ++s) {
      if (part.history[s].first > part.chosen_m) break;
      CHECK(part.history[s].second <= part.history[s - 1].second);
    }
    total += part.chosen_m;
  }
  CHECK(total == r.report.final_n);
  CHECK(r.report.final_trace == r.model.log_likelihood_trace);
  CHECK(r.model.log_likelihood_trace.back() >= r.report.final_initial_log_likelihood);
}

TEST_CASE("noiseless chain: residual criterion, latent congruence, reconstruction") {
  const SyntheticChain chain = chain_with(0.0);
  const HierarchyResult r = hierarchical_fit(chain.set, options_with(1));
  REQUIRE(r.report.final_n == 3);
  const std::size_t n_s = chain.set.num_shapes();
  for (const auto& fa : r.model.components) {
    CHECK(fa.noise_trace() / (3.0 * static_cast<double>(n_s)) < 1e-6);
  }

  const ShapeModel model = make_shape_model(chain.set, r.model);
  REQUIRE(model.latent.labels == r.model.labels);
  for (const auto& p : model.latent.positions) CHECK(p.allFinite());

  // Each part's latent cloud is a rigid copy of the generating rest part.
  for (int k = 0; k < 3; ++k) {
    std::vector<Vec3> found, truth;
    for (std::size_t j = 0; j < model.latent.labels.size(); ++j) {
      if (model.latent.labels[j] != k) continue;
      found.push_back(model.latent.positions[j]);
      truth.push_back(chain.truth.rest[j]);
    }
    CHECK(oracle::kabsch(found, truth).rms <= 1e-5);
  }

  for (std::size_t i = 0; i < n_s; ++i) {
    const auto residual = reconstruction_residuals(chain.set, model.mixture, model.latent, i);
    CHECK(rms(residual) <= 1e-5);
  }
}

TEST_CASE("reconstruction plus residual gives back the input exactly") {
  const SyntheticChain chain = chain_with(2e-3);
  const HierarchyResult r = hierarchical_fit(chain.set, options_with(3));
  const ShapeModel model = make_shape_model(chain.set, r.model);
  for (std::size_t i = 0; i < chain.set.num_shapes(); ++i) {
    const Mesh rec = reconstruct(model.mixture, model.latent, i, chain.set.triangles());
    const auto eps = reconstruction_residuals(chain.set, model.mixture, model.latent, i);
    CHECK(rec.triangles == chain.set.triangles());
    for (std::size_t j = 0; j < eps.size(); ++j) {
      CHECK((rec.vertices[j] + eps[j] - chain.set.vertex(i, j)).cwiseAbs().maxCoeff() <= 1e-15);
    }
  }
  CHECK_THROWS_AS(reconstruct_vertices(model.mixture, model.latent, 99), IndexOutOfRange);
}

TEST_CASE("zero loadings: latent points vanish, reconstruction is the mean") {
  std::mt19937_64 rng(3);
  const std::size_t n_s = 3;
  std::vector<std::vector<Vec3>> shapes(n_s);
  for (auto& s : shapes)
    for (int j = 0; j < 4; ++j) s.push_back(testing::random_vec(rng));
  const TrainingSet set(shapes, {});

  MixtureModel m;
  FactorAnalyzer fa;
  fa.rotations.assign(n_s, Mat3::Identity());
  fa.noise.assign(n_s, 0.1);
  fa.mean = testing::random_vector(rng, 3 * n_s);
  m.components = {fa};
  m.labels.assign(4, 0);
  const LatentShape latent = latent_shape(assemble_data(set), m);
  for (const auto& p : latent.positions) CHECK(p.isZero(0.0));
  for (std::size_t i = 0; i < n_s; ++i)
    for (const auto& v : reconstruct_vertices(m, latent, i)) CHECK(v == fa.mean_of(i));
}

TEST_CASE("a vertex at the component mean has latent position zero") {
  std::mt19937_64 rng(4);
  const FactorAnalyzer fa = testing::random_component(rng, 2);
  MixtureModel m;
  m.components = {fa};
  m.labels = {0};
  const DataMatrix h = fa.mean;
  const LatentShape latent = latent_shape(h, m);
  CHECK(latent.positions[0].isZero(0.0));
}

TEST_CASE("bad options are rejected") {
  const SyntheticChain chain = chain_with(1e-3);
  HierarchyOptions o;
  o.m_init = 0;
  CHECK_THROWS_AS(hierarchical_fit(chain.set, o), InvalidArgument);
  o.m_init = 1;
  o.threshold = 0.0;
  CHECK_THROWS_AS(hierarchical_fit(chain.set, o), InvalidArgument);
}
