#include "posemfa/hierarchy.hpp"

#include "posemfa/errors.hpp"

#include <algorithm>

namespace posemfa {
namespace {

// splitmix64: decorrelates the seeds handed to the per-part sub-fits.
std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double mean_noise(const MixtureModel& model, std::size_t n_s) {
  double acc = 0.0;
  for (const auto& fa : model.components) acc += fa.noise_trace();
  return acc / (3.0 * static_cast<double>(n_s) *
                static_cast<double>(model.num_components()));
}

void check_shape_index(const MixtureModel& model, std::size_t shape) {
  if (model.components.empty() ||
      shape >= model.components.front().num_shapes()) {
    throw IndexOutOfRange("shape index " + std::to_string(shape) +
                          " out of range");
  }
}

}  // namespace

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Threshold: return "threshold";
    case StopReason::Plateau: return "plateau";
    case StopReason::Cap: return "cap";
    case StopReason::TooSmall: return "too_small";
  }
  return "unknown";
}

std::vector<int> assign_labels(const DataMatrix& data,
                               const MixtureModel& model) {
  return argmax_labels(responsibilities(data, model.components));
}

std::size_t min_split_size(std::size_t n_shapes) {
  return 3 * (3 * n_shapes + 1);
}

HierarchyResult hierarchical_fit(const TrainingSet& set,
                                 const HierarchyOptions& options) {
  if (options.m_init < 1) throw InvalidArgument("m_init must be >= 1");
  if (!(options.threshold > 0.0)) {
    throw InvalidArgument("refinement threshold must be positive");
  }
  const DataMatrix data = assemble_data(set);
  const std::size_t n_s = set.num_shapes();
  const std::size_t n_v = set.num_vertices();

  HierarchyResult result;
  RefinementReport& report = result.report;
  report.initial_m = static_cast<int>(options.m_init);

  const MixtureModel coarse =
      aecm_fit_kmeans(data, options.m_init, options.seed, options.aecm);
  report.coarse_trace = coarse.log_likelihood_trace;

  std::vector<std::vector<int>> members(coarse.num_components());
  for (std::size_t j = 0; j < n_v; ++j) {
    members[static_cast<std::size_t>(coarse.labels[j])].push_back(
        static_cast<int>(j));
  }

  std::vector<int> refined(n_v, 0);
  int next_label = 0;
  for (std::size_t k = 0; k < members.size(); ++k) {
    const auto& ids = members[k];
    if (ids.empty()) continue;

    PartRefinement part;
    part.coarse_part = static_cast<int>(k);
    part.vertex_count = ids.size();

    if (ids.size() < min_split_size(n_s)) {
      const auto& fa = coarse.components[k];
      part.history.emplace_back(1, fa.noise_trace() / (3.0 * n_s));
      part.chosen_m = 1;
      part.reason = StopReason::TooSmall;
      for (int j : ids) refined[static_cast<std::size_t>(j)] = next_label;
      ++next_label;
      report.parts.push_back(std::move(part));
      continue;
    }

    const DataMatrix sub = assemble_data(set.subset(ids));
    std::vector<int> best_labels(ids.size(), 0);
    std::vector<int> prev_labels;
    double prev_err = 0.0;
    for (int m = 1; m <= options.max_part_components; ++m) {
      const std::uint64_t seed =
          mix_seed(options.seed ^ mix_seed(k * 64 + static_cast<std::uint64_t>(m)));
      const MixtureModel fit =
          aecm_fit_kmeans(sub, static_cast<std::size_t>(m), seed, options.aecm);
      const double err = mean_noise(fit, n_s);
      part.history.emplace_back(static_cast<int>(fit.num_components()), err);

      if (m > 1 && err >= prev_err * (1.0 - options.plateau)) {
        part.chosen_m = m - 1;
        part.reason = StopReason::Plateau;
        best_labels = prev_labels;
        break;
      }
      best_labels = fit.labels;
      part.chosen_m = static_cast<int>(fit.num_components());
      if (err < options.threshold) {
        part.reason = StopReason::Threshold;
        break;
      }
      if (m == options.max_part_components) {
        part.reason = StopReason::Cap;
        break;
      }
      prev_err = err;
      prev_labels = fit.labels;
    }

    // Sub-fits may have dropped components; keep ids compact.
    std::vector<int> remap;
    for (std::size_t a = 0; a < ids.size(); ++a) {
      const auto l = static_cast<std::size_t>(best_labels[a]);
      if (remap.size() <= l) remap.resize(l + 1, -1);
      if (remap[l] < 0) remap[l] = next_label++;
      refined[static_cast<std::size_t>(ids[a])] = remap[l];
    }
    report.parts.push_back(std::move(part));
  }

  result.model = aecm_fit_labels(data, refined, options.aecm);
  report.final_trace = result.model.log_likelihood_trace;
  report.final_initial_log_likelihood = result.model.initial_log_likelihood;
  report.final_n = static_cast<int>(result.model.num_components());
  return result;
}

LatentShape latent_shape(const DataMatrix& data, const MixtureModel& model) {
  if (model.labels.size() != static_cast<std::size_t>(data.cols())) {
    throw InvalidArgument("model labels do not cover the data");
  }
  LatentShape out;
  out.labels = model.labels;
  out.positions.resize(model.labels.size());
  for (std::size_t j = 0; j < model.labels.size(); ++j) {
    const auto& fa = model.components.at(static_cast<std::size_t>(model.labels[j]));
    const Vec3 z = posterior_moments(data.col(static_cast<Eigen::Index>(j)), fa).mean;
    out.positions[j] = fa.scale.cwiseProduct(z);
  }
  return out;
}

std::vector<Vec3> reconstruct_vertices(const MixtureModel& model,
                                       const LatentShape& latent,
                                       std::size_t shape) {
  check_shape_index(model, shape);
  std::vector<Vec3> out(latent.positions.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto& fa =
        model.components.at(static_cast<std::size_t>(latent.labels[j]));
    out[j] = fa.rotations[shape] * latent.positions[j] + fa.mean_of(shape);
  }
  return out;
}

Mesh reconstruct(const MixtureModel& model, const LatentShape& latent,
                 std::size_t shape, const std::vector<Triangle>& triangles) {
  return {reconstruct_vertices(model, latent, shape), triangles};
}

std::vector<Vec3> reconstruction_residuals(const TrainingSet& set,
                                           const MixtureModel& model,
                                           const LatentShape& latent,
                                           std::size_t shape) {
  auto out = reconstruct_vertices(model, latent, shape);
  const auto& actual = set.shape(shape);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = actual[j] - out[j];
  return out;
}

}  // namespace posemfa

namespace posemfa {

ShapeModel make_shape_model(TrainingSet training, MixtureModel mixture) {
  LatentShape latent = latent_shape(assemble_data(training), mixture);
  return {std::move(training), std::move(mixture), std::move(latent)};
}

}  // namespace posemfa
