#pragma once

#include "posemfa/mesh_io.hpp"
#include "posemfa/mfa.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace posemfa {

struct HierarchyOptions {
  std::size_t m_init = 1;
  AecmOptions aecm;
  /// Split a part until the mean residual variance drops below this.
  double threshold = 1e-5;
  /// err(m+1) >= err(m) * (1 - plateau) counts as "no longer decreasing".
  double plateau = 1e-3;
  int max_part_components = 8;
  std::uint64_t seed = 1;
};

enum class StopReason { Threshold, Plateau, Cap, TooSmall };

const char* to_string(StopReason reason);

struct PartRefinement {
  int coarse_part = 0;
  std::size_t vertex_count = 0;
  std::vector<std::pair<int, double>> history;  // (m_k, err)
  int chosen_m = 1;
  StopReason reason = StopReason::Threshold;
};

struct RefinementReport {
  int initial_m = 0;
  int final_n = 0;
  std::vector<PartRefinement> parts;
  std::vector<double> coarse_trace;
  std::vector<double> final_trace;
  double final_initial_log_likelihood = 0.0;
};

struct HierarchyResult {
  MixtureModel model;
  RefinementReport report;
};

struct LatentShape {
  std::vector<Vec3> positions;
  std::vector<int> labels;
};

/// I_j = argmax_k gamma_kj under the model's parameters (ties -> lowest k).
std::vector<int> assign_labels(const DataMatrix& data,
                               const MixtureModel& model);

/// Minimum number of vertices a part needs before it is considered for
/// splitting: 3 * (3 n_s + 1).
std::size_t min_split_size(std::size_t n_shapes);

/// Coarse fit, per-part refinement, and a final fit from the refined labels.
HierarchyResult hierarchical_fit(const TrainingSet& set,
                                 const HierarchyOptions& options);

/// v_j^ref = Lambda_{I_j} E(z | h_j, Theta_{I_j}).
LatentShape latent_shape(const DataMatrix& data, const MixtureModel& model);

/// Vertex j of shape i: R_{I_j}^i v_j^ref + b_{I_j}^i.
std::vector<Vec3> reconstruct_vertices(const MixtureModel& model,
                                       const LatentShape& latent,
                                       std::size_t shape);

Mesh reconstruct(const MixtureModel& model, const LatentShape& latent,
                 std::size_t shape, const std::vector<Triangle>& triangles);

/// Per-vertex residual eps_j^i = v_j^i - reconstruction.
std::vector<Vec3> reconstruction_residuals(const TrainingSet& set,
                                           const MixtureModel& model,
                                           const LatentShape& latent,
                                           std::size_t shape);

}  // namespace posemfa

namespace posemfa {

/// Everything needed downstream of training: the normalized training set,
/// the fitted mixture and the latent reference shape.
struct ShapeModel {
  TrainingSet training;
  MixtureModel mixture;
  LatentShape latent;
};

ShapeModel make_shape_model(TrainingSet training, MixtureModel mixture);

}  // namespace posemfa
