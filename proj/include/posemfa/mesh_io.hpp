#pragma once

#include "posemfa/geometry.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace posemfa {

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
};

/// Uniform scale + translation taking model units into the unit box:
/// normalized = scale * (x - origin).
struct UnitBoxTransform {
  double scale = 1.0;
  Vec3 origin = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return scale * (x - origin); }
  Vec3 invert(const Vec3& y) const { return y / scale + origin; }
};

/// n_s corresponded shapes sharing one connectivity.
class TrainingSet {
 public:
  TrainingSet() = default;
  TrainingSet(std::vector<std::vector<Vec3>> shapes,
              std::vector<Triangle> triangles,
              UnitBoxTransform normalization = {});

  std::size_t num_shapes() const { return shapes_.size(); }
  std::size_t num_vertices() const {
    return shapes_.empty() ? 0 : shapes_.front().size();
  }

  const std::vector<Vec3>& shape(std::size_t i) const { return shapes_.at(i); }
  const Vec3& vertex(std::size_t i, std::size_t j) const {
    return shapes_[i][j];
  }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const UnitBoxTransform& normalization() const { return normalization_; }

  Mesh mesh(std::size_t i) const { return {shape(i), triangles_}; }

  /// Restricts every shape to the listed vertices. Triangles are dropped.
  TrainingSet subset(std::span<const int> vertex_ids) const;

 private:
  std::vector<std::vector<Vec3>> shapes_;
  std::vector<Triangle> triangles_;
  UnitBoxTransform normalization_;
};

/// Column j holds h_j: vertex j of every shape, stacked in shape order.
using DataMatrix = Eigen::MatrixXd;

Mesh read_obj(const std::filesystem::path& path);
void write_obj(const Mesh& mesh, const std::filesystem::path& path);

/// Builds a validated set from in-memory meshes (no normalization).
TrainingSet make_training_set(const std::vector<Mesh>& meshes);

/// Reads and validates a corresponded sequence; does not normalize.
TrainingSet load_sequence(std::span<const std::filesystem::path> paths);

/// Joint bounding box of all shapes mapped into [0,1]^3 with one isotropic
/// scale. The returned set records the composed transform.
TrainingSet normalize_unit_box(const TrainingSet& set);

DataMatrix assemble_data(const TrainingSet& set);

/// Inverse of assemble_data for one column.
std::vector<Vec3> unstack(const Eigen::Ref<const Eigen::VectorXd>& h);

/// Triangles whose vertices carry at least two distinct labels.
std::vector<std::size_t> boundary_triangles(const std::vector<Triangle>& tris,
                                            std::span<const int> labels);

/// Writes an OBJ with per-vertex palette colours (boundary triangles grouped
/// under "g boundary") and a `.labels` sidecar next to it.
void write_labeled_mesh(const Mesh& mesh, std::span<const int> labels,
                        const std::filesystem::path& path);

std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(std::span<const int> labels,
                  const std::filesystem::path& path);

/// Sidecar path for an OBJ: same stem, ".labels" extension.
std::filesystem::path labels_path_for(const std::filesystem::path& obj_path);

/// RGB in [0,1] for a part id; cycles through 23 entries.
Vec3 palette_color(int label);

}  // namespace posemfa
