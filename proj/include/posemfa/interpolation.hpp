#pragma once

#include "posemfa/hierarchy.hpp"
#include "posemfa/mesh_io.hpp"
#include "posemfa/mfa.hpp"

#include <optional>
#include <string>
#include <vector>

namespace posemfa {

enum class JointPointMode {
  VertexMean,    // mean of the distinct vertices of the spanning triangles
  CentroidMean,  // mean of the spanning triangles' centroids
};

const char* to_string(JointPointMode mode);
JointPointMode parse_joint_mode(const std::string& text);

struct PartEdge {
  int p = 0;  // p < c
  int c = 0;
  std::size_t triangle_count = 0;
  std::vector<Vec3> joint_points;  // J_pc^i, one per shape
  Vec3 latent_p = Vec3::Zero();    // image of J_pc in part p's latent space
  Vec3 latent_c = Vec3::Zero();    // ... and in part c's

  const Vec3& latent_of(int part) const { return part == p ? latent_p : latent_c; }
};

class PartGraph {
 public:
  PartGraph() = default;
  PartGraph(std::size_t num_parts, std::vector<PartEdge> edges);

  std::size_t num_parts() const { return adjacency_.size(); }
  const std::vector<PartEdge>& edges() const { return edges_; }
  /// Neighbours of a part in ascending id order.
  const std::vector<int>& neighbours(int part) const {
    return adjacency_.at(static_cast<std::size_t>(part));
  }
  const PartEdge* find_edge(int a, int b) const;
  /// Parts without any neighbour; each is the root of its own component.
  std::vector<int> isolated_parts() const;
  /// Connected components, each listed in ascending part order.
  std::vector<std::vector<int>> components() const;

 private:
  std::vector<PartEdge> edges_;
  std::vector<std::vector<int>> adjacency_;
};

/// Parts p and c are adjacent iff some triangle carries both labels; a
/// triangle with three labels feeds all three pairs.
PartGraph build_part_graph(const TrainingSet& set, std::span<const int> labels,
                           const MixtureModel& model,
                           JointPointMode mode = JointPointMode::VertexMean);

PartGraph build_part_graph(const ShapeModel& model,
                           JointPointMode mode = JointPointMode::VertexMean);

/// Shortest-arc quaternion slerp; normalized lerp below 1e-6 rad.
Mat3 slerp(const Mat3& a, const Mat3& b, double t);

struct PoseBlend {
  std::size_t source = 0;
  std::size_t target = 0;
  double t = 0.0;
  std::vector<Mat3> rotations;     // R_k^t
  std::vector<Vec3> translations;  // b_k^t
  std::vector<int> parent;         // parent[root] == root
  std::vector<int> roots;
  std::vector<int> order;          // BFS visiting order
  std::vector<Vec3> residuals;     // blended per-vertex residual eps^t
  /// Contact mismatch of each tree edge (child part -> value); NaN for roots.
  std::vector<double> joint_residuals;
};

struct Interpolation {
  PoseBlend blend;
  std::vector<Vec3> normalized;  // unit-box coordinates
  Mesh mesh;                     // model units
};

/// Root choice: the part whose relative rotation between the two shapes has
/// the smallest angle (per connected component, ties to the lowest id).
Interpolation interpolate_pose(const ShapeModel& model, const PartGraph& graph,
                               std::size_t source, std::size_t target,
                               double t);

}  // namespace posemfa
