#include "posemfa/interpolation.hpp"

#include "posemfa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>

namespace posemfa {

const char* to_string(JointPointMode mode) {
  return mode == JointPointMode::VertexMean ? "vertex-mean" : "centroid-mean";
}

JointPointMode parse_joint_mode(const std::string& text) {
  if (text == "vertex-mean") return JointPointMode::VertexMean;
  if (text == "centroid-mean") return JointPointMode::CentroidMean;
  throw InvalidArgument("unknown joint-point mode '" + text +
                        "' (expected vertex-mean or centroid-mean)");
}

PartGraph::PartGraph(std::size_t num_parts, std::vector<PartEdge> edges)
    : edges_(std::move(edges)), adjacency_(num_parts) {
  for (const auto& e : edges_) {
    adjacency_.at(static_cast<std::size_t>(e.p)).push_back(e.c);
    adjacency_.at(static_cast<std::size_t>(e.c)).push_back(e.p);
  }
  for (auto& a : adjacency_) std::sort(a.begin(), a.end());
}

const PartEdge* PartGraph::find_edge(int a, int b) const {
  const int p = std::min(a, b), c = std::max(a, b);
  for (const auto& e : edges_) {
    if (e.p == p && e.c == c) return &e;
  }
  return nullptr;
}

std::vector<int> PartGraph::isolated_parts() const {
  std::vector<int> out;
  for (std::size_t k = 0; k < adjacency_.size(); ++k) {
    if (adjacency_[k].empty()) out.push_back(static_cast<int>(k));
  }
  return out;
}

std::vector<std::vector<int>> PartGraph::components() const {
  std::vector<std::vector<int>> out;
  std::vector<char> seen(adjacency_.size(), 0);
  for (std::size_t s = 0; s < adjacency_.size(); ++s) {
    if (seen[s]) continue;
    std::vector<int> comp;
    std::deque<int> queue{static_cast<int>(s)};
    seen[s] = 1;
    while (!queue.empty()) {
      const int c = queue.front();
      queue.pop_front();
      comp.push_back(c);
      for (int k : neighbours(c)) {
        if (!seen[static_cast<std::size_t>(k)]) {
          seen[static_cast<std::size_t>(k)] = 1;
          queue.push_back(k);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

PartGraph build_part_graph(const TrainingSet& set, std::span<const int> labels,
                           const MixtureModel& model, JointPointMode mode) {
  if (labels.size() != set.num_vertices()) {
    throw InvalidArgument("one label per vertex required");
  }
  const std::size_t n_parts = model.num_components();
  const std::size_t n_s = set.num_shapes();
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_parts) {
      throw InvalidArgument("label " + std::to_string(l) + " has no component");
    }
  }

  // (p, c) -> spanning triangles
  std::map<std::pair<int, int>, std::vector<std::size_t>> spans;
  const auto& tris = set.triangles();
  for (std::size_t t = 0; t < tris.size(); ++t) {
    std::set<int> ids;
    for (int v : tris[t]) ids.insert(labels[static_cast<std::size_t>(v)]);
    if (ids.size() < 2) continue;
    for (auto a = ids.begin(); a != ids.end(); ++a) {
      for (auto b = std::next(a); b != ids.end(); ++b) {
        spans[{*a, *b}].push_back(t);
      }
    }
  }

  std::vector<PartEdge> edges;
  for (const auto& [key, tri_ids] : spans) {
    PartEdge e;
    e.p = key.first;
    e.c = key.second;
    e.triangle_count = tri_ids.size();
    e.joint_points.assign(n_s, Vec3::Zero());
    if (mode == JointPointMode::VertexMean) {
      std::set<int> verts;
      for (auto t : tri_ids) verts.insert(tris[t].begin(), tris[t].end());
      for (std::size_t i = 0; i < n_s; ++i) {
        for (int v : verts) e.joint_points[i] += set.vertex(i, static_cast<std::size_t>(v));
        e.joint_points[i] /= static_cast<double>(verts.size());
      }
    } else {
      for (std::size_t i = 0; i < n_s; ++i) {
        for (auto t : tri_ids) {
          for (int v : tris[t]) e.joint_points[i] += set.vertex(i, static_cast<std::size_t>(v));
        }
        e.joint_points[i] /= 3.0 * static_cast<double>(tri_ids.size());
      }
    }

    Eigen::VectorXd stacked(3 * static_cast<Eigen::Index>(n_s));
    for (std::size_t i = 0; i < n_s; ++i) {
      stacked.segment<3>(3 * static_cast<Eigen::Index>(i)) = e.joint_points[i];
    }
    const auto& fp = model.components[static_cast<std::size_t>(e.p)];
    const auto& fc = model.components[static_cast<std::size_t>(e.c)];
    e.latent_p = fp.scale.cwiseProduct(posterior_moments(stacked, fp).mean);
    e.latent_c = fc.scale.cwiseProduct(posterior_moments(stacked, fc).mean);
    edges.push_back(std::move(e));
  }
  return PartGraph(n_parts, std::move(edges));
}

PartGraph build_part_graph(const ShapeModel& model, JointPointMode mode) {
  return build_part_graph(model.training, model.latent.labels, model.mixture,
                          mode);
}

Mat3 slerp(const Mat3& a, const Mat3& b, double t) {
  Eigen::Quaterniond qa(a), qb(b);
  qa.normalize();
  qb.normalize();
  double dot = qa.coeffs().dot(qb.coeffs());
  if (dot < 0.0) {
    qb.coeffs() = -qb.coeffs();
    dot = -dot;
  }
  const double theta = std::acos(std::min(dot, 1.0));
  Eigen::Vector4d q;
  if (theta < 1e-6) {
    q = (1.0 - t) * qa.coeffs() + t * qb.coeffs();
  } else {
    const double s = std::sin(theta);
    q = (std::sin((1.0 - t) * theta) / s) * qa.coeffs() +
        (std::sin(t * theta) / s) * qb.coeffs();
  }
  Eigen::Quaterniond out;
  out.coeffs() = q.normalized();
  return out.toRotationMatrix();
}

Interpolation interpolate_pose(const ShapeModel& model, const PartGraph& graph,
                               std::size_t source, std::size_t target,
                               double t) {
  const auto& mix = model.mixture;
  const auto& set = model.training;
  const std::size_t n_s = set.num_shapes();
  if (source >= n_s || target >= n_s) {
    throw IndexOutOfRange("shape indices (" + std::to_string(source) + ", " +
                          std::to_string(target) + ") outside [0, " +
                          std::to_string(n_s) + ")");
  }
  if (!(t >= 0.0 && t <= 1.0)) {
    throw InvalidArgument("interpolation parameter must lie in [0, 1]");
  }
  const std::size_t n_parts = mix.num_components();
  if (graph.num_parts() != n_parts) {
    throw InvalidArgument("part graph does not match the model");
  }

  PoseBlend blend;
  blend.source = source;
  blend.target = target;
  blend.t = t;
  blend.rotations.assign(n_parts, Mat3::Identity());
  blend.translations.assign(n_parts, Vec3::Zero());
  blend.parent.assign(n_parts, -1);
  blend.joint_residuals.assign(n_parts, std::numeric_limits<double>::quiet_NaN());

  auto angle_of = [&](int k) {
    const auto& fa = mix.components[static_cast<std::size_t>(k)];
    return rotation_angle(fa.rotations[source], fa.rotations[target]);
  };

  for (const auto& comp : graph.components()) {
    int root = comp.front();
    double best = angle_of(root);
    for (int k : comp) {
      const double a = angle_of(k);
      if (a < best) {
        best = a;
        root = k;
      }
    }
    blend.roots.push_back(root);
    blend.parent[static_cast<std::size_t>(root)] = root;

    std::deque<int> queue{root};
    while (!queue.empty()) {
      const int c = queue.front();
      queue.pop_front();
      blend.order.push_back(c);
      const auto uc = static_cast<std::size_t>(c);
      const auto& fc = mix.components[uc];
      blend.rotations[uc] = slerp(fc.rotations[source], fc.rotations[target], t);

      const int p = blend.parent[uc];
      if (p == c) {
        blend.translations[uc] =
            (1.0 - t) * fc.mean_of(source) + t * fc.mean_of(target);
      } else {
        const auto up = static_cast<std::size_t>(p);
        const PartEdge* e = graph.find_edge(p, c);
        const Vec3 contact =
            blend.rotations[up] * e->latent_of(p) + blend.translations[up];
        blend.translations[uc] = contact - blend.rotations[uc] * e->latent_of(c);
        blend.joint_residuals[uc] =
            (contact - (blend.rotations[uc] * e->latent_of(c) +
                        blend.translations[uc])).norm();
      }
      for (int k : graph.neighbours(c)) {
        auto& pk = blend.parent[static_cast<std::size_t>(k)];
        if (pk < 0) {
          pk = c;
          queue.push_back(k);
        }
      }
    }
  }

  const auto eps_s = reconstruction_residuals(set, mix, model.latent, source);
  const auto eps_t = reconstruction_residuals(set, mix, model.latent, target);
  const std::size_t n_v = set.num_vertices();
  Interpolation out;
  out.blend = std::move(blend);
  out.blend.residuals.resize(n_v);
  out.normalized.resize(n_v);
  out.mesh.triangles = set.triangles();
  out.mesh.vertices.resize(n_v);
  for (std::size_t j = 0; j < n_v; ++j) {
    const auto k = static_cast<std::size_t>(model.latent.labels[j]);
    const auto& fa = mix.components[k];
    const Mat3& rt = out.blend.rotations[k];
    const Vec3 eps =
        rt * ((1.0 - t) * fa.rotations[source].transpose() * eps_s[j] +
              t * fa.rotations[target].transpose() * eps_t[j]);
    out.blend.residuals[j] = eps;
    out.normalized[j] =
        rt * model.latent.positions[j] + out.blend.translations[k] + eps;
    out.mesh.vertices[j] = set.normalization().invert(out.normalized[j]);
  }
  return out;
}

}  // namespace posemfa
