#include "posemfa/mesh_io.hpp"

#include "posemfa/errors.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <fstream>
#include <set>
#include <sstream>

namespace posemfa {
namespace fs = std::filesystem;

namespace {

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

void validate_triangles(const std::vector<Triangle>& tris, std::size_t n_v,
                        const std::string& context) {
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& f = tris[t];
    for (int idx : f) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= n_v) {
        throw ParseError(context + "triangle " + std::to_string(t) +
                         " references vertex " + std::to_string(idx) +
                         " outside [0, " + std::to_string(n_v) + ")");
      }
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
      throw ParseError(context + "triangle " + std::to_string(t) +
                       " is degenerate");
    }
  }
}

// "12", "12/3", "12//4", "12/3/4" -> 0-based vertex index.
int parse_face_index(std::string_view token, std::size_t n_v,
                     const std::string& context) {
  const auto slash = token.find('/');
  long idx = 0;
  if (!detail::parse_long(token.substr(0, slash), idx) || idx == 0) {
    throw ParseError(context + "bad face index '" + std::string(token) + "'");
  }
  if (idx < 0) idx += static_cast<long>(n_v) + 1;
  return static_cast<int>(idx - 1);
}

}  // namespace

TrainingSet::TrainingSet(std::vector<std::vector<Vec3>> shapes,
                         std::vector<Triangle> triangles,
                         UnitBoxTransform normalization)
    : shapes_(std::move(shapes)),
      triangles_(std::move(triangles)),
      normalization_(normalization) {
  if (shapes_.size() < 2) {
    throw TooFewShapes("need at least 2 shapes, got " +
                       std::to_string(shapes_.size()));
  }
  const std::size_t n_v = shapes_.front().size();
  for (std::size_t i = 1; i < shapes_.size(); ++i) {
    if (shapes_[i].size() != n_v) {
      throw CorrespondenceError(
          "shape " + std::to_string(i) + " has " +
          std::to_string(shapes_[i].size()) + " vertices, shape 0 has " +
          std::to_string(n_v));
    }
  }
  validate_triangles(triangles_, n_v, "");
}

TrainingSet TrainingSet::subset(std::span<const int> vertex_ids) const {
  std::vector<std::vector<Vec3>> shapes(shapes_.size());
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    shapes[i].reserve(vertex_ids.size());
    for (int j : vertex_ids) shapes[i].push_back(shapes_[i].at(j));
  }
  return TrainingSet(std::move(shapes), {}, normalization_);
}

Mesh read_obj(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  Mesh mesh;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = detail::trim(line);
    if (sv.empty() || sv.front() == '#') continue;

    std::istringstream ss{std::string(sv)};
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      std::array<double, 3> xyz{};
      for (double& c : xyz) {
        std::string tok;
        if (!(ss >> tok) || !detail::parse_double(tok, c)) {
          throw ParseError(where(path, line_no) + "malformed vertex");
        }
      }
      mesh.vertices.emplace_back(xyz[0], xyz[1], xyz[2]);
    } else if (tag == "f") {
      std::vector<std::string> toks;
      for (std::string tok; ss >> tok;) toks.push_back(tok);
      if (toks.size() != 3) {
        throw ParseError(where(path, line_no) +
                         "only triangular faces are supported");
      }
      Triangle tri{};
      for (int k = 0; k < 3; ++k) {
        tri[k] = parse_face_index(toks[k], mesh.vertices.size(),
                                  where(path, line_no));
      }
      mesh.triangles.push_back(tri);
    }
    // vt, vn, g, o, s, usemtl, mtllib: ignored
  }
  validate_triangles(mesh.triangles, mesh.vertices.size(),
                     path.string() + ": ");
  return mesh;
}

void write_obj(const Mesh& mesh, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const Vec3& v : mesh.vertices) {
    out << "v " << detail::format_double(v.x()) << ' '
        << detail::format_double(v.y()) << ' ' << detail::format_double(v.z())
        << '\n';
  }
  for (const Triangle& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

TrainingSet make_training_set(const std::vector<Mesh>& meshes) {
  if (meshes.size() < 2) {
    throw TooFewShapes("need at least 2 shapes, got " +
                       std::to_string(meshes.size()));
  }
  const Mesh& first = meshes.front();
  std::vector<std::vector<Vec3>> shapes;
  shapes.reserve(meshes.size());
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    if (meshes[i].vertices.size() != first.vertices.size()) {
      throw CorrespondenceError(
          "shape " + std::to_string(i) + " has " +
          std::to_string(meshes[i].vertices.size()) +
          " vertices, shape 0 has " + std::to_string(first.vertices.size()));
    }
    if (meshes[i].triangles != first.triangles) {
      throw CorrespondenceError("shape " + std::to_string(i) +
                                " does not share the connectivity of shape 0");
    }
    shapes.push_back(meshes[i].vertices);
  }
  return TrainingSet(std::move(shapes), first.triangles);
}

TrainingSet load_sequence(std::span<const fs::path> paths) {
  if (paths.size() < 2) {
    throw TooFewShapes("need at least 2 mesh files, got " +
                       std::to_string(paths.size()));
  }
  std::vector<Mesh> meshes;
  meshes.reserve(paths.size());
  for (const auto& p : paths) {
    meshes.push_back(read_obj(p));
    const Mesh& first = meshes.front();
    const Mesh& cur = meshes.back();
    if (cur.vertices.size() != first.vertices.size()) {
      throw CorrespondenceError(
          p.string() + ": " + std::to_string(cur.vertices.size()) +
          " vertices, " + paths.front().string() + " has " +
          std::to_string(first.vertices.size()));
    }
    if (cur.triangles != first.triangles) {
      throw CorrespondenceError(p.string() + ": connectivity differs from " +
                                paths.front().string());
    }
  }
  return make_training_set(meshes);
}

TrainingSet normalize_unit_box(const TrainingSet& set) {
  if (set.num_shapes() == 0 || set.num_vertices() == 0) {
    throw DegenerateExtent("empty training set");
  }
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::size_t i = 0; i < set.num_shapes(); ++i) {
    for (const Vec3& v : set.shape(i)) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  }
  const double extent = (hi - lo).maxCoeff();
  if (!(extent > 0.0) || !std::isfinite(extent)) {
    throw DegenerateExtent("bounding box has zero extent in all axes");
  }
  const UnitBoxTransform step{1.0 / extent, lo};

  std::vector<std::vector<Vec3>> shapes(set.num_shapes());
  for (std::size_t i = 0; i < set.num_shapes(); ++i) {
    shapes[i].reserve(set.num_vertices());
    for (const Vec3& v : set.shape(i)) {
      // Clamp round-off so the [0,1] invariant holds exactly.
      shapes[i].push_back(step.apply(v).cwiseMax(0.0).cwiseMin(1.0));
    }
  }
  // Compose with any earlier normalization: x -> s2 * (s1 * (x - o1) - o2).
  const UnitBoxTransform& prev = set.normalization();
  UnitBoxTransform composed{prev.scale * step.scale,
                            prev.origin + step.origin / prev.scale};
  return TrainingSet(std::move(shapes), set.triangles(), composed);
}

DataMatrix assemble_data(const TrainingSet& set) {
  const auto n_s = set.num_shapes();
  const auto n_v = set.num_vertices();
  DataMatrix data(3 * n_s, n_v);
  for (std::size_t i = 0; i < n_s; ++i) {
    const auto& shape = set.shape(i);
    for (std::size_t j = 0; j < n_v; ++j) {
      data.block<3, 1>(3 * i, j) = shape[j];
    }
  }
  return data;
}

std::vector<Vec3> unstack(const Eigen::Ref<const Eigen::VectorXd>& h) {
  if (h.size() % 3 != 0) {
    throw InvalidArgument("stacked vector length is not a multiple of 3");
  }
  std::vector<Vec3> out(h.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = h.segment<3>(3 * i);
  return out;
}

std::vector<std::size_t> boundary_triangles(const std::vector<Triangle>& tris,
                                            std::span<const int> labels) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& f = tris[t];
    const int a = labels[f[0]], b = labels[f[1]], c = labels[f[2]];
    if (a != b || b != c) out.push_back(t);
  }
  return out;
}

fs::path labels_path_for(const fs::path& obj_path) {
  fs::path p = obj_path;
  p.replace_extension(".labels");
  return p;
}

Vec3 palette_color(int label) {
  // 23 visually distinct colours.
  static constexpr std::array<std::array<double, 3>, 23> kPalette{{
      {0.902, 0.098, 0.294}, {0.235, 0.706, 0.294}, {1.000, 0.882, 0.098},
      {0.263, 0.388, 0.847}, {0.961, 0.510, 0.192}, {0.569, 0.118, 0.706},
      {0.275, 0.941, 0.941}, {0.941, 0.196, 0.902}, {0.737, 0.965, 0.047},
      {0.980, 0.745, 0.745}, {0.000, 0.502, 0.502}, {0.902, 0.745, 1.000},
      {0.604, 0.388, 0.141}, {1.000, 0.980, 0.784}, {0.502, 0.000, 0.000},
      {0.667, 1.000, 0.765}, {0.502, 0.502, 0.000}, {1.000, 0.847, 0.694},
      {0.000, 0.000, 0.459}, {0.502, 0.502, 0.502}, {0.000, 0.000, 0.000},
      {0.431, 0.824, 0.980}, {0.800, 0.400, 0.600},
  }};
  const auto& c = kPalette[static_cast<std::size_t>(label < 0 ? -label : label) %
                           kPalette.size()];
  return {c[0], c[1], c[2]};
}

void write_labels(std::span<const int> labels, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (int l : labels) out << l << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<int> read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto sv = detail::trim(line);
    if (sv.empty()) continue;
    long v = 0;
    if (!detail::parse_long(sv, v) || v < 0) {
      throw ParseError(where(path, line_no) + "bad label '" +
                       std::string(sv) + "'");
    }
    labels.push_back(static_cast<int>(v));
  }
  return labels;
}

void write_labeled_mesh(const Mesh& mesh, std::span<const int> labels,
                        const fs::path& path) {
  if (labels.size() != mesh.vertices.size()) {
    throw InvalidArgument("expected " + std::to_string(mesh.vertices.size()) +
                          " labels, got " + std::to_string(labels.size()));
  }
  const auto boundary = boundary_triangles(mesh.triangles, labels);
  std::vector<char> is_boundary(mesh.triangles.size(), 0);
  for (auto t : boundary) is_boundary[t] = 1;

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# per-vertex colours encode part labels; see "
      << labels_path_for(path).filename().string() << '\n';
  for (std::size_t j = 0; j < mesh.vertices.size(); ++j) {
    const Vec3& v = mesh.vertices[j];
    const Vec3 c = palette_color(labels[j]);
    out << "v " << detail::format_double(v.x()) << ' '
        << detail::format_double(v.y()) << ' '
        << detail::format_double(v.z()) << ' ' << c.x() << ' ' << c.y() << ' '
        << c.z() << '\n';
  }
  // Triangle order is preserved; group tags switch where the flag changes.
  char current = -1;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    if (is_boundary[t] != current) {
      current = is_boundary[t];
      out << (current ? "g boundary\n" : "g interior\n");
    }
    const auto& f = mesh.triangles[t];
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());

  write_labels(labels, labels_path_for(path));
}

}  // namespace posemfa
