#pragma once

// Run configuration shared by the command-line tool and the library entry
// points. Keys in a config file match the long flag names (m-init = 11).

#include "posemfa/hierarchy.hpp"
#include "posemfa/interpolation.hpp"
#include "posemfa/synthetic.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace posemfa {

struct Config {
  std::size_t m_init = 1;
  double tol = 1e-7;
  int max_iter = 200;
  double refine_threshold = 1e-5;
  double plateau = 1e-3;
  int max_part_components = 8;
  std::uint64_t seed = 1;
  JointPointMode joint_mode = JointPointMode::VertexMean;
  std::filesystem::path out = "posemfa-out";

  // synthetic chain (generate only)
  int chain_parts = 3;
  int chain_vertices = 80;
  int chain_poses = 5;
  double noise = 1e-3;

  /// Throws InvalidArgument on the first out-of-range value.
  void validate() const;

  HierarchyOptions hierarchy_options() const;

  /// The default chain when parts and poses match it, otherwise hinge angles
  /// in [-1.1, 1.1] rad drawn from the seed (first pose at rest).
  ChainSpec chain_spec() const;

  /// Canonical key = value listing, one key per line in a fixed order. The
  /// output directory is not part of it.
  std::string canonical() const;

  /// FNV-1a 64 of canonical(), as 16 hex digits.
  std::string hash() const;
};

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace posemfa
