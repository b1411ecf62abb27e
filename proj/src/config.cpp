#include "posemfa/config.hpp"

#include "posemfa/errors.hpp"
#include "text_util.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace posemfa {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument("config: " + what);
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void Config::validate() const {
  require(m_init >= 1, "m-init must be at least 1");
  require(positive(tol), "tol must be > 0");
  require(max_iter >= 1, "max-iter must be at least 1");
  require(positive(refine_threshold), "refine-threshold must be > 0");
  require(positive(plateau) && plateau < 1.0, "plateau must be in (0, 1)");
  require(max_part_components >= 1, "max-part-components must be at least 1");
  require(chain_parts >= 1, "chain-parts must be at least 1");
  require(chain_vertices >= 12 && chain_vertices % 4 == 0,
          "chain-vertices must be a multiple of 4 and >= 12");
  require(chain_poses >= 2, "chain-poses must be at least 2");
  require(std::isfinite(noise) && noise >= 0.0, "noise must be >= 0");
}

HierarchyOptions Config::hierarchy_options() const {
  HierarchyOptions o;
  o.m_init = m_init;
  o.aecm.tol = tol;
  o.aecm.max_iter = max_iter;
  o.threshold = refine_threshold;
  o.plateau = plateau;
  o.max_part_components = max_part_components;
  o.seed = seed;
  return o;
}

ChainSpec Config::chain_spec() const {
  ChainSpec spec = ChainSpec::default_spec();
  spec.noise_sigma = noise;
  spec.rng_seed = seed;
  for (auto& p : spec.parts) p.vertices = chain_vertices;
  if (chain_parts == 3 && chain_poses == 5) return spec;

  spec.poses = chain_poses;
  spec.parts.assign(static_cast<std::size_t>(chain_parts),
                    ChainPart{Vec3(1.0, 0.3, 0.2), chain_vertices});
  spec.joints.clear();
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (int c = 1; c < chain_parts; ++c) {
    ChainJoint j;
    j.axis = (c % 2 == 1) ? Vec3::UnitZ() : Vec3::UnitY();
    j.angles.push_back(0.0);
    for (int i = 1; i < chain_poses; ++i) {
      j.angles.push_back(-1.1 + 2.2 * uniform01(rng));
    }
    spec.joints.push_back(std::move(j));
  }
  return spec;
}

std::string Config::canonical() const {
  std::ostringstream os;
  os << "m-init = " << m_init << '\n'
     << "tol = " << detail::format_double(tol) << '\n'
     << "max-iter = " << max_iter << '\n'
     << "refine-threshold = " << detail::format_double(refine_threshold) << '\n'
     << "plateau = " << detail::format_double(plateau) << '\n'
     << "max-part-components = " << max_part_components << '\n'
     << "seed = " << seed << '\n'
     << "joint-mode = \"" << to_string(joint_mode) << "\"\n"
     << "chain-parts = " << chain_parts << '\n'
     << "chain-vertices = " << chain_vertices << '\n'
     << "chain-poses = " << chain_poses << '\n'
     << "noise = " << detail::format_double(noise) << '\n';
  return os.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Config::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical())));
  return buf;
}

}  // namespace posemfa
