#pragma once

// Model artifact: one file holding the normalized training set, the fitted
// mixture and the latent reference shape.
//
// Layout (both variants store the same fields in the same order):
//
//   header          "PMFA" + u32 version (binary) | "posemfa-model <version>"
//   dims            u64 n_s, n_v, m, n_triangles
//   normalization   f64 scale, f64 origin[3]
//   component x m   f64 weight, f64 lambda[3],
//                   per shape: f64 R[9] (row-major), f64 b[3], f64 s
//   labels          i32[n_v]
//   latent          f64[n_v][3]
//   shapes          f64[n_s][n_v][3]           (unit-box coordinates)
//   triangles       i32[n_triangles][3]        (0-based)
//   gamma           f64[m][n_v]
//   fit             f64 initial_ll, u64 iterations, u64 converged,
//                   u64 n_trace, f64 trace[n_trace],
//                   u64 n_drops, u64 drops[n_drops]
//
// Binary values are little-endian. Text values are written in shortest
// round-trip form, so both variants reproduce every double bit for bit.

#include "posemfa/hierarchy.hpp"

#include "json.hpp"

#include <filesystem>

namespace posemfa {

inline constexpr std::uint32_t kArtifactVersion = 1;

enum class ArtifactFormat { Binary, Text };

/// ".txt" selects the text variant, anything else the binary one.
ArtifactFormat format_for(const std::filesystem::path& path);

void write_model(const ShapeModel& model, const std::filesystem::path& path,
                 ArtifactFormat format);
void write_model(const ShapeModel& model, const std::filesystem::path& path);

/// Detects the variant from the file header.
ShapeModel read_model(const std::filesystem::path& path);

nlohmann::json report_to_json(const RefinementReport& report);
void write_report(const RefinementReport& report,
                  const std::filesystem::path& path);

/// Columns: stage,iteration,log_likelihood (iteration 0 is the start value).
void write_trace_csv(const RefinementReport& report,
                     const std::filesystem::path& path);

}  // namespace posemfa
