#include "posemfa/cli.hpp"

#include "posemfa/config.hpp"
#include "posemfa/errors.hpp"
#include "posemfa/geometry.hpp"
#include "posemfa/hierarchy.hpp"
#include "posemfa/interpolation.hpp"
#include "posemfa/mesh_io.hpp"
#include "posemfa/model_io.hpp"
#include "posemfa/synthetic.hpp"
#include "text_util.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace posemfa {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

const char* error_kind(const Error& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  if (dynamic_cast<const CorrespondenceError*>(&e)) return "CorrespondenceError";
  if (dynamic_cast<const TooFewShapes*>(&e)) return "TooFewShapes";
  if (dynamic_cast<const DegenerateExtent*>(&e)) return "DegenerateExtent";
  if (dynamic_cast<const IoError*>(&e)) return "IoError";
  if (dynamic_cast<const IndexOutOfRange*>(&e)) return "IndexOutOfRange";
  if (dynamic_cast<const InvalidArgument*>(&e)) return "InvalidArgument";
  if (dynamic_cast<const SingularCovariance*>(&e)) return "SingularCovariance";
  if (dynamic_cast<const NegativeEigenvalue*>(&e)) return "NegativeEigenvalue";
  if (dynamic_cast<const AllZeroLikelihood*>(&e)) return "AllZeroLikelihood";
  if (dynamic_cast<const DegenerateConfiguration*>(&e)) return "DegenerateConfiguration";
  if (dynamic_cast<const EmptyComponent*>(&e)) return "EmptyComponent";
  if (dynamic_cast<const InputError*>(&e)) return "InputError";
  return "NumericalError";
}

json config_json(const Config& c) {
  return {{"m-init", c.m_init},
          {"tol", c.tol},
          {"max-iter", c.max_iter},
          {"refine-threshold", c.refine_threshold},
          {"plateau", c.plateau},
          {"max-part-components", c.max_part_components},
          {"seed", c.seed},
          {"joint-mode", to_string(c.joint_mode)},
          {"chain-parts", c.chain_parts},
          {"chain-vertices", c.chain_vertices},
          {"chain-poses", c.chain_poses},
          {"noise", c.noise},
          {"out", c.out.string()}};
}

json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

json mat_json(const Mat3& m) {
  return {vec_json(m.row(0)), vec_json(m.row(1)), vec_json(m.row(2))};
}

// A double that may be NaN; JSON has no NaN, so those become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%02zu%s", stem, i, ext);
  return buf;
}

Mesh to_model_units(Mesh mesh, const UnitBoxTransform& tf) {
  for (auto& v : mesh.vertices) v = tf.invert(v);
  return mesh;
}

// State shared by every subcommand: the effective configuration, what was
// read and written, and stage timings for the manifest.
class Run {
 public:
  Run(std::string command, Config config, std::ostream& out, std::ostream& err)
      : command_(std::move(command)),
        config_(std::move(config)),
        out_(out),
        err_(err),
        start_(Clock::now()),
        stage_start_(start_) {}

  const Config& config() const { return config_; }
  std::ostream& out() { return out_; }
  std::ostream& err() { return err_; }

  void input(const fs::path& p) { inputs_.push_back(p.string()); }
  fs::path output(const std::string& name) {
    outputs_.push_back(name);
    return config_.out / name;
  }
  void prepare_out() {
    std::error_code ec;
    fs::create_directories(config_.out, ec);
    if (ec) throw IoError("cannot create " + config_.out.string() + ": " + ec.message());
  }
  void stage(const std::string& name) {
    const auto now = Clock::now();
    timings_[name] = ms(now - stage_start_);
    stage_start_ = now;
  }

  void write_manifest() {
    timings_["total"] = ms(Clock::now() - start_);
    json manifest = {
        {"tool", "posemfa"},
        {"version", kToolVersion},
        {"artifact_version", kArtifactVersion},
        {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." +
                              std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
        {"command", command_},
        {"config", config_json(config_)},
        {"config_hash", config_.hash()},
        {"inputs", inputs_},
        {"outputs", outputs_},
        {"timings_ms", timings_}};
    write_json(manifest, config_.out / "manifest.json");
  }

 private:
  static double ms(Clock::duration d) {
    return std::chrono::duration<double, std::milli>(d).count();
  }

  std::string command_;
  Config config_;
  std::ostream& out_;
  std::ostream& err_;
  Clock::time_point start_, stage_start_;
  std::vector<std::string> inputs_, outputs_;
  json timings_ = json::object();
};

ShapeModel load_model(Run& run, const fs::path& path) {
  run.input(path);
  ShapeModel model = read_model(path);
  run.stage("load");
  return model;
}

void cmd_generate(Run& run) {
  const SyntheticChain chain = generate_chain(run.config().chain_spec());
  run.stage("generate");
  run.prepare_out();
  const auto& set = chain.set;
  for (std::size_t i = 0; i < set.num_shapes(); ++i) {
    write_obj(set.mesh(i), run.output(numbered("shape", i + 1, ".obj")));
  }
  write_labels(chain.truth.labels, run.output("ground_truth.labels"));

  json parts = json::array();
  for (std::size_t k = 0; k < chain.truth.num_parts(); ++k) {
    json poses = json::array();
    for (std::size_t i = 0; i < set.num_shapes(); ++i) {
      poses.push_back({{"rotation", mat_json(chain.truth.rotations[k][i])},
                       {"translation", vec_json(chain.truth.translations[k][i])}});
    }
    parts.push_back({{"part", k}, {"poses", poses}});
  }
  write_json({{"shapes", set.num_shapes()},
              {"vertices", set.num_vertices()},
              {"noise_sigma", run.config().noise},
              {"parts", parts}},
             run.output("ground_truth.json"));
  run.stage("write");
  run.out() << "wrote " << set.num_shapes() << " shapes to "
            << run.config().out.string() << '\n';
}

void cmd_train(Run& run, const std::vector<std::string>& files, bool verbose) {
  std::vector<fs::path> paths(files.begin(), files.end());
  for (const auto& p : paths) run.input(p);
  const TrainingSet set = normalize_unit_box(load_sequence(paths));
  run.stage("load");

  HierarchyOptions options = run.config().hierarchy_options();
  if (verbose) {
    options.aecm.on_iteration = [&run](int it, double ll) {
      run.err() << "aecm iteration " << it << " log-likelihood "
                << detail::format_double(ll) << '\n';
    };
  }
  HierarchyResult fit = hierarchical_fit(set, options);
  run.stage("fit");

  const ShapeModel model = make_shape_model(set, std::move(fit.model));
  run.prepare_out();
  write_model(model, run.output("model.pmfa"));

  Mesh reference{model.latent.positions, set.triangles()};
  for (auto& v : reference.vertices) v /= set.normalization().scale;
  write_labeled_mesh(reference, model.latent.labels, run.output("reference.obj"));
  run.output("reference.labels");
  write_report(fit.report, run.output("report.json"));
  write_trace_csv(fit.report, run.output("loglik.csv"));
  run.stage("write");
  run.out() << "coarse " << fit.report.initial_m << " -> final "
            << fit.report.final_n << " parts\n";
}

void cmd_segment(Run& run, const fs::path& model_path) {
  const ShapeModel model = load_model(run, model_path);
  run.prepare_out();
  const auto& set = model.training;
  for (std::size_t i = 0; i < set.num_shapes(); ++i) {
    const auto name = numbered("segment", i + 1, ".obj");
    write_labeled_mesh(to_model_units(set.mesh(i), set.normalization()),
                       model.latent.labels, run.output(name));
    run.output(numbered("segment", i + 1, ".labels"));
  }
  run.stage("write");
  run.out() << model.mixture.num_components() << " parts\n";
}

void cmd_reconstruct(Run& run, const fs::path& model_path) {
  const ShapeModel model = load_model(run, model_path);
  run.prepare_out();
  const auto& set = model.training;
  const double scale = set.normalization().scale;
  json shapes = json::array();
  for (std::size_t i = 0; i < set.num_shapes(); ++i) {
    const Mesh mesh = reconstruct(model.mixture, model.latent, i, set.triangles());
    const auto name = numbered("reconstruct", i + 1, ".obj");
    write_obj(to_model_units(mesh, set.normalization()), run.output(name));
    double sq = 0.0;
    for (const auto& r : reconstruction_residuals(set, model.mixture, model.latent, i)) {
      sq += r.squaredNorm();
    }
    const double rms = std::sqrt(sq / static_cast<double>(set.num_vertices()));
    shapes.push_back({{"shape", i + 1}, {"file", name}, {"rms", rms / scale},
                      {"rms_normalized", rms}});
  }
  write_json({{"shapes", shapes}}, run.output("residuals.json"));
  run.stage("write");
}

void cmd_interpolate(Run& run, const fs::path& model_path,
                     const std::vector<std::size_t>& shapes,
                     const std::vector<double>& ts) {
  for (double t : ts) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw InvalidArgument("t = " + detail::format_double(t) + " is outside [0, 1]");
    }
  }
  for (std::size_t s : shapes) {
    if (s == 0) throw IndexOutOfRange("shape indices are 1-based");
  }
  const ShapeModel model = load_model(run, model_path);
  const std::size_t n_s = model.training.num_shapes();
  for (std::size_t s : shapes) {
    if (s > n_s) {
      throw IndexOutOfRange("shape " + std::to_string(s) + " out of range 1.." +
                            std::to_string(n_s));
    }
  }
  if (ts.empty()) return;

  const PartGraph graph = build_part_graph(model, run.config().joint_mode);
  run.stage("graph");
  run.prepare_out();
  const std::size_t src = shapes[0] - 1, dst = shapes[1] - 1;
  json frames = json::array();
  json roots = json::array();
  for (std::size_t f = 0; f < ts.size(); ++f) {
    const Interpolation res = interpolate_pose(model, graph, src, dst, ts[f]);
    const auto name = numbered("interp", f, ".obj");
    write_obj(res.mesh, run.output(name));

    const auto& blend = res.blend;
    roots = blend.roots;
    json joints = json::array();
    double worst = 0.0;
    for (std::size_t c = 0; c < blend.joint_residuals.size(); ++c) {
      const double r = blend.joint_residuals[c];
      if (std::isnan(r)) continue;
      worst = std::max(worst, r);
      joints.push_back({{"parent", blend.parent[c]}, {"child", c}, {"residual", r}});
    }
    json parts = json::array();
    for (std::size_t k = 0; k < blend.rotations.size(); ++k) {
      const auto& fa = model.mixture.components[k];
      parts.push_back(
          {{"part", k},
           {"angle_from_source", rotation_angle(blend.rotations[k], fa.rotations[src])},
           {"angle_to_target", rotation_angle(blend.rotations[k], fa.rotations[dst])},
           {"parent", blend.parent[k]}});
    }
    frames.push_back({{"t", ts[f]},
                      {"file", name},
                      {"max_joint_residual", worst},
                      {"joint_residuals", joints},
                      {"parts", parts}});
  }
  write_json({{"source", shapes[0]},
              {"target", shapes[1]},
              {"joint_mode", to_string(run.config().joint_mode)},
              {"units", "unit-box"},
              {"roots", roots},
              {"frames", frames}},
             run.output("metrics.json"));
  run.stage("interpolate");
}

void cmd_report(Run& run, const fs::path& model_path) {
  const ShapeModel model = load_model(run, model_path);
  const auto& mix = model.mixture;
  const auto& set = model.training;
  std::vector<std::size_t> counts(mix.num_components(), 0);
  for (int l : model.latent.labels) ++counts[static_cast<std::size_t>(l)];
  json parts = json::array();
  for (std::size_t k = 0; k < mix.num_components(); ++k) {
    const auto& fa = mix.components[k];
    parts.push_back(
        {{"part", k},
         {"vertices", counts[k]},
         {"weight", fa.weight},
         {"lambda", vec_json(fa.scale)},
         {"err", fa.noise_trace() / (3.0 * static_cast<double>(set.num_shapes()))}});
  }
  const json summary = {
      {"shapes", set.num_shapes()},
      {"vertices", set.num_vertices()},
      {"triangles", set.triangles().size()},
      {"parts", mix.num_components()},
      {"iterations", mix.iterations},
      {"converged", mix.converged},
      {"log_likelihood", mix.log_likelihood_trace.empty()
                             ? num(mix.initial_log_likelihood)
                             : num(mix.log_likelihood_trace.back())},
      {"normalization",
       {{"scale", set.normalization().scale},
        {"origin", vec_json(set.normalization().origin)}}},
      {"part_summary", parts}};
  run.prepare_out();
  write_json(summary, run.output("summary.json"));
  run.out() << summary.dump(2) << '\n';
  run.stage("report");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Pose-aware mixture of factor analyzers for corresponded meshes",
               "posemfa"};
  app.set_version_flag("--version", kToolVersion);
  app.set_config("--config", "", "TOML-style key = value file; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  Config cfg;
  std::string joint_mode = to_string(cfg.joint_mode);
  std::string out_dir = cfg.out.string();
  bool verbose = false;
  app.add_option("--m-init", cfg.m_init, "initial number of mixture components");
  app.add_option("--tol", cfg.tol, "relative log-likelihood tolerance");
  app.add_option("--max-iter", cfg.max_iter, "AECM iteration cap");
  app.add_option("--refine-threshold", cfg.refine_threshold,
                 "per-part residual variance that stops splitting");
  app.add_option("--plateau", cfg.plateau, "relative decrease counted as no progress");
  app.add_option("--max-part-components", cfg.max_part_components,
                 "cap on sub-components per coarse part");
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--joint-mode", joint_mode, "vertex-mean | centroid-mean");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--chain-parts", cfg.chain_parts, "generate: number of parts");
  app.add_option("--chain-vertices", cfg.chain_vertices, "generate: vertices per part");
  app.add_option("--chain-poses", cfg.chain_poses, "generate: number of poses");
  app.add_option("--noise", cfg.noise, "generate: per-vertex noise sigma");
  app.add_flag("--verbose", verbose, "log every AECM iteration to stderr");

  auto* generate = app.add_subcommand("generate", "write a synthetic articulated chain");
  auto* train = app.add_subcommand("train", "fit a model to corresponded OBJ meshes");
  std::vector<std::string> files;
  train->add_option("meshes", files, "OBJ files, one per pose")->required();

  std::string model_path;
  auto* segment = app.add_subcommand("segment", "write labeled training meshes");
  segment->add_option("model", model_path)->required();
  auto* recon = app.add_subcommand("reconstruct", "write reconstructed training meshes");
  recon->add_option("model", model_path)->required();
  auto* report = app.add_subcommand("report", "summarize a model artifact");
  report->add_option("model", model_path)->required();

  auto* interp = app.add_subcommand("interpolate", "blend between two training poses");
  std::vector<std::size_t> shapes;
  std::vector<double> ts;
  interp->add_option("model", model_path)->required();
  interp->add_option("--shapes", shapes, "i,j (1-based)")
      ->required()
      ->expected(2)
      ->delimiter(',');
  interp->add_option("--t", ts, "blend parameter in [0, 1]; repeatable")
      ->delimiter(',');

  for (auto* sub : {generate, train, segment, recon, report, interp}) {
    sub->fallthrough();
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  auto* cmd = app.get_subcommands().front();
  try {
    cfg.joint_mode = parse_joint_mode(joint_mode);
    cfg.out = out_dir;
    cfg.validate();
    Run run(cmd->get_name(), cfg, out, err);
    if (cmd == generate) {
      cmd_generate(run);
    } else if (cmd == train) {
      cmd_train(run, files, verbose);
    } else if (cmd == segment) {
      cmd_segment(run, model_path);
    } else if (cmd == recon) {
      cmd_reconstruct(run, model_path);
    } else if (cmd == report) {
      cmd_report(run, model_path);
    } else if (cmd == interp) {
      cmd_interpolate(run, model_path, shapes, ts);
      if (ts.empty()) return kExitOk;
    }
    run.write_manifest();
  } catch (const InputError& e) {
    err << "error: " << error_kind(e) << ": " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "error: " << error_kind(e) << ": " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: IoError: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace posemfa
