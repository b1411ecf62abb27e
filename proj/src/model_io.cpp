#include "posemfa/model_io.hpp"

#include "posemfa/errors.hpp"
#include "text_util.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace posemfa {
namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'P', 'M', 'F', 'A'};
constexpr const char* kTextMagic = "posemfa-model";

static_assert(std::endian::native == std::endian::little,
              "binary artifacts assume a little-endian host");

// Both variants stream the same sequence of typed values; the text writer
// adds section names and line breaks for readability.
class Sink {
 public:
  virtual ~Sink() = default;
  virtual void section(const char* name) = 0;
  virtual void u32(std::uint32_t v) = 0;
  virtual void u64(std::uint64_t v) = 0;
  virtual void i32(std::int32_t v) = 0;
  virtual void f64(double v) = 0;
  virtual void end_record() {}
};

class Source {
 public:
  virtual ~Source() = default;
  virtual void section(const char* name) = 0;
  virtual std::uint32_t u32() = 0;
  virtual std::uint64_t u64() = 0;
  virtual std::int32_t i32() = 0;
  virtual double f64() = 0;
};

class BinarySink final : public Sink {
 public:
  explicit BinarySink(std::ostream& out) : out_(out) {}
  void section(const char*) override {}
  void u32(std::uint32_t v) override { put(v); }
  void u64(std::uint64_t v) override { put(v); }
  void i32(std::int32_t v) override { put(v); }
  void f64(double v) override { put(v); }

 private:
  template <class T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.write(buf, sizeof(T));
  }
  std::ostream& out_;
};

class BinarySource final : public Source {
 public:
  BinarySource(std::istream& in, std::string name)
      : in_(in), name_(std::move(name)) {}
  void section(const char*) override {}
  std::uint32_t u32() override { return get<std::uint32_t>(); }
  std::uint64_t u64() override { return get<std::uint64_t>(); }
  std::int32_t i32() override { return get<std::int32_t>(); }
  double f64() override { return get<double>(); }

 private:
  template <class T>
  T get() {
    char buf[sizeof(T)];
    if (!in_.read(buf, sizeof(T))) {
      throw ParseError(name_ + ": truncated model artifact");
    }
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }
  std::istream& in_;
  std::string name_;
};

class TextSink final : public Sink {
 public:
  explicit TextSink(std::ostream& out) : out_(out) {}
  void section(const char* name) override {
    if (!fresh_) out_ << '\n';
    out_ << name;
    fresh_ = false;
  }
  void u32(std::uint32_t v) override { out_ << ' ' << v; }
  void u64(std::uint64_t v) override { out_ << ' ' << v; }
  void i32(std::int32_t v) override { out_ << ' ' << v; }
  void f64(double v) override { out_ << ' ' << detail::format_double(v); }
  void end_record() override { out_ << "\n "; }
  ~TextSink() override { out_ << '\n'; }

 private:
  std::ostream& out_;
  bool fresh_ = true;
};

class TextSource final : public Source {
 public:
  TextSource(std::istream& in, std::string name)
      : in_(in), name_(std::move(name)) {}
  void section(const char* name) override {
    const std::string tok = next();
    if (tok != name) {
      throw ParseError(name_ + ": expected section '" + name + "', found '" +
                       tok + "'");
    }
  }
  std::uint32_t u32() override {
    return static_cast<std::uint32_t>(u64());
  }
  std::uint64_t u64() override {
    const std::string tok = next();
    long v = 0;
    if (!detail::parse_long(tok, v) || v < 0) bad(tok);
    return static_cast<std::uint64_t>(v);
  }
  std::int32_t i32() override {
    const std::string tok = next();
    long v = 0;
    if (!detail::parse_long(tok, v)) bad(tok);
    return static_cast<std::int32_t>(v);
  }
  double f64() override {
    const std::string tok = next();
    double v = 0.0;
    if (!detail::parse_double(tok, v)) bad(tok);
    return v;
  }

 private:
  std::string next() {
    std::string tok;
    if (!(in_ >> tok)) throw ParseError(name_ + ": truncated model artifact");
    return tok;
  }
  [[noreturn]] void bad(const std::string& tok) {
    throw ParseError(name_ + ": malformed value '" + tok + "'");
  }
  std::istream& in_;
  std::string name_;
};

void check_count(std::uint64_t v, std::uint64_t limit, const char* what) {
  if (v > limit) {
    throw ParseError(std::string("implausible ") + what + " in model artifact");
  }
}

void serialize(const ShapeModel& model, Sink& out) {
  const auto& set = model.training;
  const auto& mix = model.mixture;
  const std::size_t n_s = set.num_shapes(), n_v = set.num_vertices();
  const std::size_t m = mix.num_components();

  out.section("dims");
  out.u64(n_s);
  out.u64(n_v);
  out.u64(m);
  out.u64(set.triangles().size());

  out.section("normalization");
  out.f64(set.normalization().scale);
  for (int d = 0; d < 3; ++d) out.f64(set.normalization().origin[d]);

  for (const auto& fa : mix.components) {
    out.section("component");
    out.f64(fa.weight);
    for (int d = 0; d < 3; ++d) out.f64(fa.scale[d]);
    out.end_record();
    for (std::size_t i = 0; i < n_s; ++i) {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.f64(fa.rotations[i](r, c));
      for (int d = 0; d < 3; ++d) out.f64(fa.mean[static_cast<Eigen::Index>(3 * i) + d]);
      out.f64(fa.noise[i]);
      out.end_record();
    }
  }

  out.section("labels");
  for (int l : model.latent.labels) out.i32(l);
  out.section("latent");
  for (const auto& p : model.latent.positions) {
    for (int d = 0; d < 3; ++d) out.f64(p[d]);
    out.end_record();
  }
  out.section("shapes");
  for (std::size_t i = 0; i < n_s; ++i) {
    for (const auto& v : set.shape(i)) {
      for (int d = 0; d < 3; ++d) out.f64(v[d]);
      out.end_record();
    }
  }
  out.section("triangles");
  for (const auto& t : set.triangles()) {
    for (int d = 0; d < 3; ++d) out.i32(t[d]);
    out.end_record();
  }
  out.section("gamma");
  for (Eigen::Index k = 0; k < mix.responsibilities.rows(); ++k) {
    for (Eigen::Index j = 0; j < mix.responsibilities.cols(); ++j) {
      out.f64(mix.responsibilities(k, j));
    }
    out.end_record();
  }
  out.section("fit");
  out.f64(mix.initial_log_likelihood);
  out.u64(static_cast<std::uint64_t>(mix.iterations));
  out.u64(mix.converged ? 1 : 0);
  out.u64(mix.log_likelihood_trace.size());
  for (double ll : mix.log_likelihood_trace) out.f64(ll);
  out.u64(mix.drop_iterations.size());
  for (int d : mix.drop_iterations) out.u64(static_cast<std::uint64_t>(d));
}

ShapeModel deserialize(Source& in) {
  in.section("dims");
  const auto n_s = in.u64(), n_v = in.u64(), m = in.u64(), n_tri = in.u64();
  check_count(n_s, 1u << 20, "shape count");
  check_count(n_v, 1u << 28, "vertex count");
  check_count(m, 1u << 20, "component count");
  check_count(n_tri, 1u << 30, "triangle count");

  in.section("normalization");
  UnitBoxTransform tf;
  tf.scale = in.f64();
  for (int d = 0; d < 3; ++d) tf.origin[d] = in.f64();

  MixtureModel mix;
  mix.components.resize(m);
  for (auto& fa : mix.components) {
    in.section("component");
    fa.weight = in.f64();
    for (int d = 0; d < 3; ++d) fa.scale[d] = in.f64();
    fa.rotations.resize(n_s);
    fa.mean.resize(static_cast<Eigen::Index>(3 * n_s));
    fa.noise.resize(n_s);
    for (std::size_t i = 0; i < n_s; ++i) {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) fa.rotations[i](r, c) = in.f64();
      for (int d = 0; d < 3; ++d) fa.mean[static_cast<Eigen::Index>(3 * i) + d] = in.f64();
      fa.noise[i] = in.f64();
    }
  }

  LatentShape latent;
  in.section("labels");
  latent.labels.resize(n_v);
  for (auto& l : latent.labels) {
    l = in.i32();
    if (l < 0 || static_cast<std::uint64_t>(l) >= m) {
      throw ParseError("label " + std::to_string(l) + " has no component");
    }
  }
  in.section("latent");
  latent.positions.resize(n_v);
  for (auto& p : latent.positions)
    for (int d = 0; d < 3; ++d) p[d] = in.f64();

  in.section("shapes");
  std::vector<std::vector<Vec3>> shapes(n_s, std::vector<Vec3>(n_v));
  for (auto& shape : shapes)
    for (auto& v : shape)
      for (int d = 0; d < 3; ++d) v[d] = in.f64();

  in.section("triangles");
  std::vector<Triangle> tris(n_tri);
  for (auto& t : tris)
    for (int d = 0; d < 3; ++d) t[d] = in.i32();

  in.section("gamma");
  mix.responsibilities.resize(static_cast<Eigen::Index>(m),
                              static_cast<Eigen::Index>(n_v));
  for (Eigen::Index k = 0; k < mix.responsibilities.rows(); ++k)
    for (Eigen::Index j = 0; j < mix.responsibilities.cols(); ++j)
      mix.responsibilities(k, j) = in.f64();

  in.section("fit");
  mix.initial_log_likelihood = in.f64();
  mix.iterations = static_cast<int>(in.u64());
  mix.converged = in.u64() != 0;
  const auto n_trace = in.u64();
  check_count(n_trace, 1u << 24, "trace length");
  mix.log_likelihood_trace.resize(n_trace);
  for (auto& ll : mix.log_likelihood_trace) ll = in.f64();
  const auto n_drops = in.u64();
  check_count(n_drops, 1u << 24, "drop count");
  mix.drop_iterations.resize(n_drops);
  for (auto& d : mix.drop_iterations) d = static_cast<int>(in.u64());
  mix.labels = latent.labels;

  return {TrainingSet(std::move(shapes), std::move(tris), tf), std::move(mix),
          std::move(latent)};
}

}  // namespace

ArtifactFormat format_for(const fs::path& path) {
  return path.extension() == ".txt" ? ArtifactFormat::Text
                                    : ArtifactFormat::Binary;
}

void write_model(const ShapeModel& model, const fs::path& path,
                 ArtifactFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  if (format == ArtifactFormat::Binary) {
    out.write(kMagic, sizeof(kMagic));
    BinarySink sink(out);
    sink.u32(kArtifactVersion);
    serialize(model, sink);
  } else {
    out << kTextMagic << ' ' << kArtifactVersion << '\n';
    TextSink sink(out);
    serialize(model, sink);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void write_model(const ShapeModel& model, const fs::path& path) {
  write_model(model, path, format_for(path));
}

ShapeModel read_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char head[4] = {};
  in.read(head, sizeof(head));
  if (in.gcount() == 4 && std::memcmp(head, kMagic, 4) == 0) {
    BinarySource src(in, path.string());
    const auto version = src.u32();
    if (version != kArtifactVersion) {
      throw ParseError(path.string() + ": unsupported artifact version " +
                       std::to_string(version));
    }
    return deserialize(src);
  }
  in.clear();
  in.seekg(0);
  std::string magic;
  long version = 0;
  if (!(in >> magic >> version) || magic != kTextMagic) {
    throw ParseError(path.string() + ": not a model artifact");
  }
  if (version != static_cast<long>(kArtifactVersion)) {
    throw ParseError(path.string() + ": unsupported artifact version " +
                     std::to_string(version));
  }
  TextSource src(in, path.string());
  return deserialize(src);
}

nlohmann::json report_to_json(const RefinementReport& report) {
  nlohmann::json parts = nlohmann::json::array();
  for (const auto& p : report.parts) {
    nlohmann::json history = nlohmann::json::array();
    for (const auto& [m, err] : p.history) {
      history.push_back({{"m", m}, {"err", err}});
    }
    parts.push_back({{"coarse_part", p.coarse_part},
                     {"vertices", p.vertex_count},
                     {"history", history},
                     {"chosen_m", p.chosen_m},
                     {"stop", to_string(p.reason)}});
  }
  return {{"initial_m", report.initial_m},
          {"final_n", report.final_n},
          {"parts", parts},
          {"coarse_iterations", report.coarse_trace.size()},
          {"final_iterations", report.final_trace.size()}};
}

void write_report(const RefinementReport& report, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << report_to_json(report).dump(2) << '\n';
}

void write_trace_csv(const RefinementReport& report, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "stage,iteration,log_likelihood\n";
  for (std::size_t l = 0; l < report.coarse_trace.size(); ++l) {
    out << "coarse," << l + 1 << ',' << detail::format_double(report.coarse_trace[l]) << '\n';
  }
  out << "final,0," << detail::format_double(report.final_initial_log_likelihood) << '\n';
  for (std::size_t l = 0; l < report.final_trace.size(); ++l) {
    out << "final," << l + 1 << ',' << detail::format_double(report.final_trace[l]) << '\n';
  }
}

}  // namespace posemfa
