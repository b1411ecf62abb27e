#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "posemfa/cli.hpp"
#include "posemfa/config.hpp"
#include "posemfa/errors.hpp"
#include "posemfa/mesh_io.hpp"
#include "posemfa/model_io.hpp"
#include "test_support.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

using namespace posemfa;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json load_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::vector<std::string> shape_files(const fs::path& dir) {
  std::vector<std::string> out;
  for (int i = 1; i <= 5; ++i) out.push_back((dir / ("shape_0" + std::to_string(i) + ".obj")).string());
  return out;
}

// generate + train once, shared by the tests below
struct Trained {
  TempDir dir{"cli"};
  fs::path data = dir / "data";
  fs::path model_dir = dir / "model";
  Trained() {
    REQUIRE(run({"generate", "--out", data.string()}).code == 0);
    std::vector<std::string> args{"train", "--out", model_dir.string()};
    for (auto& f : shape_files(data)) args.push_back(f);
    const Result r = run(args);
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  std::string model() const { return (model_dir / "model.pmfa").string(); }
};

const Trained& trained() {
  static const Trained t;
  return t;
}

}  // namespace

TEST_CASE("config validation and hash") {
  Config c;
  CHECK_NOTHROW(c.validate());
  const std::string h = c.hash();
  CHECK(h.size() == 16);
  CHECK(Config{}.hash() == h);
  c.out = "elsewhere";
  CHECK(c.hash() == h);
  c.seed = 2;
  CHECK(c.hash() != h);

  for (auto breaker : std::vector<std::function<void(Config&)>>{
           [](Config& x) { x.tol = 0.0; },
           [](Config& x) { x.tol = -1.0; },
           [](Config& x) { x.refine_threshold = 0.0; },
           [](Config& x) { x.plateau = 0.0; },
           [](Config& x) { x.max_iter = 0; },
           [](Config& x) { x.m_init = 0; },
           [](Config& x) { x.chain_vertices = 30; },
       }) {
    Config bad;
    breaker(bad);
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  }
}

TEST_CASE("fnv-1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("config chain spec") {
  Config c;
  const ChainSpec d = c.chain_spec();
  CHECK(d.parts.size() == 3);
  CHECK(d.joints[0].angles == ChainSpec::default_spec().joints[0].angles);
  c.chain_parts = 4;
  c.chain_poses = 6;
  const ChainSpec s = c.chain_spec();
  CHECK(s.parts.size() == 4);
  CHECK(s.joints.size() == 3);
  CHECK(s.joints[2].angles.size() == 6);
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("generate writes shapes, ground truth and a manifest") {
  const Trained& t = trained();
  for (const auto& f : shape_files(t.data)) CHECK(fs::exists(f));
  CHECK(read_labels(t.data / "ground_truth.labels").size() == 240);
  const auto truth = load_json(t.data / "ground_truth.json");
  CHECK(truth["parts"].size() == 3);
  const auto manifest = load_json(t.data / "manifest.json");
  CHECK(manifest["command"] == "generate");
  CHECK(manifest["config_hash"] == Config{}.hash());
}

TEST_CASE("train on the synthetic chain") {
  const Trained& t = trained();
  for (const char* f : {"model.pmfa", "reference.obj", "reference.labels", "report.json",
                        "loglik.csv", "manifest.json"}) {
    CHECK_MESSAGE(fs::exists(t.model_dir / f), f);
  }
  CHECK(load_json(t.model_dir / "report.json")["final_n"] == 3);
  const auto manifest = load_json(t.model_dir / "manifest.json");
  CHECK(manifest["command"] == "train");
  CHECK(manifest["inputs"].size() == 5);
  CHECK(manifest["timings_ms"].contains("fit"));
  CHECK(manifest["version"] == kToolVersion);
}

TEST_CASE("same inputs and seed give byte-identical artifacts") {
  const Trained& t = trained();
  TempDir again("again");
  std::vector<std::string> args{"train", "--out", again.path().string()};
  for (auto& f : shape_files(t.data)) args.push_back(f);
  REQUIRE(run(args).code == 0);
  CHECK(testing::read_bytes(again / "model.pmfa") ==
        testing::read_bytes(t.model_dir / "model.pmfa"));
  CHECK(testing::read_bytes(again / "loglik.csv") ==
        testing::read_bytes(t.model_dir / "loglik.csv"));
}

TEST_CASE("mismatched meshes are an input error") {
  TempDir dir("bad");
  const Trained& t = trained();
  REQUIRE(run({"generate", "--chain-parts", "2", "--out", dir.path().string()}).code == 0);
  const Result r = run({"train", "--out", (dir / "m").string(),
                        (t.data / "shape_01.obj").string(), (dir / "shape_01.obj").string()});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("CorrespondenceError") != std::string::npos);
  CHECK(r.err.find("shape_01.obj") != std::string::npos);
}

TEST_CASE("segment and reconstruct") {
  const Trained& t = trained();
  TempDir seg("seg"), rec("rec");
  REQUIRE(run({"segment", t.model(), "--out", seg.path().string()}).code == 0);
  const Mesh m = read_obj(seg / "segment_01.obj");
  CHECK(m.vertices.size() == 240);
  CHECK(read_labels(seg / "segment_01.labels").size() == 240);
  // labeled meshes come back in the original units
  const Mesh orig = read_obj(t.data / "shape_01.obj");
  for (std::size_t j = 0; j < 240; ++j) CHECK((m.vertices[j] - orig.vertices[j]).norm() <= 1e-12);

  REQUIRE(run({"reconstruct", t.model(), "--out", rec.path().string()}).code == 0);
  const auto res = load_json(rec / "residuals.json");
  REQUIRE(res["shapes"].size() == 5);
  for (const auto& s : res["shapes"]) CHECK(s["rms"].get<double>() < 0.01);
}

TEST_CASE("interpolate writes one mesh per t and metrics") {
  const Trained& t = trained();
  TempDir out("interp");
  const Result r = run({"interpolate", t.model(), "--shapes", "1,3", "--t", "0", "--t", "0.25",
                        "--t", "0.5,0.75,1", "--out", out.path().string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (int f = 0; f < 5; ++f) CHECK(fs::exists(out / ("interp_0" + std::to_string(f) + ".obj")));
  const auto metrics = load_json(out / "metrics.json");
  CHECK(metrics["source"] == 1);
  CHECK(metrics["target"] == 3);
  REQUIRE(metrics["frames"].size() == 5);
  for (const auto& f : metrics["frames"]) {
    CHECK(f["max_joint_residual"].get<double>() <= 1e-9);
    CHECK(f["parts"].size() == 3);
    CHECK(f["joint_residuals"].size() == 2);
  }
  CHECK(metrics["frames"][0]["parts"][0]["angle_from_source"].get<double>() <= 1e-9);
  CHECK(load_json(out / "manifest.json")["command"] == "interpolate");
}

TEST_CASE("interpolate with i = j gives identical meshes") {
  const Trained& t = trained();
  TempDir out("same");
  REQUIRE(run({"interpolate", t.model(), "--shapes", "2,2", "--t", "0,0.5,1", "--out",
               out.path().string()}).code == 0);
  const Mesh a = read_obj(out / "interp_00.obj");
  for (const char* f : {"interp_01.obj", "interp_02.obj"}) {
    const Mesh b = read_obj(out / f);
    for (std::size_t j = 0; j < a.vertices.size(); ++j) {
      CHECK((a.vertices[j] - b.vertices[j]).norm() <= 1e-12);
    }
  }
}

TEST_CASE("interpolate with an empty t-list writes nothing") {
  const Trained& t = trained();
  const fs::path out = t.dir / "empty";
  const Result r = run({"interpolate", t.model(), "--shapes", "1,2", "--out", out.string()});
  CHECK(r.code == 0);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("interpolate argument errors") {
  const Trained& t = trained();
  const std::string out = (t.dir / "errs").string();
  CHECK(run({"interpolate", t.model(), "--shapes", "1,6", "--t", "0.5", "--out", out}).code == kExitInput);
  CHECK(run({"interpolate", t.model(), "--shapes", "0,1", "--t", "0.5", "--out", out}).code == kExitInput);
  CHECK(run({"interpolate", t.model(), "--shapes", "1,2", "--t", "1.5", "--out", out}).code == kExitInput);
  CHECK(run({"interpolate", t.model(), "--shapes", "1", "--t", "0.5", "--out", out}).code == kExitInput);
  const Result r = run({"interpolate", t.model(), "--shapes", "1,9", "--t", "0.5", "--out", out});
  CHECK(r.err.find("IndexOutOfRange") != std::string::npos);
}

TEST_CASE("report prints a summary") {
  const Trained& t = trained();
  TempDir out("rep");
  const Result r = run({"report", t.model(), "--out", out.path().string()});
  REQUIRE(r.code == 0);
  const auto summary = nlohmann::json::parse(r.out);
  CHECK(summary["parts"] == 3);
  CHECK(summary["shapes"] == 5);
  CHECK(summary == load_json(out / "summary.json"));
  CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("config file with flag overrides") {
  TempDir dir("conf");
  testing::write_text(dir / "run.toml",
                      "# run settings\nm-init = 2\nseed = 5\ntol = 1e-6\njoint-mode = \"centroid-mean\"\n");
  const Trained& t = trained();
  std::vector<std::string> args{"train", "--config", (dir / "run.toml").string(), "--seed", "9",
                                "--out", (dir / "m").string()};
  for (auto& f : shape_files(t.data)) args.push_back(f);
  const Result r = run(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto manifest = load_json(dir / "m" / "manifest.json");
  CHECK(manifest["config"]["m-init"] == 2);
  CHECK(manifest["config"]["seed"] == 9);
  CHECK(manifest["config"]["tol"] == 1e-6);
  CHECK(manifest["config"]["joint-mode"] == "centroid-mean");
  CHECK(load_json(dir / "m" / "report.json")["initial_m"] == 2);

  Config expected;
  expected.m_init = 2;
  expected.seed = 9;
  expected.tol = 1e-6;
  expected.joint_mode = JointPointMode::CentroidMean;
  CHECK(manifest["config_hash"] == expected.hash());
}

TEST_CASE("bad configuration is an input error") {
  TempDir dir("badconf");
  testing::write_text(dir / "typo.toml", "m-inti = 2\n");
  testing::write_text(dir / "neg.toml", "tol = -1\n");
  CHECK(run({"generate", "--config", (dir / "typo.toml").string(), "--out", (dir / "a").string()}).code == kExitInput);
  CHECK(run({"generate", "--config", (dir / "neg.toml").string(), "--out", (dir / "b").string()}).code == kExitInput);
  CHECK(run({"generate", "--joint-mode", "middle", "--out", (dir / "c").string()}).code == kExitInput);
  CHECK(run({"segment", (dir / "missing.pmfa").string(), "--out", (dir / "d").string()}).code == kExitInput);
  CHECK(run({}).code == kExitInput);
  CHECK(run({"--help"}).code == kExitOk);
}
