#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hypervar/cli.hpp"
#include "hypervar/core.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using hypervar::cli::RunOptions;
using nlohmann::json;

namespace {

struct Sandbox {
  fs::path dir;
  explicit Sandbox(const std::string& name) : dir(fs::temp_directory_path() / ("hypervar_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }

  std::string config(const std::string& text) const {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << text;
    return p.string();
  }
};

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(const std::string& sub, const std::string& config, const fs::path& out_dir, const std::string& input = "",
            int threads = 1, bool dry = false) {
  RunOptions o;
  o.subcommand = sub;
  o.config_path = config;
  o.out_dir = out_dir.string();
  o.threads = threads;
  o.dry_run = dry;
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = hypervar::cli::run(o, in, out, err);
  return {code, out.str(), err.str()};
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

const char* kFlat = R"({
  "potential": {"centers": [], "depth": 0.01, "bump_radius": 0.8},
  "experiment": {"x_a": [-0.4, 0.2], "x_b": [0.5, 0.3], "b": 3.0}
})";

}  // namespace

TEST_CASE("cli constants in formula mode") {
  Sandbox box("constants");
  const Outcome r = run("constants", CONFIG_DIR "/constants_worked.json", box.dir / "o");
  REQUIRE(r.code == 0);
  const json j = read_json(box.dir / "o" / "constants.json");
  CHECK(j["mode"] == "formula");
  CHECK(j["constants"]["N0"] == 10);
  CHECK(j["constants"]["k_dprime"] == 0.25);
  CHECK(j["constants"]["lambda"] == 4.0);
  CHECK(j["constants"]["epsilon"] == 2.5);
  CHECK(json::parse(r.out) == j);
}

TEST_CASE("cli minimize with a flat potential") {
  Sandbox box("minimize");
  const Outcome r = run("minimize", box.config(kFlat), box.dir / "o");
  REQUIRE(r.code == 0);
  const json j = read_json(box.dir / "o" / "minimize.json");
  CHECK(j["converged"] == true);
  const double d = hypervar::dist(hypervar::DiskPoint(-0.4, 0.2), hypervar::DiskPoint(0.5, 0.3));
  CHECK(j["action"].get<double>() == doctest::Approx(0.5 * d * d / 3.0).epsilon(1e-10));
  CHECK(fs::exists(box.dir / "o" / "minimize_curve.csv"));
}

TEST_CASE("cli configuration errors") {
  Sandbox box("errors");

  SUBCASE("unknown key") {
    std::string text = kFlat;
    text.replace(text.find("\"b\": 3.0"), 8, "\"b\": 3.0, \"bogus\": 1");
    const Outcome r = run("minimize", box.config(text), box.dir / "o");
    CHECK(r.code == 1);
    CHECK(r.err.find("experiment.bogus: unknown key") != std::string::npos);
    const json e = read_json(box.dir / "o" / "error.json");
    CHECK(e["exit_code"] == 1);
    CHECK(e["error"] == "config");
  }

  SUBCASE("missing field") {
    std::string text = kFlat;
    text.replace(text.find("\"x_a\": [-0.4, 0.2], "), 20, "");
    const Outcome r = run("minimize", box.config(text), box.dir / "o");
    CHECK(r.code == 1);
    CHECK(r.err.find("experiment.x_a: missing required field") != std::string::npos);
  }

  SUBCASE("parse error position") {
    const std::string path = box.config("{\n  \"seed\": 1,\n  \"output\" \"x\"\n}\n");
    const Outcome r = run("minimize", path, box.dir / "o");
    CHECK(r.code == 1);
    // the parser reports the last byte of the offending token
    CHECK(r.err.find(path + ":3:14: invalid JSON") != std::string::npos);
  }

  SUBCASE("bad geom input") {
    const Outcome r = run("geom", "", box.dir / "o", "dist 0 0 0.5\n");
    CHECK(r.code == 1);
    CHECK(r.err.find("geom line 1") != std::string::npos);
  }
}

TEST_CASE("cli dry run") {
  Sandbox box("dry");
  const Outcome r = run("minimize", box.config(kFlat), box.dir / "o", "", 3, true);
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["subcommand"] == "minimize");
  CHECK(j["group"] == "octagon");
  CHECK(j["threads"] == 3);
  CHECK(j["solver"]["tol_grad"] == 1e-10);
  CHECK(j["experiment"]["a"] == 0.0);
  CHECK(j["potential"]["orbit_cutoff"].is_number());
  CHECK_FALSE(fs::exists(box.dir / "o"));
}

TEST_CASE("cli geom") {
  Sandbox box("geom");
  const Outcome r = run("geom", "", box.dir / "o", "# comment\ndist 0 0 0.5 0\nreduce 0.1 0.2\n");
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(first.rfind("dist,", 0) == 0);
  CHECK(std::stod(first.substr(5)) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(second.rfind("reduce,", 0) == 0);
}

TEST_CASE("cli numeric failures") {
  Sandbox box("numeric");
  const std::string text = R"({
    "potential": {"centers": [], "depth": 0.01, "bump_radius": 0.8},
    "experiment": {"K": 2, "N_list": [40], "gamma": [3.5, 0.4]}
  })";
  const Outcome r = run("shadow", box.config(text), box.dir / "o");
  CHECK(r.code == 2);
  const json e = read_json(box.dir / "o" / "error.json");
  CHECK(e["error"] == "boundary_overflow");
  CHECK(e["message"].get<std::string>().find("exceeds numerical horizon") != std::string::npos);
}

TEST_CASE("cli shadow is deterministic across thread counts") {
  Sandbox box("threads");
  const std::string text = R"({
    "potential": {"centers": [], "depth": 0.01, "bump_radius": 0.8},
    "experiment": {"K": 2, "N_list": [2, 3], "gamma": [3.5, 0.4], "nodes_per_unit": 8}
  })";
  const std::string cfg = box.config(text);
  REQUIRE(run("shadow", cfg, box.dir / "one", "", 1).code == 0);
  REQUIRE(run("shadow", cfg, box.dir / "two", "", 2).code == 0);
  for (const char* f : {"shadow.csv", "shadow_summary.json", "shadow_curve_N2.csv", "shadow_curve_N3.csv"}) {
    CHECK(slurp(box.dir / "one" / f) == slurp(box.dir / "two" / f));
  }
}

TEST_CASE("cli rejects K below the threshold before computing") {
  Sandbox box("k0");
  const std::string text = R"({
    "potential": {"centers": [[0.1, 0.05]], "depth": 0.1, "bump_radius": 0.8},
    "experiment": {"K": 2, "N_list": [2], "gamma": [3.5, 0.4]}
  })";
  const Outcome r = run("shadow", box.config(text), box.dir / "o", "", 1, true);
  CHECK(r.code == 1);
  CHECK(r.err.find("below the K0 threshold (K0 = 25.04") != std::string::npos);
}
