#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Sandbox {
  fs::path dir;
  Sandbox() {
    dir = fs::temp_directory_path() / ("fibermc_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }
  [[nodiscard]] std::string path(const std::string& name) const { return (dir / name).string(); }
};

const char* kConfig =
    "mu_s = 73\nmu_a = 1.39\ng = 0.9\nalpha = 0.31415926535897931\nc = 1\n"
    "voxel_edge = 0.04\ngrid_radius = 20\n"
    "M = 600\nM_points = 5\nM_rot = 4\nT = 3000\n"
    "fit_M = 300\nfit_M_points = 5\nfit_M_rot = 3\niter_cap = 3\n";

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const std::string& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

int run(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "fibermc");
  std::ostringstream out, err;
  const int code = fibermc::cli::run(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

/// Summary without the wall-time line.
std::string stable_summary(const std::string& path) {
  std::istringstream in(slurp(path));
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind("# wall_time_s", 0) != 0) out += line + "\n";
  }
  return out;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("simulate is deterministic across runs and thread counts") {
    Sandbox sb;
    spit(sb.path("c.conf"), kConfig);
    for (const std::string method : {"mc", "mc-some", "mh"}) {
      CAPTURE(method);
      REQUIRE(run({"simulate", "--config", sb.path("c.conf"), "--method", method, "--seed", "9", "--out",
                   sb.path("a.csv"), "--threads", "1"}) == 0);
      REQUIRE(run({"simulate", "--config", sb.path("c.conf"), "--method", method, "--seed", "9", "--out",
                   sb.path("b.csv"), "--threads", "4"}) == 0);
      CHECK(slurp(sb.path("a.csv")) == slurp(sb.path("b.csv")));
      CHECK(stable_summary(sb.path("a.csv.summary")) == stable_summary(sb.path("b.csv.summary")));
      CHECK(line_count(slurp(sb.path("a.csv"))) == 41u * 41u * 41u + 1u);
      const std::string summary = slurp(sb.path("a.csv.summary"));
      CHECK(summary.find("# method = " + method) != std::string::npos);
      CHECK((summary.find("acceptance_rate") != std::string::npos) == (method == "mh"));
    }
  }

  TEST_CASE("the summary is itself a config that reproduces the run") {
    Sandbox sb;
    spit(sb.path("c.conf"), kConfig);
    REQUIRE(run({"simulate", "--config", sb.path("c.conf"), "--method", "mc-some", "--seed", "3", "--out",
                 sb.path("a.csv")}) == 0);
    REQUIRE(run({"simulate", "--config", sb.path("a.csv.summary"), "--method", "mc-some", "--seed", "3", "--out",
                 sb.path("b.csv")}) == 0);
    CHECK(slurp(sb.path("a.csv")) == slurp(sb.path("b.csv")));
  }

  TEST_CASE("errors and exit codes") {
    Sandbox sb;
    spit(sb.path("c.conf"), kConfig);
    std::string err;
    CHECK(run({"simulate", "--config", sb.path("c.conf"), "--method", "bogus", "--out", sb.path("x.csv")}, &err) == 2);
    CHECK(err.find("bogus") != std::string::npos);
    std::string cfg = kConfig;
    cfg.erase(cfg.find("mu_a = 1.39\n"), std::string("mu_a = 1.39\n").size());
    spit(sb.path("missing.conf"), cfg);
    CHECK(run({"simulate", "--config", sb.path("missing.conf"), "--out", sb.path("x.csv")}, &err) == 2);
    CHECK(err.find("mu_a") != std::string::npos);
    CHECK(run({"simulate", "--config", sb.path("c.conf"), "--out", sb.path("nodir/x.csv")}) == 3);
    CHECK(run({"simulate", "--config", sb.path("c.conf")}) == 2);
    CHECK(run({"frobnicate"}) == 2);
    CHECK(run({"--help"}) == 0);
  }

  TEST_CASE("extract-line") {
    Sandbox sb;
    spit(sb.path("c.conf"), kConfig);
    REQUIRE(run({"simulate", "--config", sb.path("c.conf"), "--method", "mc", "--seed", "1", "--out",
                 sb.path("f.csv")}) == 0);
    REQUIRE(run({"extract-line", "--field", sb.path("f.csv"), "--line-axis", "y", "--line-through", "0,0,0", "--out",
                 sb.path("l.csv")}) == 0);
    const std::string text = slurp(sb.path("l.csv"));
    CHECK(text.rfind("coord,fluence,stderr\n", 0) == 0);
    CHECK(line_count(text) == 41u + 1u);
    CHECK(run({"extract-line", "--field", sb.path("f.csv"), "--line-axis", "y", "--line-through", "3,0,0", "--out",
               sb.path("l2.csv")}) == 2);
    CHECK(run({"extract-line", "--field", sb.path("f.csv"), "--line-axis", "w", "--out", sb.path("l3.csv")}) == 2);
  }

  TEST_CASE("replicate") {
    Sandbox sb;
    spit(sb.path("c.conf"), kConfig);
    REQUIRE(run({"replicate", "--config", sb.path("c.conf"), "--method", "mc-some", "--replicates", "3", "--seed",
                 "2", "--out", sb.path("r.csv")}) == 0);
    const std::string named = slurp(sb.path("r.csv.voxels.csv"));
    CHECK(named.rfind("voxel,x,y,z,mean,mse\nv1,", 0) == 0);
    CHECK(line_count(named) == 7u);
    std::istringstream in(slurp(sb.path("r.csv")));
    std::string line;
    std::getline(in, line);
    CHECK(line == "ix,iy,iz,x,y,z,mean,mse");
    bool nonneg = true;
    while (std::getline(in, line)) nonneg = nonneg && line.substr(line.rfind(',') + 1)[0] != '-';
    CHECK(nonneg);
    REQUIRE(run({"replicate", "--config", sb.path("c.conf"), "--method", "mh", "--replicates", "2", "--seed", "2",
                 "--out", sb.path("m1.csv"), "--threads", "1"}) == 0);
    REQUIRE(run({"replicate", "--config", sb.path("c.conf"), "--method", "mh", "--replicates", "2", "--seed", "2",
                 "--out", sb.path("m2.csv"), "--threads", "2"}) == 0);
    CHECK(slurp(sb.path("m1.csv")) == slurp(sb.path("m2.csv")));
    CHECK(run({"replicate", "--config", sb.path("c.conf"), "--replicates", "1", "--out", sb.path("r1.csv")}) == 2);
  }

  TEST_CASE("measure, fit and scan") {
    Sandbox sb;
    spit(sb.path("c.conf"), kConfig);
    REQUIRE(run({"measure", "--config", sb.path("c.conf"), "--seed", "4", "--out", sb.path("m.csv"), "--positions",
                 "0,0.2,0;0,0,-0.2"}) == 0);
    CHECK(line_count(slurp(sb.path("m.csv"))) == 3u);
    REQUIRE(run({"fit", "--config", sb.path("c.conf"), "--measurements", sb.path("m.csv"), "--seed", "5", "--out",
                 sb.path("t1.csv"), "--threads", "1"}) == 0);
    REQUIRE(run({"fit", "--config", sb.path("c.conf"), "--measurements", sb.path("m.csv"), "--seed", "5", "--out",
                 sb.path("t2.csv"), "--threads", "3"}) == 0);
    const std::string trace = slurp(sb.path("t1.csv"));
    CHECK(trace == slurp(sb.path("t2.csv")));
    const std::string summary = slurp(sb.path("t1.csv.summary"));
    const auto pos = summary.find("# iterations = ");
    REQUIRE(pos != std::string::npos);
    CHECK(std::stoul(summary.substr(pos + 15)) + 1 == line_count(trace));

    spit(sb.path("empty.csv"), "x,y,z,value\n");
    std::string err;
    CHECK(run({"fit", "--config", sb.path("c.conf"), "--measurements", sb.path("empty.csv"), "--out",
               sb.path("t3.csv")}, &err) == 2);
    CHECK(err.find("no data") != std::string::npos);

    REQUIRE(run({"scan", "--config", sb.path("c.conf"), "--measurements", sb.path("m.csv"), "--grid",
                 "g=0.9;mu_a=1,1.5;mu_s=73", "--seed", "6", "--out", sb.path("s1.csv")}) == 0);
    REQUIRE(run({"scan", "--config", sb.path("c.conf"), "--measurements", sb.path("m.csv"), "--grid",
                 "g=0.9;mu_a=1,1.5;mu_s=73", "--seed", "6", "--out", sb.path("s2.csv"), "--threads", "2"}) == 0);
    CHECK(slurp(sb.path("s1.csv")) == slurp(sb.path("s2.csv")));
    CHECK(line_count(slurp(sb.path("s1.csv"))) == 3u);
    CHECK(run({"scan", "--config", sb.path("c.conf"), "--measurements", sb.path("m.csv"), "--grid", "q=1", "--out",
               sb.path("s3.csv")}) == 2);
  }
}
