#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(MSDWR_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::filesystem::path scratch = std::filesystem::temp_directory_path() / "msdwr_cli_test";

}  // namespace

TEST_CASE("successful runs exit with 0 and write csv") {
  std::filesystem::create_directories(scratch);
  const auto out = scratch / "traj.csv";
  CHECK(run("multiscale --K 100000 --k 0.1 --out " + out.string()) == 0);
  CHECK(slurp(out).rfind("T,Y_1\n0,0\n", 0) == 0);
  const auto est = scratch / "est.csv";
  CHECK(run("estimate --K 100000 --k 0.1 --jref 0.46 --out " + est.string()) == 0);
  CHECK(slurp(est).rfind("n,T_start,T_end,k,eta_EG,eta_EF\n1,0,100000,", 0) == 0);
}

TEST_CASE("adapt writes a directory of traces") {
  const auto dir = scratch / "adapt";
  std::filesystem::remove_all(dir);
  CHECK(run("adapt --K 100000 --k 0.1 --iters 2 --out " + dir.string()) == 0);
  CHECK(slurp(dir / "summary.csv").rfind("l,N,J,eta_total,effort,cumulative_effort\n", 0) == 0);
  CHECK(std::filesystem::exists(dir / "mesh_1.csv"));
  CHECK(std::filesystem::exists(dir / "breakdown_2.csv"));
}

TEST_CASE("configuration errors exit with 2") {
  CHECK(run("") == 2);
  CHECK(run("nonsense") == 2);
  CHECK(run("multiscale --K 100000") == 2);
  CHECK(run("multiscale --K 70000 --k 0.1") == 2);
  CHECK(run("multiscale --K 100000 --k 0.3") == 2);
  CHECK(run("--problem osc3 multiscale --K 100000 --k 0.1") == 2);
  CHECK(run("multiscale --K 100000 --k 0.1 --tolp -1") == 2);
  CHECK(run("adapt --beta 0.5") == 2);
  CHECK(run("reference --ref-k 0.3") == 2);
}

TEST_CASE("config file supplies flags") {
  std::filesystem::create_directories(scratch);
  const auto ini = scratch / "run.ini";
  std::ofstream(ini) << "problem=osc2\nK=100000\nk=0.1\n";
  const auto out = scratch / "osc2.csv";
  CHECK(run("multiscale --config " + ini.string() + " --out " + out.string()) == 0);
  CHECK(slurp(out).find("\n600000,") != std::string::npos);
}

TEST_CASE("solver failures exit with 1") {
  CHECK(run("multiscale --K 600000 --k 0.1 --tolp 1e-300") == 1);
}
