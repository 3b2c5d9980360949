#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("tvarch_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& stdout_file = "") {
  std::string cmd = std::string(TVARCH_CLI) + " " + args;
  cmd += stdout_file.empty() ? " > /dev/null 2>&1" : " > " + stdout_file + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string series_file() {
  static const std::string path = [] {
    const auto p = (workdir() / "series.csv").string();
    REQUIRE(run("simulate --design constancy-power --setup 1 --T 600 --seed 3 --csv " + p) == 0);
    return p;
  }();
  return path;
}

}  // namespace

TEST_CASE("simulate writes a loadable series") {
  const std::string csv = series_file();
  const auto out = (workdir() / "fit.json").string();
  REQUIRE(run("fit --input " + csv + " --p 1 --bandwidth 0.2 --json", out) == 0);
  const auto j = nlohmann::json::parse(slurp(out));
  CHECK(j["schema_version"] == 1);
  CHECK(j["command"] == "fit");
  CHECK(j["result"]["beta"].size() == 1);
  CHECK(j["result"]["alpha"].size() == 599);
}

TEST_CASE("exit codes") {
  const std::string csv = series_file();
  CHECK(run("fit --input /nonexistent.csv --p 1 --bandwidth 0.2") == 2);
  CHECK(run("fit --input " + csv + " --p 1") == 2);
  CHECK(run("fit --input " + csv + " --p 1 --bandwidth 0.2 --partition \"varying=0 constant=0\"") == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("fit --input " + csv + " --p 1 --bandwidth 0.2 --mode prices") == 2);

  const auto ones = (workdir() / "ones.csv").string();
  {
    std::ofstream f(ones);
    for (int i = 0; i < 200; ++i) f << "1\n";
  }
  CHECK(run("select-bandwidth --input " + ones + " --p 1") == 3);
  CHECK(run("fit --input " + csv + " --p 1 --bandwidth 0.2") == 0);
}

TEST_CASE("plot and curve files are CSV") {
  const std::string csv = series_file();
  const auto plot = (workdir() / "alpha.csv").string();
  const auto curve = (workdir() / "cv.csv").string();
  REQUIRE(run("fit --input " + csv + " --p 1 --cv --plug-in --plot-out " + plot) == 0);
  REQUIRE(run("select-bandwidth --input " + csv + " --p 1 --semiparametric --curve-out " + curve) == 0);
  std::istringstream a(slurp(plot));
  std::string header;
  std::getline(a, header);
  CHECK(header == "u,a0,se0");
  std::size_t rows = 0;
  for (std::string line; std::getline(a, line);) ++rows;
  CHECK(rows == 599);
  CHECK(slurp(curve).rfind("b,cv\n", 0) == 0);
}
