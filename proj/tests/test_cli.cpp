// End-to-end checks of the installed command line binary. The binary path
// comes from the build system via FEQR_CLI_PATH.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "feqr/panel_io.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const fs::path tmp = fs::temp_directory_path() / "feqr_cli_out.txt";
  const std::string cmd =
      std::string(FEQR_CLI_PATH) + " " + args + " > " + tmp.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  std::ifstream in(tmp);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(status), ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("generate writes a valid, reproducible panel") {
  const fs::path dir = fs::temp_directory_path() / "feqr_cli_gen";
  fs::create_directories(dir);
  const auto p1 = dir / "a.csv";
  const auto p2 = dir / "b.csv";
  REQUIRE(run_cli("generate --n 10 --t 5 --seed 1 --out " + p1.string()).exit_code == 0);
  REQUIRE(run_cli("generate --n 10 --t 5 --seed 1 --out " + p2.string()).exit_code == 0);
  CHECK(slurp(p1) == slurp(p2));

  const auto panel = feqr::load_panel(p1.string());
  CHECK(panel.n_units() == 10);
  CHECK(panel.n_periods() == 5);
  CHECK(feqr::validate(panel).empty());
}

TEST_CASE("generate then fit recovers the slope") {
  const fs::path dir = fs::temp_directory_path() / "feqr_cli_fit";
  fs::create_directories(dir);
  const auto data = dir / "panel.csv";
  REQUIRE(run_cli("generate --n 400 --t 40 --seed 9 --out " + data.string()).exit_code ==
          0);
  const auto res = run_cli("fit --data " + data.string() + " --tau 0.5 --csv");
  REQUIRE(res.exit_code == 0);

  // parse our own CSV output (closed loop)
  std::istringstream in(res.out);
  std::string line;
  std::getline(in, line);
  REQUIRE(line ==
          "tau,method,coefficient,estimate,std_error,lower,upper,level,bandwidth");
  bool saw_robust = false, saw_standard = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tau, method, coef, est;
    std::getline(ls, tau, ',');
    std::getline(ls, method, ',');
    std::getline(ls, coef, ',');
    std::getline(ls, est, ',');
    const double beta_hat = std::stod(est);
    CHECK(std::abs(beta_hat - 1.0) < 0.1);
    saw_robust |= method == "robust";
    saw_standard |= method == "standard";
  }
  CHECK(saw_robust);
  CHECK(saw_standard);
}

TEST_CASE("fit exit codes") {
  CHECK(run_cli("fit --data /nonexistent/file.csv --tau 0.5").exit_code == 3);

  const fs::path dir = fs::temp_directory_path() / "feqr_cli_err";
  fs::create_directories(dir);
  const auto data = dir / "panel.csv";
  run_cli("generate --n 5 --t 4 --seed 2 --out " + data.string());
  CHECK(run_cli("fit --data " + data.string() + " --tau 1.5").exit_code == 2);
  CHECK(run_cli("fit --data " + data.string() + " --method bogus").exit_code == 2);

  // unbalanced data -> exit 3
  const auto bad = dir / "bad.csv";
  std::ofstream out(bad);
  out << "unit,time,y,x1\na,t1,1,2\na,t2,2,1\nb,t1,0,1\n";
  out.close();
  CHECK(run_cli("fit --data " + bad.string() + " --tau 0.5").exit_code == 3);
}

TEST_CASE("simulate produces deterministic tables") {
  const fs::path dir = fs::temp_directory_path() / "feqr_cli_sim";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto cfg = dir / "study.cfg";
  {
    std::ofstream out(cfg);
    out << "n_units = 40\nn_periods = 8\ntaus = 0.5\nreplications = 3\n"
        << "base_seed = 77\n";
  }
  const auto out1 = dir / "run1";
  const auto out2 = dir / "run2";
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + out1.string() +
                  " --workers 2")
              .exit_code == 0);
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + out2.string() +
                  " --workers 1")
              .exit_code == 0);
  for (const char* name : {"report.csv", "table1.csv", "table2.csv"}) {
    CHECK(fs::exists(out1 / name));
    CHECK(slurp(out1 / name) == slurp(out2 / name));
  }

  const auto bad_cfg = dir / "bad.cfg";
  {
    std::ofstream out(bad_cfg);
    out << "nonsense_key = 1\n";
  }
  CHECK(run_cli("simulate --config " + bad_cfg.string()).exit_code == 2);
  CHECK(run_cli("simulate --config /nonexistent.cfg").exit_code == 3);
}

TEST_CASE("simulate smoke on the bundled grid config") {
  const fs::path dir = fs::temp_directory_path() / "feqr_cli_bundled";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto res = run_cli("simulate --config " + std::string(FEQR_SOURCE_DIR) +
                           "/config/paper_tables.cfg --out " + dir.string() +
                           " --replications 2");
  REQUIRE(res.exit_code == 0);
  // 6 (N,T) cells x 3 taus
  const auto report = slurp(dir / "report.csv");
  CHECK(std::count(report.begin(), report.end(), '\n') == 19);
  const auto t1 = slurp(dir / "table1.csv");
  CHECK(std::count(t1.begin(), t1.end(), '\n') == 7);
}
