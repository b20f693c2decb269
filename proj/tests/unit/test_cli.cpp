#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "sltrl/artifacts.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "sltrl_test_cli";

int run(const std::string& args, const std::string& out_file = "") {
  const std::string redirect = out_file.empty() ? " > /dev/null 2>&1" : " > " + out_file + " 2>/dev/null";
  const int status = std::system((std::string(SLTRL_CLI) + " " + args + redirect).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("command-line exit codes") {
  fs::remove_all(kDir);
  fs::create_directories(kDir);
  write(kDir / "bad.json", R"({"env": {"t_max": -1}})");
  write(kDir / "unknown.json", R"({"colour": "red"})");
  CHECK(run("reproduce --config " + (kDir / "bad.json").string()) == 2);
  CHECK(run("reproduce --config " + (kDir / "unknown.json").string()) == 2);
  CHECK(run("reproduce --config " + (kDir / "missing.json").string()) == 4);
  CHECK(run("no-such-command") == 2);
  CHECK(run("detect-phases --run " + (kDir / "nowhere").string()) == 4);
  CHECK(run("analyze") == 2);
  CHECK(run("--version") == 0);
}

TEST_CASE("train, detect-phases, estimate-llc and analyze from the command line") {
  fs::remove_all(kDir);
  fs::create_directories(kDir);
  const fs::path run_dir = kDir / "run";
  write(kDir / "cfg.json", R"({
    "env": {"interior_size": 3, "t_max": 6, "gamma": 0.9},
    "model": {"kind": "mlp", "widths": [8]},
    "train": {"batch_size": 16, "learning_rate": 0.01, "gradient_steps": 40,
              "checkpoints": {"log_spaced_count": 8}},
    "llc": {"chain_length": 20, "num_chains": 1, "batch_size": 8},
    "seeds": [5]
  })");
  REQUIRE(run("train --config " + (kDir / "cfg.json").string() + " --out " + run_dir.string()) == 0);
  CHECK(fs::exists(run_dir / "metrics.csv"));
  CHECK(fs::exists(run_dir / "ckpt" / "step_0000000040.bin"));

  REQUIRE(run("detect-phases --run " + run_dir.string() + " --delta 0.2") == 0);
  CHECK(nlohmann::json::parse(sltrl::read_text(run_dir / "transitions.json"))["delta"] == 0.2);
  CHECK(run("detect-phases --run " + run_dir.string() + " --delta 1.5") == 2);

  const fs::path llc_dir = kDir / "llc";
  REQUIRE(run("estimate-llc --checkpoint " + (run_dir / "ckpt" / "step_0000000040.bin").string() +
              " --out " + llc_dir.string()) == 0);
  const auto lj = nlohmann::json::parse(sltrl::read_text(llc_dir / "llc.json"));
  CHECK(lj["estimates"].size() == 1);
  CHECK(lj["estimates"][0]["step"] == 40);
  CHECK(sltrl::read_csv(llc_dir / "chains.csv").rows.size() == 20);

  REQUIRE(run("plot --run " + run_dir.string()) == 0);
  CHECK(fs::exists(run_dir / "staircase.svg"));

  write(kDir / "fit.csv",
        "alpha,gamma,entry_step\n0.5,0.9,4\n0.6,0.95,9\n0.7,0.9,5\n0.8,0.99,20\n0.9,0.95,10\n");
  const std::string out = (kDir / "fit.json").string();
  REQUIRE(run("analyze --fit " + (kDir / "fit.csv").string() + " --critical-n 1 0.01", out) == 0);
  const auto aj = nlohmann::json::parse(sltrl::read_text(out));
  CHECK(aj.contains("fit"));
  CHECK(aj["critical_n"]["n_star"].get<double>() > 600.0);
}
