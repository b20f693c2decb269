#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include <json.hpp>

#include "sltrl/artifacts.hpp"
#include "sltrl/errors.hpp"
#include "sltrl/experiment.hpp"

using namespace sltrl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sltrl_test_experiment_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string tiny_config(const fs::path& out, const std::string& extra_llc = "") {
  return R"({
  "env": {"interior_size": 3, "t_max": 6, "gamma": 0.9},
  "model": {"kind": "mlp", "widths": [16]},
  "train": {"batch_size": 32, "learning_rate": 0.01, "gradient_steps": 150,
            "checkpoints": {"log_spaced_count": 14}},
  "llc": {"chain_length": 60, "num_chains": 2, "batch_size": 32, "step_size": 1e-5)" +
         extra_llc + R"(},
  "seeds": [3],
  "output_dir": ")" + out.string() + R"("
})";
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config fills the reference defaults") {
  const ExperimentConfig c = parse_config(R"({"env": {"interior_size": 5}})");
  CHECK(c.env.interior_size == 5);
  CHECK(c.env.t_max == 64);
  CHECK(c.env.gamma == 0.975);
  CHECK(c.train.learning_rate == 5e-5);
  CHECK(c.train.batch_size == 9600);
  CHECK(c.train.total_env_steps == 5'000'000'000LL);
  CHECK(c.train.resolved_gradient_steps(c.env) == 5'000'000'000LL / (9600 * 64));
  CHECK(c.llc.sigma2 == 1.0 / 200.0);
  CHECK(c.llc.n_beta == 1000.0);
  CHECK(c.llc.chain_length == 6000);
  CHECK(c.llc.num_chains == 5);
  CHECK(c.llc.eval_gamma == 0.975);
  CHECK(c.arch.kind == ArchKind::ConvResidual);
  CHECK(c.arch.grid_side == 7);
  CHECK(c.delta == kDefaultPhaseDelta);
  CHECK(c.seeds == std::vector<std::uint64_t>{0});
}

TEST_CASE("the LLC evaluation distribution follows training unless set") {
  const ExperimentConfig a =
      parse_config(R"({"env": {"gamma": 0.9}, "train": {"alpha": 0.5}})");
  CHECK(a.llc.eval_gamma == 0.9);
  CHECK(a.llc.eval_alpha == 0.5);
  const ExperimentConfig b = parse_config(
      R"({"env": {"gamma": 0.9}, "llc": {"eval_gamma": 0.99, "eval_alpha": 1.0}})");
  CHECK(b.llc.eval_gamma == 0.99);
  CHECK(b.llc.eval_alpha == 1.0);
}

TEST_CASE("config errors name the key and the line") {
  const std::string neg = config_error("{\n  \"env\": {\n    \"t_max\": -3\n  }\n}");
  CHECK(neg.find("cfg.json:3") != std::string::npos);
  CHECK(neg.find("t_max") != std::string::npos);

  const std::string unknown = config_error("{\n  \"env\": {\"interior\": 5}\n}");
  CHECK(unknown.find("env.interior") != std::string::npos);
  CHECK(unknown.find("unknown key") != std::string::npos);
  CHECK(unknown.find("cfg.json:2") != std::string::npos);

  CHECK(config_error(R"({"bogus": 1})").find("bogus") != std::string::npos);
  CHECK(config_error(R"({"train": {"checkpoints": {"every": 3}}})").find("train.checkpoints.every") !=
        std::string::npos);
  CHECK(config_error(R"({"env": {"gamma": "high"}})").find("wrong type") != std::string::npos);
  CHECK(config_error(R"({"llc": {"mode": "magic"}})").find("llc.mode") != std::string::npos);
  CHECK(config_error(R"({"seeds": []})").find("seeds") != std::string::npos);
  CHECK(config_error(R"({"detection": {"delta": 1.5}})").find("detection.delta") != std::string::npos);
  CHECK(config_error(R"({"llc": {"sigma2": 0}})").find("sigma2") != std::string::npos);

  const std::string syntax = config_error("{\n  \"env\": {\n    \"t_max\": 3,\n  }\n}");
  CHECK(syntax.find("cfg.json:4:") != std::string::npos);
  CHECK(syntax.find("syntax") != std::string::npos);

  CHECK_THROWS_AS(load_config("/nonexistent/cfg.json"), IoError);
}

TEST_CASE("resolved config round-trips and hashes ignore output placement") {
  ExperimentConfig c = parse_config(tiny_config("/tmp/x", R"(, "preconditioner": "rms", "extra_steps": [4])"));
  const json j = config_to_json(c);
  const ExperimentConfig back = parse_config(j.dump());
  CHECK(config_to_json(back) == j);
  ExperimentConfig moved = c;
  moved.output_dir = "/elsewhere";
  moved.workers = 7;
  CHECK(config_hash(moved) == config_hash(c));
  moved.train.learning_rate *= 2;
  CHECK(config_hash(moved) != config_hash(c));
}

TEST_CASE("SLTRL_THREADS caps the worker count") {
  ::unsetenv("SLTRL_THREADS");
  CHECK(effective_workers(6) == 6);
  CHECK(effective_workers(0) == 1);
  ::setenv("SLTRL_THREADS", "2", 1);
  CHECK(effective_workers(6) == 2);
  CHECK(effective_workers(1) == 1);
  ::setenv("SLTRL_THREADS", "junk", 1);
  CHECK(effective_workers(6) == 6);
  ::unsetenv("SLTRL_THREADS");
}

TEST_CASE("tertile checkpoints sit at 1/3 and 2/3 of log(step + 1)") {
  std::vector<std::int64_t> steps;
  for (int k = 0; k <= 10; ++k) steps.push_back((1 << k) - 1);  // log2(step + 1) = k
  std::vector<StageInterval> stages = {{Stage::S1, "P1", 1, 7, 1, 127},
                                       {Stage::S2, "P2", 8, 8, 255, 255}};
  const auto picks = tertile_checkpoints(stages, steps);
  REQUIRE(picks.size() == 3);
  CHECK(picks[0].index == 3);  // 1 + 6/3
  CHECK(picks[1].index == 5);
  CHECK(picks[0].tertile == 1);
  CHECK(picks[1].tertile == 2);
  CHECK(picks[2].index == 8);  // a one-checkpoint stage yields a single pick
  CHECK(picks[2].stage == Stage::S2);
  stages[1].last_index = 30;
  CHECK_THROWS_AS(tertile_checkpoints(stages, steps), ConfigError);
}

TEST_CASE("staircase check on constructed series") {
  std::vector<CheckpointEntry> metrics;
  const std::vector<double> regrets = {0.7, 0.6, 0.55, 0.5, 0.45, 0.2, 0.1, 0.05, 0.02};
  for (std::size_t i = 0; i < regrets.size(); ++i) {
    CheckpointEntry e;
    e.step = static_cast<std::int64_t>(i * 10);
    e.regret.regret = regrets[i];
    metrics.push_back(e);
  }
  PhaseAnalysis pa;
  pa.full_staircase = true;
  pa.stages = {{Stage::S1, "P1", 0, 2, 0, 20}, {Stage::S2, "P2", 3, 5, 30, 50}, {Stage::S3, "P3", 6, 8, 60, 80}};
  std::vector<LlcRecord> llc;
  auto add = [&](const char* st, double lam) {
    LlcRecord r;
    r.stage = st;
    r.estimate.lambda_hat = lam;
    llc.push_back(r);
  };
  add("P1", 1.0), add("P1", 3.0), add("P2", 5.0), add("P2", 6.0), add("P3", 9.0), add("P3", 12.0);
  add("", 100.0);  // unscheduled estimates do not count
  StaircaseCheck c = check_staircase(metrics, pa, llc);
  CHECK(c.pass());
  CHECK(c.stages[0].median_regret == doctest::Approx(0.6));
  CHECK(*c.stages[1].median_llc == doctest::Approx(5.5));
  CHECK(c.stages[2].llc_count == 2);

  llc[4].estimate.lambda_hat = 2.0;
  llc[5].estimate.lambda_hat = 3.0;
  c = check_staircase(metrics, pa, llc);
  CHECK(c.ordered);
  CHECK(c.regret_decreasing);
  CHECK_FALSE(c.llc_increasing);

  pa.full_staircase = false;
  CHECK_FALSE(check_staircase(metrics, pa, llc).ordered);
}

TEST_CASE("reproduce writes a consistent, deterministic run") {
  const fs::path a = scratch("a"), b = scratch("b");
  ExperimentConfig ca = parse_config(tiny_config(a / "out"));
  ExperimentConfig cb = parse_config(tiny_config(b / "out"));
  cb.workers = 2;  // chain parallelism must not change results
  const auto ra = reproduce(ca);
  const auto rb = reproduce(cb);
  REQUIRE(ra.size() == 1);
  REQUIRE(ra[0].ok);
  REQUIRE(rb[0].ok);
  const fs::path da = a / "out" / "seed_3", db = b / "out" / "seed_3";

  for (const char* f : {"metrics.csv", "phases.csv", "transitions.json", "llc.json", "chains.csv",
                        "staircase.csv", "staircase.svg", "analysis.json"}) {
    CAPTURE(f);
    CHECK(read_text(da / f) == read_text(db / f));
  }
  CHECK(read_text(a / "out" / "summary.json") == read_text(b / "out" / "summary.json"));

  // every manifest entry exists and hashes to the recorded value
  const json m = json::parse(read_text(da / "manifest.json"));
  CHECK(m["status"] == "complete");
  CHECK(m["config_hash"] == config_hash(ca));
  CHECK(m["files"].size() > 10);
  for (const auto& [name, hash] : m["files"].items()) {
    CAPTURE(name);
    REQUIRE(fs::exists(da / name));
    CHECK(sha256_file(da / name) == hash.get<std::string>());
  }
  for (const auto& c : m["checkpoints"]) CHECK(fs::exists(da / c["file"].get<std::string>()));

  // metrics.csv parses back to the values reported in the manifest
  const auto metrics = read_metrics(da);
  REQUIRE(metrics.size() == m["checkpoints"].size());
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    CHECK(metrics[i].step == m["checkpoints"][i]["step"].get<std::int64_t>());
    CHECK(metrics[i].regret.regret == m["checkpoints"][i]["regret"].get<double>());
  }

  // standalone detection on the same checkpoints agrees with the manifest
  const json before = m["transitions"];
  const PhaseAnalysis again = detect_phases(da, ca.env, ca.delta);
  CHECK(transitions_to_json(again, ca.delta) == before);

  // plot bands and staircase rows match transitions.json
  const json tj = json::parse(read_text(da / "transitions.json"));
  const auto bands = parse_svg_bands(read_text(da / "staircase.svg"));
  REQUIRE(bands.size() == tj["stages"].size());
  for (std::size_t i = 0; i < bands.size(); ++i) {
    CHECK(bands[i].label == tj["stages"][i]["label"].get<std::string>());
    CHECK(bands[i].first_step == tj["stages"][i]["first_step"].get<std::int64_t>());
    CHECK(bands[i].last_step == tj["stages"][i]["last_step"].get<std::int64_t>());
  }
  const CsvTable st = read_csv(da / "staircase.csv");
  CHECK(st.header == std::vector<std::string>{"checkpoint", "regret", "llc", "phase"});
  CHECK(st.rows.size() == metrics.size());

  // llc.json estimates land on the staircase rows with matching steps
  const json lj = json::parse(read_text(da / "llc.json"));
  for (const auto& e : lj["estimates"]) {
    bool found = false;
    for (const auto& row : st.rows) {
      if (std::stoll(row[0]) == e["step"].get<std::int64_t>()) {
        CHECK(parse_double(row[2]) == e["lambda_hat"].get<double>());
        found = true;
      }
    }
    CHECK(found);
  }

  // the file-based staircase check agrees with the in-memory one
  REQUIRE(ra[0].staircase);
  CHECK(check_staircase_dir(da).to_json() == ra[0].staircase->to_json());
  const auto phase_rows = read_phase_csv(da / "phases.csv", ca.delta);
  CHECK(transitions_to_json(analyze_phase_readings(phase_rows, ca.delta), ca.delta)["stages"] ==
        tj["stages"]);
}

TEST_CASE("a run without LLC data plots regret only with an empty llc column") {
  const fs::path a = scratch("nollc");
  ExperimentConfig c = parse_config(tiny_config(a / "out", R"(, "schedule": "none")"));
  const auto r = reproduce(c);
  REQUIRE(r[0].ok);
  const fs::path d = a / "out" / "seed_3";
  const CsvTable st = read_csv(d / "staircase.csv");
  for (const auto& row : st.rows) {
    CHECK(row.size() == 4);
    CHECK(row[2].empty());
  }
  CHECK(read_text(d / "staircase.svg").find("class=\"llc\"") == std::string::npos);
  fs::remove(d / "metrics.csv");
  CHECK_THROWS_AS(emit_plots(d), IoError);
}

TEST_CASE("a failing stage leaves a partial manifest") {
  const fs::path a = scratch("fail");
  ExperimentConfig c = parse_config(tiny_config(a / "out", R"(, "extra_steps": [999999])"));
  const auto r = reproduce(c);
  CHECK_FALSE(r[0].ok);
  CHECK(r[0].exit_code == static_cast<int>(ExitCode::Config));
  const fs::path d = a / "out" / "seed_3";
  const json m = json::parse(read_text(d / "manifest.json"));
  CHECK(m["status"] == "failed");
  CHECK(m["failed_stage"] == "estimate_llc");
  CHECK(m["stages_completed"] == json::array({"train", "detect_phases"}));
  CHECK(m["files"].contains("metrics.csv"));
  CHECK(m["files"].contains("phases.csv"));
}
