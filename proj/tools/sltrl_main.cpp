// Command-line driver: train / estimate-llc / detect-phases / analyze /
// reproduce / plot / oracle-check.
//
// Exit codes: 0 ok, 2 configuration error, 3 numeric abort (or a failed
// oracle check), 4 I/O error.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oracles/oracles.hpp"
#include "sltrl/analysis.hpp"
#include "sltrl/artifacts.hpp"
#include "sltrl/checkpoint.hpp"
#include "sltrl/errors.hpp"
#include "sltrl/evaluator.hpp"
#include "sltrl/experiment.hpp"
#include "sltrl/random.hpp"
#include "sltrl/validation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sltrl;

namespace {

ExperimentConfig config_for_run(const fs::path& run_dir, const std::string& config_path) {
  if (!config_path.empty()) return load_config(config_path);
  const fs::path p = run_dir / "config.json";
  if (!fs::exists(p)) throw IoError("no --config given and " + p.string() + " missing");
  json j = json::parse(read_text(p));
  j.erase("seed");
  return parse_config(j.dump(), p.string());
}

std::uint64_t run_seed(const fs::path& run_dir) {
  const fs::path p = run_dir / "config.json";
  if (!fs::exists(p)) return 0;
  return json::parse(read_text(p)).value("seed", std::uint64_t{0});
}

// ------------------------------------------------------------ analyze inputs

std::vector<TransitionRecord> read_transition_records(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t ca = t.column("alpha"), cg = t.column("gamma"), cs = t.column("entry_step");
  std::vector<TransitionRecord> out;
  for (const auto& row : t.rows) {
    TransitionRecord r;
    r.alpha = parse_double(row[ca]);
    r.gamma = parse_double(row[cg]);
    r.entry_step = parse_double(row[cs]);
    auto it = std::find(t.header.begin(), t.header.end(), "label");
    if (it != t.header.end()) r.label = row[static_cast<std::size_t>(it - t.header.begin())];
    out.push_back(r);
  }
  return out;
}

std::vector<PhaseTriple> read_triples(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t a = t.column("g1"), b = t.column("lambda1"), c = t.column("g2b"),
                    d = t.column("lambda2b"), e = t.column("g3"), f = t.column("lambda3");
  std::vector<PhaseTriple> out;
  for (const auto& row : t.rows) {
    out.push_back(PhaseTriple{parse_double(row[a]), parse_double(row[b]), parse_double(row[c]),
                              parse_double(row[d]), parse_double(row[e]), parse_double(row[f])});
  }
  return out;
}

// ------------------------------------------------------------ oracle-check

PolicyTable random_table(const EnvSpec& spec, std::uint64_t seed) {
  const StateIndexer idx(spec);
  PolicyTable t;
  t.interior_size = spec.interior_size;
  t.probs.resize(idx.num_rows() * kNumActions);
  Rng rng = make_rng(seed, 0x0C);
  std::normal_distribution<double> n(0.0, 1.5);
  for (std::size_t r = 0; r < idx.num_rows(); ++r) {
    double z[kNumActions], s = 0.0;
    for (double& v : z) s += (v = std::exp(n(rng)));
    for (int a = 0; a < kNumActions; ++a) t.probs[r * kNumActions + static_cast<std::size_t>(a)] = z[a] / s;
  }
  return t;
}

json oracle_check(bool quick, int workers, bool& all_pass) {
  json out;
  all_pass = true;
  auto note = [&](bool ok) {
    all_pass = all_pass && ok;
    return ok;
  };

  json rlct = json::array();
  for (int d : {1, 2, 8}) {
    rlct.push_back({{"kind", "quadratic"}, {"d", d}, {"lambda", oracles::analytic_rlct_quadratic(d)}});
  }
  rlct.push_back({{"kind", "monomial"},
                  {"exponents", {2, 2}},
                  {"lambda", oracles::analytic_rlct_monomial({2, 2})}});
  out["analytic_rlct"] = rlct;

  // Exact dynamic programming against exhaustive enumeration on a 3x3 interior.
  EnvSpec spec;
  spec.interior_size = 3;
  spec.t_max = 6;
  spec.gamma = 0.9;
  const InitDistribution dist{0.68};
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const PolicyTable t = random_table(spec, s);
    const double dp = exact_return(t, spec, dist);
    const double en = oracles::enumerated_return({3, 6, 0.9}, 0.68, t.probs);
    worst = std::max(worst, std::abs(dp - en));
  }
  out["enumeration"] = {{"tables", 5}, {"max_abs_err", worst}, {"pass", note(worst <= 1e-12)}};

  const double opt = optimal_return(spec, dist);
  const double bfs = oracles::bfs_optimal_return({3, 6, 0.9}, 0.68);
  out["optimal_return"] = {{"dp", opt}, {"bfs", bfs}, {"pass", note(std::abs(opt - bfs) <= 1e-12)}};

  const auto ns = critical_n(1.0, 1.0 / 100.0);
  const double fp = oracles::fixed_point_critical_n(100.0);
  const bool ns_ok = ns && std::abs(*ns - fp) <= 1e-8 * fp;
  out["critical_n"] = {{"C", 100.0}, {"solver", ns ? json(*ns) : json(nullptr)}, {"fixed_point", fp},
                       {"pass", note(ns_ok)}};

  json llc = json::array();
  for (const auto& c : run_llc_validation(quick, workers)) {
    note(c.pass());
    llc.push_back(c.to_json());
  }
  out["llc_synthetic"] = llc;

  const OuCheck ou = run_ou_check(quick ? 20000 : 100000, 2, 0);
  json oj = ou.to_json();
  oj["tolerance"] = 0.05;
  oj["pass"] = note(ou.pass(0.05));
  out["ou_stationarity"] = oj;
  out["quick"] = quick;
  out["pass"] = all_pass;
  return out;
}

int fail(const std::string& msg, ExitCode code) {
  std::cerr << "error: " << msg << "\n";
  return static_cast<int>(code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-coefficient and phase analysis of a gridworld policy-gradient agent"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);

  std::string config_path, out_dir, run_dir, ckpt_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> delta, eval_alpha, eval_gamma;
  std::optional<int> chains, chain_length, workers;
  std::vector<std::uint64_t> seeds;

  auto* train_cmd = app.add_subcommand("train", "train one seed and write checkpoints + metrics.csv");
  train_cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
  train_cmd->add_option("--seed", seed, "seed (default: first configured seed)");
  train_cmd->add_option("--out", out_dir, "run directory (default: <output_dir>/seed_<seed>)");

  auto* detect_cmd = app.add_subcommand("detect-phases", "classify a run's checkpoints");
  detect_cmd->add_option("--run", run_dir, "run directory")->required();
  detect_cmd->add_option("--config", config_path, "config (default: <run>/config.json)");
  detect_cmd->add_option("--delta", delta, "detection threshold in [0, 1)");

  auto* llc_cmd = app.add_subcommand("estimate-llc", "LLC estimate at one checkpoint");
  llc_cmd->add_option("--checkpoint", ckpt_path, "checkpoint .bin file")->required();
  llc_cmd->add_option("--config", config_path, "config (default: run config next to ckpt/)");
  llc_cmd->add_option("--out", out_dir, "directory for llc.json and chains.csv")->required();
  llc_cmd->add_option("--seed", seed, "run seed used to derive chain seeds");
  llc_cmd->add_option("--eval-alpha", eval_alpha, "alpha of the evaluation start distribution");
  llc_cmd->add_option("--eval-gamma", eval_gamma, "discount used for the regret readout");
  llc_cmd->add_option("--chains", chains, "number of SGLD chains");
  llc_cmd->add_option("--chain-length", chain_length, "steps per chain");
  llc_cmd->add_option("--workers", workers, "parallel chains");

  auto* analyze_cmd = app.add_subcommand("analyze", "regression, critical n and nonlinearity test");
  std::string fit_csv, triples_csv;
  std::vector<double> crit, compare;
  analyze_cmd->add_option("--fit", fit_csv, "CSV with alpha,gamma,entry_step[,label]");
  analyze_cmd->add_option("--nonlinearity", triples_csv, "CSV with g1,lambda1,g2b,lambda2b,g3,lambda3");
  analyze_cmd->add_option("--critical-n", crit, "delta_lambda delta_G")->expected(2);
  analyze_cmd->add_option("--compare", compare, "g1 lambda1 g2 lambda2")->expected(4);
  analyze_cmd->add_flag("--empirical", "regrets in --compare are sampled estimates");

  auto* repro_cmd = app.add_subcommand("reproduce", "full pipeline for every seed");
  repro_cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
  repro_cmd->add_option("--out", out_dir, "output directory (overrides output_dir)");
  repro_cmd->add_option("--seeds", seeds, "seeds (override)")->delimiter(',');
  repro_cmd->add_option("--workers", workers, "parallel seeds / chains (capped by SLTRL_THREADS)");

  auto* plot_cmd = app.add_subcommand("plot", "write staircase.csv and staircase.svg for a run");
  plot_cmd->add_option("--run", run_dir, "run directory")->required();

  auto* oracle_cmd = app.add_subcommand("oracle-check", "synthetic-loss LLC validation and oracles");
  oracle_cmd->add_flag("--quick", "shorter chains");
  oracle_cmd->add_option("--workers", workers, "parallel synthetic checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::Config);
  }

  try {
    if (*train_cmd) {
      ExperimentConfig cfg = load_config(config_path);
      const std::uint64_t s = seed.value_or(cfg.seeds.front());
      const fs::path dir = out_dir.empty() ? cfg.output_dir / ("seed_" + std::to_string(s)) : fs::path(out_dir);
      const auto entries = run_training(cfg, s, dir);
      std::cout << json{{"run_dir", dir.string()},
                        {"checkpoints", entries.size()},
                        {"final_regret", entries.back().regret.regret}}
                       .dump()
                << "\n";
    } else if (*detect_cmd) {
      const ExperimentConfig cfg = config_for_run(run_dir, config_path);
      const PhaseAnalysis a = detect_phases(run_dir, cfg.env, delta.value_or(cfg.delta));
      std::cout << transitions_to_json(a, delta.value_or(cfg.delta)).dump() << "\n";
    } else if (*llc_cmd) {
      const fs::path ck(ckpt_path);
      const fs::path owner = ck.parent_path().parent_path();
      ExperimentConfig cfg = config_for_run(owner, config_path);
      if (eval_alpha) cfg.llc.eval_alpha = *eval_alpha;
      if (eval_gamma) cfg.llc.eval_gamma = *eval_gamma;
      if (chains) cfg.llc.num_chains = *chains;
      if (chain_length) {
        cfg.llc.chain_length = *chain_length;
        if (cfg.llc.burn_in >= *chain_length) cfg.llc.burn_in = -1;
      }
      cfg.validate();
      const Checkpoint c = load_checkpoint(ck);
      const LLCConfig lc = llc_config_for(cfg.llc, seed.value_or(run_seed(owner)), c.step);
      LLCRun run = estimate_llc_rl(c.params, cfg.env, lc, effective_workers(workers.value_or(cfg.workers)));
      fs::create_directories(out_dir);
      std::vector<LlcRecord> recs{LlcRecord{c.step, "", 0, run.estimate, run.traces}};
      write_llc_outputs(out_dir, cfg.llc, recs);
      std::cout << run.estimate.to_json().dump() << "\n";
    } else if (*analyze_cmd) {
      json out = json::object();
      if (!fit_csv.empty()) out["fit"] = fit_transition_model(read_transition_records(fit_csv)).to_json();
      if (!triples_csv.empty()) out["nonlinearity"] = nonlinearity_stat(read_triples(triples_csv)).to_json();
      if (!crit.empty()) {
        const auto n = critical_n(crit[0], crit[1]);
        out["critical_n"] = {{"delta_lambda", crit[0]}, {"delta_G", crit[1]},
                             {"n_star", n ? json(*n) : json(nullptr)}};
      }
      if (!compare.empty()) {
        const PhaseComparison c = compare_phases(compare[0], compare[1], compare[2], compare[3],
                                                 analyze_cmd->count("--empirical") > 0);
        out["compare"] = {{"delta_G", c.delta_G},
                          {"delta_lambda", c.delta_lambda},
                          {"n_star", c.n_star ? json(*c.n_star) : json(nullptr)},
                          {"regret_source", c.empirical_regret ? "empirical" : "exact"}};
      }
      if (out.empty()) throw ConfigError("analyze: give --fit, --nonlinearity, --critical-n or --compare");
      std::cout << out.dump(2) << "\n";
    } else if (*repro_cmd) {
      ExperimentConfig cfg = load_config(config_path);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      if (!seeds.empty()) cfg.seeds = seeds;
      if (workers) cfg.workers = *workers;
      cfg.validate();
      const auto outcomes = reproduce(cfg);
      int rc = 0;
      for (const auto& o : outcomes) {
        json line = {{"seed", o.seed}, {"ok", o.ok}};
        if (o.staircase) line["staircase_pass"] = o.staircase->pass();
        if (!o.ok) {
          line["error"] = o.error;
          if (rc == 0) rc = o.exit_code;
        }
        std::cout << line.dump() << "\n";
      }
      return rc;
    } else if (*plot_cmd) {
      emit_plots(run_dir);
    } else if (*oracle_cmd) {
      bool pass = false;
      const json report = oracle_check(oracle_cmd->count("--quick") > 0,
                                       effective_workers(workers.value_or(1)), pass);
      std::cout << report.dump(2) << "\n";
      return pass ? 0 : static_cast<int>(ExitCode::Numeric);
    }
  } catch (const ConfigError& e) {
    return fail(e.what(), ExitCode::Config);
  } catch (const NumericError& e) {
    return fail(e.what(), ExitCode::Numeric);
  } catch (const IoError& e) {
    return fail(e.what(), ExitCode::Io);
  } catch (const fs::filesystem_error& e) {
    return fail(e.what(), ExitCode::Io);
  } catch (const json::exception& e) {
    return fail(e.what(), ExitCode::Io);
  } catch (const ResourceError& e) {
    return fail(e.what(), ExitCode::Config);
  }
  return 0;
}
