#include "sltrl/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "sltrl/analysis.hpp"
#include "sltrl/artifacts.hpp"
#include "sltrl/checkpoint.hpp"
#include "sltrl/errors.hpp"
#include "sltrl/evaluator.hpp"
#include "sltrl/random.hpp"

namespace sltrl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

double median(std::vector<double> v) {
  if (v.empty()) throw NumericError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::array<char, 32> buf{};
  std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf.data();
}

}  // namespace

fs::path checkpoint_file_name(std::int64_t step) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "step_%010lld.bin", static_cast<long long>(step));
  return fs::path("ckpt") / buf.data();
}

// ---------------------------------------------------------------- training

std::vector<CheckpointEntry> run_training(const ExperimentConfig& cfg, std::uint64_t seed,
                                          const fs::path& run_dir) {
  cfg.validate();
  fs::create_directories(run_dir / "ckpt");
  json resolved = config_to_json(cfg);
  resolved["seed"] = seed;
  write_json(run_dir / "config.json", resolved);

  TrainConfig tc = cfg.train;
  tc.seed = seed;
  const PolicyParams init = init_params(cfg.arch, seed);
  std::vector<CheckpointEntry> entries;
  train(tc, cfg.env, init, [&](const CheckpointRecord& r) {
    CheckpointEntry e;
    e.step = r.step;
    e.env_steps = r.env_steps;
    e.file = checkpoint_file_name(r.step).generic_string();
    e.regret = r.regret;
    save_checkpoint(run_dir / e.file, r.params, r.step);
    entries.push_back(e);
  });

  CsvTable t;
  t.header = {"step", "env_steps", "regret", "policy_return", "optimal_return", "file"};
  for (const auto& e : entries) {
    t.rows.push_back({std::to_string(e.step), std::to_string(e.env_steps),
                      format_double(e.regret.regret), format_double(e.regret.r_policy),
                      format_double(e.regret.r_max), e.file});
  }
  write_file_atomic(run_dir / "metrics.csv", to_csv(t));
  return entries;
}

std::vector<CheckpointEntry> read_metrics(const fs::path& run_dir) {
  const CsvTable t = read_csv(run_dir / "metrics.csv");
  const std::size_t cs = t.column("step"), ce = t.column("env_steps"), cr = t.column("regret"),
                    cp = t.column("policy_return"), co = t.column("optimal_return"),
                    cf = t.column("file");
  std::vector<CheckpointEntry> out;
  for (const auto& row : t.rows) {
    CheckpointEntry e;
    try {
      e.step = std::stoll(row[cs]);
      e.env_steps = std::stoll(row[ce]);
    } catch (const std::exception&) {
      throw IoError("metrics.csv: bad integer");
    }
    e.regret.regret = parse_double(row[cr]);
    e.regret.r_policy = parse_double(row[cp]);
    e.regret.r_max = parse_double(row[co]);
    e.file = row[cf];
    out.push_back(e);
  }
  if (out.empty()) throw IoError("metrics.csv has no checkpoints");
  return out;
}

// ---------------------------------------------------------------- phases

std::string stage_label(Stage s) { return "P" + std::to_string(static_cast<int>(s)); }

PhaseAnalysis analyze_phase_readings(std::vector<std::pair<std::int64_t, PhaseReading>> series,
                                     double delta) {
  PhaseAnalysis a;
  for (auto& [step, r] : series) r = r.with_delta(delta);
  a.series = std::move(series);
  a.summary = transition_steps(a.series, delta);
  for (const StageSegment& seg : stage_segments(a.summary, a.series.size())) {
    a.stages.push_back(StageInterval{seg.stage, stage_label(seg.stage), seg.first_index,
                                     seg.last_index, a.series[seg.first_index].first,
                                     a.series[seg.last_index].first});
  }
  a.full_staircase = has_full_staircase(a.summary);
  return a;
}

PhaseAnalysis analyze_phases(const std::vector<std::pair<std::int64_t, PolicyTable>>& tables,
                             double delta, const EnvSpec& spec) {
  std::vector<std::pair<std::int64_t, PhaseReading>> series;
  for (const auto& [step, table] : tables) series.emplace_back(step, classify(table, delta, spec));
  return analyze_phase_readings(std::move(series), delta);
}

json transitions_to_json(const PhaseAnalysis& a, double delta) {
  json entry = json::object(), dwell = json::object(), stages = json::array();
  for (Phase p : kAllPhases) {
    auto it = a.summary.entry_step.find(p);
    entry[to_string(p)] = it == a.summary.entry_step.end() ? json(nullptr) : json(it->second);
    json list = json::array();
    if (auto d = a.summary.dwell.find(p); d != a.summary.dwell.end()) {
      for (const auto& iv : d->second) {
        list.push_back({{"first_step", iv.first_step}, {"last_step", iv.last_step}});
      }
    }
    dwell[to_string(p)] = list;
  }
  for (const auto& s : a.stages) {
    stages.push_back({{"label", s.label},
                      {"first_step", s.first_step},
                      {"last_step", s.last_step},
                      {"first_index", s.first_index},
                      {"last_index", s.last_index}});
  }
  return {{"delta", delta},
          {"checkpoints", a.series.size()},
          {"entry_step", entry},
          {"dwell", dwell},
          {"stages", stages},
          {"full_staircase", a.full_staircase}};
}

namespace {

void write_phase_outputs(const fs::path& dir, const PhaseAnalysis& a, double delta) {
  CsvTable t;
  t.header = {"step", "d_P1", "d_P2a", "d_P2b", "d_P3", "detected"};
  for (const auto& [step, r] : a.series) {
    t.rows.push_back({std::to_string(step), format_double(r.normalized[0]),
                      format_double(r.normalized[1]), format_double(r.normalized[2]),
                      format_double(r.normalized[3]), r.detected_label()});
  }
  write_file_atomic(dir / "phases.csv", to_csv(t));
  write_json(dir / "transitions.json", transitions_to_json(a, delta));
}

}  // namespace

std::vector<std::pair<std::int64_t, PhaseReading>> read_phase_csv(const fs::path& path,
                                                                  double delta) {
  const CsvTable t = read_csv(path);
  const std::size_t cs = t.column("step");
  const std::array<std::size_t, kNumPhases> cols = {t.column("d_P1"), t.column("d_P2a"),
                                                    t.column("d_P2b"), t.column("d_P3")};
  std::vector<std::pair<std::int64_t, PhaseReading>> out;
  for (const auto& row : t.rows) {
    PhaseReading r;
    for (int k = 0; k < kNumPhases; ++k) {
      r.normalized[static_cast<std::size_t>(k)] = parse_double(row[cols[static_cast<std::size_t>(k)]]);
    }
    out.emplace_back(std::stoll(row[cs]), r.with_delta(delta));
  }
  return out;
}

PhaseAnalysis detect_phases(const fs::path& run_dir, const EnvSpec& spec, double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) throw ConfigError("delta must lie in [0, 1)");
  const auto metrics = read_metrics(run_dir);
  std::vector<std::pair<std::int64_t, PhaseReading>> series;
  for (const auto& e : metrics) {
    const Checkpoint ck = load_checkpoint(run_dir / e.file);
    series.emplace_back(e.step, classify(tabulate(ck.params, spec), delta, spec));
  }
  PhaseAnalysis a = analyze_phase_readings(std::move(series), delta);
  write_phase_outputs(run_dir, a, delta);
  return a;
}

// ---------------------------------------------------------------- LLC

std::vector<TertilePick> tertile_checkpoints(const std::vector<StageInterval>& stages,
                                             const std::vector<std::int64_t>& steps) {
  std::vector<TertilePick> out;
  for (const auto& s : stages) {
    if (s.last_index >= steps.size() || s.first_index > s.last_index) {
      throw ConfigError("tertile_checkpoints: stage interval outside the checkpoint list");
    }
    auto pos = [&](std::size_t i) { return std::log(static_cast<double>(steps[i]) + 1.0); };
    const double lo = pos(s.first_index), hi = pos(s.last_index);
    std::size_t prev = steps.size();
    for (int k = 1; k <= 2; ++k) {
      const double target = lo + (hi - lo) * k / 3.0;
      std::size_t best = s.first_index;
      for (std::size_t i = s.first_index; i <= s.last_index; ++i) {
        if (std::abs(pos(i) - target) < std::abs(pos(best) - target)) best = i;
      }
      if (best == prev) continue;
      out.push_back(TertilePick{best, s.stage, k});
      prev = best;
    }
  }
  return out;
}

LLCConfig llc_config_for(const LLCConfig& base, std::uint64_t run_seed, std::int64_t step) {
  LLCConfig c = base;
  c.seed = mix_seed(mix_seed(run_seed ^ 0x11C5EEDULL) ^ static_cast<std::uint64_t>(step));
  return c;
}

json llc_records_to_json(const LLCConfig& cfg, const std::vector<LlcRecord>& records) {
  json cj = to_json(cfg);
  cj.erase("seed");
  json list = json::array();
  for (const auto& r : records) {
    json e = r.estimate.to_json();
    e["step"] = r.step;
    e["stage"] = r.stage;
    e["tertile"] = r.tertile;
    list.push_back(e);
  }
  return {{"config", cj}, {"estimates", list}};
}

void write_llc_outputs(const fs::path& dir, const LLCConfig& cfg,
                       const std::vector<LlcRecord>& records) {
  write_json(dir / "llc.json", llc_records_to_json(cfg, records));
  CsvTable t;
  t.header = {"step", "chain", "sgld_step", "readout", "dist_to_wstar"};
  for (const auto& r : records) {
    for (std::size_t c = 0; c < r.traces.size(); ++c) {
      const ChainTrace& tr = r.traces[c];
      for (std::size_t j = 0; j < tr.readouts.size(); ++j) {
        t.rows.push_back({std::to_string(r.step), std::to_string(c), std::to_string(j + 1),
                          format_double(tr.readouts[j]), format_double(tr.dist_to_star[j])});
      }
    }
  }
  write_file_atomic(dir / "chains.csv", to_csv(t));
}

// ---------------------------------------------------------------- staircase

json StaircaseCheck::to_json() const {
  json st = json::array();
  for (const auto& s : stages) {
    st.push_back({{"label", s.label},
                  {"checkpoints", s.checkpoints},
                  {"median_regret", s.median_regret},
                  {"llc_count", s.llc_count},
                  {"median_llc", s.median_llc ? json(*s.median_llc) : json(nullptr)}});
  }
  return {{"ordered", ordered},
          {"regret_decreasing", regret_decreasing},
          {"llc_increasing", llc_increasing},
          {"pass", pass()},
          {"stages", st}};
}

namespace {

StaircaseCheck staircase_from(const std::vector<double>& regrets,
                              const std::vector<StageInterval>& stages, bool full,
                              const std::multimap<std::string, double>& llc_by_stage) {
  StaircaseCheck c;
  for (const auto& s : stages) {
    StageStat st;
    st.label = s.label;
    st.checkpoints = s.last_index - s.first_index + 1;
    st.median_regret = median({regrets.begin() + static_cast<long>(s.first_index),
                               regrets.begin() + static_cast<long>(s.last_index) + 1});
    std::vector<double> l;
    auto [b, e] = llc_by_stage.equal_range(s.label);
    for (auto it = b; it != e; ++it) l.push_back(it->second);
    st.llc_count = l.size();
    if (!l.empty()) st.median_llc = median(l);
    c.stages.push_back(st);
  }
  c.ordered = full && c.stages.size() == 3;
  if (c.ordered) {
    c.regret_decreasing = c.stages[0].median_regret > c.stages[1].median_regret &&
                          c.stages[1].median_regret > c.stages[2].median_regret;
    c.llc_increasing = c.stages[0].median_llc && c.stages[1].median_llc &&
                       c.stages[2].median_llc && *c.stages[0].median_llc < *c.stages[1].median_llc &&
                       *c.stages[1].median_llc < *c.stages[2].median_llc;
  }
  return c;
}

}  // namespace

StaircaseCheck check_staircase(const std::vector<CheckpointEntry>& metrics,
                               const PhaseAnalysis& phases, const std::vector<LlcRecord>& llc) {
  std::vector<double> regrets;
  for (const auto& e : metrics) regrets.push_back(e.regret.regret);
  std::multimap<std::string, double> by_stage;
  for (const auto& r : llc) {
    if (!r.stage.empty()) by_stage.emplace(r.stage, r.estimate.lambda_hat);
  }
  return staircase_from(regrets, phases.stages, phases.full_staircase, by_stage);
}

namespace {

std::vector<StageInterval> stages_from_json(const json& tj) {
  std::vector<StageInterval> out;
  try {
    for (const auto& s : tj.at("stages")) {
      StageInterval iv;
      iv.label = s.at("label").get<std::string>();
      iv.stage = static_cast<Stage>(std::stoi(iv.label.substr(1)));
      iv.first_index = s.at("first_index").get<std::size_t>();
      iv.last_index = s.at("last_index").get<std::size_t>();
      iv.first_step = s.at("first_step").get<std::int64_t>();
      iv.last_step = s.at("last_step").get<std::int64_t>();
      out.push_back(iv);
    }
  } catch (const std::exception& e) {
    throw IoError(std::string("transitions.json: ") + e.what());
  }
  return out;
}

}  // namespace

StaircaseCheck check_staircase_dir(const fs::path& run_dir) {
  const auto metrics = read_metrics(run_dir);
  const json tj = read_json(run_dir / "transitions.json");
  const auto stages = stages_from_json(tj);
  std::vector<double> regrets;
  for (const auto& e : metrics) regrets.push_back(e.regret.regret);
  for (const auto& s : stages) {
    if (s.last_index >= regrets.size()) throw IoError("transitions.json does not match metrics.csv");
  }
  std::multimap<std::string, double> by_stage;
  if (fs::exists(run_dir / "llc.json")) {
    const json lj = read_json(run_dir / "llc.json");
    for (const auto& e : lj.at("estimates")) {
      const std::string st = e.at("stage").get<std::string>();
      if (!st.empty()) by_stage.emplace(st, e.at("lambda_hat").get<double>());
    }
  }
  return staircase_from(regrets, stages, tj.value("full_staircase", false), by_stage);
}

// ---------------------------------------------------------------- plots

void emit_plots(const fs::path& run_dir) {
  if (!fs::exists(run_dir / "metrics.csv")) {
    throw IoError("emit_plots: " + (run_dir / "metrics.csv").string() + " missing");
  }
  const auto metrics = read_metrics(run_dir);
  std::vector<StageInterval> stages;
  if (fs::exists(run_dir / "transitions.json")) {
    stages = stages_from_json(read_json(run_dir / "transitions.json"));
  }
  std::map<std::int64_t, double> llc;
  if (fs::exists(run_dir / "llc.json")) {
    const json lj = read_json(run_dir / "llc.json");
    for (const auto& e : lj.at("estimates")) {
      llc[e.at("step").get<std::int64_t>()] = e.at("lambda_hat").get<double>();
    }
  }
  std::vector<StaircasePoint> points;
  CsvTable t;
  t.header = {"checkpoint", "regret", "llc", "phase"};
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    StaircasePoint p;
    p.checkpoint = metrics[i].step;
    p.regret = metrics[i].regret.regret;
    if (auto it = llc.find(p.checkpoint); it != llc.end()) p.llc = it->second;
    for (const auto& s : stages) {
      if (i >= s.first_index && i <= s.last_index) p.phase = s.label;
    }
    t.rows.push_back({std::to_string(p.checkpoint), format_double(p.regret),
                      p.llc ? format_double(*p.llc) : "", p.phase});
    points.push_back(p);
  }
  std::vector<PhaseBand> bands;
  for (const auto& s : stages) bands.push_back(PhaseBand{s.label, s.first_step, s.last_step});
  write_file_atomic(run_dir / "staircase.csv", to_csv(t));
  write_file_atomic(run_dir / "staircase.svg", staircase_svg(points, bands));
}

// ---------------------------------------------------------------- reproduce

namespace {

int exit_code_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError&) {
    return static_cast<int>(ExitCode::Config);
  } catch (const NumericError&) {
    return static_cast<int>(ExitCode::Numeric);
  } catch (const IoError&) {
    return static_cast<int>(ExitCode::Io);
  } catch (const fs::filesystem_error&) {
    return static_cast<int>(ExitCode::Io);
  } catch (...) {
    return 1;
  }
}

class ManifestWriter {
 public:
  ManifestWriter(const ExperimentConfig& cfg, std::uint64_t seed, fs::path dir)
      : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
    m_ = {{"tool", kToolName},
          {"version", kToolVersion},
          {"config_hash", config_hash(cfg)},
          {"seed", seed},
          {"status", "running"},
          {"stages_completed", json::array()},
          {"wall_clock", {{"started_at", utc_now()}, {"stage_seconds", json::object()}}}};
    stage_start_ = start_;
  }

  void stage_done(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    m_["stages_completed"].push_back(name);
    m_["wall_clock"]["stage_seconds"][name] = std::chrono::duration<double>(now - stage_start_).count();
    stage_start_ = now;
  }

  json& doc() { return m_; }

  // Hashes every artifact present and writes the manifest.
  void flush(const std::vector<CheckpointEntry>& metrics) {
    json files = json::object();
    for (const char* f : {"config.json", "metrics.csv", "phases.csv", "transitions.json", "llc.json",
                          "chains.csv", "staircase.csv", "staircase.svg", "analysis.json"}) {
      if (fs::exists(dir_ / f)) files[f] = sha256_file(dir_ / f);
    }
    for (const auto& e : metrics) {
      if (fs::exists(dir_ / e.file)) {
        files[e.file] = sha256_file(dir_ / e.file);
        const std::string side = sidecar_path(e.file).generic_string();
        if (fs::exists(dir_ / side)) files[side] = sha256_file(dir_ / side);
      }
    }
    m_["files"] = files;
    m_["wall_clock"]["updated_at"] = utc_now();
    m_["wall_clock"]["elapsed_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_json(dir_ / "manifest.json", m_);
  }

 private:
  fs::path dir_;
  json m_;
  std::chrono::steady_clock::time_point start_, stage_start_;
};

json checkpoint_index(const std::vector<CheckpointEntry>& metrics, const PhaseAnalysis* phases,
                      const std::vector<LlcRecord>& llc) {
  json list = json::array();
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    const auto& e = metrics[i];
    json c = {{"step", e.step}, {"env_steps", e.env_steps}, {"file", e.file}, {"regret", e.regret.regret}};
    if (phases && i < phases->series.size()) {
      json flags = json::object();
      for (Phase p : kAllPhases) flags[to_string(p)] = phases->series[i].second.has(p);
      c["phases"] = flags;
    }
    for (const auto& r : llc) {
      if (r.step == e.step) c["lambda_hat"] = r.estimate.lambda_hat;
    }
    list.push_back(c);
  }
  return list;
}

json stage_comparisons(const StaircaseCheck& sc) {
  json out = json::array();
  for (std::size_t k = 0; k + 1 < sc.stages.size(); ++k) {
    const auto& a = sc.stages[k];
    const auto& b = sc.stages[k + 1];
    if (!a.median_llc || !b.median_llc) continue;
    const PhaseComparison cmp = compare_phases(a.median_regret, *a.median_llc, b.median_regret,
                                               *b.median_llc, false);
    out.push_back({{"from", a.label},
                   {"to", b.label},
                   {"delta_G", cmp.delta_G},
                   {"delta_lambda", cmp.delta_lambda},
                   {"n_star", cmp.n_star ? json(*cmp.n_star) : json(nullptr)}});
  }
  return out;
}

}  // namespace

RunOutcome reproduce_seed(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& run_dir,
                          int llc_workers) {
  RunOutcome out;
  out.seed = seed;
  out.run_dir = run_dir;
  std::vector<CheckpointEntry> metrics;
  std::optional<PhaseAnalysis> phases;
  std::vector<LlcRecord> llc;
  std::string stage = "setup";
  std::optional<ManifestWriter> manifest;
  try {
    fs::create_directories(run_dir);
    manifest.emplace(cfg, seed, run_dir);

    stage = "train";
    metrics = run_training(cfg, seed, run_dir);
    manifest->stage_done(stage);
    manifest->doc()["checkpoints"] = checkpoint_index(metrics, nullptr, llc);
    manifest->flush(metrics);

    stage = "detect_phases";
    phases = detect_phases(run_dir, cfg.env, cfg.delta);
    manifest->stage_done(stage);
    manifest->doc()["checkpoints"] = checkpoint_index(metrics, &*phases, llc);
    manifest->doc()["transitions"] = transitions_to_json(*phases, cfg.delta);
    manifest->flush(metrics);

    stage = "estimate_llc";
    std::vector<std::int64_t> steps;
    for (const auto& e : metrics) steps.push_back(e.step);
    std::map<std::size_t, std::pair<std::string, int>> picks;  // index -> (stage, tertile)
    if (cfg.llc_schedule == LlcSchedule::Tertiles) {
      for (const auto& p : tertile_checkpoints(phases->stages, steps)) {
        picks[p.index] = {stage_label(p.stage), p.tertile};
      }
    } else if (cfg.llc_schedule == LlcSchedule::All) {
      for (std::size_t i = 0; i < steps.size(); ++i) picks[i] = {"", 0};
    }
    for (std::int64_t s : cfg.llc_extra_steps) {
      auto it = std::find(steps.begin(), steps.end(), s);
      if (it == steps.end()) throw ConfigError("llc.extra_steps: no checkpoint at step " + std::to_string(s));
      picks.emplace(static_cast<std::size_t>(it - steps.begin()), std::pair<std::string, int>{"", 0});
    }
    // Under "all" every estimate counts toward its stage's median; under
    // "tertiles" only the tertile picks do.
    if (cfg.llc_schedule == LlcSchedule::All) {
      for (auto& [idx, tag] : picks) {
        for (const auto& s : phases->stages) {
          if (idx >= s.first_index && idx <= s.last_index) tag.first = s.label;
        }
      }
    }
    for (const auto& [idx, tag] : picks) {
      const Checkpoint ck = load_checkpoint(run_dir / metrics[idx].file);
      const LLCConfig lc = llc_config_for(cfg.llc, seed, metrics[idx].step);
      LLCRun run = estimate_llc_rl(ck.params, cfg.env, lc, llc_workers);
      llc.push_back(LlcRecord{metrics[idx].step, tag.first, tag.second, std::move(run.estimate),
                              std::move(run.traces)});
    }
    write_llc_outputs(run_dir, cfg.llc, llc);
    manifest->stage_done(stage);
    manifest->doc()["checkpoints"] = checkpoint_index(metrics, &*phases, llc);
    manifest->flush(metrics);

    stage = "plots";
    emit_plots(run_dir);
    manifest->stage_done(stage);
    manifest->flush(metrics);

    stage = "analysis";
    const StaircaseCheck sc = check_staircase(metrics, *phases, llc);
    out.staircase = sc;
    json analysis = {{"staircase", sc.to_json()}, {"stage_comparisons", stage_comparisons(sc)}};
    write_json(run_dir / "analysis.json", analysis);
    manifest->stage_done(stage);
    manifest->doc()["status"] = "complete";
    manifest->flush(metrics);
    out.ok = true;
  } catch (...) {
    const auto ep = std::current_exception();
    out.exit_code = exit_code_for(ep);
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      out.error = stage + ": " + e.what();
    } catch (...) {
      out.error = stage + ": unknown error";
    }
    if (manifest) {
      try {
        manifest->doc()["status"] = "failed";
        manifest->doc()["failed_stage"] = stage;
        manifest->doc()["error"] = out.error;
        manifest->flush(metrics);
      } catch (...) {
        // The original error is the one worth reporting.
      }
    }
  }
  return out;
}

std::vector<RunOutcome> reproduce(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  const int workers = effective_workers(cfg.workers);
  const std::size_t n = cfg.seeds.size();
  std::vector<RunOutcome> outcomes(n);
  auto run_dir = [&](std::uint64_t s) { return cfg.output_dir / ("seed_" + std::to_string(s)); };
  if (n == 1 || workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      outcomes[i] = reproduce_seed(cfg, cfg.seeds[i], run_dir(cfg.seeds[i]), workers);
    }
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (int k = 0; k < std::min<int>(workers, static_cast<int>(n)); ++k) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= n) return;
            i = next++;
          }
          outcomes[i] = reproduce_seed(cfg, cfg.seeds[i], run_dir(cfg.seeds[i]), 1);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  json seeds = json::array();
  int passes = 0;
  for (const auto& o : outcomes) {
    json s = {{"seed", o.seed}, {"ok", o.ok}, {"run_dir", o.run_dir.filename().string()}};
    if (!o.ok) s["error"] = o.error;
    if (o.staircase) {
      s["staircase"] = o.staircase->to_json();
      passes += o.staircase->pass() ? 1 : 0;
    }
    seeds.push_back(s);
  }
  write_json(cfg.output_dir / "summary.json", {{"config_hash", config_hash(cfg)},
                                               {"seeds", seeds},
                                               {"staircase_passes", passes},
                                               {"runs", n}});
  return outcomes;
}

}  // namespace sltrl
