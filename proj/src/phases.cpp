#include "sltrl/phases.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "sltrl/errors.hpp"

namespace sltrl {

namespace {
constexpr int U = static_cast<int>(Action::Up);
constexpr int D = static_cast<int>(Action::Down);
constexpr int L = static_cast<int>(Action::Left);
constexpr int R = static_cast<int>(Action::Right);
constexpr ActionProbs kPhaseOnePoint = {0.5, 0.0, 0.5, 0.0};
}  // namespace

std::string to_string(Phase p) {
  switch (p) {
    case Phase::P1: return "P1";
    case Phase::P2a: return "P2a";
    case Phase::P2b: return "P2b";
    case Phase::P3: return "P3";
  }
  return "?";
}

Phase phase_from_string(const std::string& name) {
  for (Phase p : kAllPhases) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown phase '" + name + "'");
}

PhaseSpec PhaseSpec::of(Phase p) { return PhaseSpec{p, p == Phase::P1}; }

ActionMask PhaseSpec::allowed(const EnvSpec& spec, Cell mouse, Cell cheese) const {
  (void)spec;
  ActionMask ok{true, true, true, true};
  switch (id) {
    case Phase::P1:
      break;
    case Phase::P2a:
    case Phase::P2b:
      ok[R] = ok[D] = false;
      if (mouse.row == 0) ok[U] = false;
      if (mouse.col == 0) ok[L] = false;
      if (id == Phase::P2b) {
        if (mouse.col == cheese.col && mouse.row > cheese.row) ok[L] = false;
        if (mouse.row == cheese.row && mouse.col > cheese.col) ok[U] = false;
      }
      break;
    case Phase::P3:
      if (mouse.row <= cheese.row) ok[U] = false;
      if (mouse.row >= cheese.row) ok[D] = false;
      if (mouse.col <= cheese.col) ok[L] = false;
      if (mouse.col >= cheese.col) ok[R] = false;
      break;
  }
  if (std::none_of(ok.begin(), ok.end(), [](bool b) { return b; })) ok = {true, true, true, true};
  return ok;
}

ActionProbs project_onto_face(const ActionProbs& p, const ActionMask& allowed) {
  std::array<double, kNumActions> vals{};
  int k = 0;
  for (int a = 0; a < kNumActions; ++a) {
    if (allowed[a]) vals[k++] = p[a];
  }
  if (k == 0) throw ConfigError("project_onto_face: mask forbids every action");
  std::array<double, kNumActions> sorted = vals;
  std::sort(sorted.begin(), sorted.begin() + k, std::greater<>());
  double cumsum = 0.0, tau = 0.0;
  for (int j = 0; j < k; ++j) {
    cumsum += sorted[j];
    const double t = (cumsum - 1.0) / (j + 1);
    if (sorted[j] - t > 0.0) tau = t;
  }
  ActionProbs out{};
  for (int a = 0; a < kNumActions; ++a) out[a] = allowed[a] ? std::max(0.0, p[a] - tau) : 0.0;
  return out;
}

PhaseDistance phase_distance(const PolicyTable& table, const PhaseSpec& phase,
                             const EnvSpec& spec) {
  const StateIndexer index(spec);
  if (table.interior_size != spec.interior_size || table.rows() != index.num_rows()) {
    throw ConfigError("phase_distance: table does not match environment");
  }
  const int cells = spec.num_cells();
  double sq = 0.0;
  double free_dims = 0.0;
  for (int cheese = 0; cheese < cells; ++cheese) {
    for (int mouse = 0; mouse < cells; ++mouse) {
      if (mouse == cheese) continue;
      const double* row = table.row(index.row_index(cheese, mouse, 0));
      const ActionProbs p{row[0], row[1], row[2], row[3]};
      ActionProbs target;
      if (phase.is_point) {
        target = kPhaseOnePoint;
      } else {
        const ActionMask ok = phase.allowed(spec, spec.cell_at(mouse), spec.cell_at(cheese));
        free_dims += static_cast<double>(std::count(ok.begin(), ok.end(), true));
        target = project_onto_face(p, ok);
      }
      for (int a = 0; a < kNumActions; ++a) sq += (p[a] - target[a]) * (p[a] - target[a]);
    }
  }
  PhaseDistance d;
  d.raw = std::sqrt(sq);
  d.d_max = std::sqrt(4.0 * static_cast<double>(index.num_pairs()) - free_dims);
  d.normalized = d.d_max > 0.0 ? d.raw / d.d_max : 0.0;
  return d;
}

PhaseReading PhaseReading::with_delta(double new_delta) const {
  PhaseReading r = *this;
  r.delta = new_delta;
  for (int k = 0; k < kNumPhases; ++k) r.detected[k] = normalized[k] < new_delta;
  return r;
}

std::string PhaseReading::detected_label() const {
  std::string out;
  for (Phase p : kAllPhases) {
    if (!has(p)) continue;
    if (!out.empty()) out += "|";
    out += to_string(p);
  }
  return out;
}

PhaseReading classify(const PolicyTable& table, double delta, const EnvSpec& spec) {
  if (!(delta >= 0.0 && delta < 1.0)) throw ConfigError("delta must lie in [0, 1)");
  PhaseReading r;
  for (Phase p : kAllPhases) {
    const PhaseDistance d = phase_distance(table, PhaseSpec::of(p), spec);
    r.raw[static_cast<int>(p)] = d.raw;
    r.normalized[static_cast<int>(p)] = d.normalized;
  }
  return r.with_delta(delta);
}

TransitionSummary transition_steps(const std::vector<std::pair<std::int64_t, PhaseReading>>& series,
                                   double delta) {
  if (series.empty()) throw ConfigError("transition_steps: empty series");
  TransitionSummary out;
  for (Phase p : kAllPhases) {
    std::optional<DwellInterval> open;
    for (std::size_t i = 0; i < series.size(); ++i) {
      const bool hit = series[i].second.with_delta(delta).has(p);
      if (hit) {
        if (!out.entry_step.count(p)) {
          out.entry_step[p] = series[i].first;
          out.entry_index[p] = i;
        }
        if (!open) open = DwellInterval{series[i].first, series[i].first, i, i};
        open->last_step = series[i].first;
        open->last_index = i;
      } else if (open) {
        out.dwell[p].push_back(*open);
        open.reset();
      }
    }
    if (open) out.dwell[p].push_back(*open);
  }
  return out;
}

TransitionSummary transition_steps(const std::vector<std::pair<std::int64_t, PolicyTable>>& series,
                                   double delta, const EnvSpec& spec) {
  std::vector<std::pair<std::int64_t, PhaseReading>> readings;
  readings.reserve(series.size());
  for (const auto& [step, table] : series) readings.emplace_back(step, classify(table, delta, spec));
  return transition_steps(readings, delta);
}

namespace {
std::optional<std::size_t> stage_entry(const TransitionSummary& s, Stage stage) {
  auto find = [&](Phase p) -> std::optional<std::size_t> {
    auto it = s.entry_index.find(p);
    if (it == s.entry_index.end()) return std::nullopt;
    return it->second;
  };
  switch (stage) {
    case Stage::S1: return find(Phase::P1);
    case Stage::S2: {
      auto a = find(Phase::P2a), b = find(Phase::P2b);
      if (a && b) return std::min(*a, *b);
      return a ? a : b;
    }
    case Stage::S3: return find(Phase::P3);
  }
  return std::nullopt;
}
}  // namespace

std::vector<StageSegment> stage_segments(const TransitionSummary& summary,
                                         std::size_t num_checkpoints) {
  std::vector<std::pair<Stage, std::size_t>> entries;
  for (Stage st : {Stage::S1, Stage::S2, Stage::S3}) {
    if (auto e = stage_entry(summary, st)) entries.emplace_back(st, *e);
  }
  std::vector<StageSegment> out;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const std::size_t first = entries[k].second;
    std::size_t last = num_checkpoints - 1;
    if (k + 1 < entries.size()) {
      if (entries[k + 1].second <= first) return {};  // out of order
      last = entries[k + 1].second - 1;
    }
    out.push_back(StageSegment{entries[k].first, first, last});
  }
  return out;
}

bool has_full_staircase(const TransitionSummary& summary) {
  const auto s1 = stage_entry(summary, Stage::S1);
  const auto s2 = stage_entry(summary, Stage::S2);
  const auto s3 = stage_entry(summary, Stage::S3);
  return s1 && s2 && s3 && *s1 < *s2 && *s2 < *s3;
}

}  // namespace sltrl
