#pragma once

// Policy-space phases of the gridworld and their detection by normalized L2
// distance to the corresponding subspace of the product of action simplices.
//
//  P1  : the single point pi(U) = pi(L) = 1/2 in every state.
//  P2a : pi(R) = pi(D) = 0 everywhere, pi(U) = 0 on the top row, pi(L) = 0 on
//        the left column.
//  P2b : P2a plus pi(L) = 0 directly below the goal, pi(U) = 0 directly right
//        of the goal.
//  P3  : never move away from the goal: pi(U) = 0 when mouse.row <= goal.row,
//        pi(D) = 0 when mouse.row >= goal.row, pi(L) = 0 when
//        mouse.col <= goal.col, pi(R) = 0 when mouse.col >= goal.col.
//
// A state where the masks would forbid every action (the top-left cell under
// P2a/P2b) is left unconstrained. Distances use the rows with no previous
// action, over all m^2 (m^2 - 1) states.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sltrl/env.hpp"
#include "sltrl/policy.hpp"

namespace sltrl {

enum class Phase : int { P1 = 0, P2a = 1, P2b = 2, P3 = 3 };
inline constexpr int kNumPhases = 4;
inline constexpr std::array<Phase, kNumPhases> kAllPhases = {Phase::P1, Phase::P2a, Phase::P2b,
                                                             Phase::P3};
inline constexpr double kDefaultPhaseDelta = 0.15;

std::string to_string(Phase p);
Phase phase_from_string(const std::string& name);

using ActionMask = std::array<bool, kNumActions>;  // true = allowed

struct PhaseSpec {
  Phase id = Phase::P1;
  bool is_point = false;

  // Allowed actions in state (mouse, cheese). For the P1 point every action is
  // "allowed" and the target is the fixed distribution instead.
  ActionMask allowed(const EnvSpec& spec, Cell mouse, Cell cheese) const;

  static PhaseSpec of(Phase p);
};

// Euclidean projection of `p` onto the face of the probability simplex whose
// masked coordinates are zero (sort-and-threshold projection on the allowed
// coordinates).
ActionProbs project_onto_face(const ActionProbs& p, const ActionMask& allowed);

struct PhaseDistance {
  double raw = 0.0;
  double normalized = 0.0;
  double d_max = 0.0;  // sqrt(4|S| - D)
};

PhaseDistance phase_distance(const PolicyTable& table, const PhaseSpec& phase,
                             const EnvSpec& spec);

struct PhaseReading {
  std::array<double, kNumPhases> raw{};
  std::array<double, kNumPhases> normalized{};
  std::array<bool, kNumPhases> detected{};
  double delta = kDefaultPhaseDelta;

  bool has(Phase p) const { return detected[static_cast<int>(p)]; }
  double distance(Phase p) const { return normalized[static_cast<int>(p)]; }
  // Detection flags recomputed for another threshold.
  PhaseReading with_delta(double new_delta) const;
  // e.g. "P2a|P2b"; empty when nothing is detected.
  std::string detected_label() const;
};

// Throws ConfigError unless 0 <= delta < 1.
PhaseReading classify(const PolicyTable& table, double delta, const EnvSpec& spec);

struct DwellInterval {
  std::int64_t first_step = 0;
  std::int64_t last_step = 0;
  std::size_t first_index = 0;
  std::size_t last_index = 0;
};

struct TransitionSummary {
  std::map<Phase, std::int64_t> entry_step;
  std::map<Phase, std::size_t> entry_index;
  std::map<Phase, std::vector<DwellInterval>> dwell;
};

// First checkpoint detecting each phase plus maximal runs of detection.
// Throws ConfigError on an empty series.
TransitionSummary transition_steps(const std::vector<std::pair<std::int64_t, PhaseReading>>& series,
                                   double delta);

TransitionSummary transition_steps(const std::vector<std::pair<std::int64_t, PolicyTable>>& series,
                                   double delta, const EnvSpec& spec);

// Stage of the staircase: 1, 2 (P2a or P2b), 3.
enum class Stage : int { S1 = 1, S2 = 2, S3 = 3 };

struct StageSegment {
  Stage stage = Stage::S1;
  std::size_t first_index = 0;  // inclusive
  std::size_t last_index = 0;   // inclusive
};

// Splits the checkpoint series into stage segments: stage k runs from its entry
// checkpoint up to the checkpoint before the next present stage's entry (the
// last present stage runs to the end). Stages must be entered in order; stages
// never detected are omitted.
std::vector<StageSegment> stage_segments(const TransitionSummary& summary,
                                         std::size_t num_checkpoints);

// True when P1, stage 2 and P3 are all present and entered in that order.
bool has_full_staircase(const TransitionSummary& summary);

}  // namespace sltrl
