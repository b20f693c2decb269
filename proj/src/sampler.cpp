#include "sltrl/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "sltrl/errors.hpp"

namespace sltrl {

void Dataset::add_behavior(int id, PolicyParams params) {
  m_behaviors.insert_or_assign(id, std::move(params));
}

void Dataset::add(int behavior_id, Trajectory traj) {
  traj.behavior_id = behavior_id;
  m_entries.push_back(DatasetEntry{behavior_id, std::move(traj)});
}

const PolicyParams& Dataset::behavior(int id) const {
  auto it = m_behaviors.find(id);
  if (it == m_behaviors.end()) throw ConfigError("unknown behavior id " + std::to_string(id));
  return it->second;
}

namespace {

double log_weight_with(PolicyEvaluator& target, PolicyEvaluator& behavior,
                       const Trajectory& traj) {
  double lw = 0.0;
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const Step& s = traj.steps[t];
    const int a = static_cast<int>(s.action);
    const double pb = behavior.probs(s.state)[a];
    if (!(pb >= kDegenerateProbability)) {
      throw DegenerateWeightError("behavior probability " + std::to_string(pb) + " at step " +
                                  std::to_string(t));
    }
    lw += std::log(target.probs(s.state)[a]) - std::log(pb);
  }
  return lw;
}

struct Weighted {
  std::vector<double> weights;
  WeightStats stats;
};

Weighted compute_weights(const PolicyParams& target, const Dataset& data, const EnvSpec& spec) {
  if (data.empty()) throw ConfigError("empty dataset");
  PolicyEvaluator tgt(target, spec);
  std::map<int, PolicyEvaluator> behaviors;
  Weighted out;
  out.weights.reserve(data.size());
  double sum = 0.0, sum_sq = 0.0;
  for (const DatasetEntry& e : data.entries()) {
    auto it = behaviors.find(e.behavior_id);
    if (it == behaviors.end()) {
      it = behaviors.emplace(e.behavior_id, PolicyEvaluator(data.behavior(e.behavior_id), spec))
               .first;
    }
    const double w = std::exp(log_weight_with(tgt, it->second, e.trajectory));
    out.weights.push_back(w);
    sum += w;
    sum_sq += w * w;
  }
  out.stats.min = *std::min_element(out.weights.begin(), out.weights.end());
  out.stats.max = *std::max_element(out.weights.begin(), out.weights.end());
  out.stats.ess = sum_sq > 0.0 ? sum * sum / sum_sq : 0.0;
  return out;
}

}  // namespace

double log_importance_weight(const PolicyParams& target, const PolicyParams& behavior,
                             const Trajectory& traj, const EnvSpec& spec) {
  PolicyEvaluator tgt(target, spec);
  PolicyEvaluator beh(behavior, spec);
  return log_weight_with(tgt, beh, traj);
}

double importance_weight(const PolicyParams& target, const PolicyParams& behavior,
                         const Trajectory& traj, const EnvSpec& spec) {
  return std::exp(log_importance_weight(target, behavior, traj, spec));
}

RegretEstimate empirical_regret(const PolicyParams& target, const Dataset& data, double r_max,
                                const EnvSpec& spec) {
  const Weighted w = compute_weights(target, data, spec);
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double g = r_max - data.entries()[i].trajectory.discounted_return(spec.gamma);
    acc += w.weights[i] * g;
  }
  RegretEstimate est;
  est.n = data.size();
  est.value = acc / static_cast<double>(data.size());
  est.weights = w.stats;
  return est;
}

std::vector<double> empirical_regret_grad(const PolicyParams& target, const Dataset& data,
                                          double r_max, const EnvSpec& spec) {
  const Weighted w = compute_weights(target, data, spec);
  PolicyEvaluator tgt(target, spec);
  std::vector<double> grad(target.theta.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Trajectory& traj = data.entries()[i].trajectory;
    const double coeff = w.weights[i] * (r_max - traj.discounted_return(spec.gamma)) * inv_n;
    if (coeff == 0.0) continue;
    for (const Step& s : traj.steps) tgt.accumulate_logprob_grad(s.state, s.action, coeff, grad);
  }
  return grad;
}

Dataset collect_on_policy(const PolicyParams& params, const EnvSpec& spec,
                          const InitDistribution& dist, std::size_t n, std::uint64_t seed) {
  Dataset data;
  data.add_behavior(0, params);
  PolicyEvaluator eval(params, spec);
  const PolicyFn policy = [&eval](const GridState& s) { return eval.probs(s); };
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, 0xDA7A, i);
    const GridState init = sample_initial(spec, dist, rng);
    data.add(0, rollout(spec, policy, init, rng));
  }
  return data;
}

void write_jsonl(const Dataset& data, std::ostream& out) {
  for (const DatasetEntry& e : data.entries()) {
    nlohmann::json j;
    j["behavior_id"] = e.behavior_id;
    const auto& steps = e.trajectory.steps;
    if (steps.empty()) throw ConfigError("write_jsonl: empty trajectory");
    const GridState& s0 = steps.front().state;
    j["initial"] = {{"mouse", {s0.mouse.row, s0.mouse.col}},
                    {"cheese", {s0.cheese.row, s0.cheese.col}},
                    {"prev", s0.prev_action ? nlohmann::json(static_cast<int>(*s0.prev_action))
                                            : nlohmann::json(nullptr)}};
    auto actions = nlohmann::json::array();
    auto rewards = nlohmann::json::array();
    for (const Step& s : steps) {
      actions.push_back(static_cast<int>(s.action));
      rewards.push_back(s.reward);
    }
    j["actions"] = std::move(actions);
    j["rewards"] = std::move(rewards);
    out << j.dump() << '\n';
  }
}

Dataset read_jsonl(std::istream& in, const EnvSpec& spec) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "dataset line " + std::to_string(line_no);
    nlohmann::json j;
    GridState state;
    std::vector<int> actions;
    std::vector<double> rewards;
    int behavior_id = 0;
    try {
      j = nlohmann::json::parse(line);
      behavior_id = j.at("behavior_id").get<int>();
      const auto& init = j.at("initial");
      state.mouse = {init.at("mouse").at(0).get<int>(), init.at("mouse").at(1).get<int>()};
      state.cheese = {init.at("cheese").at(0).get<int>(), init.at("cheese").at(1).get<int>()};
      if (!init.at("prev").is_null()) state.prev_action = static_cast<Action>(init.at("prev").get<int>());
      actions = j.at("actions").get<std::vector<int>>();
      rewards = j.at("rewards").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& ex) {
      throw IoError(where + ": " + ex.what());
    }
    if (actions.size() != rewards.size() || actions.empty()) {
      throw IoError(where + ": actions and rewards differ in length");
    }
    Trajectory traj;
    for (std::size_t t = 0; t < actions.size(); ++t) {
      if (actions[t] < 0 || actions[t] >= kNumActions) throw IoError(where + ": bad action");
      const auto a = static_cast<Action>(actions[t]);
      const StepResult r = step(spec, state, a);
      if (r.reward != rewards[t]) throw ConfigError(where + ": replay reward mismatch");
      traj.steps.push_back(Step{state, a, r.reward});
      state = r.next;
      if (r.done) {
        traj.reached_goal = true;
        if (t + 1 != actions.size()) throw ConfigError(where + ": steps after reaching the goal");
      }
    }
    data.add(behavior_id, std::move(traj));
  }
  return data;
}

}  // namespace sltrl
