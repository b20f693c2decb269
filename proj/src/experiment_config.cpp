#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "sltrl/artifacts.hpp"
#include "sltrl/errors.hpp"
#include "sltrl/experiment.hpp"

namespace sltrl {

using nlohmann::json;

std::string to_string(LlcSchedule s) {
  switch (s) {
    case LlcSchedule::Tertiles: return "tertiles";
    case LlcSchedule::All: return "all";
    case LlcSchedule::None: return "none";
  }
  return "?";
}

LlcSchedule llc_schedule_from_string(const std::string& name) {
  if (name == "tertiles") return LlcSchedule::Tertiles;
  if (name == "all") return LlcSchedule::All;
  if (name == "none") return LlcSchedule::None;
  throw ConfigError("unknown llc schedule '" + name + "' (tertiles, all, none)");
}

namespace {

std::string weighting_name(ReturnWeighting w) {
  return w == ReturnWeighting::RewardToGo ? "reward_to_go" : "discounted_reward_to_go";
}

ReturnWeighting weighting_from_string(const std::string& s) {
  if (s == "reward_to_go") return ReturnWeighting::RewardToGo;
  if (s == "discounted_reward_to_go") return ReturnWeighting::DiscountedRewardToGo;
  throw ConfigError("unknown weighting '" + s + "' (reward_to_go, discounted_reward_to_go)");
}

// Error carrying the dotted key path; converted to a message with a line hint.
struct KeyError {
  std::string path;
  std::string message;
};

// Walks one JSON object, checking types and rejecting unknown keys.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw KeyError{path_, "expected an object"};
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw KeyError{sub(key), "wrong type (" + std::string(it->type_name()) + ")"};
    }
  }

  template <typename E, typename F>
  void read_enum(const char* key, E& out, F parse) {
    std::string s;
    bool present = j_.contains(key);
    read(key, s);
    if (!present) return;
    try {
      out = parse(s);
    } catch (const ConfigError& e) {
      throw KeyError{sub(key), e.what()};
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw KeyError{sub(k), "unknown key"};
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// 1-based line of the first occurrence of the path's last key, 0 if unknown.
int line_of_key(const std::string& text, const std::string& path) {
  const std::string key = path.substr(path.rfind('.') == std::string::npos ? 0 : path.rfind('.') + 1);
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

void line_col(const std::string& text, std::size_t byte, int& line, int& col) {
  line = 1;
  col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
}

ExperimentConfig reference_defaults() {
  ExperimentConfig c;
  c.env = EnvSpec{};  // 11x11 interior, rollout 64, gamma 0.975
  c.arch = ArchSpec::conv_for(c.env);
  c.train.batch_size = 9600;
  c.train.learning_rate = 5e-5;
  c.train.alpha = 0.68;
  c.train.total_env_steps = 5'000'000'000LL;
  c.train.gradient_steps = 0;
  c.train.checkpoints.log_spaced_count = 64;
  return c;
}

void parse_into(const json& root, ExperimentConfig& c) {
  Section top(root, "");
  if (const json* e = top.child("env")) {
    Section s(*e, "env");
    s.read("interior_size", c.env.interior_size);
    s.read("t_max", c.env.t_max);
    s.read("gamma", c.env.gamma);
    s.finish();
  }
  c.arch.grid_side = c.env.grid_side();
  if (const json* m = top.child("model")) {
    Section s(*m, "model");
    s.read_enum("kind", c.arch.kind, arch_kind_from_string);
    if (c.arch.kind == ArchKind::Mlp && !m->contains("widths")) c.arch.widths = {64, 64};
    s.read("widths", c.arch.widths);
    s.read("embedding_dim", c.arch.embedding_dim);
    s.read("output_init_gain", c.arch.output_init_gain);
    s.finish();
  }
  if (const json* t = top.child("train")) {
    Section s(*t, "train");
    s.read("batch_size", c.train.batch_size);
    s.read("learning_rate", c.train.learning_rate);
    s.read("alpha", c.train.alpha);
    s.read("gradient_steps", c.train.gradient_steps);
    s.read("total_env_steps", c.train.total_env_steps);
    s.read_enum("weighting", c.train.weighting, weighting_from_string);
    s.read("adam_beta1", c.train.adam_beta1);
    s.read("adam_beta2", c.train.adam_beta2);
    s.read("adam_eps", c.train.adam_eps);
    if (const json* k = s.child("checkpoints")) {
      Section ck(*k, "train.checkpoints");
      ck.read("log_spaced_count", c.train.checkpoints.log_spaced_count);
      ck.read("explicit_steps", c.train.checkpoints.explicit_steps);
      ck.finish();
    }
    s.finish();
  }
  // The LLC is evaluated on the training distribution unless told otherwise.
  c.llc.eval_alpha = c.train.alpha;
  c.llc.eval_gamma = c.env.gamma;
  if (const json* l = top.child("llc")) {
    Section s(*l, "llc");
    s.read("n_beta", c.llc.n_beta);
    s.read("sigma2", c.llc.sigma2);
    s.read("step_size", c.llc.step_size);
    s.read("chain_length", c.llc.chain_length);
    s.read("burn_in", c.llc.burn_in);
    s.read("batch_size", c.llc.batch_size);
    s.read("num_chains", c.llc.num_chains);
    s.read_enum("preconditioner", c.llc.preconditioner, preconditioner_from_string);
    s.read("rms_decay", c.llc.rms_decay);
    s.read("rms_eps", c.llc.rms_eps);
    s.read_enum("mode", c.llc.mode, llc_mode_from_string);
    s.read("eval_alpha", c.llc.eval_alpha);
    s.read("eval_gamma", c.llc.eval_gamma);
    s.read("inject_noise", c.llc.inject_noise);
    s.read_enum("schedule", c.llc_schedule, llc_schedule_from_string);
    s.read("extra_steps", c.llc_extra_steps);
    s.finish();
  }
  if (const json* d = top.child("detection")) {
    Section s(*d, "detection");
    s.read("delta", c.delta);
    s.finish();
  }
  top.read("seeds", c.seeds);
  std::string out = c.output_dir.string();
  top.read("output_dir", out);
  c.output_dir = out;
  top.read("workers", c.workers);
  top.finish();
}

// Maps sub-config ConfigErrors onto key paths.
void validate_with_paths(const ExperimentConfig& c) {
  auto guard = [](const char* path, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      throw KeyError{path, e.what()};
    }
  };
  guard("env", [&] { c.env.validate(); });
  guard("model", [&] { c.arch.validate(); });
  guard("train", [&] { c.train.validate(); });
  guard("llc", [&] { c.llc.validate(); });
  if (c.train.resolved_gradient_steps(c.env) < 1) {
    throw KeyError{"train.total_env_steps", "yields zero gradient steps"};
  }
  if (!(c.delta >= 0.0 && c.delta < 1.0)) throw KeyError{"detection.delta", "must lie in [0, 1)"};
  if (c.seeds.empty()) throw KeyError{"seeds", "must be non-empty"};
  if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
    throw KeyError{"seeds", "must be distinct"};
  }
  if (c.workers < 1) throw KeyError{"workers", "must be >= 1"};
  if (c.output_dir.empty()) throw KeyError{"output_dir", "must be non-empty"};
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    validate_with_paths(*this);
  } catch (const KeyError& e) {
    throw ConfigError(e.path + ": " + e.message);
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 0, col = 0;
    line_col(text, e.byte > 0 ? e.byte - 1 : 0, line, col);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": JSON syntax error: " + e.what());
  }
  ExperimentConfig c = reference_defaults();
  try {
    parse_into(root, c);
    validate_with_paths(c);
  } catch (const KeyError& e) {
    int line = 0;
    if (e.path.find('.') == std::string::npos) {
      // Sub-config messages start with the field name, e.g. "t_max must be >= 1".
      line = line_of_key(text, e.message.substr(0, e.message.find(' ')));
    }
    if (line == 0) line = line_of_key(text, e.path);
    throw ConfigError(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " +
                      e.path + ": " + e.message);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text(path), path.string());
}

json config_to_json(const ExperimentConfig& c) {
  json ck = {{"log_spaced_count", c.train.checkpoints.log_spaced_count},
             {"explicit_steps", c.train.checkpoints.explicit_steps}};
  json llc = to_json(c.llc);
  llc.erase("seed");
  llc["schedule"] = to_string(c.llc_schedule);
  llc["extra_steps"] = c.llc_extra_steps;
  return {{"env", {{"interior_size", c.env.interior_size},
                   {"t_max", c.env.t_max},
                   {"gamma", c.env.gamma}}},
          {"model", {{"kind", to_string(c.arch.kind)},
                     {"widths", c.arch.widths},
                     {"embedding_dim", c.arch.embedding_dim},
                     {"output_init_gain", c.arch.output_init_gain}}},
          {"train", {{"batch_size", c.train.batch_size},
                     {"learning_rate", c.train.learning_rate},
                     {"alpha", c.train.alpha},
                     {"gradient_steps", c.train.gradient_steps},
                     {"total_env_steps", c.train.total_env_steps},
                     {"weighting", weighting_name(c.train.weighting)},
                     {"adam_beta1", c.train.adam_beta1},
                     {"adam_beta2", c.train.adam_beta2},
                     {"adam_eps", c.train.adam_eps},
                     {"checkpoints", ck}}},
          {"llc", llc},
          {"detection", {{"delta", c.delta}}},
          {"seeds", c.seeds},
          {"output_dir", c.output_dir.string()},
          {"workers", c.workers}};
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  // Where results land and how many threads produce them do not change them.
  j.erase("output_dir");
  j.erase("workers");
  return sha256_hex(j.dump());
}

int effective_workers(int requested) {
  int w = std::max(1, requested);
  if (const char* env = std::getenv("SLTRL_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) w = std::min<long>(w, cap);
  }
  return w;
}

}  // namespace sltrl
