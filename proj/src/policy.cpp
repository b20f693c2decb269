#include "sltrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "network.hpp"
#include "sltrl/errors.hpp"

namespace sltrl {

namespace detail {
std::unique_ptr<Network> make_mlp_network(const ArchSpec& arch);
std::unique_ptr<Network> make_conv_network(const ArchSpec& arch);

std::unique_ptr<Network> make_network(const ArchSpec& arch, const EnvSpec& spec) {
  arch.validate();
  if (arch.grid_side != spec.grid_side()) {
    throw ConfigError("architecture grid side " + std::to_string(arch.grid_side) +
                      " does not match environment grid side " +
                      std::to_string(spec.grid_side()));
  }
  if (arch.kind == ArchKind::Mlp) return make_mlp_network(arch);
  return make_conv_network(arch);
}
}  // namespace detail

std::string to_string(ArchKind kind) { return kind == ArchKind::Mlp ? "mlp" : "conv_residual"; }

ArchKind arch_kind_from_string(const std::string& name) {
  if (name == "mlp") return ArchKind::Mlp;
  if (name == "conv_residual") return ArchKind::ConvResidual;
  throw ConfigError("unknown architecture kind '" + name + "'");
}

void ArchSpec::validate() const {
  if (widths.empty()) throw ConfigError("architecture needs at least one hidden layer");
  for (int w : widths) {
    if (w < 1) throw ConfigError("architecture widths must be positive");
  }
  if (grid_side < 5) throw ConfigError("architecture grid_side must be >= 5");
  if (kind == ArchKind::ConvResidual && embedding_dim < 1) {
    throw ConfigError("embedding_dim must be positive");
  }
  if (!(output_init_gain >= 0.0)) throw ConfigError("output_init_gain must be >= 0");
}

std::size_t ArchSpec::param_count() const {
  EnvSpec env;
  env.interior_size = grid_side - 2;
  return detail::make_network(*this, env)->param_count();
}

ArchSpec ArchSpec::mlp_for(const EnvSpec& env, std::vector<int> widths) {
  ArchSpec a;
  a.kind = ArchKind::Mlp;
  a.widths = std::move(widths);
  a.grid_side = env.grid_side();
  return a;
}

ArchSpec ArchSpec::conv_for(const EnvSpec& env, std::vector<int> channels, int embedding_dim) {
  ArchSpec a;
  a.kind = ArchKind::ConvResidual;
  a.widths = std::move(channels);
  a.embedding_dim = embedding_dim;
  a.grid_side = env.grid_side();
  return a;
}

PolicyParams init_params(const ArchSpec& arch, std::uint64_t seed, InitScheme scheme) {
  EnvSpec env;
  env.interior_size = arch.grid_side - 2;
  auto net = detail::make_network(arch, env);
  PolicyParams p{arch, std::vector<double>(net->param_count(), 0.0)};
  if (scheme == InitScheme::FanIn) {
    Rng rng = make_rng(seed, 0x1A17);
    net->initialize(p.theta, rng, arch.output_init_gain);
  }
  return p;
}

namespace {

ActionProbs softmax(const double* logits) {
  ActionProbs p{};
  const double mx = *std::max_element(logits, logits + kNumActions);
  double z = 0.0;
  for (int a = 0; a < kNumActions; ++a) {
    p[a] = std::exp(logits[a] - mx);
    z += p[a];
  }
  for (double& v : p) v /= z;
  return p;
}

}  // namespace

PolicyEvaluator::PolicyEvaluator(const PolicyParams& params, const EnvSpec& spec)
    : m_params(&params), m_net(detail::make_network(params.arch, spec)) {
  if (params.theta.size() != m_net->param_count()) {
    throw ConfigError("parameter vector has " + std::to_string(params.theta.size()) +
                      " entries, architecture expects " + std::to_string(m_net->param_count()));
  }
}

PolicyEvaluator::~PolicyEvaluator() = default;
PolicyEvaluator::PolicyEvaluator(PolicyEvaluator&&) noexcept = default;
PolicyEvaluator& PolicyEvaluator::operator=(PolicyEvaluator&&) noexcept = default;

void PolicyEvaluator::rebind(const PolicyParams& params) {
  if (params.theta.size() != m_net->param_count()) {
    throw ConfigError("rebind: parameter count mismatch");
  }
  m_params = &params;
}

std::size_t PolicyEvaluator::param_count() const { return m_net->param_count(); }

ActionProbs PolicyEvaluator::probs(const GridState& state) {
  double logits[kNumActions];
  m_net->forward(m_params->theta, state, logits);
  return softmax(logits);
}

ActionProbs PolicyEvaluator::probs(const Observation& obs, std::optional<Action> prev) {
  double logits[kNumActions];
  m_net->forward(m_params->theta, obs, prev, logits);
  return softmax(logits);
}

void PolicyEvaluator::backward_from_logits(const double* dlogits, std::span<double> grad) {
  m_net->backward(m_params->theta, dlogits, grad);
}

double PolicyEvaluator::accumulate_logprob_grad(const GridState& state, Action action,
                                                double scale, std::span<double> grad) {
  double logits[kNumActions];
  m_net->forward(m_params->theta, state, logits);
  return logprob_backward(logits, action, scale, grad);
}

double PolicyEvaluator::accumulate_logprob_grad(const Observation& obs, std::optional<Action> prev,
                                                Action action, double scale,
                                                std::span<double> grad) {
  double logits[kNumActions];
  m_net->forward(m_params->theta, obs, prev, logits);
  return logprob_backward(logits, action, scale, grad);
}

double PolicyEvaluator::logprob_backward(const double* logits, Action action, double scale,
                                         std::span<double> grad) {
  const ActionProbs p = softmax(logits);
  const int a = static_cast<int>(action);
  double dlogits[kNumActions];
  for (int k = 0; k < kNumActions; ++k) dlogits[k] = scale * ((k == a ? 1.0 : 0.0) - p[k]);
  backward_from_logits(dlogits, grad);
  return p[a];
}

void PolicyEvaluator::accumulate_prob_grad(const GridState& state, const ActionProbs& coeff,
                                           std::span<double> grad) {
  double logits[kNumActions];
  m_net->forward(m_params->theta, state, logits);
  const ActionProbs p = softmax(logits);
  // d pi_a / d z_k = pi_a (delta_ak - pi_k)
  double mean = 0.0;
  for (int a = 0; a < kNumActions; ++a) mean += coeff[a] * p[a];
  double dlogits[kNumActions];
  for (int k = 0; k < kNumActions; ++k) dlogits[k] = p[k] * (coeff[k] - mean);
  backward_from_logits(dlogits, grad);
}

ActionProbs forward(const PolicyParams& params, const EnvSpec& spec, const Observation& obs,
                    std::optional<Action> prev) {
  PolicyEvaluator eval(params, spec);
  return eval.probs(obs, prev);
}

double l2_norm(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

std::vector<double> logprob_grad(const PolicyParams& params, const EnvSpec& spec,
                                 const Observation& obs, std::optional<Action> prev,
                                 Action action) {
  PolicyEvaluator eval(params, spec);
  std::vector<double> grad(params.theta.size(), 0.0);
  eval.accumulate_logprob_grad(obs, prev, action, 1.0, grad);
  for (double g : grad) {
    if (!std::isfinite(g)) {
      std::ostringstream msg;
      msg << "non-finite log-probability gradient (|theta| = " << l2_norm(params.theta)
          << ", |grad| = " << l2_norm(grad) << ")";
      throw NumericError(msg.str());
    }
  }
  return grad;
}

PolicyTable tabulate(const PolicyParams& params, const EnvSpec& spec, std::size_t max_rows) {
  const StateIndexer index(spec);
  const std::size_t rows = index.num_rows();
  if (rows > max_rows) {
    throw ResourceError("policy table needs " + std::to_string(rows) + " rows, budget is " +
                        std::to_string(max_rows));
  }
  PolicyEvaluator eval(params, spec);
  PolicyTable table{spec.interior_size, std::vector<double>(rows * kNumActions)};
  for (std::size_t r = 0; r < rows; ++r) {
    const ActionProbs p = eval.probs(index.state_at_row(r));
    std::copy(p.begin(), p.end(), table.row(r));
  }
  return table;
}

}  // namespace sltrl
