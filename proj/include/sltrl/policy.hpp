#pragma once

// Parametrized stochastic policy pi_theta(a | observation, previous action).
//
// Two architectures share the same flat parameter vector representation:
//  * Mlp: flattened one-hot observation concatenated with the 4-dim previous
//    action one-hot (zero vector for "none"), ReLU hidden layers, 4 logits.
//  * ConvResidual: Block(c_in, c) = Conv3x3 -> MaxPool(3, stride 2, pad 1) ->
//    ResBlock -> ResBlock, stacked per `widths`, then ReLU -> Flatten ->
//    Linear(-> E) -> ReLU, concatenated with the previous-action one-hot ->
//    Linear(E + 4 -> E) -> ReLU -> Linear(E -> 4).
//
// Gradients are computed by reverse-mode differentiation over the fixed layer
// sequence; there is no general tape.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sltrl/env.hpp"
#include "sltrl/random.hpp"

namespace sltrl {

enum class ArchKind { Mlp, ConvResidual };

std::string to_string(ArchKind kind);
ArchKind arch_kind_from_string(const std::string& name);

struct ArchSpec {
  ArchKind kind = ArchKind::Mlp;
  // Mlp: hidden layer widths. ConvResidual: output channels of each block.
  std::vector<int> widths{64, 64};
  // ConvResidual only: width of the dense embedding after the trunk.
  int embedding_dim = 64;
  // Side length of the observation grid (interior + 2).
  int grid_side = 7;
  // Std multiplier of the output layer at initialization; small values give a
  // near-uniform initial policy.
  double output_init_gain = 0.1;

  void validate() const;
  std::size_t param_count() const;

  static ArchSpec mlp_for(const EnvSpec& env, std::vector<int> widths = {64, 64});
  static ArchSpec conv_for(const EnvSpec& env, std::vector<int> channels = {16, 32, 32},
                           int embedding_dim = 256);

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

struct PolicyParams {
  ArchSpec arch;
  std::vector<double> theta;

  std::size_t size() const { return theta.size(); }
};

enum class InitScheme { FanIn, Zero };

PolicyParams init_params(const ArchSpec& arch, std::uint64_t seed,
                         InitScheme scheme = InitScheme::FanIn);

// Row-stochastic table of action distributions over every (state, previous
// action) row in StateIndexer order.
struct PolicyTable {
  int interior_size = 0;
  std::vector<double> probs;  // rows x 4, row-major

  std::size_t rows() const { return probs.size() / kNumActions; }
  const double* row(std::size_t i) const { return probs.data() + i * kNumActions; }
  double* row(std::size_t i) { return probs.data() + i * kNumActions; }
};

namespace detail {
class Network;
}

// Forward/backward evaluator bound to one parameter vector. Owns scratch
// buffers, so one instance must not be shared between threads.
class PolicyEvaluator {
 public:
  PolicyEvaluator(const PolicyParams& params, const EnvSpec& spec);
  ~PolicyEvaluator();
  PolicyEvaluator(PolicyEvaluator&&) noexcept;
  PolicyEvaluator& operator=(PolicyEvaluator&&) noexcept;

  // Point the evaluator at another parameter vector of the same architecture.
  void rebind(const PolicyParams& params);

  ActionProbs probs(const GridState& state);
  ActionProbs probs(const Observation& obs, std::optional<Action> prev);

  // grad += scale * d/dtheta log pi(action | state). Returns pi(action | state).
  double accumulate_logprob_grad(const GridState& state, Action action, double scale,
                                 std::span<double> grad);

  double accumulate_logprob_grad(const Observation& obs, std::optional<Action> prev,
                                 Action action, double scale, std::span<double> grad);

  // grad += d/dtheta sum_a coeff[a] * pi(a | state).
  void accumulate_prob_grad(const GridState& state, const ActionProbs& coeff,
                            std::span<double> grad);

  std::size_t param_count() const;

 private:
  void backward_from_logits(const double* dlogits, std::span<double> grad);
  double logprob_backward(const double* logits, Action action, double scale,
                          std::span<double> grad);

  const PolicyParams* m_params;
  std::unique_ptr<detail::Network> m_net;
};

ActionProbs forward(const PolicyParams& params, const EnvSpec& spec, const Observation& obs,
                    std::optional<Action> prev);

// Exact gradient of log pi(action | obs, prev). Throws NumericError when the
// result is not finite.
std::vector<double> logprob_grad(const PolicyParams& params, const EnvSpec& spec,
                                 const Observation& obs, std::optional<Action> prev,
                                 Action action);

inline constexpr std::size_t kDefaultTableRowBudget = std::size_t{1} << 22;

// Throws ResourceError when the table would exceed `max_rows`.
PolicyTable tabulate(const PolicyParams& params, const EnvSpec& spec,
                     std::size_t max_rows = kDefaultTableRowBudget);

double l2_norm(std::span<const double> v);

}  // namespace sltrl
