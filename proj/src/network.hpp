#pragma once

#include <memory>
#include <optional>
#include <span>

#include "sltrl/env.hpp"
#include "sltrl/policy.hpp"

namespace sltrl::detail {

// Fixed compute graph producing 4 logits. forward() caches the activations
// that the next backward() call consumes.
class Network {
 public:
  virtual ~Network() = default;

  virtual std::size_t param_count() const = 0;
  virtual void initialize(std::span<double> theta, Rng& rng, double output_gain) const = 0;

  virtual void forward(std::span<const double> theta, const GridState& state, double* logits) = 0;
  virtual void forward(std::span<const double> theta, const Observation& obs,
                       std::optional<Action> prev, double* logits) = 0;
  // grad += d(sum_k dlogits[k] * logits[k]) / dtheta for the cached forward pass.
  virtual void backward(std::span<const double> theta, const double* dlogits,
                        std::span<double> grad) = 0;
};

std::unique_ptr<Network> make_network(const ArchSpec& arch, const EnvSpec& spec);

}  // namespace sltrl::detail
