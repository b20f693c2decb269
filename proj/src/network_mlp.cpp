#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "network.hpp"
#include "sltrl/errors.hpp"

namespace sltrl::detail {
namespace {

// Dense layer stored input-major: W[i * out + j], followed by b[out].
struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t offset = 0;  // start of W in theta

  std::size_t bias_offset() const { return offset + in * out; }
  std::size_t end() const { return bias_offset() + out; }
};

class MlpNetwork final : public Network {
 public:
  MlpNetwork(const ArchSpec& arch) : m_side(arch.grid_side) {
    std::size_t in = static_cast<std::size_t>(m_side * m_side * 3 + kNumActions);
    std::size_t offset = 0;
    std::vector<int> outs = arch.widths;
    outs.push_back(kNumActions);
    for (int out : outs) {
      m_layers.push_back({in, static_cast<std::size_t>(out), offset});
      offset = m_layers.back().end();
      in = static_cast<std::size_t>(out);
    }
    m_params = offset;
    m_z.resize(m_layers.size());
    m_a.resize(m_layers.size());
    for (std::size_t l = 0; l < m_layers.size(); ++l) {
      m_z[l].resize(m_layers[l].out);
      m_a[l].resize(m_layers[l].out);
    }
    m_dz.resize(*std::max_element(outs.begin(), outs.end()));
    m_da.resize(m_dz.size());

    for (int r = 0; r < m_side; ++r) {
      for (int c = 0; c < m_side; ++c) {
        if (r == 0 || c == 0 || r == m_side - 1 || c == m_side - 1) {
          m_wall_inputs.push_back(static_cast<std::size_t>((r * m_side + c) * 3));
        }
      }
    }
  }

  std::size_t param_count() const override { return m_params; }

  void initialize(std::span<double> theta, Rng& rng, double output_gain) const override {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l < m_layers.size(); ++l) {
      const LayerShape& L = m_layers[l];
      const bool last = l + 1 == m_layers.size();
      // The first layer sees a sparse one-hot input with ~(4 side) active entries.
      const double fan_in =
          l == 0 ? static_cast<double>(m_wall_inputs.size() + 3) : static_cast<double>(L.in);
      const double std = last ? output_gain / std::sqrt(fan_in) : std::sqrt(2.0 / fan_in);
      for (std::size_t k = L.offset; k < L.bias_offset(); ++k) theta[k] = std * normal(rng);
      for (std::size_t k = L.bias_offset(); k < L.end(); ++k) theta[k] = 0.0;
    }
  }

  void forward(std::span<const double> theta, const GridState& s, double* logits) override {
    m_active = m_wall_inputs;
    const auto cell_input = [&](Cell c, int channel) {
      return static_cast<std::size_t>(((c.row + 1) * m_side + (c.col + 1)) * 3 + channel);
    };
    m_active.push_back(cell_input(s.mouse, 1));
    m_active.push_back(cell_input(s.cheese, 2));
    if (s.prev_action) {
      m_active.push_back(static_cast<std::size_t>(m_side * m_side * 3) +
                         static_cast<std::size_t>(*s.prev_action));
    }
    run(theta, logits);
  }

  void forward(std::span<const double> theta, const Observation& obs, std::optional<Action> prev,
               double* logits) override {
    if (obs.side != m_side) {
      throw ConfigError("observation side " + std::to_string(obs.side) +
                        " does not match architecture side " + std::to_string(m_side));
    }
    m_active.clear();
    for (std::size_t i = 0; i < obs.data.size(); ++i) {
      if (obs.data[i]) m_active.push_back(i);
    }
    if (prev) m_active.push_back(obs.data.size() + static_cast<std::size_t>(*prev));
    run(theta, logits);
  }

  void backward(std::span<const double> theta, const double* dlogits,
                std::span<double> grad) override {
    const std::size_t n = m_layers.size();
    std::copy(dlogits, dlogits + kNumActions, m_dz.begin());
    for (std::size_t l = n; l-- > 1;) {
      const LayerShape& L = m_layers[l];
      const std::vector<double>& x = m_a[l - 1];
      const double* W = theta.data() + L.offset;
      double* gW = grad.data() + L.offset;
      double* gb = grad.data() + L.bias_offset();
      for (std::size_t j = 0; j < L.out; ++j) gb[j] += m_dz[j];
      for (std::size_t i = 0; i < L.in; ++i) {
        if (m_z[l - 1][i] <= 0.0) {
          m_da[i] = 0.0;
          continue;
        }
        const double xi = x[i];
        const double* Wi = W + i * L.out;
        double* gWi = gW + i * L.out;
        double acc = 0.0;
        for (std::size_t j = 0; j < L.out; ++j) {
          gWi[j] += xi * m_dz[j];
          acc += Wi[j] * m_dz[j];
        }
        m_da[i] = acc;
      }
      std::copy(m_da.begin(), m_da.begin() + static_cast<std::ptrdiff_t>(L.in), m_dz.begin());
    }
    const LayerShape& L0 = m_layers[0];
    double* gb = grad.data() + L0.bias_offset();
    for (std::size_t j = 0; j < L0.out; ++j) gb[j] += m_dz[j];
    for (std::size_t i : m_active) {
      double* gWi = grad.data() + L0.offset + i * L0.out;
      for (std::size_t j = 0; j < L0.out; ++j) gWi[j] += m_dz[j];
    }
  }

 private:
  void run(std::span<const double> theta, double* logits) {
    const std::size_t n = m_layers.size();
    {
      const LayerShape& L = m_layers[0];
      std::vector<double>& z = m_z[0];
      std::copy(theta.begin() + static_cast<std::ptrdiff_t>(L.bias_offset()),
                theta.begin() + static_cast<std::ptrdiff_t>(L.end()), z.begin());
      for (std::size_t i : m_active) {
        const double* Wi = theta.data() + L.offset + i * L.out;
        for (std::size_t j = 0; j < L.out; ++j) z[j] += Wi[j];
      }
    }
    for (std::size_t l = 0; l < n; ++l) {
      if (l > 0) {
        const LayerShape& L = m_layers[l];
        std::vector<double>& z = m_z[l];
        const std::vector<double>& x = m_a[l - 1];
        std::copy(theta.begin() + static_cast<std::ptrdiff_t>(L.bias_offset()),
                  theta.begin() + static_cast<std::ptrdiff_t>(L.end()), z.begin());
        for (std::size_t i = 0; i < L.in; ++i) {
          const double xi = x[i];
          if (xi == 0.0) continue;
          const double* Wi = theta.data() + L.offset + i * L.out;
          for (std::size_t j = 0; j < L.out; ++j) z[j] += xi * Wi[j];
        }
      }
      if (l + 1 < n) {
        for (std::size_t j = 0; j < m_z[l].size(); ++j) m_a[l][j] = std::max(0.0, m_z[l][j]);
      }
    }
    std::copy(m_z[n - 1].begin(), m_z[n - 1].end(), logits);
  }

  int m_side;
  std::vector<LayerShape> m_layers;
  std::size_t m_params = 0;
  std::vector<std::size_t> m_wall_inputs;
  std::vector<std::size_t> m_active;
  std::vector<std::vector<double>> m_z, m_a;
  std::vector<double> m_dz, m_da;
};

}  // namespace

std::unique_ptr<Network> make_mlp_network(const ArchSpec& arch) {
  return std::make_unique<MlpNetwork>(arch);
}

}  // namespace sltrl::detail
