#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "network.hpp"
#include "sltrl/errors.hpp"

namespace sltrl::detail {
namespace {

struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  void reset(int channels, int height, int width) {
    c = channels;
    h = height;
    w = width;
    v.assign(static_cast<std::size_t>(c * h * w), 0.0);
  }
  double& at(int ch, int y, int x) { return v[static_cast<std::size_t>((ch * h + y) * w + x)]; }
  double at(int ch, int y, int x) const {
    return v[static_cast<std::size_t>((ch * h + y) * w + x)];
  }
};

// 3x3 convolution, stride 1, zero padding 1. Weights W[cout][cin][3][3], bias b[cout].
void conv_forward(const double* W, const double* b, const Tensor& in, int cout, Tensor& out) {
  out.reset(cout, in.h, in.w);
  for (int co = 0; co < cout; ++co) {
    for (int y = 0; y < in.h; ++y) {
      for (int x = 0; x < in.w; ++x) {
        double acc = b[co];
        for (int ci = 0; ci < in.c; ++ci) {
          const double* k = W + (co * in.c + ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int yy = y + ky - 1;
            if (yy < 0 || yy >= in.h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int xx = x + kx - 1;
              if (xx < 0 || xx >= in.w) continue;
              acc += k[ky * 3 + kx] * in.at(ci, yy, xx);
            }
          }
        }
        out.at(co, y, x) = acc;
      }
    }
  }
}

void conv_backward(const double* W, const Tensor& in, const Tensor& dout, double* gW, double* gb,
                   Tensor* din) {
  if (din) din->reset(in.c, in.h, in.w);
  for (int co = 0; co < dout.c; ++co) {
    for (int y = 0; y < dout.h; ++y) {
      for (int x = 0; x < dout.w; ++x) {
        const double g = dout.at(co, y, x);
        if (g == 0.0) continue;
        gb[co] += g;
        for (int ci = 0; ci < in.c; ++ci) {
          const double* k = W + (co * in.c + ci) * 9;
          double* gk = gW + (co * in.c + ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int yy = y + ky - 1;
            if (yy < 0 || yy >= in.h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int xx = x + kx - 1;
              if (xx < 0 || xx >= in.w) continue;
              gk[ky * 3 + kx] += g * in.at(ci, yy, xx);
              if (din) din->at(ci, yy, xx) += g * k[ky * 3 + kx];
            }
          }
        }
      }
    }
  }
}

int pooled_size(int n) { return (n - 1) / 2 + 1; }

// 3x3 max pool, stride 2, padding 1 (padding never wins).
void pool_forward(const Tensor& in, Tensor& out, std::vector<int>& argmax) {
  out.reset(in.c, pooled_size(in.h), pooled_size(in.w));
  argmax.assign(out.v.size(), 0);
  for (int ch = 0; ch < in.c; ++ch) {
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        int best_idx = 0;
        for (int ky = 0; ky < 3; ++ky) {
          const int yy = 2 * y + ky - 1;
          if (yy < 0 || yy >= in.h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int xx = 2 * x + kx - 1;
            if (xx < 0 || xx >= in.w) continue;
            const double val = in.at(ch, yy, xx);
            if (val > best) {
              best = val;
              best_idx = (ch * in.h + yy) * in.w + xx;
            }
          }
        }
        out.at(ch, y, x) = best;
        argmax[static_cast<std::size_t>((ch * out.h + y) * out.w + x)] = best_idx;
      }
    }
  }
}

struct ConvShape {
  int cin = 0, cout = 0;
  std::size_t w = 0, b = 0;  // offsets
};

struct ResCache {
  Tensor x, t1, u1, t2;
};

struct BlockCache {
  Tensor in, conv, pooled;
  std::vector<int> argmax;
  ResCache res[2];
  Tensor out;
};

struct DenseShape {
  std::size_t in = 0, out = 0, w = 0, b = 0;
};

class ConvResidualNetwork final : public Network {
 public:
  explicit ConvResidualNetwork(const ArchSpec& arch)
      : m_side(arch.grid_side), m_embed(static_cast<std::size_t>(arch.embedding_dim)) {
    std::size_t offset = 0;
    auto conv = [&](int cin, int cout) {
      ConvShape s{cin, cout, offset, 0};
      offset += static_cast<std::size_t>(cout * cin * 9);
      s.b = offset;
      offset += static_cast<std::size_t>(cout);
      return s;
    };
    int cin = 3;
    int spatial = m_side;
    for (int c : arch.widths) {
      Block blk;
      blk.entry = conv(cin, c);
      for (auto& r : blk.res) {
        r[0] = conv(c, c);
        r[1] = conv(c, c);
      }
      m_blocks.push_back(blk);
      cin = c;
      spatial = pooled_size(spatial);
    }
    m_flat = static_cast<std::size_t>(cin * spatial * spatial);
    auto dense = [&](std::size_t in, std::size_t out) {
      DenseShape d{in, out, offset, 0};
      offset += in * out;
      d.b = offset;
      offset += out;
      return d;
    };
    m_lin1 = dense(m_flat, m_embed);
    m_lin2 = dense(m_embed + kNumActions, m_embed);
    m_head = dense(m_embed, kNumActions);
    m_params = offset;
    m_cache.resize(m_blocks.size());
  }

  std::size_t param_count() const override { return m_params; }

  void initialize(std::span<double> theta, Rng& rng, double output_gain) const override {
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&](std::size_t w, std::size_t count, double std, std::size_t b,
                    std::size_t bcount) {
      for (std::size_t k = 0; k < count; ++k) theta[w + k] = std * normal(rng);
      for (std::size_t k = 0; k < bcount; ++k) theta[b + k] = 0.0;
    };
    auto fill_conv = [&](const ConvShape& s) {
      fill(s.w, static_cast<std::size_t>(s.cout * s.cin * 9), std::sqrt(2.0 / (s.cin * 9.0)), s.b,
           static_cast<std::size_t>(s.cout));
    };
    for (const Block& blk : m_blocks) {
      fill_conv(blk.entry);
      for (const auto& r : blk.res) {
        fill_conv(r[0]);
        fill_conv(r[1]);
      }
    }
    auto fill_dense = [&](const DenseShape& d, double std) {
      fill(d.w, d.in * d.out, std, d.b, d.out);
    };
    fill_dense(m_lin1, std::sqrt(2.0 / static_cast<double>(m_lin1.in)));
    fill_dense(m_lin2, std::sqrt(2.0 / static_cast<double>(m_lin2.in)));
    fill_dense(m_head, output_gain / std::sqrt(static_cast<double>(m_head.in)));
  }

  void forward(std::span<const double> theta, const GridState& state, double* logits) override {
    const int interior = m_side - 2;
    EnvSpec spec;
    spec.interior_size = interior;
    forward(theta, encode_observation(spec, state), state.prev_action, logits);
  }

  void forward(std::span<const double> theta, const Observation& obs, std::optional<Action> prev,
               double* logits) override {
    if (obs.side != m_side) {
      throw ConfigError("observation side " + std::to_string(obs.side) +
                        " does not match architecture side " + std::to_string(m_side));
    }
    const double* th = theta.data();
    Tensor x;
    x.reset(3, m_side, m_side);
    for (int y = 0; y < m_side; ++y) {
      for (int xx = 0; xx < m_side; ++xx) {
        for (int ch = 0; ch < 3; ++ch) x.at(ch, y, xx) = obs.at(y, xx, ch);
      }
    }
    for (std::size_t bi = 0; bi < m_blocks.size(); ++bi) {
      const Block& blk = m_blocks[bi];
      BlockCache& bc = m_cache[bi];
      bc.in = x;
      conv_forward(th + blk.entry.w, th + blk.entry.b, bc.in, blk.entry.cout, bc.conv);
      pool_forward(bc.conv, bc.pooled, bc.argmax);
      Tensor cur = bc.pooled;
      for (int r = 0; r < 2; ++r) {
        ResCache& rc = bc.res[r];
        rc.x = cur;
        rc.t1 = relu(cur);
        conv_forward(th + blk.res[r][0].w, th + blk.res[r][0].b, rc.t1, blk.res[r][0].cout, rc.u1);
        rc.t2 = relu(rc.u1);
        Tensor u2;
        conv_forward(th + blk.res[r][1].w, th + blk.res[r][1].b, rc.t2, blk.res[r][1].cout, u2);
        for (std::size_t k = 0; k < cur.v.size(); ++k) cur.v[k] += u2.v[k];
      }
      bc.out = cur;
      x = cur;
    }
    m_trunk = x;
    m_flat_act.resize(m_flat);
    for (std::size_t k = 0; k < m_flat; ++k) m_flat_act[k] = std::max(0.0, x.v[k]);

    dense_forward(th, m_lin1, m_flat_act, m_h1);
    m_cat.assign(m_embed + kNumActions, 0.0);
    for (std::size_t k = 0; k < m_embed; ++k) m_cat[k] = std::max(0.0, m_h1[k]);
    if (prev) m_cat[m_embed + static_cast<std::size_t>(*prev)] = 1.0;
    dense_forward(th, m_lin2, m_cat, m_h2);
    m_a2.resize(m_embed);
    for (std::size_t k = 0; k < m_embed; ++k) m_a2[k] = std::max(0.0, m_h2[k]);
    std::vector<double> out;
    dense_forward(th, m_head, m_a2, out);
    std::copy(out.begin(), out.end(), logits);
  }

  void backward(std::span<const double> theta, const double* dlogits,
                std::span<double> grad) override {
    const double* th = theta.data();
    double* g = grad.data();
    std::vector<double> dlog(dlogits, dlogits + kNumActions);
    std::vector<double> da2 = dense_backward(th, m_head, m_a2, dlog, g);
    for (std::size_t k = 0; k < m_embed; ++k) {
      if (m_h2[k] <= 0.0) da2[k] = 0.0;
    }
    std::vector<double> dcat = dense_backward(th, m_lin2, m_cat, da2, g);
    std::vector<double> dh1(dcat.begin(), dcat.begin() + static_cast<std::ptrdiff_t>(m_embed));
    for (std::size_t k = 0; k < m_embed; ++k) {
      if (m_h1[k] <= 0.0) dh1[k] = 0.0;
    }
    std::vector<double> dflat = dense_backward(th, m_lin1, m_flat_act, dh1, g);

    Tensor dx = m_trunk;
    for (std::size_t k = 0; k < m_flat; ++k) dx.v[k] = m_trunk.v[k] > 0.0 ? dflat[k] : 0.0;

    for (std::size_t bi = m_blocks.size(); bi-- > 0;) {
      const Block& blk = m_blocks[bi];
      const BlockCache& bc = m_cache[bi];
      for (int r = 1; r >= 0; --r) {
        const ResCache& rc = bc.res[r];
        Tensor dt2, dt1;
        conv_backward(th + blk.res[r][1].w, rc.t2, dx, g + blk.res[r][1].w, g + blk.res[r][1].b,
                      &dt2);
        for (std::size_t k = 0; k < dt2.v.size(); ++k) {
          if (rc.u1.v[k] <= 0.0) dt2.v[k] = 0.0;
        }
        conv_backward(th + blk.res[r][0].w, rc.t1, dt2, g + blk.res[r][0].w, g + blk.res[r][0].b,
                      &dt1);
        for (std::size_t k = 0; k < dx.v.size(); ++k) {
          if (rc.x.v[k] > 0.0) dx.v[k] += dt1.v[k];
        }
      }
      Tensor dconv;
      dconv.reset(bc.conv.c, bc.conv.h, bc.conv.w);
      for (std::size_t k = 0; k < dx.v.size(); ++k) {
        dconv.v[static_cast<std::size_t>(bc.argmax[k])] += dx.v[k];
      }
      Tensor din;
      conv_backward(th + blk.entry.w, bc.in, dconv, g + blk.entry.w, g + blk.entry.b,
                    bi > 0 ? &din : nullptr);
      if (bi > 0) dx = std::move(din);
    }
  }

 private:
  struct Block {
    ConvShape entry;
    ConvShape res[2][2];
  };

  static Tensor relu(const Tensor& t) {
    Tensor out = t;
    for (double& v : out.v) v = std::max(0.0, v);
    return out;
  }

  static void dense_forward(const double* th, const DenseShape& d, const std::vector<double>& x,
                            std::vector<double>& z) {
    z.assign(th + d.b, th + d.b + d.out);
    for (std::size_t i = 0; i < d.in; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      const double* Wi = th + d.w + i * d.out;
      for (std::size_t j = 0; j < d.out; ++j) z[j] += xi * Wi[j];
    }
  }

  // Accumulates parameter gradients and returns d/dx.
  static std::vector<double> dense_backward(const double* th, const DenseShape& d,
                                            const std::vector<double>& x,
                                            const std::vector<double>& dz, double* g) {
    std::vector<double> dx(d.in, 0.0);
    for (std::size_t j = 0; j < d.out; ++j) g[d.b + j] += dz[j];
    for (std::size_t i = 0; i < d.in; ++i) {
      const double* Wi = th + d.w + i * d.out;
      double* gWi = g + d.w + i * d.out;
      double acc = 0.0;
      for (std::size_t j = 0; j < d.out; ++j) {
        gWi[j] += x[i] * dz[j];
        acc += Wi[j] * dz[j];
      }
      dx[i] = acc;
    }
    return dx;
  }

  int m_side;
  std::size_t m_embed;
  std::size_t m_flat = 0;
  std::size_t m_params = 0;
  std::vector<Block> m_blocks;
  DenseShape m_lin1, m_lin2, m_head;

  std::vector<BlockCache> m_cache;
  Tensor m_trunk;
  std::vector<double> m_flat_act, m_h1, m_cat, m_h2, m_a2;
};

}  // namespace

std::unique_ptr<Network> make_conv_network(const ArchSpec& arch) {
  return std::make_unique<ConvResidualNetwork>(arch);
}

}  // namespace sltrl::detail
