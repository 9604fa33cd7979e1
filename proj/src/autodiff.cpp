#include "vinrs/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace vinrs::nn {

namespace {

void check_finite(const Node& n, const char* op) {
  if (!n.value.all_finite())
    throw std::runtime_error(std::string(op) + ": non-finite output");
}

Var make_node(Tensor value, std::vector<Var> parents, const char* op) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  n->parents = std::move(parents);
  check_finite(*n, op);
  return n;
}

}  // namespace

Var constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return n;
}

Parameter::Parameter(Tensor init, std::string name) {
  node_ = std::make_shared<Node>();
  node_->value = std::move(init);
  node_->requires_grad = true;
  node_->name = std::move(name);
  node_->ensure_grad();
}

void zero_grads(std::span<Parameter> params) {
  for (auto& p : params) p.zero_grad();
}

// ---- conv2d ---------------------------------------------------------------

namespace {

void conv_accumulate(const double* in, double coeff, double* out, int H, int W,
                     int di, int dj) {
  const int i0 = std::max(0, -di), i1 = std::min(H, H - di);
  const int j0 = std::max(0, -dj), j1 = std::min(W, W - dj);
  for (int i = i0; i < i1; ++i) {
    const double* src = in + (i + di) * W + dj;
    double* dst = out + i * W;
    for (int j = j0; j < j1; ++j) dst[j] += coeff * src[j];
  }
}

// fused 3x3 same-padding accumulation over one input plane; the row triple is
// applied in one pass instead of nine shifted passes
void conv3x3_accum(const double* in, const double* k9, double* out, int H, int W) {
  for (int i = 0; i < H; ++i) {
    const double* up = i > 0 ? in + (i - 1) * W : nullptr;
    const double* mid = in + i * W;
    const double* dn = i + 1 < H ? in + (i + 1) * W : nullptr;
    double* dst = out + i * W;
    auto cell = [&](int j) {
      double acc = 0.0;
      const bool l = j > 0, r = j + 1 < W;
      if (up) {
        if (l) acc += k9[0] * up[j - 1];
        acc += k9[1] * up[j];
        if (r) acc += k9[2] * up[j + 1];
      }
      if (l) acc += k9[3] * mid[j - 1];
      acc += k9[4] * mid[j];
      if (r) acc += k9[5] * mid[j + 1];
      if (dn) {
        if (l) acc += k9[6] * dn[j - 1];
        acc += k9[7] * dn[j];
        if (r) acc += k9[8] * dn[j + 1];
      }
      return acc;
    };
    dst[0] += cell(0);
    if (up && dn) {
      for (int j = 1; j + 1 < W; ++j)
        dst[j] += k9[0] * up[j - 1] + k9[1] * up[j] + k9[2] * up[j + 1] +
                  k9[3] * mid[j - 1] + k9[4] * mid[j] + k9[5] * mid[j + 1] +
                  k9[6] * dn[j - 1] + k9[7] * dn[j] + k9[8] * dn[j + 1];
    } else {
      for (int j = 1; j + 1 < W; ++j) dst[j] += cell(j);
    }
    if (W > 1) dst[W - 1] += cell(W - 1);
  }
}

void conv_shape_check(const Tensor& x, const Tensor& k, const Tensor* b) {
  if (x.rank() != 3) throw std::invalid_argument("conv2d: input must be [C,H,W]");
  if (k.rank() != 4)
    throw std::invalid_argument("conv2d: kernel must be [Cout,Cin,kh,kw]");
  if (k.dim(1) != x.dim(0))
    throw std::invalid_argument("conv2d: kernel Cin " + std::to_string(k.dim(1)) +
                                " != input channels " + std::to_string(x.dim(0)));
  if (k.dim(2) % 2 == 0 || k.dim(3) % 2 == 0)
    throw std::invalid_argument("conv2d: kernel dims must be odd");
  if (b && (b->rank() != 1 || b->dim(0) != k.dim(0)))
    throw std::invalid_argument("conv2d: bias must be [Cout]");
}

Var conv2d_impl(const Var& x, const Var& kernel, const Var* bias) {
  const Tensor& xv = x->value;
  const Tensor& kv = kernel->value;
  conv_shape_check(xv, kv, bias ? &(*bias)->value : nullptr);

  const int Cin = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  const int Cout = kv.dim(0), KH = kv.dim(2), KW = kv.dim(3);
  const int ph = KH / 2, pw = KW / 2;

  Tensor out({Cout, H, W});
  for (int co = 0; co < Cout; ++co) {
    double* o = &out.data[static_cast<std::size_t>(co) * H * W];
    if (bias) {
      const double b = (*bias)->value[co];
      for (int i = 0; i < H * W; ++i) o[i] = b;
    }
    for (int ci = 0; ci < Cin; ++ci) {
      const double* in = &xv.data[static_cast<std::size_t>(ci) * H * W];
      const double* kk = &kv.data[(static_cast<std::size_t>(co) * Cin + ci) * KH * KW];
      if (KH == 3 && KW == 3) {
        conv3x3_accum(in, kk, o, H, W);
      } else {
        for (int u = 0; u < KH; ++u)
          for (int v = 0; v < KW; ++v)
            conv_accumulate(in, kk[u * KW + v], o, H, W, u - ph, v - pw);
      }
    }
  }

  std::vector<Var> parents{x, kernel};
  if (bias) parents.push_back(*bias);
  auto n = make_node(std::move(out), std::move(parents), "conv2d");
  const bool has_bias = bias != nullptr;
  n->backward_fn = [Cin, H, W, Cout, KH, KW, ph, pw, has_bias](Node& self) {
    const Tensor& g = self.grad;
    Node& xn = *self.parents[0];
    Node& kn = *self.parents[1];
    if (xn.requires_grad) {
      Tensor& dx = xn.ensure_grad();
      for (int co = 0; co < Cout; ++co) {
        const double* go = &g.data[static_cast<std::size_t>(co) * H * W];
        for (int ci = 0; ci < Cin; ++ci) {
          double* dxi = &dx.data[static_cast<std::size_t>(ci) * H * W];
          const double* kk =
              &kn.value.data[(static_cast<std::size_t>(co) * Cin + ci) * KH * KW];
          // transpose pass: convolve the output grad with the flipped kernel
          if (KH == 3 && KW == 3) {
            const double flipped[9] = {kk[8], kk[7], kk[6], kk[5], kk[4],
                                       kk[3], kk[2], kk[1], kk[0]};
            conv3x3_accum(go, flipped, dxi, H, W);
          } else {
            for (int u = 0; u < KH; ++u)
              for (int v = 0; v < KW; ++v)
                conv_accumulate(go, kk[u * KW + v], dxi, H, W, ph - u, pw - v);
          }
        }
      }
    }
    if (kn.requires_grad) {
      Tensor& dk = kn.ensure_grad();
      const Tensor& xv = xn.value;
      for (int co = 0; co < Cout; ++co) {
        const double* go = &g.data[static_cast<std::size_t>(co) * H * W];
        for (int ci = 0; ci < Cin; ++ci) {
          const double* in = &xv.data[static_cast<std::size_t>(ci) * H * W];
          double* dkk = &dk.data[(static_cast<std::size_t>(co) * Cin + ci) * KH * KW];
          if (KH == 3 && KW == 3) {
            double acc[9] = {};
            for (int i = 0; i < H; ++i) {
              const double* up = i > 0 ? in + (i - 1) * W : nullptr;
              const double* mid = in + i * W;
              const double* dn = i + 1 < H ? in + (i + 1) * W : nullptr;
              const double* grow = go + i * W;
              if (up && dn) {
                for (int j = 1; j + 1 < W; ++j) {
                  const double gij = grow[j];
                  acc[0] += gij * up[j - 1];
                  acc[1] += gij * up[j];
                  acc[2] += gij * up[j + 1];
                  acc[3] += gij * mid[j - 1];
                  acc[4] += gij * mid[j];
                  acc[5] += gij * mid[j + 1];
                  acc[6] += gij * dn[j - 1];
                  acc[7] += gij * dn[j];
                  acc[8] += gij * dn[j + 1];
                }
              } else {
                for (int j = 1; j + 1 < W; ++j) {
                  const double gij = grow[j];
                  if (up) {
                    acc[0] += gij * up[j - 1];
                    acc[1] += gij * up[j];
                    acc[2] += gij * up[j + 1];
                  }
                  acc[3] += gij * mid[j - 1];
                  acc[4] += gij * mid[j];
                  acc[5] += gij * mid[j + 1];
                  if (dn) {
                    acc[6] += gij * dn[j - 1];
                    acc[7] += gij * dn[j];
                    acc[8] += gij * dn[j + 1];
                  }
                }
              }
              auto edge = [&](int j) {
                const double gij = grow[j];
                const bool l = j > 0, r = j + 1 < W;
                if (up) {
                  if (l) acc[0] += gij * up[j - 1];
                  acc[1] += gij * up[j];
                  if (r) acc[2] += gij * up[j + 1];
                }
                if (l) acc[3] += gij * mid[j - 1];
                acc[4] += gij * mid[j];
                if (r) acc[5] += gij * mid[j + 1];
                if (dn) {
                  if (l) acc[6] += gij * dn[j - 1];
                  acc[7] += gij * dn[j];
                  if (r) acc[8] += gij * dn[j + 1];
                }
              };
              edge(0);
              if (W > 1) edge(W - 1);
            }
            for (int t = 0; t < 9; ++t) dkk[t] += acc[t];
          } else {
            for (int u = 0; u < KH; ++u) {
              const int di = u - ph;
              for (int v = 0; v < KW; ++v) {
                const int dj = v - pw;
                const int i0 = std::max(0, -di), i1 = std::min(H, H - di);
                const int j0 = std::max(0, -dj), j1 = std::min(W, W - dj);
                double acc = 0.0;
                for (int i = i0; i < i1; ++i) {
                  const double* src = in + (i + di) * W + dj;
                  const double* grow = go + i * W;
                  for (int j = j0; j < j1; ++j) acc += grow[j] * src[j];
                }
                dkk[u * KW + v] += acc;
              }
            }
          }
        }
      }
    }
    if (has_bias) {
      Node& bn = *self.parents[2];
      if (bn.requires_grad) {
        Tensor& db = bn.ensure_grad();
        for (int co = 0; co < Cout; ++co) {
          const double* go = &g.data[static_cast<std::size_t>(co) * H * W];
          double acc = 0.0;
          for (int i = 0; i < H * W; ++i) acc += go[i];
          db[co] += acc;
        }
      }
    }
  };
  return n;
}

}  // namespace

Var conv2d(const Var& x, const Var& kernel, const Var& bias) {
  return conv2d_impl(x, kernel, &bias);
}

Var conv2d(const Var& x, const Var& kernel) { return conv2d_impl(x, kernel, nullptr); }

// ---- channel max ----------------------------------------------------------

namespace {

Var channel_max_node(const Var& x, std::vector<int> argmax) {
  const Tensor& xv = x->value;
  const int H = xv.dim(1), W = xv.dim(2);
  Tensor out({H, W});
  for (int i = 0; i < H * W; ++i)
    out[i] = xv.data[static_cast<std::size_t>(argmax[static_cast<std::size_t>(i)]) * H * W + i];
  auto n = make_node(std::move(out), {x}, "channel_max");
  n->backward_fn = [H, W, am = std::move(argmax)](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    Tensor& dx = xn.ensure_grad();
    for (int i = 0; i < H * W; ++i)
      dx.data[static_cast<std::size_t>(am[static_cast<std::size_t>(i)]) * H * W + i] +=
          self.grad[i];
  };
  return n;
}

}  // namespace

ChannelMax channel_max(const Var& x) {
  const Tensor& xv = x->value;
  if (xv.rank() != 3 || xv.dim(0) < 1)
    throw std::invalid_argument("channel_max: input must be [C,H,W], C >= 1");
  const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  std::vector<int> argmax(static_cast<std::size_t>(H * W), 0);
  for (int i = 0; i < H * W; ++i) {
    double best = xv[i];
    int bc = 0;
    for (int c = 1; c < C; ++c) {
      const double v = xv.data[static_cast<std::size_t>(c) * H * W + i];
      if (v > best) {
        best = v;
        bc = c;
      }
    }
    argmax[static_cast<std::size_t>(i)] = bc;
  }
  ChannelMax r;
  r.values = channel_max_node(x, argmax);
  r.argmax = std::move(argmax);
  return r;
}

Var channel_max_frozen(const Var& x, const std::vector<int>& argmax) {
  const Tensor& xv = x->value;
  if (xv.rank() != 3)
    throw std::invalid_argument("channel_max_frozen: input must be [C,H,W]");
  if (static_cast<int>(argmax.size()) != xv.dim(1) * xv.dim(2))
    throw std::invalid_argument("channel_max_frozen: argmax size mismatch");
  return channel_max_node(x, argmax);
}

// ---- dense ------------------------------------------------------------

Var dense(const Var& x, const Var& weights, const Var& bias) {
  const Tensor& xv = x->value;
  const Tensor& wv = weights->value;
  const Tensor& bv = bias->value;
  if (xv.rank() != 1 || wv.rank() != 2 || bv.rank() != 1)
    throw std::invalid_argument("dense: expected x [n], weights [m,n], bias [m]");
  const int n = xv.dim(0), m = wv.dim(0);
  if (wv.dim(1) != n || bv.dim(0) != m)
    throw std::invalid_argument("dense: dimension mismatch, weights " + wv.shape_str() +
                                " vs input " + xv.shape_str());
  Tensor out({m});
  for (int i = 0; i < m; ++i) {
    const double* row = &wv.data[static_cast<std::size_t>(i) * n];
    double acc = bv[i];
    for (int j = 0; j < n; ++j) acc += row[j] * xv[j];
    out[i] = acc;
  }
  auto node = make_node(std::move(out), {x, weights, bias}, "dense");
  node->backward_fn = [m, n](Node& self) {
    Node& xn = *self.parents[0];
    Node& wn = *self.parents[1];
    Node& bn = *self.parents[2];
    const Tensor& g = self.grad;
    if (xn.requires_grad) {
      Tensor& dx = xn.ensure_grad();
      for (int i = 0; i < m; ++i) {
        const double gi = g[i];
        const double* row = &wn.value.data[static_cast<std::size_t>(i) * n];
        for (int j = 0; j < n; ++j) dx[j] += gi * row[j];
      }
    }
    if (wn.requires_grad) {
      Tensor& dw = wn.ensure_grad();
      for (int i = 0; i < m; ++i) {
        const double gi = g[i];
        double* row = &dw.data[static_cast<std::size_t>(i) * n];
        for (int j = 0; j < n; ++j) row[j] += gi * xn.value[j];
      }
    }
    if (bn.requires_grad) {
      Tensor& db = bn.ensure_grad();
      for (int i = 0; i < m; ++i) db[i] += g[i];
    }
  };
  return node;
}

// ---- elementwise ------------------------------------------------------

namespace {

Var unary(const Var& x, const char* op, double (*f)(double),
          double (*df)(double value, double out)) {
  Tensor out(x->value.shape);
  for (int i = 0; i < out.numel(); ++i) out[i] = f(x->value[i]);
  auto n = make_node(std::move(out), {x}, op);
  n->backward_fn = [df](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    Tensor& dx = xn.ensure_grad();
    for (int i = 0; i < self.value.numel(); ++i)
      dx[i] += self.grad[i] * df(xn.value[i], self.value[i]);
  };
  return n;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a->value.shape_str() + " vs " + b->value.shape_str());
}

}  // namespace

Var relu(const Var& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double out) { return out * (1.0 - out); });
}

Var log(const Var& x) {
  return unary(
      x, "log", [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Var clamp(const Var& x, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be < hi");
  Tensor out(x->value.shape);
  for (int i = 0; i < out.numel(); ++i)
    out[i] = std::min(std::max(x->value[i], lo), hi);
  auto n = make_node(std::move(out), {x}, "clamp");
  n->backward_fn = [lo, hi](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    Tensor& d = xn.ensure_grad();
    for (int i = 0; i < self.value.numel(); ++i)
      if (xn.value[i] > lo && xn.value[i] < hi) d[i] += self.grad[i];
  };
  return n;
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a->value.shape);
  for (int i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
  auto n = make_node(std::move(out), {a, b}, "add");
  n->backward_fn = [](Node& self) {
    for (int side = 0; side < 2; ++side) {
      Node& p = *self.parents[static_cast<std::size_t>(side)];
      if (!p.requires_grad) continue;
      Tensor& d = p.ensure_grad();
      for (int i = 0; i < self.value.numel(); ++i) d[i] += self.grad[i];
    }
  };
  return n;
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a->value.shape);
  for (int i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
  auto n = make_node(std::move(out), {a, b}, "sub");
  n->backward_fn = [](Node& self) {
    Node& an = *self.parents[0];
    Node& bn = *self.parents[1];
    if (an.requires_grad) {
      Tensor& d = an.ensure_grad();
      for (int i = 0; i < self.value.numel(); ++i) d[i] += self.grad[i];
    }
    if (bn.requires_grad) {
      Tensor& d = bn.ensure_grad();
      for (int i = 0; i < self.value.numel(); ++i) d[i] -= self.grad[i];
    }
  };
  return n;
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a->value.shape);
  for (int i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
  auto n = make_node(std::move(out), {a, b}, "mul");
  n->backward_fn = [](Node& self) {
    Node& an = *self.parents[0];
    Node& bn = *self.parents[1];
    if (an.requires_grad) {
      Tensor& d = an.ensure_grad();
      for (int i = 0; i < self.value.numel(); ++i) d[i] += self.grad[i] * bn.value[i];
    }
    if (bn.requires_grad) {
      Tensor& d = bn.ensure_grad();
      for (int i = 0; i < self.value.numel(); ++i) d[i] += self.grad[i] * an.value[i];
    }
  };
  return n;
}

Var scale(const Var& x, double c) {
  Tensor out(x->value.shape);
  for (int i = 0; i < out.numel(); ++i) out[i] = c * x->value[i];
  auto n = make_node(std::move(out), {x}, "scale");
  n->backward_fn = [c](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    Tensor& d = xn.ensure_grad();
    for (int i = 0; i < self.value.numel(); ++i) d[i] += c * self.grad[i];
  };
  return n;
}

Var add_const(const Var& x, double c) {
  Tensor out(x->value.shape);
  for (int i = 0; i < out.numel(); ++i) out[i] = x->value[i] + c;
  auto n = make_node(std::move(out), {x}, "add_const");
  n->backward_fn = [](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    Tensor& d = xn.ensure_grad();
    for (int i = 0; i < self.value.numel(); ++i) d[i] += self.grad[i];
  };
  return n;
}

Var rsub_const(double c, const Var& x) {
  Tensor out(x->value.shape);
  for (int i = 0; i < out.numel(); ++i) out[i] = c - x->value[i];
  auto n = make_node(std::move(out), {x}, "rsub_const");
  n->backward_fn = [](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    Tensor& d = xn.ensure_grad();
    for (int i = 0; i < self.value.numel(); ++i) d[i] -= self.grad[i];
  };
  return n;
}

Var sum(const Var& x) {
  double acc = 0.0;
  for (int i = 0; i < x->value.numel(); ++i) acc += x->value[i];
  auto n = make_node(Tensor::scalar(acc), {x}, "sum");
  n->backward_fn = [](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    Tensor& d = xn.ensure_grad();
    const double g = self.grad[0];
    for (int i = 0; i < xn.value.numel(); ++i) d[i] += g;
  };
  return n;
}

Var reshape(const Var& x, std::vector<int> shape) {
  if (Tensor::count(shape) != x->value.numel())
    throw std::invalid_argument("reshape: element count mismatch");
  Tensor out(std::move(shape), x->value.data);
  auto n = make_node(std::move(out), {x}, "reshape");
  n->backward_fn = [](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    Tensor& d = xn.ensure_grad();
    for (int i = 0; i < self.value.numel(); ++i) d[i] += self.grad[i];
  };
  return n;
}

Var pick(const Var& x, int flat_index) {
  if (flat_index < 0 || flat_index >= x->value.numel())
    throw std::invalid_argument("pick: index out of range");
  auto n = make_node(Tensor::scalar(x->value[flat_index]), {x}, "pick");
  n->backward_fn = [flat_index](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad()[flat_index] += self.grad[0];
  };
  return n;
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(1) != bv.dim(1) ||
      av.dim(2) != bv.dim(2))
    throw std::invalid_argument("concat_channels: spatial dims mismatch");
  const int Ca = av.dim(0), Cb = bv.dim(0), H = av.dim(1), W = av.dim(2);
  Tensor out({Ca + Cb, H, W});
  std::copy(av.data.begin(), av.data.end(), out.data.begin());
  std::copy(bv.data.begin(), bv.data.end(),
            out.data.begin() + static_cast<std::ptrdiff_t>(Ca) * H * W);
  auto n = make_node(std::move(out), {a, b}, "concat_channels");
  n->backward_fn = [Ca, Cb, H, W](Node& self) {
    Node& an = *self.parents[0];
    Node& bn = *self.parents[1];
    if (an.requires_grad) {
      Tensor& d = an.ensure_grad();
      for (int i = 0; i < Ca * H * W; ++i) d[i] += self.grad[i];
    }
    if (bn.requires_grad) {
      Tensor& d = bn.ensure_grad();
      for (int i = 0; i < Cb * H * W; ++i) d[i] += self.grad[Ca * H * W + i];
    }
  };
  return n;
}

Var stack_scalars(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("stack_scalars: empty input");
  Tensor out({static_cast<int>(xs.size())});
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!xs[i]->is_scalar())
      throw std::invalid_argument("stack_scalars: inputs must be scalars");
    out[static_cast<int>(i)] = xs[i]->value[0];
  }
  auto n = make_node(std::move(out), std::vector<Var>(xs), "stack_scalars");
  n->backward_fn = [](Node& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      Node& p = *self.parents[i];
      if (p.requires_grad) p.ensure_grad()[0] += self.grad[static_cast<int>(i)];
    }
  };
  return n;
}

// ---- backward sweep ---------------------------------------------------

void backward(const Var& loss) {
  if (!loss->is_scalar())
    throw std::invalid_argument("backward: loss must be a scalar node");
  // iterative topological order over the grad-requiring subgraph
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // op outputs start each sweep clean; leaf gradients accumulate across sweeps
  for (Node* n : order) {
    n->ensure_grad();
    if (n->backward_fn) n->grad.fill(0.0);
  }
  loss->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
    if (!n->grad.all_finite())
      throw std::runtime_error("backward: non-finite gradient at node " +
                               (n->name.empty() ? std::string("<op>") : n->name));
  }
}

}  // namespace vinrs::nn
