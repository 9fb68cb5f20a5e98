/* Copyright 2026 The ALA-Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "alanet/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "alanet/error.hpp"
#include "alanet/ordinal.hpp"

namespace alanet::ag {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

void require(bool cond, const char* what) {
  if (!cond) throw InvalidInput(what);
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.numel() != value.numel()) grad = Tensor::zeros_like(value);
  return grad;
}

void Node::accumulate(const Tensor& g) {
  if (grad.numel() != value.numel()) {
    grad = g.reshaped(value.shape());
  } else {
    grad.add_(g);
  }
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const Var& v : inputs) {
    if (v.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (Var& v : inputs) n->inputs.push_back(v.shared());
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

void backward(const Var& root) {
  if (!root.defined() || root.value().numel() != 1) {
    throw InvalidInput("backward: root must be a single-element tensor");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.numel() == n->value.numel()) n->backward(*n);
  }
}

Var add(const Var& a, const Var& b) {
  require(a.value().numel() == b.value().numel(), "add: shape mismatch");
  Tensor out = a.value();
  out.add_(b.value());
  return make_op(std::move(out), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (in->requires_grad) in->accumulate(self.grad);
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  out.scale_(factor);
  return make_op(std::move(out), {a}, [factor](Node& self) {
    Tensor g = self.grad;
    g.scale_(factor);
    self.inputs[0]->accumulate(g);
  });
}

Var relu(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return make_op(std::move(out), {x}, [](Node& self) {
    Tensor g = self.grad;
    const Tensor& y = self.value;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      if (y[i] <= 0.0) g[i] = 0.0;
    }
    self.inputs[0]->accumulate(g);
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require(x.value().rank() == 2 && weight.value().rank() == 2, "linear: expects 2-D operands");
  const int n = x.value().dim(0);
  const int d = x.value().dim(1);
  const int o = weight.value().dim(0);
  require(weight.value().dim(1) == d, "linear: input width does not match weight");
  require(!bias.defined() || static_cast<int>(bias.value().numel()) == o, "linear: bias size");

  Tensor out({n, o});
  MapR y(out.data(), n, o);
  CMapR xm(x.value().data(), n, d);
  CMapR wm(weight.value().data(), o, d);
  y.noalias() = xm * wm.transpose();
  if (bias.defined()) {
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < o; ++c) y(r, c) += bias.value()[static_cast<std::size_t>(c)];
    }
  }
  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_op(std::move(out), std::move(inputs), [n, d, o](Node& self) {
    CMapR gy(self.grad.data(), n, o);
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    if (xn.requires_grad) {
      MapR gx(xn.grad_buffer().data(), n, d);
      gx.noalias() += gy * CMapR(wn.value.data(), o, d);
    }
    if (wn.requires_grad) {
      MapR gw(wn.grad_buffer().data(), o, d);
      gw.noalias() += gy.transpose() * CMapR(xn.value.data(), n, d);
    }
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      Tensor& gb = self.inputs[2]->grad_buffer();
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < o; ++c) gb[static_cast<std::size_t>(c)] += gy(r, c);
      }
    }
  });
}

namespace {

struct ConvGeometry {
  int n, c, h, w, o, k, stride, pad, ho, wo;
  int ckk() const { return c * k * k; }
  int hw() const { return ho * wo; }
};

// col: (C*k*k) x (N*Ho*Wo), row-major.
void im2col(const double* x, const ConvGeometry& g, double* col) {
  const int cols = g.n * g.hw();
  for (int ch = 0; ch < g.c; ++ch) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        double* row = col + static_cast<std::size_t>((ch * g.k + ki) * g.k + kj) * cols;
        for (int b = 0; b < g.n; ++b) {
          const double* plane = x + (static_cast<std::size_t>(b) * g.c + ch) * g.h * g.w;
          double* dst = row + static_cast<std::size_t>(b) * g.hw();
          for (int oy = 0; oy < g.ho; ++oy) {
            const int iy = oy * g.stride - g.pad + ki;
            if (iy < 0 || iy >= g.h) {
              std::fill(dst + oy * g.wo, dst + (oy + 1) * g.wo, 0.0);
              continue;
            }
            const double* src = plane + static_cast<std::size_t>(iy) * g.w;
            for (int ox = 0; ox < g.wo; ++ox) {
              const int ix = ox * g.stride - g.pad + kj;
              dst[oy * g.wo + ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0;
            }
          }
        }
      }
    }
  }
}

void col2im(const double* col, const ConvGeometry& g, double* x) {
  const int cols = g.n * g.hw();
  for (int ch = 0; ch < g.c; ++ch) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        const double* row = col + static_cast<std::size_t>((ch * g.k + ki) * g.k + kj) * cols;
        for (int b = 0; b < g.n; ++b) {
          double* plane = x + (static_cast<std::size_t>(b) * g.c + ch) * g.h * g.w;
          const double* src = row + static_cast<std::size_t>(b) * g.hw();
          for (int oy = 0; oy < g.ho; ++oy) {
            const int iy = oy * g.stride - g.pad + ki;
            if (iy < 0 || iy >= g.h) continue;
            double* dst = plane + static_cast<std::size_t>(iy) * g.w;
            for (int ox = 0; ox < g.wo; ++ox) {
              const int ix = ox * g.stride - g.pad + kj;
              if (ix >= 0 && ix < g.w) dst[ix] += src[oy * g.wo + ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  require(xv.rank() == 4 && wv.rank() == 4, "conv2d: expects 4-D input and weight");
  require(wv.dim(1) == xv.dim(1), "conv2d: channel mismatch");
  require(wv.dim(2) == wv.dim(3), "conv2d: square kernels only");
  require(stride > 0 && pad >= 0, "conv2d: bad stride/pad");
  ConvGeometry g{};
  g.n = xv.dim(0);
  g.c = xv.dim(1);
  g.h = xv.dim(2);
  g.w = xv.dim(3);
  g.o = wv.dim(0);
  g.k = wv.dim(2);
  g.stride = stride;
  g.pad = pad;
  g.ho = (g.h + 2 * pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * pad - g.k) / stride + 1;
  require(g.ho > 0 && g.wo > 0, "conv2d: output would be empty");
  require(!bias.defined() || static_cast<int>(bias.value().numel()) == g.o, "conv2d: bias size");

  const int cols = g.n * g.hw();
  auto col = std::make_shared<std::vector<double>>(static_cast<std::size_t>(g.ckk()) * cols);
  im2col(xv.data(), g, col->data());

  MatR y(g.o, cols);
  y.noalias() = CMapR(wv.data(), g.o, g.ckk()) * CMapR(col->data(), g.ckk(), cols);

  Tensor out({g.n, g.o, g.ho, g.wo});
  for (int b = 0; b < g.n; ++b) {
    for (int oc = 0; oc < g.o; ++oc) {
      const double bv = bias.defined() ? bias.value()[static_cast<std::size_t>(oc)] : 0.0;
      double* dst = out.data() + (static_cast<std::size_t>(b) * g.o + oc) * g.hw();
      const double* src = y.data() + static_cast<std::size_t>(oc) * cols + static_cast<std::size_t>(b) * g.hw();
      for (int p = 0; p < g.hw(); ++p) dst[p] = src[p] + bv;
    }
  }

  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_op(std::move(out), std::move(inputs), [g, col](Node& self) {
    const int cols = g.n * g.hw();
    MatR gy(g.o, cols);
    for (int b = 0; b < g.n; ++b) {
      for (int oc = 0; oc < g.o; ++oc) {
        const double* src = self.grad.data() + (static_cast<std::size_t>(b) * g.o + oc) * g.hw();
        std::copy(src, src + g.hw(), gy.data() + static_cast<std::size_t>(oc) * cols + static_cast<std::size_t>(b) * g.hw());
      }
    }
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    if (wn.requires_grad) {
      MapR gw(wn.grad_buffer().data(), g.o, g.ckk());
      gw.noalias() += gy * CMapR(col->data(), g.ckk(), cols).transpose();
    }
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      Tensor& gb = self.inputs[2]->grad_buffer();
      for (int oc = 0; oc < g.o; ++oc) gb[static_cast<std::size_t>(oc)] += gy.row(oc).sum();
    }
    if (xn.requires_grad) {
      MatR gcol(g.ckk(), cols);
      gcol.noalias() = CMapR(wn.value.data(), g.o, g.ckk()).transpose() * gy;
      col2im(gcol.data(), g, xn.grad_buffer().data());
    }
  });
}

Var max_pool2d(const Var& x, int kernel, int stride, int pad) {
  const Tensor& xv = x.value();
  require(xv.rank() == 4, "max_pool2d: expects 4-D input");
  const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const int ho = (h + 2 * pad - kernel) / stride + 1;
  const int wo = (w + 2 * pad - kernel) / stride + 1;
  require(ho > 0 && wo > 0, "max_pool2d: output would be empty");
  Tensor out({n, c, ho, wo});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel());
  std::size_t o = 0;
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * h * w;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_i = base;
          for (int ki = 0; ki < kernel; ++ki) {
            const int iy = oy * stride - pad + ki;
            if (iy < 0 || iy >= h) continue;
            for (int kj = 0; kj < kernel; ++kj) {
              const int ix = ox * stride - pad + kj;
              if (ix < 0 || ix >= w) continue;
              const std::size_t idx = base + static_cast<std::size_t>(iy) * w + ix;
              if (xv[idx] > best) {
                best = xv[idx];
                best_i = idx;
              }
            }
          }
          out[o] = best;
          (*argmax)[o] = best_i;
        }
      }
    }
  }
  return make_op(std::move(out), {x}, [argmax](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < argmax->size(); ++i) gx[(*argmax)[i]] += self.grad[i];
  });
}

Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state,
                 bool training) {
  const Tensor& xv = x.value();
  require(xv.rank() == 4, "batch_norm2d: expects 4-D input");
  const int n = xv.dim(0), c = xv.dim(1);
  const std::size_t hw = static_cast<std::size_t>(xv.dim(2)) * xv.dim(3);
  require(static_cast<int>(gamma.value().numel()) == c && static_cast<int>(beta.value().numel()) == c,
          "batch_norm2d: affine size");
  if (state.running_mean.numel() != static_cast<std::size_t>(c)) {
    state.running_mean = Tensor({c}, 0.0);
    state.running_var = Tensor({c}, 1.0);
  }
  const double m = static_cast<double>(n) * hw;

  std::vector<double> mean(c), invstd(c);
  for (int ch = 0; ch < c; ++ch) {
    if (training) {
      double s = 0.0;
      for (int b = 0; b < n; ++b) {
        const double* p = xv.data() + (static_cast<std::size_t>(b) * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
      }
      const double mu = s / m;
      double v = 0.0;
      for (int b = 0; b < n; ++b) {
        const double* p = xv.data() + (static_cast<std::size_t>(b) * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) v += (p[i] - mu) * (p[i] - mu);
      }
      const double var = v / m;
      mean[ch] = mu;
      invstd[ch] = 1.0 / std::sqrt(var + state.eps);
      const double unbiased = m > 1.0 ? v / (m - 1.0) : var;
      state.running_mean[ch] = (1.0 - state.momentum) * state.running_mean[ch] + state.momentum * mu;
      state.running_var[ch] = (1.0 - state.momentum) * state.running_var[ch] + state.momentum * unbiased;
    } else {
      mean[ch] = state.running_mean[ch];
      invstd[ch] = 1.0 / std::sqrt(state.running_var[ch] + state.eps);
    }
  }

  auto xhat = std::make_shared<Tensor>(xv.shape());
  Tensor out(xv.shape());
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * hw;
      const double gm = gamma.value()[ch];
      const double bt = beta.value()[ch];
      for (std::size_t i = 0; i < hw; ++i) {
        const double xh = (xv[base + i] - mean[ch]) * invstd[ch];
        (*xhat)[base + i] = xh;
        out[base + i] = gm * xh + bt;
      }
    }
  }

  return make_op(std::move(out), {x, gamma, beta}, [xhat, invstd, n, c, hw, m, training](Node& self) {
    Node& xn = *self.inputs[0];
    Node& gn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
    for (int b = 0; b < n; ++b) {
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_g[ch] += self.grad[base + i];
          sum_gx[ch] += self.grad[base + i] * (*xhat)[base + i];
        }
      }
    }
    if (gn.requires_grad) {
      Tensor& gg = gn.grad_buffer();
      for (int ch = 0; ch < c; ++ch) gg[ch] += sum_gx[ch];
    }
    if (bn.requires_grad) {
      Tensor& gb = bn.grad_buffer();
      for (int ch = 0; ch < c; ++ch) gb[ch] += sum_g[ch];
    }
    if (!xn.requires_grad) return;
    Tensor& gx = xn.grad_buffer();
    for (int b = 0; b < n; ++b) {
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * hw;
        const double k = gn.value[ch] * invstd[ch];
        for (std::size_t i = 0; i < hw; ++i) {
          const double g = self.grad[base + i];
          if (training) {
            gx[base + i] += k * (g - sum_g[ch] / m - (*xhat)[base + i] * sum_gx[ch] / m);
          } else {
            gx[base + i] += k * g;
          }
        }
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  const Tensor& xv = x.value();
  require(xv.rank() == 4, "global_avg_pool: expects 4-D input");
  const int n = xv.dim(0), c = xv.dim(1);
  const std::size_t hw = static_cast<std::size_t>(xv.dim(2)) * xv.dim(3);
  Tensor out({n, c});
  for (std::size_t i = 0; i < out.numel(); ++i) {
    double s = 0.0;
    for (std::size_t p = 0; p < hw; ++p) s += xv[i * hw + p];
    out[i] = s / static_cast<double>(hw);
  }
  return make_op(std::move(out), {x}, [hw](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      const double g = self.grad[i] * inv;
      for (std::size_t p = 0; p < hw; ++p) gx[i * hw + p] += g;
    }
  });
}

Var flatten(const Var& x) {
  const Tensor& xv = x.value();
  require(xv.rank() >= 1, "flatten: scalar input");
  const int n = xv.dim(0);
  const int rest = n == 0 ? 0 : static_cast<int>(xv.numel() / static_cast<std::size_t>(n));
  return make_op(xv.reshaped({n, rest}), {x},
                 [](Node& self) { self.inputs[0]->accumulate(self.grad); });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const int n = parts[0].value().dim(0);
  int total = 0;
  std::vector<int> widths;
  for (const Var& p : parts) {
    require(p.value().rank() == 2 && p.value().dim(0) == n, "concat_cols: row mismatch");
    widths.push_back(p.value().dim(1));
    total += widths.back();
  }
  Tensor out({n, total});
  int off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (int r = 0; r < n; ++r) {
      const double* src = parts[k].value().data() + static_cast<std::size_t>(r) * widths[k];
      std::copy(src, src + widths[k], out.data() + static_cast<std::size_t>(r) * total + off);
    }
    off += widths[k];
  }
  return make_op(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                 [widths, n, total](Node& self) {
                   int off = 0;
                   for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                     Node& in = *self.inputs[k];
                     if (in.requires_grad) {
                       Tensor& g = in.grad_buffer();
                       for (int r = 0; r < n; ++r) {
                         for (int c = 0; c < widths[k]; ++c) {
                           g[static_cast<std::size_t>(r) * widths[k] + c] +=
                               self.grad[static_cast<std::size_t>(r) * total + off + c];
                         }
                       }
                     }
                     off += widths[k];
                   }
                 });
}

Var segment_max(const Var& x, int segment) {
  const Tensor& xv = x.value();
  require(xv.rank() == 2 && segment > 0 && xv.dim(0) % segment == 0,
          "segment_max: rows must split into equal segments");
  const int groups = xv.dim(0) / segment;
  const int d = xv.dim(1);
  Tensor out({groups, d});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel());
  for (int gi = 0; gi < groups; ++gi) {
    for (int c = 0; c < d; ++c) {
      std::size_t best = static_cast<std::size_t>(gi) * segment * d + c;
      for (int r = 1; r < segment; ++r) {
        const std::size_t idx = (static_cast<std::size_t>(gi) * segment + r) * d + c;
        if (xv[idx] > xv[best]) best = idx;
      }
      out[static_cast<std::size_t>(gi) * d + c] = xv[best];
      (*argmax)[static_cast<std::size_t>(gi) * d + c] = best;
    }
  }
  return make_op(std::move(out), {x}, [argmax](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < argmax->size(); ++i) gx[(*argmax)[i]] += self.grad[i];
  });
}

Var embedding(const Var& table, std::span<const int> indices) {
  const Tensor& tv = table.value();
  require(tv.rank() == 2, "embedding: table must be 2-D");
  const int v = tv.dim(0), d = tv.dim(1);
  const int n = static_cast<int>(indices.size());
  Tensor out({n, d});
  for (int r = 0; r < n; ++r) {
    require(indices[r] >= 0 && indices[r] < v, "embedding: index out of range");
    std::copy(tv.data() + static_cast<std::size_t>(indices[r]) * d,
              tv.data() + static_cast<std::size_t>(indices[r] + 1) * d,
              out.data() + static_cast<std::size_t>(r) * d);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return make_op(std::move(out), {table}, [idx, d](Node& self) {
    Tensor& g = self.inputs[0]->grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (int c = 0; c < d; ++c) {
        g[static_cast<std::size_t>(idx[r]) * d + c] += self.grad[r * d + c];
      }
    }
  });
}

Var to_anchor_major(const Var& x, int anchors_per_cell) {
  const Tensor& xv = x.value();
  require(xv.rank() == 4 && anchors_per_cell > 0 && xv.dim(1) % anchors_per_cell == 0,
          "to_anchor_major: channel count must be a multiple of the anchor count");
  const int n = xv.dim(0), ch = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const int a = anchors_per_cell;
  const int k = ch / a;
  const int m = h * w * a;
  Tensor out({n, m, k});
  // out[b, (i*W + j)*A + ai, q] = x[b, ai*k + q, i, j]
  auto src_index = [=](int b, int row, int q) {
    const int ai = row % a;
    const int cell = row / a;
    return ((static_cast<std::size_t>(b) * ch + ai * k + q) * h + cell / w) * w + cell % w;
  };
  for (int b = 0; b < n; ++b) {
    for (int row = 0; row < m; ++row) {
      for (int q = 0; q < k; ++q) {
        out[(static_cast<std::size_t>(b) * m + row) * k + q] = xv[src_index(b, row, q)];
      }
    }
  }
  return make_op(std::move(out), {x}, [=](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (int b = 0; b < n; ++b) {
      for (int row = 0; row < m; ++row) {
        for (int q = 0; q < k; ++q) {
          gx[src_index(b, row, q)] += self.grad[(static_cast<std::size_t>(b) * m + row) * k + q];
        }
      }
    }
  });
}

Var roi_align(const Var& feature, std::span<const RoiRef> rois, const RoiAlignParams& params) {
  const Tensor& fv = feature.value();
  require(fv.rank() == 4, "roi_align: feature must be N x C x H x W");
  const int n = fv.dim(0), c = fv.dim(1), h = fv.dim(2), w = fv.dim(3);
  const int r = static_cast<int>(rois.size());
  const std::size_t per_roi = static_cast<std::size_t>(c) * params.out_h * params.out_w;
  const std::size_t per_image = static_cast<std::size_t>(c) * h * w;
  Tensor out({r, c, params.out_h, params.out_w});
  for (int i = 0; i < r; ++i) {
    require(rois[i].image >= 0 && rois[i].image < n, "roi_align: image index out of range");
    roi_align_forward(fv.data() + rois[i].image * per_image, c, h, w, rois[i].box, params,
                      out.data() + i * per_roi);
  }
  std::vector<RoiRef> saved(rois.begin(), rois.end());
  return make_op(std::move(out), {feature}, [=](Node& self) {
    Tensor& gf = self.inputs[0]->grad_buffer();
    for (int i = 0; i < r; ++i) {
      roi_align_backward(self.grad.data() + i * per_roi, c, h, w, saved[i].box, params,
                         gf.data() + saved[i].image * per_image);
    }
  });
}

Var ordinal_loss(const Var& logits, std::span<const int> targets) {
  const Tensor& lv = logits.value();
  require(lv.rank() == 2 && lv.dim(0) == static_cast<int>(targets.size()),
          "ordinal_loss: one target per logit row");
  const int rows = lv.dim(0), k = lv.dim(1);
  require(rows > 0, "ordinal_loss: empty batch");
  auto grad = std::make_shared<Tensor>(lv.shape());
  double total = 0.0;
  for (int i = 0; i < rows; ++i) {
    const auto res = ordinal::loss_and_grad(
        std::span<const double>(lv.data() + static_cast<std::size_t>(i) * k, k), targets[i]);
    total += res.value;
    for (int j = 0; j < k; ++j) (*grad)[static_cast<std::size_t>(i) * k + j] = res.grad[j] / rows;
  }
  return make_op(Tensor({1}, {total / rows}), {logits}, [grad](Node& self) {
    Tensor g = *grad;
    g.scale_(self.grad[0]);
    self.inputs[0]->accumulate(g);
  });
}

}  // namespace alanet::ag
