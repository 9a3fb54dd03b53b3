// Copyright 2026 The a4d Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "a4d/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "a4d/error.hpp"
#include "a4d/kernels.hpp"

namespace a4d::ops {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidInput(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  kernels::active().axpy(static_cast<int>(src.size()), 1.0, src.ptr(), dst.ptr());
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// cols (in*9, ho*wo) for one image.
void im2col3x3(const double* img, int c, int h, int w, int stride, int ho, int wo, double* cols) {
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = cols + static_cast<long>((ci * 3 + ky) * 3 + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - 1;
            row[oy * wo + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                    ? img[(static_cast<long>(ci) * h + iy) * w + ix]
                                    : 0.0;
          }
        }
      }
    }
  }
}

void col2im3x3(const double* cols, int c, int h, int w, int stride, int ho, int wo, double* img) {
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = cols + static_cast<long>((ci * 3 + ky) * 3 + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix < 0 || ix >= w) continue;
            img[(static_cast<long>(ci) * h + iy) * w + ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv1x1(Graph& g, Var x, Var w, Var bias) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(w);
  const Tensor& bv = g.value(bias);
  require_feature_map(xv, "conv1x1");
  if (wv.rank() != 2 || wv.dim(1) != xv.dim(1)) {
    throw InvalidInput("conv1x1: weight " + shape_str(wv.shape()) + " does not accept input " +
                       shape_str(xv.shape()));
  }
  const int nb = xv.dim(0), cin = xv.dim(1), hw = xv.dim(2) * xv.dim(3), cout = wv.dim(0);
  if (bv.rank() != 1 || bv.dim(0) != cout) throw InvalidInput("conv1x1: bias must have shape (out,)");

  Tensor out({nb, cout, xv.dim(2), xv.dim(3)});
  const auto& k = kernels::active();
  for (int b = 0; b < nb; ++b) {
    double* ob = out.ptr() + static_cast<long>(b) * cout * hw;
    for (int o = 0; o < cout; ++o) std::fill(ob + static_cast<long>(o) * hw, ob + static_cast<long>(o + 1) * hw, bv[o]);
    k.gemm_nn(cout, hw, cin, wv.ptr(), cin, xv.ptr() + static_cast<long>(b) * cin * hw, hw, ob, hw);
  }
  return g.record("conv1x1", std::move(out), {x, w, bias}, [x, w, bias](Graph& g, const Tensor& dy) {
    const Tensor& xv = g.value(x);
    const Tensor& wv = g.value(w);
    const int nb = xv.dim(0), cin = xv.dim(1), hw = xv.dim(2) * xv.dim(3), cout = wv.dim(0);
    const auto& k = kernels::active();
    for (int b = 0; b < nb; ++b) {
      const double* dyb = dy.ptr() + static_cast<long>(b) * cout * hw;
      const double* xb = xv.ptr() + static_cast<long>(b) * cin * hw;
      if (g.requires_grad(w)) k.gemm_nt(cout, cin, hw, dyb, hw, xb, hw, g.grad_of(w).ptr(), cin);
      if (g.requires_grad(x)) {
        k.gemm_tn(cin, hw, cout, wv.ptr(), cin, dyb, hw, g.grad_of(x).ptr() + static_cast<long>(b) * cin * hw, hw);
      }
      if (g.requires_grad(bias)) {
        Tensor& db = g.grad_of(bias);
        for (int o = 0; o < cout; ++o) {
          double s = 0.0;
          for (int i = 0; i < hw; ++i) s += dyb[static_cast<long>(o) * hw + i];
          db[o] += s;
        }
      }
    }
  });
}

Var conv3x3(Graph& g, Var x, Var w, Var bias, int stride) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(w);
  const Tensor& bv = g.value(bias);
  require_feature_map(xv, "conv3x3");
  if (stride < 1) throw InvalidInput("conv3x3: stride must be positive");
  if (wv.rank() != 4 || wv.dim(1) != xv.dim(1) || wv.dim(2) != 3 || wv.dim(3) != 3) {
    throw InvalidInput("conv3x3: weight " + shape_str(wv.shape()) + " does not accept input " +
                       shape_str(xv.shape()));
  }
  const int nb = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), wd = xv.dim(3), cout = wv.dim(0);
  if (bv.rank() != 1 || bv.dim(0) != cout) throw InvalidInput("conv3x3: bias must have shape (out,)");
  const int ho = (h + stride - 1) / stride, wo = (wd + stride - 1) / stride;
  const int kk = cin * 9, n = ho * wo;

  Tensor out({nb, cout, ho, wo});
  std::vector<double> cols(static_cast<std::size_t>(kk) * n);
  const auto& k = kernels::active();
  for (int b = 0; b < nb; ++b) {
    im2col3x3(xv.ptr() + static_cast<long>(b) * cin * h * wd, cin, h, wd, stride, ho, wo, cols.data());
    double* ob = out.ptr() + static_cast<long>(b) * cout * n;
    for (int o = 0; o < cout; ++o) std::fill(ob + static_cast<long>(o) * n, ob + static_cast<long>(o + 1) * n, bv[o]);
    k.gemm_nn(cout, n, kk, wv.ptr(), kk, cols.data(), n, ob, n);
  }
  return g.record("conv3x3", std::move(out), {x, w, bias}, [x, w, bias, stride](Graph& g, const Tensor& dy) {
    const Tensor& xv = g.value(x);
    const Tensor& wv = g.value(w);
    const int nb = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), wd = xv.dim(3), cout = wv.dim(0);
    const int ho = dy.dim(2), wo = dy.dim(3), kk = cin * 9, n = ho * wo;
    std::vector<double> cols(static_cast<std::size_t>(kk) * n);
    const auto& k = kernels::active();
    for (int b = 0; b < nb; ++b) {
      const double* dyb = dy.ptr() + static_cast<long>(b) * cout * n;
      if (g.requires_grad(w)) {
        im2col3x3(xv.ptr() + static_cast<long>(b) * cin * h * wd, cin, h, wd, stride, ho, wo, cols.data());
        k.gemm_nt(cout, kk, n, dyb, n, cols.data(), n, g.grad_of(w).ptr(), kk);
      }
      if (g.requires_grad(x)) {
        std::fill(cols.begin(), cols.end(), 0.0);
        k.gemm_tn(kk, n, cout, wv.ptr(), kk, dyb, n, cols.data(), n);
        col2im3x3(cols.data(), cin, h, wd, stride, ho, wo, g.grad_of(x).ptr() + static_cast<long>(b) * cin * h * wd);
      }
      if (g.requires_grad(bias)) {
        Tensor& db = g.grad_of(bias);
        for (int o = 0; o < cout; ++o) {
          double s = 0.0;
          for (int i = 0; i < n; ++i) s += dyb[static_cast<long>(o) * n + i];
          db[o] += s;
        }
      }
    }
  });
}

Var batchnorm(Graph& g, Var x, Var gamma, Var beta, const BatchNormState& state,
              const BatchNormOptions& opt) {
  const Tensor& xv = g.value(x);
  require_feature_map(xv, "batchnorm");
  const int nb = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  const Tensor& gv = g.value(gamma);
  const Tensor& bv = g.value(beta);
  if (gv.size() != static_cast<std::size_t>(c) || bv.size() != static_cast<std::size_t>(c) ||
      !state.running_mean || !state.running_var ||
      state.running_mean->value.size() != static_cast<std::size_t>(c) ||
      state.running_var->value.size() != static_cast<std::size_t>(c)) {
    throw InvalidInput("batchnorm: per-channel parameters must have " + std::to_string(c) + " entries");
  }
  if (!(opt.eps > 0.0)) throw InvalidInput("batchnorm: eps must be positive");
  const long count = static_cast<long>(nb) * hw;
  if (count == 0) throw InvalidInput("batchnorm: channel slice has no elements");

  std::vector<double> mean(c), inv_std(c);
  if (opt.train) {
    for (int ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (int b = 0; b < nb; ++b) {
        const double* p = xv.ptr() + (static_cast<long>(b) * c + ch) * hw;
        for (int i = 0; i < hw; ++i) s += p[i];
      }
      const double m = s / count;
      double v = 0.0;
      for (int b = 0; b < nb; ++b) {
        const double* p = xv.ptr() + (static_cast<long>(b) * c + ch) * hw;
        for (int i = 0; i < hw; ++i) v += (p[i] - m) * (p[i] - m);
      }
      const double var = v / count;
      mean[ch] = m;
      inv_std[ch] = 1.0 / std::sqrt(var + opt.eps);
      const double unbiased = count > 1 ? v / (count - 1) : var;
      double& rm = state.running_mean->value[ch];
      double& rv = state.running_var->value[ch];
      rm = (1.0 - opt.momentum) * rm + opt.momentum * m;
      rv = (1.0 - opt.momentum) * rv + opt.momentum * unbiased;
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean->value[ch];
      inv_std[ch] = 1.0 / std::sqrt(state.running_var->value[ch] + opt.eps);
    }
  }

  Tensor out(xv.shape());
  for (int b = 0; b < nb; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const long off = (static_cast<long>(b) * c + ch) * hw;
      for (int i = 0; i < hw; ++i) out[off + i] = gv[ch] * (xv[off + i] - mean[ch]) * inv_std[ch] + bv[ch];
    }
  }
  const bool train = opt.train;
  return g.record("batchnorm", std::move(out), {x, gamma, beta},
                  [x, gamma, beta, mean, inv_std, train](Graph& g, const Tensor& dy) {
    const Tensor& xv = g.value(x);
    const Tensor& gv = g.value(gamma);
    const int nb = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
    const double count = static_cast<double>(nb) * hw;
    for (int ch = 0; ch < c; ++ch) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int b = 0; b < nb; ++b) {
        const long off = (static_cast<long>(b) * c + ch) * hw;
        for (int i = 0; i < hw; ++i) {
          const double xhat = (xv[off + i] - mean[ch]) * inv_std[ch];
          sum_dy += dy[off + i];
          sum_dy_xhat += dy[off + i] * xhat;
        }
      }
      if (g.requires_grad(gamma)) g.grad_of(gamma)[ch] += sum_dy_xhat;
      if (g.requires_grad(beta)) g.grad_of(beta)[ch] += sum_dy;
      if (!g.requires_grad(x)) continue;
      Tensor& dx = g.grad_of(x);
      const double k = gv[ch] * inv_std[ch];
      for (int b = 0; b < nb; ++b) {
        const long off = (static_cast<long>(b) * c + ch) * hw;
        for (int i = 0; i < hw; ++i) {
          if (train) {
            const double xhat = (xv[off + i] - mean[ch]) * inv_std[ch];
            dx[off + i] += k * (dy[off + i] - sum_dy / count - xhat * sum_dy_xhat / count);
          } else {
            dx[off + i] += k * dy[off + i];
          }
        }
      }
    }
  });
}

Var silu(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * sigmoid(xv[i]);
  return g.record("silu", std::move(out), {x}, [x](Graph& g, const Tensor& dy) {
    const Tensor& xv = g.value(x);
    Tensor& dx = g.grad_of(x);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double s = sigmoid(xv[i]);
      dx[i] += dy[i] * (s + xv[i] * s * (1.0 - s));
    }
  });
}

Var softplus(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    out[i] = v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  }
  return g.record("softplus", std::move(out), {x}, [x](Graph& g, const Tensor& dy) {
    const Tensor& xv = g.value(x);
    Tensor& dx = g.grad_of(x);
    for (std::size_t i = 0; i < xv.size(); ++i) dx[i] += dy[i] * sigmoid(xv[i]);
  });
}

Var add(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require_same_shape(av, bv, "add");
  Tensor out = av;
  add_into(out, bv);
  return g.record("add", std::move(out), {a, b}, [a, b](Graph& g, const Tensor& dy) {
    if (g.requires_grad(a)) add_into(g.grad_of(a), dy);
    if (g.requires_grad(b)) add_into(g.grad_of(b), dy);
  });
}

Var scale(Graph& g, Var x, double s) {
  Tensor out = g.value(x);
  for (auto& v : out.data()) v *= s;
  return g.record("scale", std::move(out), {x}, [x, s](Graph& g, const Tensor& dy) {
    kernels::active().axpy(static_cast<int>(dy.size()), s, dy.ptr(), g.grad_of(x).ptr());
  });
}

Var softmax_lastdim(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  if (xv.rank() < 1 || xv.size() == 0) return g.record("softmax", xv, {x}, [](Graph&, const Tensor&) {});
  const int n = xv.dim(-1);
  const std::size_t rows = xv.size() / n;
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.ptr() + r * n;
    double* o = out.ptr() + r * n;
    const double mx = *std::max_element(in, in + n);
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      s += o[j];
    }
    const double inv = 1.0 / s;
    for (int j = 0; j < n; ++j) o[j] *= inv;
  }
  const Var y{static_cast<int>(g.size())};  // id of the node about to be recorded
  return g.record("softmax", std::move(out), {x}, [x, y, n, rows](Graph& g, const Tensor& dy) {
    const Tensor& yv = g.value(y);
    Tensor& dx = g.grad_of(x);
    const auto& k = kernels::active();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yr = yv.ptr() + r * n;
      const double* dr = dy.ptr() + r * n;
      const double s = k.dot(n, yr, dr);
      double* o = dx.ptr() + r * n;
      for (int j = 0; j < n; ++j) o[j] += yr[j] * (dr[j] - s);
    }
  });
}

Var matmul_tokens(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.rank() < 2 || av.rank() != bv.rank()) {
    throw InvalidInput("matmul_tokens: ranks differ " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  }
  const int r = av.rank();
  for (int i = 0; i < r - 2; ++i) {
    if (av.dim(i) != bv.dim(i)) {
      throw InvalidInput("matmul_tokens: batch dims differ " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
    }
  }
  const int m = av.dim(-2), kd = av.dim(-1), n = bv.dim(-1);
  if (bv.dim(-2) != kd) {
    throw InvalidInput("matmul_tokens: inner dims differ " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  }
  Shape os(av.shape().begin(), av.shape().end() - 2);
  os.push_back(m);
  os.push_back(n);
  Tensor out(os);
  const std::size_t batches = out.size() / (static_cast<std::size_t>(m) * n);
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < batches; ++i) {
    k.gemm_nn(m, n, kd, av.ptr() + i * m * kd, kd, bv.ptr() + i * kd * n, n, out.ptr() + i * m * n, n);
  }
  return g.record("matmul_tokens", std::move(out), {a, b}, [a, b, m, kd, n, batches](Graph& g, const Tensor& dy) {
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < batches; ++i) {
      const double* dyi = dy.ptr() + i * m * n;
      if (g.requires_grad(a)) k.gemm_nt(m, kd, n, dyi, n, bv.ptr() + i * kd * n, n, g.grad_of(a).ptr() + i * m * kd, kd);
      if (g.requires_grad(b)) k.gemm_tn(kd, n, m, av.ptr() + i * m * kd, kd, dyi, n, g.grad_of(b).ptr() + i * kd * n, n);
    }
  });
}

Var transpose_last2(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  if (xv.rank() < 2) throw InvalidInput("transpose_last2: rank must be at least 2");
  const int m = xv.dim(-2), n = xv.dim(-1);
  Shape os = xv.shape();
  std::swap(os[os.size() - 1], os[os.size() - 2]);
  Tensor out(os);
  const std::size_t batches = xv.size() / (static_cast<std::size_t>(m) * n);
  for (std::size_t b = 0; b < batches; ++b) {
    const double* in = xv.ptr() + b * m * n;
    double* o = out.ptr() + b * m * n;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) o[j * m + i] = in[i * n + j];
  }
  return g.record("transpose_last2", std::move(out), {x}, [x, m, n, batches](Graph& g, const Tensor& dy) {
    Tensor& dx = g.grad_of(x);
    for (std::size_t b = 0; b < batches; ++b) {
      const double* d = dy.ptr() + b * m * n;
      double* o = dx.ptr() + b * m * n;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) o[i * n + j] += d[j * m + i];
    }
  });
}

Var reshape(Graph& g, Var x, Shape shape) {
  Tensor out = g.value(x).reshaped(std::move(shape));
  return g.record("reshape", std::move(out), {x}, [x](Graph& g, const Tensor& dy) {
    add_into(g.grad_of(x), dy);
  });
}

Var concat_channels(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require_feature_map(av, "concat_channels");
  require_feature_map(bv, "concat_channels");
  if (av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2) || av.dim(3) != bv.dim(3)) {
    throw InvalidInput("concat_channels: incompatible " + shape_str(av.shape()) + " and " + shape_str(bv.shape()));
  }
  const int nb = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
  const long hw = static_cast<long>(av.dim(2)) * av.dim(3);
  Tensor out({nb, ca + cb, av.dim(2), av.dim(3)});
  for (int n = 0; n < nb; ++n) {
    std::copy_n(av.ptr() + n * ca * hw, ca * hw, out.ptr() + n * (ca + cb) * hw);
    std::copy_n(bv.ptr() + n * cb * hw, cb * hw, out.ptr() + (n * (ca + cb) + ca) * hw);
  }
  return g.record("concat_channels", std::move(out), {a, b}, [a, b, nb, ca, cb, hw](Graph& g, const Tensor& dy) {
    const auto& k = kernels::active();
    for (int n = 0; n < nb; ++n) {
      if (g.requires_grad(a)) k.axpy(static_cast<int>(ca * hw), 1.0, dy.ptr() + n * (ca + cb) * hw, g.grad_of(a).ptr() + n * ca * hw);
      if (g.requires_grad(b)) k.axpy(static_cast<int>(cb * hw), 1.0, dy.ptr() + (n * (ca + cb) + ca) * hw, g.grad_of(b).ptr() + n * cb * hw);
    }
  });
}

Var upsample2x(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  require_feature_map(xv, "upsample2x");
  const int nb = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  Tensor out({nb, c, 2 * h, 2 * w});
  for (int b = 0; b < nb; ++b)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx) out.at(b, ch, y, xx) = xv.at(b, ch, y / 2, xx / 2);
  return g.record("upsample2x", std::move(out), {x}, [x](Graph& g, const Tensor& dy) {
    Tensor& dx = g.grad_of(x);
    const int nb = dy.dim(0), c = dy.dim(1), h2 = dy.dim(2), w2 = dy.dim(3);
    for (int b = 0; b < nb; ++b)
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h2; ++y)
          for (int xx = 0; xx < w2; ++xx) dx.at(b, ch, y / 2, xx / 2) += dy.at(b, ch, y, xx);
  });
}

Var avgpool2x(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  require_feature_map(xv, "avgpool2x");
  const int nb = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  if (h % 2 || w % 2) throw InvalidInput("avgpool2x: spatial size must be even, got " + shape_str(xv.shape()));
  Tensor out({nb, c, h / 2, w / 2});
  for (int b = 0; b < nb; ++b)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h / 2; ++y)
        for (int xx = 0; xx < w / 2; ++xx) {
          out.at(b, ch, y, xx) = 0.25 * (xv.at(b, ch, 2 * y, 2 * xx) + xv.at(b, ch, 2 * y, 2 * xx + 1) +
                                         xv.at(b, ch, 2 * y + 1, 2 * xx) + xv.at(b, ch, 2 * y + 1, 2 * xx + 1));
        }
  return g.record("avgpool2x", std::move(out), {x}, [x](Graph& g, const Tensor& dy) {
    Tensor& dx = g.grad_of(x);
    const int nb = dx.dim(0), c = dx.dim(1), h = dx.dim(2), w = dx.dim(3);
    for (int b = 0; b < nb; ++b)
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx) dx.at(b, ch, y, xx) += 0.25 * dy.at(b, ch, y / 2, xx / 2);
  });
}

Var add_head_bias(Graph& g, Var logits, Var bias) {
  const Tensor& lv = g.value(logits);
  const Tensor& bv = g.value(bias);
  if (lv.rank() != bv.rank() + 1 || !std::equal(bv.shape().begin(), bv.shape().end(), lv.shape().begin() + 1)) {
    throw InvalidInput("add_head_bias: bias " + shape_str(bv.shape()) + " does not match " + shape_str(lv.shape()));
  }
  Tensor out = lv;
  const auto& k = kernels::active();
  const int nb = lv.dim(0), per = static_cast<int>(bv.size());
  for (int b = 0; b < nb; ++b) k.axpy(per, 1.0, bv.ptr(), out.ptr() + static_cast<long>(b) * per);
  return g.record("add_head_bias", std::move(out), {logits, bias}, [logits, bias, nb, per](Graph& g, const Tensor& dy) {
    const auto& k = kernels::active();
    if (g.requires_grad(logits)) add_into(g.grad_of(logits), dy);
    if (g.requires_grad(bias)) {
      for (int b = 0; b < nb; ++b) k.axpy(per, 1.0, dy.ptr() + static_cast<long>(b) * per, g.grad_of(bias).ptr());
    }
  });
}

Var mix_heads(Graph& g, Var x, Var t) {
  const Tensor& xv = g.value(x);
  const Tensor& tv = g.value(t);
  if (xv.rank() < 2) throw InvalidInput("mix_heads: input rank must be at least 2");
  const int nb = xv.dim(0), h = xv.dim(1);
  if (tv.rank() != 2 || tv.dim(0) != h || tv.dim(1) != h) {
    throw InvalidInput("mix_heads: mixing matrix " + shape_str(tv.shape()) + " does not match " + std::to_string(h) + " heads");
  }
  const int rest = static_cast<int>(xv.size() / (static_cast<std::size_t>(nb) * h));
  Tensor out(xv.shape());
  const auto& k = kernels::active();
  for (int b = 0; b < nb; ++b) {
    const long off = static_cast<long>(b) * h * rest;
    k.gemm_nn(h, rest, h, tv.ptr(), h, xv.ptr() + off, rest, out.ptr() + off, rest);
  }
  return g.record("mix_heads", std::move(out), {x, t}, [x, t, nb, h, rest](Graph& g, const Tensor& dy) {
    const Tensor& xv = g.value(x);
    const Tensor& tv = g.value(t);
    const auto& k = kernels::active();
    for (int b = 0; b < nb; ++b) {
      const long off = static_cast<long>(b) * h * rest;
      if (g.requires_grad(t)) k.gemm_nt(h, h, rest, dy.ptr() + off, rest, xv.ptr() + off, rest, g.grad_of(t).ptr(), h);
      if (g.requires_grad(x)) k.gemm_tn(h, rest, h, tv.ptr(), h, dy.ptr() + off, rest, g.grad_of(x).ptr() + off, rest);
    }
  });
}

Var sum(Graph& g, Var x) {
  double s = 0.0;
  for (double v : g.value(x).data()) s += v;
  return g.record("sum", Tensor({}, std::vector<double>{s}), {x}, [x](Graph& g, const Tensor& dy) {
    Tensor& dx = g.grad_of(x);
    for (auto& v : dx.data()) v += dy[0];
  });
}

Var sum_squares(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  const double s = kernels::active().dot(static_cast<int>(xv.size()), xv.ptr(), xv.ptr());
  return g.record("sum_squares", Tensor({}, std::vector<double>{s}), {x}, [x](Graph& g, const Tensor& dy) {
    kernels::active().axpy(static_cast<int>(g.value(x).size()), 2.0 * dy[0], g.value(x).ptr(), g.grad_of(x).ptr());
  });
}

Var weighted_sum(Graph& g, Var x, const Tensor& w) {
  const Tensor& xv = g.value(x);
  require_same_shape(xv, w, "weighted_sum");
  const double s = kernels::active().dot(static_cast<int>(xv.size()), xv.ptr(), w.ptr());
  return g.record("weighted_sum", Tensor({}, std::vector<double>{s}), {x}, [x, w](Graph& g, const Tensor& dy) {
    kernels::active().axpy(static_cast<int>(w.size()), dy[0], w.ptr(), g.grad_of(x).ptr());
  });
}

}  // namespace a4d::ops
