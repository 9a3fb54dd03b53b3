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

// Slow, loop-by-loop reference implementations used as test oracles. None of
// them call into the library's kernels or ops.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "a4d/assignment.hpp"
#include "a4d/attention4d.hpp"
#include "a4d/rng.hpp"
#include "a4d/tensor.hpp"

namespace oracle {

using a4d::Shape;
using a4d::Tensor;

inline Tensor random_tensor(Shape shape, a4d::Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

// x (b, in, h, w); w (out, in, k, k) or (out, in) for k = 1; zero padding k/2.
inline Tensor conv(const Tensor& x, const Tensor& w, const Tensor& bias, int k, int stride) {
  const int nb = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3), cout = w.dim(0);
  const int oh = (h + stride - 1) / stride, ow = (wd + stride - 1) / stride, pad = k / 2;
  Tensor out({nb, cout, oh, ow});
  for (int b = 0; b < nb; ++b)
    for (int o = 0; o < cout; ++o)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double s = bias[o];
          for (int i = 0; i < cin; ++i)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int sy = y * stride + ky - pad, sx = xx * stride + kx - pad;
                if (sy < 0 || sy >= h || sx < 0 || sx >= wd) continue;
                s += w[((static_cast<std::size_t>(o) * cin + i) * k + ky) * k + kx] * x.at(b, i, sy, sx);
              }
          out.at(b, o, y, xx) = s;
        }
  return out;
}

// Batch statistics per channel, biased variance for the normalization.
inline Tensor batchnorm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const int nb = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out(x.shape());
  for (int ch = 0; ch < c; ++ch) {
    std::vector<double> vals;
    for (int b = 0; b < nb; ++b)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) vals.push_back(x.at(b, ch, y, xx));
    double mean = 0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double var = 0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= vals.size();
    for (int b = 0; b < nb; ++b)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
          out.at(b, ch, y, xx) = gamma[ch] * (x.at(b, ch, y, xx) - mean) / std::sqrt(var + eps) + beta[ch];
  }
  return out;
}

inline Tensor batchnorm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                             const Tensor& var, double eps) {
  Tensor out(x.shape());
  for (int b = 0; b < x.dim(0); ++b)
    for (int ch = 0; ch < x.dim(1); ++ch)
      for (int y = 0; y < x.dim(2); ++y)
        for (int xx = 0; xx < x.dim(3); ++xx)
          out.at(b, ch, y, xx) = gamma[ch] * (x.at(b, ch, y, xx) - mean[ch]) / std::sqrt(var[ch] + eps) + beta[ch];
  return out;
}

// a (batch, m, k) x b (batch, k, n)
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const int nb = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  Tensor out({nb, m, n});
  for (int z = 0; z < nb; ++z)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int t = 0; t < k; ++t) s += a[(static_cast<std::size_t>(z) * m + i) * k + t] * b[(static_cast<std::size_t>(z) * k + t) * n + j];
        out[(static_cast<std::size_t>(z) * m + i) * n + j] = s;
      }
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : z) mx = std::max(mx, v);
  std::vector<double> e(z.size());
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (e[i] = std::exp(z[i] - mx));
  for (double& v : e) v /= s;
  return e;
}

// conv 1x1 then batch norm, reading the parameters of a ConvBn.
inline Tensor conv_bn(const Tensor& x, const a4d::ConvBn& l, bool train, double eps) {
  const Tensor y = conv(x, l.weight->value, l.bias->value, 1, 1);
  return train ? batchnorm_train(y, l.gamma->value, l.beta->value, eps)
               : batchnorm_eval(y, l.gamma->value, l.beta->value, l.running_mean->value, l.running_var->value, eps);
}

// Attention block evaluated one query token at a time.
inline Tensor attention4d(const Tensor& x, const a4d::Attention4DParams& p, bool train, double eps) {
  const a4d::Attention4DConfig& c = p.cfg;
  const int nb = x.dim(0), h = c.heads, d = c.key_dim, dv = c.effective_value_dim(), n = c.tokens();
  const Tensor q = conv_bn(x, p.query, train, eps);
  const Tensor k = conv_bn(x, p.key, train, eps);
  const Tensor v = conv_bn(x, p.value, train, eps);
  const Tensor& bias = p.pos_bias->value;
  const Tensor& pre = p.talk_pre->value;
  const Tensor& post = p.talk_post->value;
  const double scale = c.effective_scale();
  auto at = [&](const Tensor& t, int b, int ch, int tok) { return t.at(b, ch, tok / c.width, tok % c.width); };

  Tensor mixed({nb, h * dv, c.height, c.width});
  for (int b = 0; b < nb; ++b) {
    for (int i = 0; i < n; ++i) {
      // raw[head][j]
      std::vector<std::vector<double>> raw(h, std::vector<double>(n));
      for (int hd = 0; hd < h; ++hd)
        for (int j = 0; j < n; ++j) {
          double s = 0;
          for (int e = 0; e < d; ++e) s += at(q, b, hd * d + e, i) * at(k, b, hd * d + e, j);
          raw[hd][j] = scale * s + bias[(static_cast<std::size_t>(hd) * n + i) * n + j];
        }
      std::vector<std::vector<double>> probs(h);
      for (int hd = 0; hd < h; ++hd) {
        std::vector<double> z(n, 0.0);
        for (int j = 0; j < n; ++j)
          for (int o = 0; o < h; ++o) z[j] += pre[hd * h + o] * raw[o][j];
        probs[hd] = softmax(z);
      }
      for (int hd = 0; hd < h; ++hd) {
        std::vector<double> wts(n, 0.0);
        for (int j = 0; j < n; ++j)
          for (int o = 0; o < h; ++o) wts[j] += post[hd * h + o] * probs[o][j];
        for (int e = 0; e < dv; ++e) {
          double s = 0;
          for (int j = 0; j < n; ++j) s += wts[j] * at(v, b, hd * dv + e, j);
          mixed.at(b, hd * dv + e, i / c.width, i % c.width) = s;
        }
      }
    }
  }
  Tensor y = conv_bn(mixed, p.proj, train, eps);
  if (c.residual)
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
  return y;
}

struct AssignResult {
  std::vector<int> anchor_gt;
  std::vector<int> dynamic_k;
};

// Assignment rules restated with explicit rank counting and set membership
// instead of sorting and a running claim table.
inline AssignResult assign(const a4d::CostMatrix& m, int cap) {
  const int ng = m.num_gt, na = m.num_anchors;
  auto is_cand = [&](int g, int a) { return std::isfinite(m.cost_at(g, a)); };
  // rank of a among g's candidates by (cost, anchor index)
  auto rank = [&](int g, int a) {
    int r = 0;
    for (int b = 0; b < na; ++b) {
      if (!is_cand(g, b) || b == a) continue;
      if (m.cost_at(g, b) < m.cost_at(g, a) || (m.cost_at(g, b) == m.cost_at(g, a) && b < a)) ++r;
    }
    return r;
  };
  AssignResult out;
  out.dynamic_k.assign(ng, 0);
  std::vector<std::vector<bool>> chosen(ng, std::vector<bool>(na, false));
  for (int g = 0; g < ng; ++g) {
    std::vector<double> ious;
    for (int a = 0; a < na; ++a)
      if (is_cand(g, a)) ious.push_back(m.iou_at(g, a));
    if (ious.empty()) continue;
    std::sort(ious.begin(), ious.end(), [](double x, double y) { return x > y; });
    double s = 0;
    for (int i = 0; i < std::min<int>(cap, static_cast<int>(ious.size())); ++i) s += ious[i];
    int k = static_cast<int>(std::llround(s));
    k = std::max(1, std::min(k, static_cast<int>(ious.size())));
    out.dynamic_k[g] = k;
    for (int a = 0; a < na; ++a)
      if (is_cand(g, a) && rank(g, a) < k) chosen[g][a] = true;
  }
  out.anchor_gt.assign(na, -1);
  for (int a = 0; a < na; ++a) {
    for (int g = 0; g < ng; ++g) {
      if (!chosen[g][a]) continue;
      const int w = out.anchor_gt[a];
      if (w < 0 || m.cost_at(g, a) < m.cost_at(w, a)) out.anchor_gt[a] = g;
    }
  }
  for (int g = 0; g < ng; ++g) {
    if (out.dynamic_k[g] == 0) continue;
    if (std::count(out.anchor_gt.begin(), out.anchor_gt.end(), g) > 0) continue;
    int best = -1;
    for (int a = 0; a < na; ++a) {
      if (!is_cand(g, a) || out.anchor_gt[a] >= 0) continue;
      if (best < 0 || rank(g, a) < rank(g, best)) best = a;
    }
    if (best >= 0) out.anchor_gt[best] = g;
  }
  return out;
}

// 101-point interpolated AP of a ranked true/false positive list.
inline double average_precision(const std::vector<bool>& tp, int num_gt) {
  if (num_gt == 0) return -1.0;
  std::vector<double> prec, rec;
  int t = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    t += tp[i];
    prec.push_back(static_cast<double>(t) / (i + 1));
    rec.push_back(static_cast<double>(t) / num_gt);
  }
  double s = 0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r / 100.0;
    double best = 0;
    for (std::size_t i = 0; i < prec.size(); ++i)
      if (rec[i] >= level) best = std::max(best, prec[i]);
    s += best;
  }
  return s / 101.0;
}

}  // namespace oracle
