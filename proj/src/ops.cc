// Copyright 2026 The smpkws Authors.
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

#include "smpkws/ops.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "smpkws/errors.h"

namespace smpkws {
namespace {

void RequireRank2(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " expects a rank-2 tensor, got " + t.shape_string());
  }
}

void RequireOddKernel(std::span<const double> kernel) {
  if (kernel.empty() || kernel.size() % 2 == 0) {
    throw ConfigError("time convolution kernel length must be odd, got " +
                      std::to_string(kernel.size()));
  }
}

// c += a * b with a: [n, k], b: [k, m], c: [n, m].
void GemmAccumulate(const double* __restrict a, const double* __restrict b,
                    double* __restrict c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c += a^T * g with a: [n, k], g: [n, m], c: [k, m].
void AtGAccumulate(const double* __restrict a, const double* __restrict g, double* __restrict c,
                   std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      double* cp = c + p * m;
      for (std::size_t j = 0; j < m; ++j) cp[j] += aip * gi[j];
    }
  }
}

}  // namespace

Tensor MatMul(const Tensor& a, const Tensor& b) {
  RequireRank2(a, "matmul");
  RequireRank2(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul inner dimensions differ: " + a.shape_string() + " x " +
                         b.shape_string());
  }
  Tensor c = Tensor::Matrix(a.rows(), b.cols());
  GemmAccumulate(a.values().data(), b.values().data(), c.values().data(), a.rows(), a.cols(),
                 b.cols());
  return c;
}

Tensor Softmax(const Tensor& logits, int axis) {
  RequireRank2(logits, "softmax");
  if (axis != 0 && axis != 1) throw DimensionError("softmax axis must be 0 or 1");
  for (double v : logits.values()) {
    if (!std::isfinite(v)) throw NumericError("softmax input is not finite");
  }
  Tensor out = logits;
  const std::size_t outer = axis == 1 ? logits.rows() : logits.cols();
  const std::size_t inner = axis == 1 ? logits.cols() : logits.rows();
  const std::size_t stride = axis == 1 ? 1 : logits.cols();
  for (std::size_t o = 0; o < outer; ++o) {
    double* base = out.values().data() + (axis == 1 ? o * logits.cols() : o);
    double mx = base[0];
    for (std::size_t i = 1; i < inner; ++i) mx = std::max(mx, base[i * stride]);
    double total = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      base[i * stride] = std::exp(base[i * stride] - mx);
      total += base[i * stride];
    }
    for (std::size_t i = 0; i < inner; ++i) base[i * stride] /= total;
  }
  return out;
}

std::vector<double> ConvolveTime(std::span<const double> signal, std::span<const double> kernel) {
  RequireOddKernel(kernel);
  const auto n = static_cast<std::ptrdiff_t>(signal.size());
  const auto len = static_cast<std::ptrdiff_t>(kernel.size());
  const std::ptrdiff_t half = (len - 1) / 2;
  std::vector<double> out(signal.size(), 0.0);
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (std::ptrdiff_t j = 0; j < len; ++j) {
      const std::ptrdiff_t src = t - (j - half);
      if (src >= 0 && src < n) acc += kernel[j] * signal[src];
    }
    out[t] = acc;
  }
  return out;
}

Var MatMul(Tape& tape, Var a, Var b) {
  Tensor out = MatMul(tape.value(a), tape.value(b));
  return tape.Record(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
    const double* g = t.grad_data(self);
    if (double* ga = t.grad_data(a)) {
      // ga += g * b^T
      std::vector<double> bt(k * m);
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t j = 0; j < m; ++j) bt[j * k + p] = bv.values()[p * m + j];
      }
      GemmAccumulate(g, bt.data(), ga, n, m, k);
    }
    if (double* gb = t.grad_data(b)) {
      // gb += a^T * g
      AtGAccumulate(av.values().data(), g, gb, n, k, m);
    }
  });
}

Var AddRowBias(Tape& tape, Var x, Var bias) {
  const Tensor& xv = tape.value(x);
  const Tensor& bv = tape.value(bias);
  RequireRank2(xv, "add_row_bias");
  if (bv.size() != xv.cols()) {
    throw DimensionError("bias " + bv.shape_string() + " does not match " + xv.shape_string());
  }
  Tensor out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv[c];
  }
  return tape.Record(std::move(out), {x, bias}, [x, bias](Tape& t, Var self) {
    const Tensor& xv = t.value(x);
    const double* g = t.grad_data(self);
    const std::size_t rows = xv.rows(), cols = xv.cols();
    if (double* gx = t.grad_data(x)) {
      for (std::size_t i = 0; i < rows * cols; ++i) gx[i] += g[i];
    }
    if (double* gb = t.grad_data(bias)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
      }
    }
  });
}

Var Add(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (!av.same_shape(bv)) {
    throw DimensionError("add of " + av.shape_string() + " and " + bv.shape_string());
  }
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.Record(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
    const std::size_t n = t.value(self).size();
    const double* g = t.grad_data(self);
    for (Var in : {a, b}) {
      if (double* gi = t.grad_data(in)) {
        for (std::size_t i = 0; i < n; ++i) gi[i] += g[i];
      }
    }
  });
}

Var Scale(Tape& tape, Var x, double factor) {
  Tensor out = tape.value(x);
  for (double& v : out.values()) v *= factor;
  return tape.Record(std::move(out), {x}, [x, factor](Tape& t, Var self) {
    const std::size_t n = t.value(self).size();
    const double* g = t.grad_data(self);
    double* gx = t.grad_data(x);
    for (std::size_t i = 0; i < n; ++i) gx[i] += factor * g[i];
  });
}

Var Relu(Tape& tape, Var x) {
  Tensor out = tape.value(x);
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return tape.Record(std::move(out), {x}, [x](Tape& t, Var self) {
    const Tensor& xv = t.value(x);
    const double* g = t.grad_data(self);
    double* gx = t.grad_data(x);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += g[i];
    }
  });
}

Var Tanh(Tape& tape, Var x) {
  Tensor out = tape.value(x);
  for (double& v : out.values()) v = std::tanh(v);
  return tape.Record(std::move(out), {x}, [x](Tape& t, Var self) {
    const Tensor& y = t.value(self);
    const double* g = t.grad_data(self);
    double* gx = t.grad_data(x);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var Softmax(Tape& tape, Var logits, int axis) {
  Tensor out = Softmax(tape.value(logits), axis);
  return tape.Record(std::move(out), {logits}, [logits, axis](Tape& t, Var self) {
    const Tensor& y = t.value(self);
    const double* g = t.grad_data(self);
    double* gx = t.grad_data(logits);
    const std::size_t outer = axis == 1 ? y.rows() : y.cols();
    const std::size_t inner = axis == 1 ? y.cols() : y.rows();
    const std::size_t stride = axis == 1 ? 1 : y.cols();
    for (std::size_t o = 0; o < outer; ++o) {
      const std::size_t base = axis == 1 ? o * y.cols() : o;
      double dot = 0.0;
      for (std::size_t i = 0; i < inner; ++i) dot += y[base + i * stride] * g[base + i * stride];
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t k = base + i * stride;
        gx[k] += y[k] * (g[k] - dot);
      }
    }
  });
}

Var Column(Tape& tape, Var x, std::size_t j) {
  const Tensor& xv = tape.value(x);
  RequireRank2(xv, "column");
  if (j >= xv.cols()) {
    throw DimensionError("column " + std::to_string(j) + " out of range for " + xv.shape_string());
  }
  std::vector<double> col(xv.rows());
  for (std::size_t r = 0; r < xv.rows(); ++r) col[r] = xv(r, j);
  return tape.Record(Tensor::Vector(std::move(col)), {x}, [x, j](Tape& t, Var self) {
    const std::size_t rows = t.value(x).rows(), cols = t.value(x).cols();
    const double* g = t.grad_data(self);
    double* gx = t.grad_data(x);
    for (std::size_t r = 0; r < rows; ++r) gx[r * cols + j] += g[r];
  });
}

Var ConvolveTime(Tape& tape, Var series, std::span<const double> kernel) {
  std::vector<double> taps(kernel.begin(), kernel.end());
  auto out = ConvolveTime(tape.value(series).values(), taps);
  return tape.Record(Tensor::Vector(std::move(out)), {series},
                     [series, taps = std::move(taps)](Tape& t, Var self) {
                       const auto n = static_cast<std::ptrdiff_t>(t.value(series).size());
                       const auto len = static_cast<std::ptrdiff_t>(taps.size());
                       const std::ptrdiff_t half = (len - 1) / 2;
                       const double* g = t.grad_data(self);
                       double* gx = t.grad_data(series);
                       // Correlation of the output gradient with the kernel.
                       for (std::ptrdiff_t u = 0; u < n; ++u) {
                         double acc = 0.0;
                         for (std::ptrdiff_t j = 0; j < len; ++j) {
                           const std::ptrdiff_t dst = u + (j - half);
                           if (dst >= 0 && dst < n) acc += taps[j] * g[dst];
                         }
                         gx[u] += acc;
                       }
                     });
}

Var Log(Tape& tape, Var x) {
  Tensor out = tape.value(x);
  for (double& v : out.values()) v = std::log(v);
  return tape.Record(std::move(out), {x}, [x](Tape& t, Var self) {
    const Tensor& xv = t.value(x);
    const double* g = t.grad_data(self);
    double* gx = t.grad_data(x);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[i] / xv[i];
  });
}

Var Pick(Tape& tape, Var x, std::size_t index) {
  const Tensor& xv = tape.value(x);
  if (index >= xv.size()) throw DimensionError("pick index out of range");
  return tape.Record(Tensor::Scalar(xv[index]), {x}, [x, index](Tape& t, Var self) {
    t.grad_data(x)[index] += t.grad_data(self)[0];
  });
}

Var NegLogAt(Tape& tape, Var x, std::size_t index) {
  const Tensor& xv = tape.value(x);
  if (index >= xv.size()) throw DimensionError("index out of range");
  return tape.Record(Tensor::Scalar(-std::log(xv[index])), {x}, [x, index](Tape& t, Var self) {
    t.grad_data(x)[index] -= t.grad_data(self)[0] / t.value(x)[index];
  });
}

Var NegLogSum(Tape& tape, Var x,
              std::span<const std::pair<std::size_t, std::size_t>> cells) {
  const Tensor& xv = tape.value(x);
  RequireRank2(xv, "neg_log_sum");
  double total = 0.0;
  for (const auto& [r, c] : cells) {
    if (r >= xv.rows() || c >= xv.cols()) throw DimensionError("cell out of range");
    total -= std::log(xv(r, c));
  }
  std::vector<std::pair<std::size_t, std::size_t>> owned(cells.begin(), cells.end());
  return tape.Record(Tensor::Scalar(total), {x}, [x, owned = std::move(owned)](Tape& t, Var self) {
    const Tensor& xv = t.value(x);
    const double g = t.grad_data(self)[0];
    double* gx = t.grad_data(x);
    const std::size_t cols = xv.cols();
    for (const auto& [r, c] : owned) gx[r * cols + c] -= g / xv[r * cols + c];
  });
}

Var Sum(Tape& tape, Var x) {
  double total = 0.0;
  for (double v : tape.value(x).values()) total += v;
  return tape.Record(Tensor::Scalar(total), {x}, [x](Tape& t, Var self) {
    const double g = t.grad_data(self)[0];
    double* gx = t.grad_data(x);
    const std::size_t n = t.value(x).size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g;
  });
}

Var WeightedSum(Tape& tape, std::span<const Var> terms, std::span<const double> weights) {
  if (terms.size() != weights.size()) throw DimensionError("weighted sum arity mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const Tensor& v = tape.value(terms[i]);
    if (v.size() != 1) throw DimensionError("weighted sum expects scalar terms");
    total += weights[i] * v[0];
  }
  std::vector<Var> ts(terms.begin(), terms.end());
  std::vector<double> ws(weights.begin(), weights.end());
  return tape.Record(Tensor::Scalar(total), terms,
                     [ts = std::move(ts), ws = std::move(ws)](Tape& t, Var self) {
                       const double g = t.grad_data(self)[0];
                       for (std::size_t i = 0; i < ts.size(); ++i) {
                         if (double* gi = t.grad_data(ts[i])) gi[0] += ws[i] * g;
                       }
                     });
}

Var SvdfTimeFilter(Tape& tape, Var features, Var weights, std::size_t rank) {
  const Tensor& f = tape.value(features);
  const Tensor& w = tape.value(weights);
  RequireRank2(f, "svdf time filter");
  RequireRank2(w, "svdf time filter");
  if (rank == 0 || f.cols() != w.rows() || f.cols() % rank != 0) {
    throw DimensionError("svdf time filter: features " + f.shape_string() + ", weights " +
                         w.shape_string() + ", rank " + std::to_string(rank));
  }
  const std::size_t frames = f.rows(), filters = f.cols(), memory = w.cols();
  const std::size_t nodes = filters / rank;
  // Time weights transposed to [memory, filters] so the inner loops run
  // over contiguous filters.
  std::vector<double> wt(memory * filters);
  for (std::size_t m = 0; m < filters; ++m) {
    for (std::size_t k = 0; k < memory; ++k) wt[k * filters + m] = w(m, k);
  }
  Tensor out = Tensor::Matrix(frames, nodes);
  std::vector<double> acc(filters);
  const double* fv = f.values().data();
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t k = 0; k < memory; ++k) {
      // Column k holds the weight for frame t - (memory - 1 - k).
      const std::size_t lag = memory - 1 - k;
      if (lag > t) continue;
      const double* fr = fv + (t - lag) * filters;
      const double* wk = wt.data() + k * filters;
      for (std::size_t m = 0; m < filters; ++m) acc[m] += wk[m] * fr[m];
    }
    for (std::size_t m = 0; m < filters; ++m) out(t, m / rank) += acc[m];
  }
  return tape.Record(
      std::move(out), {features, weights},
      [features, weights, rank, wt = std::move(wt)](Tape& tp, Var self) {
        const Tensor& f = tp.value(features);
        const Tensor& w = tp.value(weights);
        const std::size_t frames = f.rows(), filters = f.cols(), memory = w.cols();
        const std::size_t nodes = filters / rank;
        const double* g = tp.grad_data(self);
        double* gf = tp.grad_data(features);
        double* gw = tp.grad_data(weights);
        const double* fv = f.values().data();
        std::vector<double> gexp(filters), gwt(gw ? memory * filters : 0);
        for (std::size_t t = 0; t < frames; ++t) {
          for (std::size_t m = 0; m < filters; ++m) gexp[m] = g[t * nodes + m / rank];
          for (std::size_t k = 0; k < memory; ++k) {
            const std::size_t lag = memory - 1 - k;
            if (lag > t) continue;
            const std::size_t row = (t - lag) * filters;
            if (gf) {
              const double* wk = wt.data() + k * filters;
              for (std::size_t m = 0; m < filters; ++m) gf[row + m] += wk[m] * gexp[m];
            }
            if (gw) {
              double* gk = gwt.data() + k * filters;
              for (std::size_t m = 0; m < filters; ++m) gk[m] += fv[row + m] * gexp[m];
            }
          }
        }
        if (gw) {
          for (std::size_t m = 0; m < filters; ++m) {
            for (std::size_t k = 0; k < memory; ++k) gw[m * memory + k] += gwt[k * filters + m];
          }
        }
      });
}

}  // namespace smpkws
