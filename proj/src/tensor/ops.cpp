#include "wasr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wasr/error.hpp"
#include "wasr/gradcheck.hpp"
#include "wasr/kernels.hpp"

namespace wasr {
namespace {

using NodePtr = std::shared_ptr<detail::Node>;

void require_rank3(const Tensor& t, const char* op) {
  if (!t.defined() || t.rank() != 3) {
    throw ContractError(std::string(op) + ": expected a [C,H,W] tensor, got " +
                        (t.defined() ? shape_str(t.shape()) : std::string("undefined")));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

bool wants_grad(const NodePtr& n) { return n && n->requires_grad; }

struct AxisMap {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

AxisMap bilinear_axis(int in, int out) {
  AxisMap m;
  m.lo.resize(static_cast<std::size_t>(out));
  m.hi.resize(static_cast<std::size_t>(out));
  m.frac.resize(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    const auto u = static_cast<std::size_t>(o);
    m.lo[u] = i0;
    m.hi[u] = i1;
    m.frac[u] = i1 == i0 ? 0.0 : src - i0;
  }
  return m;
}

}  // namespace

int same_padding(int kernel, int dilation) {
  if (kernel % 2 == 0) throw ContractError("same_padding requires an odd kernel, got " + std::to_string(kernel));
  return dilation * (kernel - 1) / 2;
}

// ---------------------------------------------------------------------------
// Convolution (im2col + GEMM)

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, const Conv2dOptions& opt) {
  require_rank3(input, "conv2d");
  if (!weight.defined() || weight.rank() != 4 || weight.dim(1) != input.dim(0)) {
    throw ContractError("conv2d: weight " + (weight.defined() ? shape_str(weight.shape()) : std::string("undefined")) +
                        " incompatible with input " + shape_str(input.shape()));
  }
  if (opt.stride < 1 || opt.dilation < 1 || opt.pad_h < 0 || opt.pad_w < 0) {
    throw ContractError("conv2d: stride and dilation must be positive, padding non-negative");
  }
  const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int k_out = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != k_out)) {
    throw ContractError("conv2d: bias " + shape_str(bias.shape()) + " incompatible with weight " +
                        shape_str(weight.shape()));
  }
  const int ho = (h + 2 * opt.pad_h - opt.dilation * (kh - 1) - 1) / opt.stride + 1;
  const int wo = (w + 2 * opt.pad_w - opt.dilation * (kw - 1) - 1) / opt.stride + 1;
  if (h + 2 * opt.pad_h - opt.dilation * (kh - 1) - 1 < 0 || w + 2 * opt.pad_w - opt.dilation * (kw - 1) - 1 < 0) {
    throw ContractError("conv2d: kernel " + shape_str(weight.shape()) + " larger than padded input " +
                        shape_str(input.shape()));
  }

  const int rows = c_in * kh * kw;
  const int cols = ho * wo;
  auto col = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows) * cols, 0.0);
  const auto x = input.data();
  for (int c = 0; c < c_in; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        double* dst = col->data() + static_cast<std::ptrdiff_t>((c * kh + i) * kw + j) * cols;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * opt.stride - opt.pad_h + i * opt.dilation;
          if (iy < 0 || iy >= h) continue;
          const double* src = x.data() + static_cast<std::ptrdiff_t>(c * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * opt.stride - opt.pad_w + j * opt.dilation;
            if (ix >= 0 && ix < w) dst[oy * wo + ox] = src[ix];
          }
        }
      }
    }
  }

  std::vector<double> out(static_cast<std::size_t>(k_out) * cols, 0.0);
  if (bias.defined()) {
    const auto b = bias.data();
    for (int k = 0; k < k_out; ++k) std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(k) * cols, cols, b[k]);
  }
  kernels::active().gemm_nn(k_out, cols, rows, weight.data().data(), col->data(), out.data());

  NodePtr xn = input.node(), wn = weight.node(), bn = bias.defined() ? bias.node() : nullptr;
  return Tensor::make_result(
      {k_out, ho, wo}, std::move(out), {input, weight, bias},
      [=](const detail::Node& self) {
        const auto& kt = kernels::active();
        const double* g = self.grad.data();
        if (wants_grad(wn)) kt.gemm_nt(k_out, rows, cols, g, col->data(), wn->ensure_grad().data());
        if (wants_grad(bn)) {
          auto& db = bn->ensure_grad();
          for (int k = 0; k < k_out; ++k) {
            const double* gk = g + static_cast<std::ptrdiff_t>(k) * cols;
            double s = 0.0;
            for (int p = 0; p < cols; ++p) s += gk[p];
            db[static_cast<std::size_t>(k)] += s;
          }
        }
        if (wants_grad(xn)) {
          std::vector<double> dcol(static_cast<std::size_t>(rows) * cols, 0.0);
          kt.gemm_tn(rows, cols, k_out, wn->data.data(), g, dcol.data());
          auto& dx = xn->ensure_grad();
          for (int c = 0; c < c_in; ++c) {
            for (int i = 0; i < kh; ++i) {
              for (int j = 0; j < kw; ++j) {
                const double* src = dcol.data() + static_cast<std::ptrdiff_t>((c * kh + i) * kw + j) * cols;
                for (int oy = 0; oy < ho; ++oy) {
                  const int iy = oy * opt.stride - opt.pad_h + i * opt.dilation;
                  if (iy < 0 || iy >= h) continue;
                  double* dst = dx.data() + static_cast<std::ptrdiff_t>(c * h + iy) * w;
                  for (int ox = 0; ox < wo; ++ox) {
                    const int ix = ox * opt.stride - opt.pad_w + j * opt.dilation;
                    if (ix >= 0 && ix < w) dst[ix] += src[oy * wo + ox];
                  }
                }
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Pooling and resampling

Tensor max_pool2d(const Tensor& input, int window, int stride) {
  require_rank3(input, "max_pool2d");
  if (window < 1 || stride < 1) throw ContractError("max_pool2d: window and stride must be >= 1");
  const int c_n = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (window > h || window > w) {
    throw ContractError("max_pool2d: window " + std::to_string(window) + " larger than input " +
                        shape_str(input.shape()));
  }
  const int ho = (h - window) / stride + 1;
  const int wo = (w - window) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(c_n) * ho * wo);
  auto argmax = std::make_shared<std::vector<std::int64_t>>(out.size());
  const auto x = input.data();
  const bool monitor = kink_monitor_active();
  std::size_t o = 0;
  for (int c = 0; c < c_n; ++c) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox, ++o) {
        std::int64_t best = -1;
        double best_v = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < window; ++i) {
          for (int j = 0; j < window; ++j) {
            const std::int64_t idx = (static_cast<std::int64_t>(c) * h + oy * stride + i) * w + ox * stride + j;
            // Strict '>' over raster order keeps the lowest index on ties.
            if (best < 0 || x[static_cast<std::size_t>(idx)] > best_v) {
              best = idx;
              best_v = x[static_cast<std::size_t>(idx)];
            }
          }
        }
        out[o] = best_v;
        (*argmax)[o] = best;
        if (monitor && window > 1) {
          double runner_up = -std::numeric_limits<double>::infinity();
          for (int i = 0; i < window; ++i) {
            for (int j = 0; j < window; ++j) {
              const std::int64_t idx = (static_cast<std::int64_t>(c) * h + oy * stride + i) * w + ox * stride + j;
              if (idx != best) runner_up = std::max(runner_up, x[static_cast<std::size_t>(idx)]);
            }
          }
          note_kink_margin(best_v - runner_up);
        }
      }
    }
  }
  NodePtr xn = input.node();
  return Tensor::make_result({c_n, ho, wo}, std::move(out), {input}, [=](const detail::Node& self) {
    auto& dx = xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) dx[static_cast<std::size_t>((*argmax)[i])] += self.grad[i];
  });
}

Tensor resize_bilinear(const Tensor& input, int out_h, int out_w) {
  require_rank3(input, "resize_bilinear");
  if (out_h < 1 || out_w < 1) throw ContractError("resize_bilinear: target size must be positive");
  const int c_n = input.dim(0), h = input.dim(1), w = input.dim(2);
  auto ym = std::make_shared<AxisMap>(bilinear_axis(h, out_h));
  auto xm = std::make_shared<AxisMap>(bilinear_axis(w, out_w));
  std::vector<double> out(static_cast<std::size_t>(c_n) * out_h * out_w);
  const auto x = input.data();
  std::size_t o = 0;
  for (int c = 0; c < c_n; ++c) {
    const double* plane = x.data() + static_cast<std::ptrdiff_t>(c) * h * w;
    for (int oy = 0; oy < out_h; ++oy) {
      const auto uy = static_cast<std::size_t>(oy);
      const double* r0 = plane + static_cast<std::ptrdiff_t>(ym->lo[uy]) * w;
      const double* r1 = plane + static_cast<std::ptrdiff_t>(ym->hi[uy]) * w;
      const double fy = ym->frac[uy];
      for (int ox = 0; ox < out_w; ++ox, ++o) {
        const auto ux = static_cast<std::size_t>(ox);
        const int x0 = xm->lo[ux], x1 = xm->hi[ux];
        const double fx = xm->frac[ux];
        const double top = (1.0 - fx) * r0[x0] + fx * r0[x1];
        const double bot = (1.0 - fx) * r1[x0] + fx * r1[x1];
        out[o] = (1.0 - fy) * top + fy * bot;
      }
    }
  }
  NodePtr xn = input.node();
  return Tensor::make_result({c_n, out_h, out_w}, std::move(out), {input}, [=](const detail::Node& self) {
    auto& dx = xn->ensure_grad();
    std::size_t o2 = 0;
    for (int c = 0; c < c_n; ++c) {
      double* plane = dx.data() + static_cast<std::ptrdiff_t>(c) * h * w;
      for (int oy = 0; oy < out_h; ++oy) {
        const auto uy = static_cast<std::size_t>(oy);
        double* r0 = plane + static_cast<std::ptrdiff_t>(ym->lo[uy]) * w;
        double* r1 = plane + static_cast<std::ptrdiff_t>(ym->hi[uy]) * w;
        const double fy = ym->frac[uy];
        for (int ox = 0; ox < out_w; ++ox, ++o2) {
          const auto ux = static_cast<std::size_t>(ox);
          const int x0 = xm->lo[ux], x1 = xm->hi[ux];
          const double fx = xm->frac[ux];
          const double g = self.grad[o2];
          r0[x0] += (1.0 - fy) * (1.0 - fx) * g;
          r0[x1] += (1.0 - fy) * fx * g;
          r1[x0] += fy * (1.0 - fx) * g;
          r1[x1] += fy * fx * g;
        }
      }
    }
  });
}

Tensor upsample_bilinear(const Tensor& input, int factor) {
  if (factor != 2 && factor != 4) throw ContractError("upsample_bilinear: factor must be 2 or 4, got " + std::to_string(factor));
  require_rank3(input, "upsample_bilinear");
  return resize_bilinear(input, input.dim(1) * factor, input.dim(2) * factor);
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

Tensor relu(const Tensor& input) {
  const auto x = input.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  if (kink_monitor_active()) {
    for (double v : x) note_kink_margin(std::abs(v));
  }
  NodePtr xn = input.node();
  return Tensor::make_result(input.shape(), std::move(out), {input}, [xn](const detail::Node& self) {
    auto& dx = xn->ensure_grad();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (xn->data[i] > 0.0) dx[i] += self.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& input) {
  const auto x = input.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Branches keep exp() from overflowing for large |x|.
    if (x[i] >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-x[i]));
    } else {
      const double e = std::exp(x[i]);
      out[i] = e / (1.0 + e);
    }
  }
  NodePtr xn = input.node();
  return Tensor::make_result(input.shape(), std::move(out), {input}, [xn](const detail::Node& self) {
    auto& dx = xn->ensure_grad();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double s = self.data[i];
      dx[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor activation(const Tensor& input, Activation kind) {
  return kind == Activation::relu ? relu(input) : sigmoid(input);
}

Tensor softmax_channels(const Tensor& input) {
  require_rank3(input, "softmax_channels");
  const int c_n = input.dim(0);
  if (c_n < 2) throw ContractError("softmax_channels: need at least 2 channels");
  const std::size_t plane = static_cast<std::size_t>(input.dim(1)) * input.dim(2);
  const auto x = input.data();
  std::vector<double> out(x.size());
  for (std::size_t p = 0; p < plane; ++p) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < c_n; ++c) mx = std::max(mx, x[c * plane + p]);
    double z = 0.0;
    for (int c = 0; c < c_n; ++c) {
      const double e = std::exp(x[c * plane + p] - mx);
      out[c * plane + p] = e;
      z += e;
    }
    for (int c = 0; c < c_n; ++c) out[c * plane + p] /= z;
  }
  NodePtr xn = input.node();
  return Tensor::make_result(input.shape(), std::move(out), {input}, [=](const detail::Node& self) {
    auto& dx = xn->ensure_grad();
    for (std::size_t p = 0; p < plane; ++p) {
      double dotp = 0.0;
      for (int c = 0; c < c_n; ++c) dotp += self.grad[c * plane + p] * self.data[c * plane + p];
      for (int c = 0; c < c_n; ++c) {
        const std::size_t i = c * plane + p;
        dx[i] += self.data[i] * (self.grad[i] - dotp);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Channel plumbing

Tensor concat_channels(std::span<const Tensor> inputs) {
  if (inputs.size() < 2) throw ContractError("concat_channels: need at least 2 inputs");
  for (const auto& t : inputs) require_rank3(t, "concat_channels");
  const int h = inputs[0].dim(1), w = inputs[0].dim(2);
  int total = 0;
  for (const auto& t : inputs) {
    if (t.dim(1) != h || t.dim(2) != w) {
      throw ContractError("concat_channels: spatial mismatch " + shape_str(inputs[0].shape()) + " vs " +
                          shape_str(t.shape()));
    }
    total += t.dim(0);
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(total) * h * w);
  std::vector<NodePtr> nodes;
  std::vector<std::size_t> offsets;
  for (const auto& t : inputs) {
    offsets.push_back(out.size());
    out.insert(out.end(), t.data().begin(), t.data().end());
    nodes.push_back(t.node());
  }
  return Tensor::make_result({total, h, w}, std::move(out), std::vector<Tensor>(inputs.begin(), inputs.end()),
                             [nodes, offsets](const detail::Node& self) {
                               for (std::size_t k = 0; k < nodes.size(); ++k) {
                                 if (!wants_grad(nodes[k])) continue;
                                 auto& dx = nodes[k]->ensure_grad();
                                 for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[offsets[k] + i];
                               }
                             });
}

Tensor concat_channels(std::initializer_list<Tensor> inputs) {
  return concat_channels(std::span<const Tensor>(inputs.begin(), inputs.size()));
}

Tensor slice_channels(const Tensor& input, int begin, int count) {
  require_rank3(input, "slice_channels");
  if (begin < 0 || count < 1 || begin + count > input.dim(0)) {
    throw ContractError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                        ") outside " + shape_str(input.shape()));
  }
  const std::size_t plane = static_cast<std::size_t>(input.dim(1)) * input.dim(2);
  const auto first = input.data().begin() + static_cast<std::ptrdiff_t>(begin * plane);
  std::vector<double> out(first, first + static_cast<std::ptrdiff_t>(count * plane));
  NodePtr xn = input.node();
  const std::size_t off = begin * plane;
  return Tensor::make_result({count, input.dim(1), input.dim(2)}, std::move(out), {input},
                             [xn, off](const detail::Node& self) {
                               auto& dx = xn->ensure_grad();
                               for (std::size_t i = 0; i < self.grad.size(); ++i) dx[off + i] += self.grad[i];
                             });
}

Tensor global_avg_pool(const Tensor& input) {
  require_rank3(input, "global_avg_pool");
  const int c_n = input.dim(0);
  const std::size_t plane = static_cast<std::size_t>(input.dim(1)) * input.dim(2);
  const auto x = input.data();
  std::vector<double> out(static_cast<std::size_t>(c_n));
  for (int c = 0; c < c_n; ++c) {
    double s = 0.0;
    for (std::size_t p = 0; p < plane; ++p) s += x[c * plane + p];
    out[static_cast<std::size_t>(c)] = s / static_cast<double>(plane);
  }
  NodePtr xn = input.node();
  return Tensor::make_result({c_n, 1, 1}, std::move(out), {input}, [=](const detail::Node& self) {
    auto& dx = xn->ensure_grad();
    const double inv = 1.0 / static_cast<double>(plane);
    for (int c = 0; c < c_n; ++c) {
      const double g = self.grad[static_cast<std::size_t>(c)] * inv;
      for (std::size_t p = 0; p < plane; ++p) dx[c * plane + p] += g;
    }
  });
}

// ---------------------------------------------------------------------------
// Batch normalization

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, const BatchNormOptions& opt) {
  require_rank3(input, "batch_norm");
  const int c_n = input.dim(0);
  for (const Tensor* t : std::initializer_list<const Tensor*>{&gamma, &beta, &running_mean, &running_var}) {
    if (!t->defined() || t->numel() != c_n) {
      throw ContractError("batch_norm: per-channel tensor does not match " + std::to_string(c_n) + " channels");
    }
  }
  const std::size_t plane = static_cast<std::size_t>(input.dim(1)) * input.dim(2);
  const auto x = input.data();
  const auto g = gamma.data();
  const auto b = beta.data();
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto invstd = std::make_shared<std::vector<double>>(static_cast<std::size_t>(c_n));
  std::vector<double> out(x.size());
  const bool train = opt.mode == BatchNormMode::train;

  for (int c = 0; c < c_n; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    double mu = 0.0, var = 0.0;
    if (train) {
      for (std::size_t p = 0; p < plane; ++p) mu += x[c * plane + p];
      mu /= static_cast<double>(plane);
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = x[c * plane + p] - mu;
        var += d * d;
      }
      var /= static_cast<double>(plane);
    } else {
      mu = running_mean.data()[uc];
      var = running_var.data()[uc];
    }
    const double is = 1.0 / std::sqrt(var + opt.eps);
    (*invstd)[uc] = is;
    for (std::size_t p = 0; p < plane; ++p) {
      const std::size_t i = c * plane + p;
      (*xhat)[i] = (x[i] - mu) * is;
      out[i] = g[uc] * (*xhat)[i] + b[uc];
    }
    if (train && opt.update_running) {
      auto rm = running_mean.mutable_data();
      auto rv = running_var.mutable_data();
      rm[uc] = opt.momentum * rm[uc] + (1.0 - opt.momentum) * mu;
      rv[uc] = opt.momentum * rv[uc] + (1.0 - opt.momentum) * var;
    }
  }

  NodePtr xn = input.node(), gn = gamma.node(), bn = beta.node();
  return Tensor::make_result(input.shape(), std::move(out), {input, gamma, beta}, [=](const detail::Node& self) {
    const double n = static_cast<double>(plane);
    for (int c = 0; c < c_n; ++c) {
      const auto uc = static_cast<std::size_t>(c);
      double sg = 0.0, sgx = 0.0;
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t i = c * plane + p;
        sg += self.grad[i];
        sgx += self.grad[i] * (*xhat)[i];
      }
      if (wants_grad(gn)) gn->ensure_grad()[uc] += sgx;
      if (wants_grad(bn)) bn->ensure_grad()[uc] += sg;
      if (wants_grad(xn)) {
        auto& dx = xn->ensure_grad();
        const double k = gn->data[uc] * (*invstd)[uc];
        if (train) {
          for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t i = c * plane + p;
            dx[i] += k * (self.grad[i] - sg / n - (*xhat)[i] * sgx / n);
          }
        } else {
          for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t i = c * plane + p;
            dx[i] += k * self.grad[i];
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Arithmetic and reductions

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  NodePtr an = a.node(), bn = b.node();
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [an, bn](const detail::Node& self) {
    const auto& kt = kernels::active();
    for (const auto& n : {an, bn}) {
      if (wants_grad(n)) kt.axpy(self.grad.size(), 1.0, self.grad.data(), n->ensure_grad().data());
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  NodePtr an = a.node(), bn = b.node();
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [an, bn](const detail::Node& self) {
    const auto& kt = kernels::active();
    if (wants_grad(an)) kt.axpy(self.grad.size(), 1.0, self.grad.data(), an->ensure_grad().data());
    if (wants_grad(bn)) kt.axpy(self.grad.size(), -1.0, self.grad.data(), bn->ensure_grad().data());
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  NodePtr an = a.node(), bn = b.node();
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [an, bn](const detail::Node& self) {
    if (wants_grad(an)) {
      auto& da = an->ensure_grad();
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += self.grad[i] * bn->data[i];
    }
    if (wants_grad(bn)) {
      auto& db = bn->ensure_grad();
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += self.grad[i] * an->data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor;
  NodePtr an = a.node();
  return Tensor::make_result(a.shape(), std::move(out), {a}, [an, factor](const detail::Node& self) {
    kernels::active().axpy(self.grad.size(), factor, self.grad.data(), an->ensure_grad().data());
  });
}

Tensor mul_channels(const Tensor& x, const Tensor& w) {
  require_rank3(x, "mul_channels");
  const int c_n = x.dim(0);
  if (!w.defined() || w.numel() != c_n) {
    throw ContractError("mul_channels: weight " + (w.defined() ? shape_str(w.shape()) : std::string("undefined")) +
                        " does not match " + shape_str(x.shape()));
  }
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  const auto xd = x.data(), wd = w.data();
  std::vector<double> out(xd.size());
  for (int c = 0; c < c_n; ++c) {
    for (std::size_t p = 0; p < plane; ++p) out[c * plane + p] = xd[c * plane + p] * wd[static_cast<std::size_t>(c)];
  }
  NodePtr xn = x.node(), wn = w.node();
  return Tensor::make_result(x.shape(), std::move(out), {x, w}, [=](const detail::Node& self) {
    double* dx = wants_grad(xn) ? xn->ensure_grad().data() : nullptr;
    double* dw = wants_grad(wn) ? wn->ensure_grad().data() : nullptr;
    for (int c = 0; c < c_n; ++c) {
      const auto uc = static_cast<std::size_t>(c);
      double acc = 0.0;
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t i = c * plane + p;
        if (dx) dx[i] += self.grad[i] * wn->data[uc];
        acc += self.grad[i] * xn->data[i];
      }
      if (dw) dw[uc] += acc;
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  NodePtr an = a.node();
  return Tensor::make_result({}, {s}, {a}, [an](const detail::Node& self) {
    auto& da = an->ensure_grad();
    const double g = self.grad[0];
    for (double& v : da) v += g;
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum_squares(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  NodePtr an = a.node();
  return Tensor::make_result({}, {s}, {a}, [an](const detail::Node& self) {
    kernels::active().axpy(an->data.size(), 2.0 * self.grad[0], an->data.data(), an->ensure_grad().data());
  });
}

}  // namespace wasr
