#include "csifb/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "csifb/errors.hpp"

namespace csifb::tk {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Column buffer for one sample: rows (c, ky, kx), columns (y, x).
void im2col(const double* x, std::size_t channels, std::size_t height, std::size_t width,
            double* col) {
  const std::size_t hw = height * width;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = x + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = col + (c * 9 + ky * 3 + kx) * hw;
        // Output columns whose source x is inside the plane.
        const std::size_t x0 = kx == 0 ? 1 : 0;
        const std::size_t x1 = kx == 2 ? width - 1 : width;
        for (std::size_t y = 0; y < height; ++y) {
          double* dst = row + y * width;
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(height)) {
            std::fill(dst, dst + width, 0.0);
            continue;
          }
          const double* src = plane + sy * width;
          if (x0 > 0) dst[0] = 0.0;
          for (std::size_t xx = x0; xx < x1; ++xx) dst[xx] = src[xx + kx - 1];
          if (x1 < width) dst[width - 1] = 0.0;
        }
      }
    }
  }
}

void col2im_add(const double* col, std::size_t channels, std::size_t height, std::size_t width,
                double* dx) {
  const std::size_t hw = height * width;
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = dx + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = col + (c * 9 + ky * 3 + kx) * hw;
        const std::size_t x0 = kx == 0 ? 1 : 0;
        const std::size_t x1 = kx == 2 ? width - 1 : width;
        for (std::size_t y = 0; y < height; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(height)) continue;
          double* dst = plane + sy * width;
          const double* src = row + y * width;
          for (std::size_t xx = x0; xx < x1; ++xx) dst[xx + kx - 1] += src[xx];
        }
      }
    }
  }
}

}  // namespace

Tensor fc(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || bias.rank() != 1 || x.dim(1) != weight.dim(0) ||
      bias.dim(0) != weight.dim(1)) {
    throw DimensionError("fc: input " + shape_str(x.shape()) + ", weight " +
                         shape_str(weight.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const auto n = x.dim(0), fi = x.dim(1), fo = weight.dim(1);
  Buffer out(n * fo);
  {
    ConstMapMat X(x.data().data(), n, fi);
    ConstMapMat W(weight.data().data(), fi, fo);
    Eigen::Map<const Eigen::RowVectorXd> B(bias.data().data(), fo);
    MapMat Y(out.data(), n, fo);
    Y.noalias() = X * W;
    Y.rowwise() += B;
  }
  return make_result({n, fo}, std::move(out), {x, weight, bias}, [n, fi, fo](detail::Node& self) {
    ConstMapMat G(self.grad.data(), n, fo);
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    if (px.requires_grad) {
      MapMat DX(px.grad_buffer().data(), n, fi);
      ConstMapMat W(pw.data.data(), fi, fo);
      DX.noalias() += G * W.transpose();
    }
    if (pw.requires_grad) {
      MapMat DW(pw.grad_buffer().data(), fi, fo);
      ConstMapMat X(px.data.data(), n, fi);
      DW.noalias() += X.transpose() * G;
    }
    if (pb.requires_grad) {
      Eigen::Map<Eigen::RowVectorXd> DB(pb.grad_buffer().data(), fo);
      DB += G.colwise().sum();
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  if (kernel.rank() != 4 || kernel.dim(2) != 3 || kernel.dim(3) != 3) {
    throw ConfigError("conv2d: only 3x3 kernels are supported, got " + shape_str(kernel.shape()));
  }
  if (x.rank() != 4 || x.dim(1) != kernel.dim(1) || bias.rank() != 1 ||
      bias.dim(0) != kernel.dim(0)) {
    throw DimensionError("conv2d: input " + shape_str(x.shape()) + ", kernel " +
                         shape_str(kernel.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const auto n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3), co = kernel.dim(0);
  const auto hw = h * w;
  Buffer out(n * co * hw);
  {
    Buffer col(ci * 9 * hw);
    ConstMapMat K(kernel.data().data(), co, ci * 9);
    Eigen::Map<const Eigen::VectorXd> B(bias.data().data(), co);
    for (std::size_t s = 0; s < n; ++s) {
      im2col(x.data().data() + s * ci * hw, ci, h, w, col.data());
      ConstMapMat C(col.data(), ci * 9, hw);
      MapMat Y(out.data() + s * co * hw, co, hw);
      Y.noalias() = K * C;
      Y.colwise() += B;
    }
  }
  return make_result({n, co, h, w}, std::move(out), {x, kernel, bias},
                     [n, ci, h, w, co, hw](detail::Node& self) {
                       auto& px = *self.parents[0];
                       auto& pk = *self.parents[1];
                       auto& pb = *self.parents[2];
                       ConstMapMat K(pk.data.data(), co, ci * 9);
                       Buffer col(ci * 9 * hw);
                       Buffer dcol(px.requires_grad ? ci * 9 * hw : 0);
                       for (std::size_t s = 0; s < n; ++s) {
                         ConstMapMat G(self.grad.data() + s * co * hw, co, hw);
                         if (pk.requires_grad) {
                           im2col(px.data.data() + s * ci * hw, ci, h, w, col.data());
                           ConstMapMat C(col.data(), ci * 9, hw);
                           MapMat DK(pk.grad_buffer().data(), co, ci * 9);
                           DK.noalias() += G * C.transpose();
                         }
                         if (pb.requires_grad) {
                           Eigen::Map<Eigen::VectorXd> DB(pb.grad_buffer().data(), co);
                           DB += G.rowwise().sum();
                         }
                         if (px.requires_grad) {
                           MapMat DC(dcol.data(), ci * 9, hw);
                           DC.noalias() = K.transpose() * G;
                           col2im_add(dcol.data(), ci, h, w,
                                      px.grad_buffer().data() + s * ci * hw);
                         }
                       }
                     });
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                 Mode mode) {
  if (x.rank() < 2 || gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != x.dim(1) ||
      beta.dim(0) != x.dim(1) || state.running_mean.size() != x.dim(1)) {
    throw DimensionError("batchnorm: input " + shape_str(x.shape()) + ", gamma " +
                         shape_str(gamma.shape()) + ", beta " + shape_str(beta.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1), inner = x.size() / (n * c);
  const double count = static_cast<double>(n * inner);
  const auto xs = x.data();
  Buffer mean(c, 0.0), invstd(c, 0.0);

  if (mode == Mode::train) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* p = xs.data() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) s += p[i];
      }
      const double mu = s / count;
      double ss = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* p = xs.data() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      const double var = ss / count;
      mean[ch] = mu;
      invstd[ch] = 1.0 / std::sqrt(var + state.eps);
      const double unbiased = count > 1 ? ss / (count - 1) : var;
      state.running_mean[ch] = (1 - state.momentum) * state.running_mean[ch] + state.momentum * mu;
      state.running_var[ch] =
          (1 - state.momentum) * state.running_var[ch] + state.momentum * unbiased;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean[ch];
      invstd[ch] = 1.0 / std::sqrt(state.running_var[ch] + state.eps);
    }
  }

  Buffer out(x.size());
  const auto g = gamma.data(), bt = beta.data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (b * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        out[off + i] = g[ch] * (xs[off + i] - mean[ch]) * invstd[ch] + bt[ch];
      }
    }
  }

  const bool train = mode == Mode::train;
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [n, c, inner, count, train, mean = std::move(mean),
                      invstd = std::move(invstd)](detail::Node& self) {
                       auto& px = *self.parents[0];
                       auto& pg = *self.parents[1];
                       auto& pb = *self.parents[2];
                       const auto& gy = self.grad;
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         double sum_g = 0.0, sum_gx = 0.0;
                         for (std::size_t b = 0; b < n; ++b) {
                           const std::size_t off = (b * c + ch) * inner;
                           for (std::size_t i = 0; i < inner; ++i) {
                             const double xhat = (px.data[off + i] - mean[ch]) * invstd[ch];
                             sum_g += gy[off + i];
                             sum_gx += gy[off + i] * xhat;
                           }
                         }
                         if (pg.requires_grad) pg.grad_buffer()[ch] += sum_gx;
                         if (pb.requires_grad) pb.grad_buffer()[ch] += sum_g;
                         if (!px.requires_grad) continue;
                         const double gam = pg.data[ch];
                         auto& dx = px.grad_buffer();
                         for (std::size_t b = 0; b < n; ++b) {
                           const std::size_t off = (b * c + ch) * inner;
                           for (std::size_t i = 0; i < inner; ++i) {
                             if (train) {
                               const double xhat = (px.data[off + i] - mean[ch]) * invstd[ch];
                               dx[off + i] += gam * invstd[ch] / count *
                                              (count * gy[off + i] - sum_g - xhat * sum_gx);
                             } else {
                               dx[off + i] += gam * invstd[ch] * gy[off + i];
                             }
                           }
                         }
                       }
                     });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  Buffer out(x.size());
  const auto xs = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xs[i] >= 0 ? xs[i] : slope * xs[i];
  return make_result(x.shape(), std::move(out), {x}, [slope](detail::Node& self) {
    auto& px = *self.parents[0];
    auto& dx = px.grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] += self.grad[i] * (px.data[i] >= 0 ? 1.0 : slope);
    }
  });
}

Tensor tanh(const Tensor& x) {
  Buffer out(x.size());
  const auto xs = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xs[i]);
  return make_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& dx = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] += self.grad[i] * (1.0 - self.data[i] * self.data[i]);
    }
  });
}

Tensor dropout(const Tensor& x, double p, Mode mode, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout: p must lie in [0, 1)");
  if (mode == Mode::eval || p == 0.0) {
    return make_result(x.shape(), Buffer(x.data().begin(), x.data().end()), {x},
                       [](detail::Node& self) {
                         auto& dx = self.parents[0]->grad_buffer();
                         for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
                       });
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  Buffer scale(x.size());
  Buffer out(x.size());
  const auto xs = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    scale[i] = u(rng) < p ? 0.0 : keep_scale;
    out[i] = xs[i] * scale[i];
  }
  return make_result(x.shape(), std::move(out), {x},
                     [scale = std::move(scale)](detail::Node& self) {
                       auto& dx = self.parents[0]->grad_buffer();
                       for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * scale[i];
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Buffer out(a.size());
  const auto as = a.data(), bs = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = as[i] + bs[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (auto& parent : self.parents) {
      if (!parent->requires_grad) continue;
      auto& d = parent->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result({1}, {s}, {x}, [](detail::Node& self) {
    auto& dx = self.parents[0]->grad_buffer();
    for (double& d : dx) d += self.grad[0];
  });
}

Tensor weighted_sum(const Tensor& x, std::span<const double> weights) {
  if (weights.size() != x.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                         shape_str(x.shape()));
  }
  double s = 0.0;
  const auto xs = x.data();
  for (std::size_t i = 0; i < xs.size(); ++i) s += weights[i] * xs[i];
  Buffer w(weights.begin(), weights.end());
  return make_result({1}, {s}, {x}, [w = std::move(w)](detail::Node& self) {
    auto& dx = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[0] * w[i];
  });
}

double uniform_level(std::uint32_t index, unsigned bits) {
  const double levels = std::ldexp(1.0, static_cast<int>(bits));
  return -1.0 + (2.0 * index + 1.0) / levels;
}

std::uint32_t uniform_index(double x, unsigned bits) {
  const double levels = std::ldexp(1.0, static_cast<int>(bits));
  const double cell = std::floor((x + 1.0) * 0.5 * levels);
  if (!(cell >= 0.0)) return 0;
  return static_cast<std::uint32_t>(std::min(cell, levels - 1.0));
}

// Staircase of 2^bits - 1 sigmoid steps at the cell edges, offset so that
// its plateaus sit on the midpoint levels.
double staircase_surrogate(double x, unsigned bits, double temperature) {
  const double levels = std::ldexp(1.0, static_cast<int>(bits));
  const double step = 2.0 / levels;
  double s = -1.0 + 0.5 * step;
  for (unsigned j = 1; j < static_cast<unsigned>(levels); ++j) {
    s += step * sigmoid(temperature * (x - (-1.0 + j * step)));
  }
  return s;
}

double staircase_surrogate_derivative(double x, unsigned bits, double temperature) {
  const double levels = std::ldexp(1.0, static_cast<int>(bits));
  const double step = 2.0 / levels;
  double d = 0.0;
  for (unsigned j = 1; j < static_cast<unsigned>(levels); ++j) {
    const double sg = sigmoid(temperature * (x - (-1.0 + j * step)));
    d += step * temperature * sg * (1.0 - sg);
  }
  return d;
}

QuantizedOutput quantize_uniform_ste(const Tensor& x, unsigned bits, double temperature,
                                     QuantizerForward forward) {
  if (bits < 1 || bits > 16) throw ConfigError("quantize_uniform_ste: bits must be in [1, 16]");
  const auto xs = x.data();
  Buffer out(x.size());
  std::vector<std::uint32_t> idx(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    idx[i] = uniform_index(xs[i], bits);
    out[i] = forward == QuantizerForward::hard ? uniform_level(idx[i], bits)
                                               : staircase_surrogate(xs[i], bits, temperature);
  }
  Tensor levels = make_result(x.shape(), std::move(out), {x}, [bits, temperature](detail::Node& self) {
    auto& px = *self.parents[0];
    auto& dx = px.grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] += self.grad[i] * staircase_surrogate_derivative(px.data[i], bits, temperature);
    }
  });
  return {std::move(levels), std::move(idx)};
}

}  // namespace csifb::tk
