#include "ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tbf {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

// Decompose a shape around `axis` into outer x extent x inner for linear walks.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  AxisView v;
  v.extent = shape[axis];
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  return make_op_result(a.shape(), std::move(out), {a, b},
                        [](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            (*pg[0])[i] += g[i];
                            (*pg[1])[i] += g[i];
                          }
                        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
  return make_op_result(a.shape(), std::move(out), {a, b},
                        [](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            (*pg[0])[i] += g[i];
                            (*pg[1])[i] -= g[i];
                          }
                        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  auto ka = a.data();
  auto kb = b.data();
  return make_op_result(a.shape(), std::move(out), {a, b},
                        [ka = std::move(ka), kb = std::move(kb)](
                            const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            (*pg[0])[i] += g[i] * kb[i];
                            (*pg[1])[i] += g[i] * ka[i];
                          }
                        });
}

Tensor scalar_mul(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * s;
  return make_op_result(a.shape(), std::move(out), {a},
                        [s](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * s;
                        });
}

Tensor scalar_add(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + s;
  return make_op_result(a.shape(), std::move(out), {a},
                        [](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                        });
}

Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s) {
  require(s.size() == 1, "mul_scalar_tensor: scale must have one element, got shape " +
                             shape_str(s.shape()));
  const double sv = s.data()[0];
  std::vector<double> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * sv;
  auto ka = a.data();
  return make_op_result(a.shape(), std::move(out), {a, s},
                        [sv, ka = std::move(ka)](const std::vector<double>& g,
                                                 const std::vector<std::vector<double>*>& pg) {
                          double gs = 0.0;
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            (*pg[0])[i] += g[i] * sv;
                            gs += g[i] * ka[i];
                          }
                          (*pg[1])[0] += gs;
                        });
}

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(da[i]);
  auto ky = out;
  return make_op_result(a.shape(), std::move(out), {a},
                        [ky = std::move(ky)](const std::vector<double>& g,
                                             const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * ky[i];
                        });
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(da[i]);
  auto kx = a.data();
  return make_op_result(a.shape(), std::move(out), {a},
                        [kx = std::move(kx)](const std::vector<double>& g,
                                             const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] / kx[i];
                        });
}

Tensor sqrt(const Tensor& a) {
  std::vector<double> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(da[i]);
  auto ky = out;
  return make_op_result(a.shape(), std::move(out), {a},
                        [ky = std::move(ky)](const std::vector<double>& g,
                                             const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < g.size(); ++i)
                            (*pg[0])[i] += g[i] * 0.5 / ky[i];
                        });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  require(lo < hi, "clamp: lo must be < hi");
  std::vector<double> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(std::max(da[i], lo), hi);
  auto kx = a.data();
  return make_op_result(a.shape(), std::move(out), {a},
                        [lo, hi, kx = std::move(kx)](const std::vector<double>& g,
                                                     const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            if (kx[i] > lo && kx[i] < hi) (*pg[0])[i] += g[i];
                          }
                        });
}

Tensor gelu(const Tensor& a) {
  std::vector<double> out(a.size());
  const auto& da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * da[i] * (1.0 + std::erf(da[i] * kInvSqrt2));
  }
  auto kx = a.data();
  return make_op_result(a.shape(), std::move(out), {a},
                        [kx = std::move(kx)](const std::vector<double>& g,
                                             const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            const double x = kx[i];
                            const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                            (*pg[0])[i] += g[i] * (cdf + x * pdf);
                          }
                        });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape_numel(shape) == a.size(), "reshape: cannot view " + shape_str(a.shape()) +
                                              " as " + shape_str(shape));
  std::vector<double> out = a.data();
  return make_op_result(std::move(shape), std::move(out), {a},
                        [](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                        });
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose: expects rank 2, got shape " + shape_str(a.shape()));
  const std::size_t rows = a.extent(0), cols = a.extent(1);
  std::vector<double> out(a.size());
  const auto& da = a.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = da[r * cols + c];
  return make_op_result({cols, rows}, std::move(out), {a},
                        [rows, cols](const std::vector<double>& g,
                                     const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < cols; ++c)
                              (*pg[0])[r * cols + c] += g[c * rows + r];
                        });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& first = parts[0].shape();
  require(axis < first.size(), "concat: axis out of range for shape " + shape_str(first));
  Shape out_shape = first;
  std::size_t total = first[axis];
  for (std::size_t i = 1; i < parts.size(); ++i) {
    Shape other = parts[i].shape();
    require(other.size() == first.size(), "concat: rank mismatch " + shape_str(first) + " vs " +
                                              shape_str(other));
    for (std::size_t d = 0; d < other.size(); ++d) {
      if (d != axis)
        require(other[d] == first[d], "concat: shape mismatch " + shape_str(first) + " vs " +
                                          shape_str(other) + " outside axis " + std::to_string(axis));
    }
    total += other[axis];
  }
  out_shape[axis] = total;

  AxisView v = axis_view(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> extents(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) extents[i] = parts[i].extent(axis);

  for (std::size_t o = 0; o < v.outer; ++o) {
    std::size_t dst_e = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const auto& src = parts[p].data();
      for (std::size_t e = 0; e < extents[p]; ++e, ++dst_e) {
        const double* s = src.data() + (o * extents[p] + e) * v.inner;
        double* d = out.data() + (o * total + dst_e) * v.inner;
        std::copy(s, s + v.inner, d);
      }
    }
  }

  return make_op_result(
      std::move(out_shape), std::move(out), parts,
      [v, total, extents](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
        for (std::size_t o = 0; o < v.outer; ++o) {
          std::size_t src_e = 0;
          for (std::size_t p = 0; p < extents.size(); ++p) {
            for (std::size_t e = 0; e < extents[p]; ++e, ++src_e) {
              const double* s = g.data() + (o * total + src_e) * v.inner;
              double* d = pg[p]->data() + (o * extents[p] + e) * v.inner;
              for (std::size_t i = 0; i < v.inner; ++i) d[i] += s[i];
            }
          }
        }
      });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len) {
  require(axis < a.rank(), "slice: axis out of range for shape " + shape_str(a.shape()));
  require(len > 0 && start + len <= a.extent(axis),
          "slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
              ") exceeds extent " + std::to_string(a.extent(axis)) + " of shape " +
              shape_str(a.shape()));
  AxisView v = axis_view(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = len;
  std::vector<double> out(shape_numel(out_shape));
  const auto& da = a.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t e = 0; e < len; ++e) {
      const double* s = da.data() + (o * v.extent + start + e) * v.inner;
      double* d = out.data() + (o * len + e) * v.inner;
      std::copy(s, s + v.inner, d);
    }
  }
  return make_op_result(std::move(out_shape), std::move(out), {a},
                        [v, start, len](const std::vector<double>& g,
                                        const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t o = 0; o < v.outer; ++o) {
                            for (std::size_t e = 0; e < len; ++e) {
                              const double* s = g.data() + (o * len + e) * v.inner;
                              double* d = pg[0]->data() + (o * v.extent + start + e) * v.inner;
                              for (std::size_t i = 0; i < v.inner; ++i) d[i] += s[i];
                            }
                          }
                        });
}

Tensor extract_patches(const Tensor& image, std::size_t patch) {
  require(image.rank() == 3, "extract_patches: expects C x H x W, got " + shape_str(image.shape()));
  const std::size_t C = image.extent(0), H = image.extent(1), W = image.extent(2);
  require(patch > 0 && H % patch == 0 && W % patch == 0,
          "extract_patches: patch " + std::to_string(patch) + " must divide " + shape_str(image.shape()));
  const std::size_t gh = H / patch, gw = W / patch;
  const std::size_t n = gh * gw, cols = C * patch * patch;
  std::vector<double> out(n * cols);
  const auto& src = image.data();
  for (std::size_t gy = 0; gy < gh; ++gy)
    for (std::size_t gx = 0; gx < gw; ++gx) {
      double* row = out.data() + (gy * gw + gx) * cols;
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t py = 0; py < patch; ++py)
          for (std::size_t px = 0; px < patch; ++px) {
            row[(c * patch + py) * patch + px] = src[(c * H + gy * patch + py) * W + gx * patch + px];
          }
    }
  return make_op_result(
      {n, cols}, std::move(out), {image},
      [C, H, W, patch, gh, gw, cols](const std::vector<double>& g,
                                     const std::vector<std::vector<double>*>& pg) {
        for (std::size_t gy = 0; gy < gh; ++gy)
          for (std::size_t gx = 0; gx < gw; ++gx) {
            const double* row = g.data() + (gy * gw + gx) * cols;
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t py = 0; py < patch; ++py)
                for (std::size_t px = 0; px < patch; ++px) {
                  (*pg[0])[(c * H + gy * patch + py) * W + gx * patch + px] +=
                      row[(c * patch + py) * patch + px];
                }
          }
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2,
          "matmul: expects rank-2 operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  require(a.extent(1) == b.extent(0),
          "matmul: inner extents differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t M = a.extent(0), K = a.extent(1), N = b.extent(1);
  std::vector<double> out(M * N, 0.0);
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t m = 0; m < M; ++m) {
    const double* arow = da.data() + m * K;
    double* orow = out.data() + m * N;
    for (std::size_t k = 0; k < K; ++k) {
      const double av = arow[k];
      const double* brow = db.data() + k * N;
      for (std::size_t n = 0; n < N; ++n) orow[n] += av * brow[n];
    }
  }
  auto ka = a.data();
  auto kb = b.data();
  return make_op_result(
      {M, N}, std::move(out), {a, b},
      [M, K, N, ka = std::move(ka), kb = std::move(kb)](
          const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
        // dA = g * B^T
        for (std::size_t m = 0; m < M; ++m)
          for (std::size_t k = 0; k < K; ++k) {
            double acc = 0.0;
            const double* grow = g.data() + m * N;
            const double* brow = kb.data() + k * N;
            for (std::size_t n = 0; n < N; ++n) acc += grow[n] * brow[n];
            (*pg[0])[m * K + k] += acc;
          }
        // dB = A^T * g
        for (std::size_t k = 0; k < K; ++k)
          for (std::size_t n = 0; n < N; ++n) {
            double acc = 0.0;
            for (std::size_t m = 0; m < M; ++m) acc += ka[m * K + k] * g[m * N + n];
            (*pg[1])[k * N + n] += acc;
          }
      });
}

Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_op_result({1}, {acc}, {a},
                        [](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                          for (auto& v : *pg[0]) v += g[0];
                        });
}

Tensor mean_rows(const Tensor& a) {
  require(a.rank() == 2, "mean_rows: expects rank 2, got " + shape_str(a.shape()));
  const std::size_t N = a.extent(0), L = a.extent(1);
  std::vector<double> out(N, 0.0);
  const auto& da = a.data();
  for (std::size_t i = 0; i < N; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < L; ++j) acc += da[i * L + j];
    out[i] = acc / static_cast<double>(L);
  }
  return make_op_result({N}, std::move(out), {a},
                        [N, L](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < N; ++i)
                            for (std::size_t j = 0; j < L; ++j)
                              (*pg[0])[i * L + j] += g[i] / static_cast<double>(L);
                        });
}

Tensor var_rows(const Tensor& a) {
  require(a.rank() == 2, "var_rows: expects rank 2, got " + shape_str(a.shape()));
  const std::size_t N = a.extent(0), L = a.extent(1);
  std::vector<double> out(N, 0.0);
  std::vector<double> means(N, 0.0);
  const auto& da = a.data();
  for (std::size_t i = 0; i < N; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < L; ++j) acc += da[i * L + j];
    means[i] = acc / static_cast<double>(L);
    double v = 0.0;
    for (std::size_t j = 0; j < L; ++j) {
      const double d = da[i * L + j] - means[i];
      v += d * d;
    }
    out[i] = v / static_cast<double>(L);
  }
  auto kx = a.data();
  return make_op_result({N}, std::move(out), {a},
                        [N, L, kx = std::move(kx), means = std::move(means)](
                            const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < N; ++i)
                            for (std::size_t j = 0; j < L; ++j)
                              (*pg[0])[i * L + j] +=
                                  g[i] * 2.0 * (kx[i * L + j] - means[i]) / static_cast<double>(L);
                        });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  require(axis < a.rank(), "softmax: axis " + std::to_string(axis) + " out of range for shape " +
                               shape_str(a.shape()));
  AxisView v = axis_view(a.shape(), axis);
  std::vector<double> out(a.size());
  const auto& da = a.data();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < v.extent; ++e) mx = std::max(mx, da[base + e * v.inner]);
      double denom = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e) {
        const double ev = std::exp(da[base + e * v.inner] - mx);
        out[base + e * v.inner] = ev;
        denom += ev;
      }
      for (std::size_t e = 0; e < v.extent; ++e) out[base + e * v.inner] /= denom;
    }
  auto ky = out;
  return make_op_result(a.shape(), std::move(out), {a},
                        [v, ky = std::move(ky)](const std::vector<double>& g,
                                                const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t o = 0; o < v.outer; ++o)
                            for (std::size_t i = 0; i < v.inner; ++i) {
                              const std::size_t base = o * v.extent * v.inner + i;
                              double dot = 0.0;
                              for (std::size_t e = 0; e < v.extent; ++e) {
                                const std::size_t idx = base + e * v.inner;
                                dot += g[idx] * ky[idx];
                              }
                              for (std::size_t e = 0; e < v.extent; ++e) {
                                const std::size_t idx = base + e * v.inner;
                                (*pg[0])[idx] += ky[idx] * (g[idx] - dot);
                              }
                            }
                        });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require(x.rank() == 2, "layer_norm: expects rank-2 input, got " + shape_str(x.shape()));
  const std::size_t N = x.extent(0), L = x.extent(1);
  require(gamma.rank() == 1 && gamma.extent(0) == L,
          "layer_norm: gamma shape " + shape_str(gamma.shape()) + " does not match width " +
              std::to_string(L));
  require(beta.rank() == 1 && beta.extent(0) == L,
          "layer_norm: beta shape " + shape_str(beta.shape()) + " does not match width " +
              std::to_string(L));
  require(eps > 0.0, "layer_norm: eps must be positive");

  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(N);
  const auto& dx = x.data();
  const auto& dg = gamma.data();
  const auto& db = beta.data();
  for (std::size_t i = 0; i < N; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < L; ++j) mean += dx[i * L + j];
    mean /= static_cast<double>(L);
    double var = 0.0;
    for (std::size_t j = 0; j < L; ++j) {
      const double d = dx[i * L + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(L);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < L; ++j) {
      const double h = (dx[i * L + j] - mean) * is;
      xhat[i * L + j] = h;
      out[i * L + j] = h * dg[j] + db[j];
    }
  }

  auto kg = gamma.data();
  return make_op_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [N, L, kg = std::move(kg), xhat = std::move(xhat), inv_std = std::move(inv_std)](
          const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
        for (std::size_t i = 0; i < N; ++i) {
          double sum_dh = 0.0, sum_dh_h = 0.0;
          for (std::size_t j = 0; j < L; ++j) {
            const double dh = g[i * L + j] * kg[j];
            sum_dh += dh;
            sum_dh_h += dh * xhat[i * L + j];
          }
          const double inv_l = 1.0 / static_cast<double>(L);
          for (std::size_t j = 0; j < L; ++j) {
            const double dh = g[i * L + j] * kg[j];
            (*pg[0])[i * L + j] +=
                inv_std[i] * (dh - inv_l * sum_dh - xhat[i * L + j] * inv_l * sum_dh_h);
          }
        }
        for (std::size_t j = 0; j < L; ++j) {
          double dgam = 0.0, dbet = 0.0;
          for (std::size_t i = 0; i < N; ++i) {
            dgam += g[i * L + j] * xhat[i * L + j];
            dbet += g[i * L + j];
          }
          (*pg[1])[j] += dgam;
          (*pg[2])[j] += dbet;
        }
      });
}

Tensor l2_normalize_rows(const Tensor& a) {
  require(a.rank() == 2, "l2_normalize_rows: expects rank 2, got " + shape_str(a.shape()));
  constexpr double kGuard = 1e-12;
  const std::size_t N = a.extent(0), L = a.extent(1);
  std::vector<double> out(a.size());
  std::vector<double> denom(N);
  const auto& da = a.data();
  for (std::size_t i = 0; i < N; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < L; ++j) ss += da[i * L + j] * da[i * L + j];
    denom[i] = std::max(std::sqrt(ss), kGuard);
    for (std::size_t j = 0; j < L; ++j) out[i * L + j] = da[i * L + j] / denom[i];
  }
  auto ky = out;
  return make_op_result(a.shape(), std::move(out), {a},
                        [N, L, ky = std::move(ky), denom = std::move(denom)](
                            const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < N; ++i) {
                            double dot = 0.0;
                            for (std::size_t j = 0; j < L; ++j) dot += g[i * L + j] * ky[i * L + j];
                            const bool guarded = denom[i] <= 1e-12;
                            for (std::size_t j = 0; j < L; ++j) {
                              const double t = guarded ? g[i * L + j]
                                                       : g[i * L + j] - ky[i * L + j] * dot;
                              (*pg[0])[i * L + j] += t / denom[i];
                            }
                          }
                        });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require(x.rank() == 2, "add_row_bias: expects rank-2 input, got " + shape_str(x.shape()));
  require(bias.rank() == 1 && bias.extent(0) == x.extent(1),
          "add_row_bias: bias shape " + shape_str(bias.shape()) + " does not match input " +
              shape_str(x.shape()));
  const std::size_t N = x.extent(0), L = x.extent(1);
  std::vector<double> out(x.size());
  const auto& dx = x.data();
  const auto& db = bias.data();
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < L; ++j) out[i * L + j] = dx[i * L + j] + db[j];
  return make_op_result(x.shape(), std::move(out), {x, bias},
                        [N, L](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t i = 0; i < N; ++i)
                            for (std::size_t j = 0; j < L; ++j) {
                              (*pg[0])[i * L + j] += g[i * L + j];
                              (*pg[1])[j] += g[i * L + j];
                            }
                        });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  require(x.rank() == 3, "add_channel_bias: expects C x H x W, got " + shape_str(x.shape()));
  require(bias.rank() == 1 && bias.extent(0) == x.extent(0),
          "add_channel_bias: bias shape " + shape_str(bias.shape()) + " does not match input " +
              shape_str(x.shape()));
  const std::size_t C = x.extent(0), hw = x.extent(1) * x.extent(2);
  std::vector<double> out(x.size());
  const auto& dx = x.data();
  const auto& db = bias.data();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < hw; ++i) out[c * hw + i] = dx[c * hw + i] + db[c];
  return make_op_result(x.shape(), std::move(out), {x, bias},
                        [C, hw](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t c = 0; c < C; ++c) {
                            double acc = 0.0;
                            for (std::size_t i = 0; i < hw; ++i) {
                              (*pg[0])[c * hw + i] += g[c * hw + i];
                              acc += g[c * hw + i];
                            }
                            (*pg[1])[c] += acc;
                          }
                        });
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, std::size_t stride, std::size_t pad) {
  require(x.rank() == 3, "conv2d: input must be C x H x W, got " + shape_str(x.shape()));
  require(kernels.rank() == 4, "conv2d: kernels must be Co x Ci x k x k, got " +
                                   shape_str(kernels.shape()));
  require(kernels.extent(2) == kernels.extent(3),
          "conv2d: kernels must be square, got " + shape_str(kernels.shape()));
  const std::size_t Ci = x.extent(0), H = x.extent(1), W = x.extent(2);
  const std::size_t Co = kernels.extent(0), k = kernels.extent(2);
  require(kernels.extent(1) == Ci, "conv2d: input channels " + shape_str(x.shape()) +
                                       " do not match kernels " + shape_str(kernels.shape()));
  require(k % 2 == 1, "conv2d: kernel size must be odd, got " + std::to_string(k));
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(H + 2 * pad >= k && W + 2 * pad >= k,
          "conv2d: kernel " + std::to_string(k) + " exceeds padded input " + shape_str(x.shape()));
  require((H + 2 * pad - k) % stride == 0 && (W + 2 * pad - k) % stride == 0,
          "conv2d: non-integral output extent for input " + shape_str(x.shape()) + ", kernel " +
              std::to_string(k) + ", stride " + std::to_string(stride) + ", pad " +
              std::to_string(pad));
  const std::size_t Ho = (H + 2 * pad - k) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - k) / stride + 1;

  std::vector<double> out(Co * Ho * Wo, 0.0);
  const auto& dx = x.data();
  const auto& dk = kernels.data();
  const long ip = static_cast<long>(pad);
  for (std::size_t co = 0; co < Co; ++co)
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        double acc = 0.0;
        for (std::size_t ci = 0; ci < Ci; ++ci)
          for (std::size_t dy = 0; dy < k; ++dy) {
            const long iy = static_cast<long>(oy * stride + dy) - ip;
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            for (std::size_t dxk = 0; dxk < k; ++dxk) {
              const long ix = static_cast<long>(ox * stride + dxk) - ip;
              if (ix < 0 || ix >= static_cast<long>(W)) continue;
              acc += dx[(ci * H + iy) * W + ix] * dk[((co * Ci + ci) * k + dy) * k + dxk];
            }
          }
        out[(co * Ho + oy) * Wo + ox] = acc;
      }

  auto kx = x.data();
  auto kk = kernels.data();
  return make_op_result(
      {Co, Ho, Wo}, std::move(out), {x, kernels},
      [Ci, H, W, Co, k, Ho, Wo, stride, ip, kx = std::move(kx), kk = std::move(kk)](
          const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
        for (std::size_t co = 0; co < Co; ++co)
          for (std::size_t oy = 0; oy < Ho; ++oy)
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const double gv = g[(co * Ho + oy) * Wo + ox];
              if (gv == 0.0) continue;
              for (std::size_t ci = 0; ci < Ci; ++ci)
                for (std::size_t dy = 0; dy < k; ++dy) {
                  const long iy = static_cast<long>(oy * stride + dy) - ip;
                  if (iy < 0 || iy >= static_cast<long>(H)) continue;
                  for (std::size_t dxk = 0; dxk < k; ++dxk) {
                    const long ix = static_cast<long>(ox * stride + dxk) - ip;
                    if (ix < 0 || ix >= static_cast<long>(W)) continue;
                    const std::size_t xi = (ci * H + iy) * W + ix;
                    const std::size_t ki = ((co * Ci + ci) * k + dy) * k + dxk;
                    (*pg[0])[xi] += gv * kk[ki];
                    (*pg[1])[ki] += gv * kx[xi];
                  }
                }
            }
      });
}

Tensor pad_replicate(const Tensor& x, std::size_t p) {
  require(x.rank() == 3, "pad_replicate: expects C x H x W, got " + shape_str(x.shape()));
  if (p == 0) return reshape(x, x.shape());
  const std::size_t C = x.extent(0), H = x.extent(1), W = x.extent(2);
  const std::size_t Ho = H + 2 * p, Wo = W + 2 * p;
  std::vector<double> out(C * Ho * Wo);
  const auto& dx = x.data();
  auto clamp_idx = [](long v, std::size_t n) {
    return static_cast<std::size_t>(std::min<long>(std::max<long>(v, 0), static_cast<long>(n) - 1));
  };
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < Ho; ++y)
      for (std::size_t xw = 0; xw < Wo; ++xw) {
        const std::size_t sy = clamp_idx(static_cast<long>(y) - static_cast<long>(p), H);
        const std::size_t sx = clamp_idx(static_cast<long>(xw) - static_cast<long>(p), W);
        out[(c * Ho + y) * Wo + xw] = dx[(c * H + sy) * W + sx];
      }
  return make_op_result({C, Ho, Wo}, std::move(out), {x},
                        [C, H, W, Ho, Wo, p, clamp_idx](const std::vector<double>& g,
                                                        const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t c = 0; c < C; ++c)
                            for (std::size_t y = 0; y < Ho; ++y)
                              for (std::size_t xw = 0; xw < Wo; ++xw) {
                                const std::size_t sy =
                                    clamp_idx(static_cast<long>(y) - static_cast<long>(p), H);
                                const std::size_t sx =
                                    clamp_idx(static_cast<long>(xw) - static_cast<long>(p), W);
                                (*pg[0])[(c * H + sy) * W + sx] += g[(c * Ho + y) * Wo + xw];
                              }
                        });
}

Tensor upsample_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require(x.rank() == 3, "upsample_bilinear: expects C x H x W, got " + shape_str(x.shape()));
  const std::size_t C = x.extent(0), H = x.extent(1), W = x.extent(2);
  require(out_h >= H && out_w >= W, "upsample_bilinear: target " + std::to_string(out_h) + "x" +
                                        std::to_string(out_w) + " smaller than input " +
                                        shape_str(x.shape()));

  // align_corners=false sampling: src = (dst + 0.5) * (in/out) - 0.5
  struct Tap {
    std::size_t i0, i1;
    double w1;  // weight of i1; i0 gets 1 - w1
  };
  auto make_taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> taps(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t d = 0; d < out; ++d) {
      double s = (static_cast<double>(d) + 0.5) * scale - 0.5;
      if (s < 0.0) s = 0.0;
      const double f = std::floor(s);
      std::size_t i0 = static_cast<std::size_t>(f);
      if (i0 > in - 1) i0 = in - 1;
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      taps[d] = {i0, i1, s - f};
    }
    return taps;
  };
  const auto ty = make_taps(H, out_h);
  const auto tx = make_taps(W, out_w);

  std::vector<double> out(C * out_h * out_w);
  const auto& dx = x.data();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t xw = 0; xw < out_w; ++xw) {
        const Tap& a = ty[y];
        const Tap& b = tx[xw];
        const double v00 = dx[(c * H + a.i0) * W + b.i0];
        const double v01 = dx[(c * H + a.i0) * W + b.i1];
        const double v10 = dx[(c * H + a.i1) * W + b.i0];
        const double v11 = dx[(c * H + a.i1) * W + b.i1];
        out[(c * out_h + y) * out_w + xw] = (1.0 - a.w1) * ((1.0 - b.w1) * v00 + b.w1 * v01) +
                                            a.w1 * ((1.0 - b.w1) * v10 + b.w1 * v11);
      }
  return make_op_result({C, out_h, out_w}, std::move(out), {x},
                        [C, H, W, out_h, out_w, ty, tx](const std::vector<double>& g,
                                                        const std::vector<std::vector<double>*>& pg) {
                          for (std::size_t c = 0; c < C; ++c)
                            for (std::size_t y = 0; y < out_h; ++y)
                              for (std::size_t xw = 0; xw < out_w; ++xw) {
                                const Tap& a = ty[y];
                                const Tap& b = tx[xw];
                                const double gv = g[(c * out_h + y) * out_w + xw];
                                (*pg[0])[(c * H + a.i0) * W + b.i0] += gv * (1.0 - a.w1) * (1.0 - b.w1);
                                (*pg[0])[(c * H + a.i0) * W + b.i1] += gv * (1.0 - a.w1) * b.w1;
                                (*pg[0])[(c * H + a.i1) * W + b.i0] += gv * a.w1 * (1.0 - b.w1);
                                (*pg[0])[(c * H + a.i1) * W + b.i1] += gv * a.w1 * b.w1;
                              }
                        });
}

}  // namespace tbf
