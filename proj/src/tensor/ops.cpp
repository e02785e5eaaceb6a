#include "mmtf/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mmtf/errors.hpp"

namespace mmtf::ops {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

ConstMatrixMap as_matrix(const std::vector<double>& v, std::size_t rows,
                         std::size_t cols) {
  return ConstMatrixMap(v.data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

MatrixMap as_matrix(std::vector<double>& v, std::size_t rows,
                    std::size_t cols) {
  return MatrixMap(v.data(), static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(cols));
}

detail::TensorImpl& input(detail::TensorImpl& out, std::size_t i) {
  return *out.creator->inputs[i];
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + " tensor, got " +
                         shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

bool is_scalar(const Tensor& t) { return t.numel() == 1 && t.rank() == 0; }

// Splits `shape` around `axis` into (outer, axis length, inner) extents.
struct AxisLayout {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisLayout axis_layout(const Shape& shape, std::size_t axis) {
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  l.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

void require_axis(const Tensor& t, std::size_t axis, const char* op) {
  if (axis >= t.rank()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " invalid for shape " + shape_to_string(t.shape()));
  }
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& a, Forward f, Derivative df) {
  const auto src = a.data();
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = f(src[i]);
  return Tensor::make_result(a.shape(), std::move(out), {a},
                             [df](detail::TensorImpl& node) {
                               auto& x = input(node, 0);
                               if (!x.requires_grad) return;
                               for (std::size_t i = 0; i < x.data.size(); ++i) {
                                 x.grad[i] += node.grad[i] *
                                              df(x.data[i], node.data[i]);
                               }
                             });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree for " +
                         shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  as_matrix(out, m, n).noalias() =
      as_matrix(a.impl()->data, m, k) * as_matrix(b.impl()->data, k, n);
  return Tensor::make_result(
      {m, n}, std::move(out), {a, b}, [m, k, n](detail::TensorImpl& node) {
        auto& lhs = input(node, 0);
        auto& rhs = input(node, 1);
        const auto g = as_matrix(std::as_const(node.grad), m, n);
        if (lhs.requires_grad) {
          as_matrix(lhs.grad, m, k).noalias() +=
              g * as_matrix(std::as_const(rhs.data), k, n).transpose();
        }
        if (rhs.requires_grad) {
          as_matrix(rhs.grad, k, n).noalias() +=
              as_matrix(std::as_const(lhs.data), m, k).transpose() * g;
        }
      });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto src = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = src[i * n + j];
  }
  return Tensor::make_result({n, m}, std::move(out), {a},
                             [m, n](detail::TensorImpl& node) {
                               auto& x = input(node, 0);
                               if (!x.requires_grad) return;
                               for (std::size_t i = 0; i < m; ++i) {
                                 for (std::size_t j = 0; j < n; ++j) {
                                   x.grad[i * n + j] += node.grad[j * m + i];
                                 }
                               }
                             });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (is_scalar(b) && !is_scalar(a)) return add(b, a);
  if (is_scalar(a) && !is_scalar(b)) {
    const double s = a.item();
    const auto src = b.data();
    std::vector<double> out(src.begin(), src.end());
    for (auto& v : out) v += s;
    return Tensor::make_result(b.shape(), std::move(out), {a, b},
                               [](detail::TensorImpl& node) {
                                 auto& s_in = input(node, 0);
                                 auto& x = input(node, 1);
                                 double total = 0.0;
                                 for (std::size_t i = 0; i < node.grad.size(); ++i) {
                                   if (x.requires_grad) x.grad[i] += node.grad[i];
                                   total += node.grad[i];
                                 }
                                 if (s_in.requires_grad) s_in.grad[0] += total;
                               });
  }
  require_same_shape(a, b, "add");
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b},
                             [](detail::TensorImpl& node) {
                               for (std::size_t k = 0; k < 2; ++k) {
                                 auto& in = input(node, k);
                                 if (!in.requires_grad) continue;
                                 for (std::size_t i = 0; i < node.grad.size(); ++i) {
                                   in.grad[i] += node.grad[i];
                                 }
                               }
                             });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (is_scalar(b) && !is_scalar(a)) return add_scalar(a, -b.item());
  return add(a, scale(b, -1.0));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (is_scalar(b) && !is_scalar(a)) return mul(b, a);
  if (is_scalar(a) && !is_scalar(b)) {
    const double s = a.item();
    const auto src = b.data();
    std::vector<double> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = s * src[i];
    return Tensor::make_result(b.shape(), std::move(out), {a, b},
                               [](detail::TensorImpl& node) {
                                 auto& s_in = input(node, 0);
                                 auto& x = input(node, 1);
                                 double total = 0.0;
                                 for (std::size_t i = 0; i < node.grad.size(); ++i) {
                                   if (x.requires_grad) {
                                     x.grad[i] += node.grad[i] * s_in.data[0];
                                   }
                                   total += node.grad[i] * x.data[i];
                                 }
                                 if (s_in.requires_grad) s_in.grad[0] += total;
                               });
  }
  require_same_shape(a, b, "mul");
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b},
                             [](detail::TensorImpl& node) {
                               auto& l = input(node, 0);
                               auto& r = input(node, 1);
                               for (std::size_t i = 0; i < node.grad.size(); ++i) {
                                 if (l.requires_grad) l.grad[i] += node.grad[i] * r.data[i];
                                 if (r.requires_grad) r.grad[i] += node.grad[i] * l.data[i];
                               }
                             });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, [value](double x) { return x + value; },
      [](double, double) { return 1.0; });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  require_rank(x, 2, "add_row");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (row.numel() != n || row.rank() != 1) {
    throw DimensionError("add_row: row " + shape_to_string(row.shape()) +
                         " does not match columns of " +
                         shape_to_string(x.shape()));
  }
  const auto src = x.data(), r = row.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = src[i * n + j] + r[j];
  }
  return Tensor::make_result(
      {m, n}, std::move(out), {x, row}, [m, n](detail::TensorImpl& node) {
        auto& xin = input(node, 0);
        auto& rin = input(node, 1);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double g = node.grad[i * n + j];
            if (xin.requires_grad) xin.grad[i * n + j] += g;
            if (rin.requires_grad) rin.grad[j] += g;
          }
        }
      });
}

Tensor gelu(const Tensor& a) {
  constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double k = 0.044715;
  return unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(c * (x + k * x * x * x))); },
      [](double x, double) {
        const double t = std::tanh(c * (x + k * x * x * x));
        return 0.5 * (1.0 + t) +
               0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * k * x * x);
      });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor softmax(const Tensor& t, std::size_t axis) {
  require_axis(t, axis, "softmax");
  const auto l = axis_layout(t.shape(), axis);
  const auto src = t.data();
  std::vector<double> out(src.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.extent * l.inner + in;
      double mx = src[base];
      for (std::size_t e = 1; e < l.extent; ++e) {
        mx = std::max(mx, src[base + e * l.inner]);
      }
      double total = 0.0;
      for (std::size_t e = 0; e < l.extent; ++e) {
        const double v = std::exp(src[base + e * l.inner] - mx);
        out[base + e * l.inner] = v;
        total += v;
      }
      for (std::size_t e = 0; e < l.extent; ++e) out[base + e * l.inner] /= total;
    }
  }
  return Tensor::make_result(
      t.shape(), std::move(out), {t}, [l](detail::TensorImpl& node) {
        auto& x = input(node, 0);
        if (!x.requires_grad) return;
        for (std::size_t o = 0; o < l.outer; ++o) {
          for (std::size_t in = 0; in < l.inner; ++in) {
            const std::size_t base = o * l.extent * l.inner + in;
            double dot = 0.0;
            for (std::size_t e = 0; e < l.extent; ++e) {
              const std::size_t idx = base + e * l.inner;
              dot += node.grad[idx] * node.data[idx];
            }
            for (std::size_t e = 0; e < l.extent; ++e) {
              const std::size_t idx = base + e * l.inner;
              x.grad[idx] += node.data[idx] * (node.grad[idx] - dot);
            }
          }
        }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  if (x.rank() != 1 && x.rank() != 2) {
    throw DimensionError("layer_norm: expected [d] or [rows x d], got " +
                         shape_to_string(x.shape()));
  }
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: width " + std::to_string(d) +
                         " vs gain " + shape_to_string(gain.shape()) +
                         " and bias " + shape_to_string(bias.shape()));
  }
  const auto src = x.data(), g = gain.data(), b = bias.data();
  std::vector<double> out(src.size());
  std::vector<double> normalized(src.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = src.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double xhat = (row[j] - mu) * inv_std[r];
      normalized[r * d + j] = xhat;
      out[r * d + j] = g[j] * xhat + b[j];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [rows, d, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](detail::TensorImpl& node) {
        auto& xin = input(node, 0);
        auto& gin = input(node, 1);
        auto& bin = input(node, 2);
        std::vector<double> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gy = node.grad.data() + r * d;
          const double* xh = normalized.data() + r * d;
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            if (gin.requires_grad) gin.grad[j] += gy[j] * xh[j];
            if (bin.requires_grad) bin.grad[j] += gy[j];
            dxhat[j] = gy[j] * gin.data[j];
            sum_dxhat += dxhat[j];
            sum_dxhat_xhat += dxhat[j] * xh[j];
          }
          if (!xin.requires_grad) continue;
          const double scale_r = inv_std[r] / static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            xin.grad[r * d + j] +=
                scale_r * (static_cast<double>(d) * dxhat[j] - sum_dxhat -
                           xh[j] * sum_dxhat_xhat);
          }
        }
      });
}

Tensor concat(const std::vector<Tensor>& tensors, std::size_t axis) {
  if (tensors.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = tensors.front().shape();
  require_axis(tensors.front(), axis, "concat");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& t : tensors) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw DimensionError("concat: incompatible shapes " +
                           shape_to_string(first) + " and " +
                           shape_to_string(s) + " along axis " +
                           std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  const auto layout = axis_layout(out_shape, axis);
  std::vector<std::size_t> extents;
  for (const auto& t : tensors) extents.push_back(t.dim(axis));
  std::vector<double> out(shape_numel(out_shape));
  const std::size_t out_stride = layout.extent * layout.inner;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const auto src = tensors[k].data();
    const std::size_t chunk = extents[k] * layout.inner;
    for (std::size_t o = 0; o < layout.outer; ++o) {
      std::copy_n(src.data() + o * chunk, chunk,
                  out.data() + o * out_stride + offset);
    }
    offset += chunk;
  }
  return Tensor::make_result(
      out_shape, std::move(out), tensors,
      [layout, extents](detail::TensorImpl& node) {
        const std::size_t out_stride = layout.extent * layout.inner;
        std::size_t offset = 0;
        for (std::size_t k = 0; k < extents.size(); ++k) {
          auto& in = input(node, k);
          const std::size_t chunk = extents[k] * layout.inner;
          if (in.requires_grad) {
            for (std::size_t o = 0; o < layout.outer; ++o) {
              const double* g = node.grad.data() + o * out_stride + offset;
              double* dst = in.grad.data() + o * chunk;
              for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[i];
            }
          }
          offset += chunk;
        }
      });
}

Tensor slice(const Tensor& t, std::size_t axis, std::size_t begin,
             std::size_t count) {
  require_axis(t, axis, "slice");
  if (count == 0 || begin + count > t.dim(axis)) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside axis " +
                         std::to_string(axis) + " of " +
                         shape_to_string(t.shape()));
  }
  const auto l = axis_layout(t.shape(), axis);
  Shape out_shape = t.shape();
  out_shape[axis] = count;
  const std::size_t in_stride = l.extent * l.inner;
  const std::size_t chunk = count * l.inner;
  const std::size_t offset = begin * l.inner;
  const auto src = t.data();
  std::vector<double> out(l.outer * chunk);
  for (std::size_t o = 0; o < l.outer; ++o) {
    std::copy_n(src.data() + o * in_stride + offset, chunk,
                out.data() + o * chunk);
  }
  return Tensor::make_result(
      std::move(out_shape), std::move(out), {t},
      [l, in_stride, chunk, offset](detail::TensorImpl& node) {
        auto& x = input(node, 0);
        if (!x.requires_grad) return;
        for (std::size_t o = 0; o < l.outer; ++o) {
          double* dst = x.grad.data() + o * in_stride + offset;
          const double* g = node.grad.data() + o * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[i];
        }
      });
}

std::vector<Tensor> split(const Tensor& t, const std::vector<std::size_t>& sizes,
                          std::size_t axis) {
  require_axis(t, axis, "split");
  std::size_t total = 0;
  for (auto s : sizes) total += s;
  if (total != t.dim(axis)) {
    throw DimensionError("split: sizes sum to " + std::to_string(total) +
                         " but axis " + std::to_string(axis) + " of " +
                         shape_to_string(t.shape()) + " has " +
                         std::to_string(t.dim(axis)));
  }
  std::vector<Tensor> parts;
  std::size_t begin = 0;
  for (auto s : sizes) {
    parts.push_back(slice(t, axis, begin, s));
    begin += s;
  }
  return parts;
}

Tensor reshape(const Tensor& t, Shape shape) {
  if (shape_numel(shape) != t.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(t.shape()) +
                         " as " + shape_to_string(shape));
  }
  const auto src = t.data();
  return Tensor::make_result(std::move(shape),
                             std::vector<double>(src.begin(), src.end()), {t},
                             [](detail::TensorImpl& node) {
                               auto& x = input(node, 0);
                               if (!x.requires_grad) return;
                               for (std::size_t i = 0; i < node.grad.size(); ++i) {
                                 x.grad[i] += node.grad[i];
                               }
                             });
}

Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& rows) {
  require_rank(table, 2, "gather_rows");
  if (rows.empty()) throw DimensionError("gather_rows: empty index list");
  const std::size_t n = table.dim(0), d = table.dim(1);
  for (auto r : rows) {
    if (r >= n) {
      throw LabelError("index " + std::to_string(r) +
                       " out of range for table with " + std::to_string(n) +
                       " rows");
    }
  }
  const auto src = table.data();
  std::vector<double> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(src.data() + rows[i] * d, d, out.data() + i * d);
  }
  return Tensor::make_result({rows.size(), d}, std::move(out), {table},
                             [rows, d](detail::TensorImpl& node) {
                               auto& tab = input(node, 0);
                               if (!tab.requires_grad) return;
                               for (std::size_t i = 0; i < rows.size(); ++i) {
                                 double* dst = tab.grad.data() + rows[i] * d;
                                 const double* g = node.grad.data() + i * d;
                                 for (std::size_t j = 0; j < d; ++j) dst[j] += g[j];
                               }
                             });
}

Tensor sum(const Tensor& t) {
  double total = 0.0;
  for (double v : t.data()) total += v;
  return Tensor::make_result({}, {total}, {t}, [](detail::TensorImpl& node) {
    auto& x = input(node, 0);
    if (!x.requires_grad) return;
    for (auto& g : x.grad) g += node.grad[0];
  });
}

Tensor mean(const Tensor& t) {
  return scale(sum(t), 1.0 / static_cast<double>(t.numel()));
}

Tensor cross_entropy(const Tensor& logits,
                     const std::vector<std::size_t>& targets) {
  if (logits.rank() != 1 && logits.rank() != 2) {
    throw DimensionError("cross_entropy: expected [K] or [batch x K], got " +
                         shape_to_string(logits.shape()));
  }
  const std::size_t k = logits.shape().back();
  const std::size_t batch = logits.numel() / k;
  if (targets.size() != batch) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for batch of " + std::to_string(batch));
  }
  for (auto t : targets) {
    if (t >= k) {
      throw LabelError("target index " + std::to_string(t) +
                       " outside [0, " + std::to_string(k) + ")");
    }
  }
  const auto src = logits.data();
  std::vector<double> probs(src.size());
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = src.data() + b * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      probs[b * k + j] = std::exp(row[j] - mx);
      z += probs[b * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) probs[b * k + j] /= z;
    total += (mx + std::log(z)) - row[targets[b]];
  }
  total /= static_cast<double>(batch);
  return Tensor::make_result(
      {}, {total}, {logits},
      [targets, probs = std::move(probs), batch, k](detail::TensorImpl& node) {
        auto& x = input(node, 0);
        if (!x.requires_grad) return;
        const double g = node.grad[0] / static_cast<double>(batch);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t j = 0; j < k; ++j) {
            const double onehot = j == targets[b] ? 1.0 : 0.0;
            x.grad[b * k + j] += g * (probs[b * k + j] - onehot);
          }
        }
      });
}

}  // namespace mmtf::ops
