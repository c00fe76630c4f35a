#include "conther/ndnum/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "conther/error.hpp"

namespace conther::nd {

namespace {

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

using BackwardFn = std::function<void(Node&)>;

Tensor make_op(const char* op, Shape shape, std::vector<double> value,
               std::initializer_list<const Tensor*> inputs, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool track = false;
  if (grad_enabled()) {
    for (const Tensor* t : inputs) track = track || t->requires_grad();
  }
  if (track) {
    node->requires_grad = true;
    node->leaf = false;
    for (const Tensor* t : inputs) node->parents.push_back(t->node());
    node->backward_fn = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tensor make_op_n(const char* op, Shape shape, std::vector<double> value,
                 std::span<const Tensor> inputs, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool track = false;
  if (grad_enabled()) {
    for (const auto& t : inputs) track = track || t.requires_grad();
  }
  if (track) {
    node->requires_grad = true;
    node->leaf = false;
    for (const auto& t : inputs) node->parents.push_back(t.node());
    node->backward_fn = std::move(backward);
  }
  return Tensor(std::move(node));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.ndim() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_string(x.shape()));
  }
}

template <class F, class DF>
Tensor unary(const char* op, const Tensor& x, F f, DF df) {
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_op(op, x.shape(), std::move(out), {&x}, [df](Node& o) {
    Node& p = *o.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * df(p.value[i], o.value[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  return make_op("matmul", {m, n}, std::move(out), {&a, &b}, [m, k, n](Node& o) {
    Node& pa = *o.parents[0];
    Node& pb = *o.parents[1];
    ConstMap dc(o.grad.data(), m, n);
    if (pa.requires_grad) {
      MutMap(pa.ensure_grad().data(), m, k).noalias() += dc * ConstMap(pb.value.data(), k, n).transpose();
    }
    if (pb.requires_grad) {
      MutMap(pb.ensure_grad().data(), k, n).noalias() += ConstMap(pa.value.data(), m, k).transpose() * dc;
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  require_rank("bmm", a, 3);
  require_rank("bmm", b, 3);
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  const std::size_t bk = transpose_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != batch || bk != k) {
    throw DimensionError("bmm: incompatible shapes " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + (transpose_b ? " (b transposed)" : ""));
  }
  const std::size_t b_rows = transpose_b ? n : k;
  const std::size_t b_cols = transpose_b ? k : n;
  std::vector<double> out(batch * m * n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (std::size_t i = 0; i < batch; ++i) {
    ConstMap am(ad + i * m * k, m, k);
    ConstMap bm(bd + i * k * n, b_rows, b_cols);
    MutMap cm(out.data() + i * m * n, m, n);
    if (transpose_b) {
      cm.noalias() = am * bm.transpose();
    } else {
      cm.noalias() = am * bm;
    }
  }
  return make_op("bmm", {batch, m, n}, std::move(out), {&a, &b},
                 [=](Node& o) {
                   Node& pa = *o.parents[0];
                   Node& pb = *o.parents[1];
                   double* ga = pa.requires_grad ? pa.ensure_grad().data() : nullptr;
                   double* gb = pb.requires_grad ? pb.ensure_grad().data() : nullptr;
                   for (std::size_t i = 0; i < batch; ++i) {
                     ConstMap dc(o.grad.data() + i * m * n, m, n);
                     ConstMap am(pa.value.data() + i * m * k, m, k);
                     ConstMap bm(pb.value.data() + i * k * n, b_rows, b_cols);
                     if (ga) {
                       MutMap dam(ga + i * m * k, m, k);
                       if (transpose_b) {
                         dam.noalias() += dc * bm;
                       } else {
                         dam.noalias() += dc * bm.transpose();
                       }
                     }
                     if (gb) {
                       MutMap dbm(gb + i * k * n, b_rows, b_cols);
                       if (transpose_b) {
                         dbm.noalias() += dc.transpose() * am;
                       } else {
                         dbm.noalias() += am.transpose() * dc;
                       }
                     }
                   }
                 });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_op("add", a.shape(), std::move(out), {&a, &b}, [](Node& o) {
    for (auto& p : o.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_op("sub", a.shape(), std::move(out), {&a, &b}, [](Node& o) {
    if (o.parents[0]->requires_grad) {
      auto& g = o.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (o.parents[1]->requires_grad) {
      auto& g = o.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_op("mul", a.shape(), std::move(out), {&a, &b}, [](Node& o) {
    Node& pa = *o.parents[0];
    Node& pb = *o.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      "add_scalar", x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  require_rank("add_row", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (row.size() != n) {
    throw DimensionError("add_row: row " + shape_string(row.shape()) + " does not match columns of " +
                         shape_string(x.shape()));
  }
  auto xv = x.data();
  auto rv = row.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + rv[j];
  }
  return make_op("add_row", x.shape(), std::move(out), {&x, &row}, [m, n](Node& o) {
    if (o.parents[0]->requires_grad) {
      auto& g = o.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (o.parents[1]->requires_grad) {
      auto& g = o.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[i * n + j];
      }
    }
  });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  require_same_shape("minimum", a, b);
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(x[i], y[i]);
  return make_op("minimum", a.shape(), std::move(out), {&a, &b}, [](Node& o) {
    Node& pa = *o.parents[0];
    Node& pb = *o.parents[1];
    double* ga = pa.requires_grad ? pa.ensure_grad().data() : nullptr;
    double* gb = pb.requires_grad ? pb.ensure_grad().data() : nullptr;
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      if (pa.value[i] <= pb.value[i]) {
        if (ga) ga[i] += o.grad[i];
      } else if (gb) {
        gb[i] += o.grad[i];
      }
    }
  });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& x) {
  return unary(
      "softplus", x,
      [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](double v, double) {
        // sigmoid(v)
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto& s = x.shape();
  if (axis >= s.size()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for shape " + shape_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t base = o * len * inner + j;
      double mx = in[base];
      for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, in[base + i * inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        const double e = std::exp(in[base + i * inner] - mx);
        out[base + i * inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < len; ++i) out[base + i * inner] /= total;
    }
  }
  return make_op("softmax", s, std::move(out), {&x}, [outer, inner, len](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t a = 0; a < outer; ++a) {
      for (std::size_t j = 0; j < inner; ++j) {
        const std::size_t base = a * len * inner + j;
        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i) dot += o.value[base + i * inner] * o.grad[base + i * inner];
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t idx = base + i * inner;
          g[idx] += o.value[idx] * (o.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  if (x.ndim() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t n = x.shape().back();
  if (gain.size() != n || bias.size() != n) {
    throw DimensionError("layer_norm: gain " + shape_string(gain.shape()) + " / bias " +
                         shape_string(bias.shape()) + " do not match last axis of " +
                         shape_string(x.shape()));
  }
  const std::size_t rows = x.size() / n;
  auto in = x.data();
  auto gv = gain.data();
  auto bv = bias.data();
  std::vector<double> normed(in.size());
  std::vector<double> inv_std(rows);
  std::vector<double> out(in.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = (row[j] - mu) * inv;
      normed[r * n + j] = xh;
      out[r * n + j] = xh * gv[j] + bv[j];
    }
  }
  return make_op("layer_norm", x.shape(), std::move(out), {&x, &gain, &bias},
                 [rows, n, normed = std::move(normed), inv_std = std::move(inv_std)](Node& o) {
                   Node& px = *o.parents[0];
                   Node& pg = *o.parents[1];
                   Node& pb = *o.parents[2];
                   if (pg.requires_grad) {
                     auto& g = pg.ensure_grad();
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[r * n + j] * normed[r * n + j];
                   }
                   if (pb.requires_grad) {
                     auto& g = pb.ensure_grad();
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[r * n + j];
                   }
                   if (px.requires_grad) {
                     auto& g = px.ensure_grad();
                     const double dn = static_cast<double>(n);
                     for (std::size_t r = 0; r < rows; ++r) {
                       double sum_d = 0.0, sum_dx = 0.0;
                       for (std::size_t j = 0; j < n; ++j) {
                         const double d = o.grad[r * n + j] * pg.value[j];
                         sum_d += d;
                         sum_dx += d * normed[r * n + j];
                       }
                       for (std::size_t j = 0; j < n; ++j) {
                         const double d = o.grad[r * n + j] * pg.value[j];
                         g[r * n + j] += inv_std[r] / dn * (dn * d - sum_d - normed[r * n + j] * sum_dx);
                       }
                     }
                   }
                 });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_op("reshape", std::move(shape), std::move(out), {&x}, [](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor swap_axes_12(const Tensor& x) {
  require_rank("swap_axes_12", x, 4);
  const std::size_t a = x.dim(0), b = x.dim(1), c = x.dim(2), d = x.dim(3);
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j)
      for (std::size_t k = 0; k < c; ++k)
        std::copy_n(in.data() + ((i * b + j) * c + k) * d, d, out.data() + ((i * c + k) * b + j) * d);
  return make_op("swap_axes_12", {a, c, b, d}, std::move(out), {&x}, [=](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < a; ++i)
      for (std::size_t j = 0; j < b; ++j)
        for (std::size_t k = 0; k < c; ++k) {
          const double* src = o.grad.data() + ((i * c + k) * b + j) * d;
          double* dst = g.data() + ((i * b + j) * c + k) * d;
          for (std::size_t l = 0; l < d; ++l) dst[l] += src[l];
        }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t m = parts[0].dim(0);
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    require_rank("concat_cols", p, 2);
    if (p.dim(0) != m) {
      throw DimensionError("concat_cols: row counts differ, " + shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    }
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].data();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(v.data() + i * widths[k], widths[k], out.data() + i * total + offset);
    offset += widths[k];
  }
  return make_op_n("concat_cols", {m, total}, std::move(out), parts, [m, total, widths](Node& o) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < o.parents.size(); ++k) {
      Node& p = *o.parents[k];
      if (p.requires_grad) {
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += o.grad[i * total + off + j];
      }
      off += widths[k];
    }
  });
}

Tensor gather_rows(const Tensor& x, std::vector<std::size_t> rows) {
  require_rank("gather_rows", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (rows.empty()) throw ContractError("gather_rows: empty index list");
  auto in = x.data();
  std::vector<double> out(rows.size() * n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m) {
      throw DimensionError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                           shape_string(x.shape()));
    }
    std::copy_n(in.data() + rows[i] * n, n, out.data() + i * n);
  }
  const std::size_t count = rows.size();
  return make_op("gather_rows", {count, n}, std::move(out), {&x}, [n, rows = std::move(rows)](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) g[rows[i] * n + j] += o.grad[i * n + j];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_op("sum", {1}, {total}, {&x}, [](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (auto& v : g) v += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

}  // namespace conther::nd
