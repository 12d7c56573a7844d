#include "merc/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "merc/error.hpp"

namespace merc {

const Tensor& Var::value() const { return tape_->value(id_); }
Tensor Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

namespace {

void check_finite(std::string_view op, const Tensor& t) {
  if (!t.all_finite()) {
    throw NumericError("non-finite value produced by '" + std::string(op) + "' " + t.shape_str());
  }
}

Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw Error("operands recorded on different tapes");
  return *a.tape();
}

enum class Broadcast { kNone, kRow, kCol, kScalar };

Broadcast broadcast_kind(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return Broadcast::kNone;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::kCol;
  throw ShapeError(std::string(op) + " shape mismatch: " + a.shape_str() + " vs " +
                   b.shape_str());
}

inline double bval(const Tensor& b, Broadcast k, std::size_t i, std::size_t j) {
  switch (k) {
    case Broadcast::kNone: return b(i, j);
    case Broadcast::kRow: return b(0, j);
    case Broadcast::kCol: return b(i, 0);
    case Broadcast::kScalar: return b(0, 0);
  }
  return 0.0;
}

// Sums a full-shape gradient down to the broadcast operand's shape.
Tensor reduce_to(const Tensor& g, Broadcast k, std::size_t rows, std::size_t cols) {
  if (k == Broadcast::kNone) return g;
  Tensor out(rows, cols);
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) {
      const double v = g(i, j);
      switch (k) {
        case Broadcast::kRow: out(0, j) += v; break;
        case Broadcast::kCol: out(i, 0) += v; break;
        case Broadcast::kScalar: out(0, 0) += v; break;
        case Broadcast::kNone: break;
      }
    }
  return out;
}

template <typename F, typename D>
Var unary(std::string_view op, const Var& a, F f, D dfdx) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return a.tape()->record(op, std::move(y), {ia}, [ia, dfdx](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(ia);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(xv[i]);
  });
}

}  // namespace

Var Tape::leaf(Tensor value) {
  check_finite("leaf", value);
  nodes_.push_back(Node{std::move(value), {}, {}, {}, true, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  check_finite("constant", value);
  nodes_.push_back(Node{std::move(value), {}, {}, {}, false, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::vector<std::size_t> parents,
                 Backward backward) {
  check_finite(op, value);
  const bool rg = std::any_of(parents.begin(), parents.end(),
                              [&](std::size_t p) { return nodes_[p].requires_grad; });
  Node n;
  n.value = std::move(value);
  n.requires_grad = rg;
  if (rg) {
    n.parents = std::move(parents);
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Tensor Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.has_grad) return n.grad;
  return Tensor(n.value.rows(), n.value.cols());
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  if (!nodes_[id].requires_grad) return;
  kernels::axpy(1.0, g, grad_buffer(id));
}

void Tape::backward(const Var& root) {
  if (root.tape() != this) throw Error("backward root belongs to another tape");
  const Tensor& rv = nodes_[root.id()].value;
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw ShapeError("backward requires a scalar root, got " + rv.shape_str());
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  grad_buffer(root.id())[0] = 1.0;
  for (std::size_t k = root.id() + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.has_grad || !n.requires_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast k = broadcast_kind("add", x, y);
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) + bval(y, k, i, j);
  const std::size_t ia = a.id(), ib = b.id();
  const std::size_t br = y.rows(), bc = y.cols();
  return t.record("add", std::move(out), {ia, ib}, [=](Tape& tp, const Tensor& g) {
    tp.accumulate(ia, g);
    if (tp.requires_grad(ib)) tp.accumulate(ib, reduce_to(g, k, br, bc));
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast k = broadcast_kind("sub", x, y);
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) - bval(y, k, i, j);
  const std::size_t ia = a.id(), ib = b.id();
  const std::size_t br = y.rows(), bc = y.cols();
  return t.record("sub", std::move(out), {ia, ib}, [=](Tape& tp, const Tensor& g) {
    tp.accumulate(ia, g);
    if (tp.requires_grad(ib)) {
      Tensor r = reduce_to(g, k, br, bc);
      kernels::axpy(-1.0, r, tp.grad_buffer(ib));
    }
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast k = broadcast_kind("mul", x, y);
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) * bval(y, k, i, j);
  const std::size_t ia = a.id(), ib = b.id();
  const std::size_t br = y.rows(), bc = y.cols();
  return t.record("mul", std::move(out), {ia, ib}, [=](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(ib);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j) * bval(yv, k, i, j);
    }
    if (tp.requires_grad(ib)) {
      Tensor gx(g.rows(), g.cols());
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * xv[i];
      tp.accumulate(ib, reduce_to(gx, k, br, bc));
    }
  });
}

Var scale(const Var& a, double s) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
  const std::size_t ia = a.id();
  return a.tape()->record("scale", std::move(out), {ia}, [=](Tape& tp, const Tensor& g) {
    kernels::axpy(s, g, tp.grad_buffer(ia));
  });
}

Var add_scalar(const Var& a, double s) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + s;
  const std::size_t ia = a.id();
  return a.tape()->record("add_scalar", std::move(out), {ia},
                          [=](Tape& tp, const Tensor& g) { tp.accumulate(ia, g); });
}

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  Tensor out = kernels::matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("matmul", std::move(out), {ia, ib}, [=](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(ia)) tp.accumulate(ia, kernels::matmul_a_bt(g, tp.value(ib)));
    if (tp.requires_grad(ib)) tp.accumulate(ib, kernels::matmul_at_b(tp.value(ia), g));
  });
}

Var transpose(const Var& a) {
  const std::size_t ia = a.id();
  return a.tape()->record("transpose", kernels::transpose(a.value()), {ia},
                          [=](Tape& tp, const Tensor& g) {
                            tp.accumulate(ia, kernels::transpose(g));
                          });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of zero tensors");
  Tape* t = parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids, widths;
  for (const auto& p : parts) {
    if (p.tape() != t) throw Error("operands recorded on different tapes");
    if (p.rows() != rows) {
      throw ShapeError("concat_cols row mismatch: " + parts.front().value().shape_str() +
                       " vs " + p.value().shape_str());
    }
    ids.push_back(p.id());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(v.row_span(i).begin(), v.row_span(i).end(), out.row_span(i).begin() + off);
    off += v.cols();
  }
  return t->record("concat_cols", std::move(out), ids, [=](Tape& tp, const Tensor& g) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.requires_grad(ids[k])) {
        Tensor& gk = tp.grad_buffer(ids[k]);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) gk(i, j) += g(i, o + j);
      }
      o += widths[k];
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows of zero tensors");
  Tape* t = parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids, heights;
  for (const auto& p : parts) {
    if (p.tape() != t) throw Error("operands recorded on different tapes");
    if (p.cols() != cols) {
      throw ShapeError("concat_rows column mismatch: " + parts.front().value().shape_str() +
                       " vs " + p.value().shape_str());
    }
    ids.push_back(p.id());
    heights.push_back(p.rows());
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  return t->record("concat_rows", Tensor(rows, cols, std::move(data)), ids,
                   [=](Tape& tp, const Tensor& g) {
                     std::size_t off = 0;
                     for (std::size_t k = 0; k < ids.size(); ++k) {
                       const std::size_t n = heights[k] * cols;
                       if (tp.requires_grad(ids[k])) {
                         Tensor& gk = tp.grad_buffer(ids[k]);
                         for (std::size_t i = 0; i < n; ++i) gk[i] += g[off + i];
                       }
                       off += n;
                     }
                   });
}

Var slice_rows(const Var& a, std::size_t start, std::size_t count) {
  const Tensor& x = a.value();
  if (start + count > x.rows()) {
    throw ShapeError("slice_rows [" + std::to_string(start) + ", +" + std::to_string(count) +
                     ") out of range for " + x.shape_str());
  }
  const std::size_t cols = x.cols();
  std::vector<double> data(x.data().begin() + start * cols,
                           x.data().begin() + (start + count) * cols);
  const std::size_t ia = a.id();
  return a.tape()->record("slice_rows", Tensor(count, cols, std::move(data)), {ia},
                          [=](Tape& tp, const Tensor& g) {
                            Tensor& ga = tp.grad_buffer(ia);
                            for (std::size_t i = 0; i < g.size(); ++i) ga[start * cols + i] += g[i];
                          });
}

Var slice_cols(const Var& a, std::size_t start, std::size_t count) {
  const Tensor& x = a.value();
  if (start + count > x.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(start) + ", +" + std::to_string(count) +
                     ") out of range for " + x.shape_str());
  }
  Tensor out(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x(i, start + j);
  const std::size_t ia = a.id();
  return a.tape()->record("slice_cols", std::move(out), {ia}, [=](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < count; ++j) ga(i, start + j) += g(i, j);
  });
}

Var softmax_rows(const Var& a) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xr = x.row_span(i);
    auto yr = y.row_span(i);
    const double m = *std::max_element(xr.begin(), xr.end());
    double s = 0.0;
    for (std::size_t j = 0; j < xr.size(); ++j) s += (yr[j] = std::exp(xr[j] - m));
    for (double& v : yr) v /= s;
  }
  const std::size_t ia = a.id();
  const std::size_t self = a.tape()->size();
  return a.tape()->record("softmax_rows", std::move(y), {ia}, [=](Tape& tp, const Tensor& g) {
    const Tensor& yv = tp.value(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * yv(i, j);
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += yv(i, j) * (g(i, j) - dot);
    }
  });
}

Var log_softmax_rows(const Var& a) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xr = x.row_span(i);
    const double m = *std::max_element(xr.begin(), xr.end());
    double s = 0.0;
    for (double v : xr) s += std::exp(v - m);
    const double lse = m + std::log(s);
    for (std::size_t j = 0; j < xr.size(); ++j) y(i, j) = xr[j] - lse;
  }
  const std::size_t ia = a.id();
  const std::size_t self = a.tape()->size();
  return a.tape()->record("log_softmax_rows", std::move(y), {ia}, [=](Tape& tp, const Tensor& g) {
    const Tensor& yv = tp.value(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) gs += g(i, j);
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j) - std::exp(yv(i, j)) * gs;
    }
  });
}

Var tanh(const Var& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double x) {
                 const double t = std::tanh(x);
                 return 1.0 - t * t;
               });
}

Var relu(const Var& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& a) {
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  return unary("sigmoid", a, sig, [sig](double x) {
    const double s = sig(x);
    return s * (1.0 - s);
  });
}

Var exp(const Var& a) {
  return unary("exp", a, [](double x) { return std::exp(x); },
               [](double x) { return std::exp(x); });
}

Var log(const Var& a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw NumericError("log of non-positive value " + std::to_string(v));
  }
  return unary("log", a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var abs(const Var& a) {
  return unary("abs", a, [](double x) { return std::abs(x); },
               [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return a.tape()->record("sum", Tensor::scalar(s), {ia}, [=](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    const double gv = g[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv;
  });
}

Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var sq_norm(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v * v;
  const std::size_t ia = a.id();
  return a.tape()->record("sq_norm", Tensor::scalar(s), {ia}, [=](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(ia);
    kernels::axpy(2.0 * g[0], x, tp.grad_buffer(ia));
  });
}

Var gather(const Var& a, const std::vector<std::pair<std::size_t, std::size_t>>& index) {
  const Tensor& x = a.value();
  Tensor out(1, index.size());
  for (std::size_t k = 0; k < index.size(); ++k) {
    const auto [r, c] = index[k];
    if (r >= x.rows() || c >= x.cols()) {
      throw ShapeError("gather index (" + std::to_string(r) + ", " + std::to_string(c) +
                       ") out of range for " + x.shape_str());
    }
    out[k] = x(r, c);
  }
  const std::size_t ia = a.id();
  return a.tape()->record("gather", std::move(out), {ia}, [=](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t k = 0; k < index.size(); ++k) ga(index[k].first, index[k].second) += g[k];
  });
}

Var row_sum(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (double v : x.row_span(i)) out(i, 0) += v;
  const std::size_t ia = a.id();
  return a.tape()->record("row_sum", std::move(out), {ia}, [=](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, 0);
  });
}

Var normalize_rows(const Var& a, double eps) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  std::vector<double> denom(x.rows());
  std::vector<bool> clamped(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double n2 = 0.0;
    for (double v : x.row_span(i)) n2 += v * v;
    const double n = std::sqrt(n2);
    clamped[i] = !(n > eps);
    denom[i] = clamped[i] ? eps : n;
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) = x(i, j) / denom[i];
  }
  const std::size_t ia = a.id();
  const std::size_t self = a.tape()->size();
  return a.tape()->record("normalize_rows", std::move(y), {ia}, [=](Tape& tp, const Tensor& g) {
    const Tensor& yv = tp.value(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      if (clamped[i]) {
        for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j) / denom[i];
        continue;
      }
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) dot += yv(i, j) * g(i, j);
      for (std::size_t j = 0; j < g.cols(); ++j)
        ga(i, j) += (g(i, j) - yv(i, j) * dot) / denom[i];
    }
  });
}

Var layer_norm_rows(const Var& a, double eps) {
  const Tensor& x = a.value();
  const std::size_t c = x.cols();
  if (c == 0) throw ShapeError("layer_norm_rows on zero-width tensor");
  Tensor y(x.rows(), c);
  std::vector<double> inv_std(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mu = 0.0;
    for (double v : x.row_span(i)) mu += v;
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (double v : x.row_span(i)) var += (v - mu) * (v - mu);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) y(i, j) = (x(i, j) - mu) * inv_std[i];
  }
  const std::size_t ia = a.id();
  const std::size_t self = a.tape()->size();
  return a.tape()->record("layer_norm_rows", std::move(y), {ia}, [=](Tape& tp, const Tensor& g) {
    const Tensor& yv = tp.value(self);
    Tensor& ga = tp.grad_buffer(ia);
    const double inv_c = 1.0 / static_cast<double>(c);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double gm = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        gm += g(i, j);
        gy += g(i, j) * yv(i, j);
      }
      gm *= inv_c;
      gy *= inv_c;
      for (std::size_t j = 0; j < c; ++j)
        ga(i, j) += inv_std[i] * (g(i, j) - gm - yv(i, j) * gy);
    }
  });
}

Var cosine_sim(const Var& u, const Var& v, double eps) {
  if (u.rows() != 1 || v.rows() != 1 || u.cols() != v.cols()) {
    throw ShapeError("cosine_sim expects equal-length vectors, got " + u.value().shape_str() +
                     " and " + v.value().shape_str());
  }
  return sum(mul(normalize_rows(u, eps), normalize_rows(v, eps)));
}

}  // namespace merc
