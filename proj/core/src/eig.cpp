#include "merc/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "merc/error.hpp"

namespace merc {

namespace {

double off_diagonal_norm(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// Applies the rotation that annihilates a(p,q), updating a in place and
// accumulating it into the columns of v.
void rotate(Tensor& a, Tensor& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const std::size_t n = a.rows();

  for (std::size_t k = 0; k < n; ++k) {
    const double akp = a(k, p), akq = a(k, q);
    a(k, p) = c * akp - s * akq;
    a(k, q) = s * akp + c * akq;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double apk = a(p, k), aqk = a(q, k);
    a(p, k) = c * apk - s * aqk;
    a(q, k) = s * apk + c * aqk;
  }
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double vkp = v(k, p), vkq = v(k, q);
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

}  // namespace

EigenDecomposition symmetric_eig(const Tensor& input, const EigOptions& opts) {
  const std::size_t n = input.rows();
  if (input.cols() != n) throw ShapeError("symmetric_eig expects a square matrix, got " + input.shape_str());
  if (n > opts.size_cap) {
    throw Error("symmetric_eig: size " + std::to_string(n) + " exceeds cap " +
                std::to_string(opts.size_cap));
  }
  if (!input.all_finite()) throw NumericError("symmetric_eig: non-finite input");
  double frob = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(input(i, j) - input(j, i)) > opts.symmetry_tol) {
        throw Error("symmetric_eig: matrix is not symmetric at (" + std::to_string(i) + ", " +
                    std::to_string(j) + ")");
      }
      frob += input(i, j) * input(i, j);
    }
  frob = std::sqrt(frob);

  // Symmetrize exactly so rotations see a symmetric matrix.
  Tensor a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + input(j, i));
  Tensor v = Tensor::identity(n);

  const double threshold = opts.off_tol * std::max(1.0, frob);
  int sweep = 0;
  while (off_diagonal_norm(a) > threshold) {
    if (sweep++ >= opts.max_sweeps) {
      throw NumericError("symmetric_eig: no convergence after " + std::to_string(opts.max_sweeps) +
                         " sweeps");
    }
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) rotate(a, v, p, q);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  EigenDecomposition out{Tensor(n, n), std::vector<double>(n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

double reconstruction_residual(const EigenDecomposition& e, const Tensor& a) {
  const std::size_t n = a.rows();
  Tensor scaled = e.vectors;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) scaled(i, k) *= e.values[k];
  return kernels::max_abs_diff(kernels::matmul_a_bt(scaled, e.vectors), a);
}

double orthogonality_residual(const Tensor& u) {
  return kernels::max_abs_diff(kernels::matmul_at_b(u, u), Tensor::identity(u.cols()));
}

}  // namespace merc
