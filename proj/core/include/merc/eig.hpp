#pragma once

#include <cstddef>
#include <vector>

#include "merc/tensor.hpp"

namespace merc {

struct EigenDecomposition {
  Tensor vectors;              // columns are eigenvectors
  std::vector<double> values;  // ascending
};

struct EigOptions {
  std::size_t size_cap = 1500;
  double symmetry_tol = 1e-10;
  // Sweeps stop once the off-diagonal Frobenius norm is below
  // off_tol * max(1, ||A||_F).
  double off_tol = 1e-12;
  int max_sweeps = 100;
};

// Cyclic Jacobi eigensolver for dense symmetric matrices. Results are plain
// tensors and never participate in differentiation.
EigenDecomposition symmetric_eig(const Tensor& a, const EigOptions& opts = {});

// max |U diag(values) U^T - A|
double reconstruction_residual(const EigenDecomposition& e, const Tensor& a);
// max |U^T U - I|
double orthogonality_residual(const Tensor& u);

}  // namespace merc
