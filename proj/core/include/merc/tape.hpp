#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "merc/tensor.hpp"

namespace merc {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  // Zero-filled when the node was not reached by the last backward sweep.
  Tensor grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const { return value().item(); }
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode differentiation tape. Nodes are appended in evaluation order,
// so parents always precede children and a reverse sweep is a valid
// topological order. Single-threaded.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that receives a gradient.
  Var leaf(Tensor value);
  // Leaf excluded from differentiation.
  Var constant(Tensor value);

  // Records an op result. `backward` receives d(root)/d(result) and must
  // accumulate into parent gradients through accumulate().
  Var record(std::string_view op, Tensor value, std::vector<std::size_t> parents,
             Backward backward);

  // Reverse sweep from a 1x1 root. Clears previous gradients first.
  void backward(const Var& root);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  Tensor grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  void accumulate(std::size_t id, const Tensor& g);
  // Gradient buffer for in-place accumulation; allocated lazily.
  Tensor& grad_buffer(std::size_t id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    Backward backward;
    bool requires_grad = false;
    bool has_grad = false;
  };
  std::vector<Node> nodes_;
};

// Differentiable primitives. Binary elementwise ops broadcast their second
// operand when it is 1 x c (across rows), r x 1 (across columns) or 1 x 1.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, std::size_t start, std::size_t count);
Var slice_cols(const Var& a, std::size_t start, std::size_t count);
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var abs(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
Var sq_norm(const Var& a);
// Picks a(r, c) for each (r, c) into a 1 x T row.
Var gather(const Var& a, const std::vector<std::pair<std::size_t, std::size_t>>& index);
// Per-row sum, r x 1.
Var row_sum(const Var& a);
// Each row divided by max(||row||, eps).
Var normalize_rows(const Var& a, double eps);
// Per-row standardization (x - mean) / sqrt(var + eps), no affine part.
Var layer_norm_rows(const Var& a, double eps);

// u^T v / (max(|u|,eps) max(|v|,eps)) for two 1 x n vectors.
Var cosine_sim(const Var& u, const Var& v, double eps = 1e-8);

}  // namespace merc
