#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <shared_mutex>
#include <utility>

#include "merc/eig.hpp"
#include "merc/params.hpp"
#include "merc/rng.hpp"
#include "merc/tape.hpp"
#include "merc/tensor.hpp"

namespace merc::shared {

// Modality-utterance interaction graph over 3N nodes, node (m, i) at m * N + i.
struct SharedGraph {
  std::size_t utterances = 0;
  Tensor adjacency;   // binary, unit diagonal
  Tensor normalized;  // D^-1/2 A D^-1/2
  Tensor laplacian;   // I - normalized
  EigenDecomposition eig;
};

// A(mN+i, m'N+j) = 1 iff (m == m' and |i - j| < k) or (m != m' and i == j).
Tensor build_adjacency(std::size_t utterances, std::size_t window_k);

// Eigenvalues within 1e-9 outside [0, 2] are clamped onto it.
SharedGraph normalize_and_decompose(const Tensor& adjacency, const EigOptions& opts = {});

// Exponential filter responses.
inline double low_pass(double lambda, double tau) { return std::exp(-tau * lambda); }
inline double high_pass(double lambda, double tau) { return 1.0 - std::exp(-tau * lambda); }

// Dense 3N x 3N operators U g(Lambda) U^T for both filters. Constant w.r.t. learning.
struct SpectralOperators {
  Tensor low;
  Tensor high;
};
SpectralOperators spectral_operators(const SharedGraph& g, double tau_low, double tau_high);

struct FrequencyViews {
  Var low;   // 3N x d
  Var high;  // 3N x d
};

FrequencyViews spectral_filter(const SpectralOperators& ops, const Var& x);
FrequencyViews spectral_filter(const SharedGraph& g, const Var& x, double tau_low, double tau_high);

void init_params(ParamStore& store, std::size_t latent_dim, std::size_t proj_dim, Rng& rng);

// Per utterance: W [t_l || a_l || v_l || t_h || a_h || v_h] + b, giving N x d.
Var fuse(const BoundParams& p, const FrequencyViews& views);

// Symmetric InfoNCE between two sets of B projected vectors, matched by row.
// Cosine similarity, temperature-scaled, averaged per direction and summed.
Var info_nce(const Var& z_low, const Var& z_high, double temperature, double eps = 1e-8);

// Projects both views through their heads and applies info_nce.
Var contrastive_loss(const BoundParams& p, const FrequencyViews& views, double temperature,
                     double eps = 1e-8);

// Eigendecompositions keyed by (N, k). Concurrent readers, exclusive insert.
class GraphCache {
 public:
  explicit GraphCache(EigOptions opts = {}) : opts_(opts) {}
  std::shared_ptr<const SharedGraph> get(std::size_t utterances, std::size_t window_k);
  std::size_t size() const;

 private:
  EigOptions opts_;
  mutable std::shared_mutex mu_;
  std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const SharedGraph>> graphs_;
};

}  // namespace merc::shared
