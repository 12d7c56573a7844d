#pragma once

#include <cstddef>
#include <vector>

#include "merc/layers.hpp"
#include "merc/params.hpp"
#include "merc/rng.hpp"
#include "merc/tape.hpp"
#include "merc/tensor.hpp"

namespace merc::priv {

struct Edge {
  std::size_t p = 0;
  std::size_t q = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

// x_prt (3N x d) plus the speaker embedding row speaker_table[s_i] (K x d),
// added to all three modality rows of utterance i.
Var inject_speaker(const Var& x_prt, const std::vector<std::size_t>& speakers,
                   const Var& speaker_table);

// Per modality block: (i, j), i < j, joined when the same speaker is within
// w_same turns or different speakers are within w_cross turns. Node indices
// follow the 3N layout. No cross-modal edges, no self loops.
std::vector<Edge> build_speaker_graph(const std::vector<std::size_t>& speakers, std::size_t w_same,
                                      std::size_t w_cross);

// Every original edge becomes a dual vertex; every original node p becomes a
// hyperedge joining the duals of its incident edges.
struct DualHypergraph {
  std::size_t nodes = 0;
  std::vector<Edge> edges;
  Tensor incidence;                    // M x 3N, H(e, p)
  std::vector<double> hyperedge_weight;  // diagonal of W_e*, 3N, all ones
  std::vector<double> vertex_degree;   // diagonal of D_v*, M
  std::vector<double> edge_degree;     // diagonal of D_e*, 3N (original node degree)

  std::size_t dual_vertices() const { return edges.size(); }
  // Nodes with at least one incident edge; the rest are dropped from the Laplacian.
  bool retained(std::size_t p) const { return edge_degree[p] > 0.0; }
};

// Throws when `edges` is empty.
DualHypergraph dual_transform(const std::vector<Edge>& edges, std::size_t nodes);

// x*_e = (x_p + x_q) / 2, giving M x d.
Var dual_vertex_features(const DualHypergraph& hg, const Var& x_tilde);

// I - Dv^-1/2 H We De^-1 H^T Dv^-1/2 over retained hyperedges.
Tensor hypergraph_laplacian(const DualHypergraph& hg);

// Largest eigenvalue via the Jacobi eigensolver when M <= cap, else 2.
// A degenerate (<= 1e-12) result falls back to 1 and is logged.
double laplacian_lambda_max(const Tensor& laplacian, std::size_t eig_cap);

// (2 / lambda_max) L - I
Tensor rescale_laplacian(const Tensor& laplacian, double lambda_max);

// Scalar Jacobi polynomial P_r^(alpha, beta)(x) by the three-term recurrence.
double jacobi_value(std::size_t r, double alpha, double beta, double x);

// Z_r = P_r(L~) X* W_r for r = 0..weights.size()-1. Polynomials are applied
// through the recurrence as repeated products with L~.
std::vector<Var> jacobi_filter_bank(const Tensor& rescaled, const Var& x_star,
                                    const std::vector<Var>& weights, double alpha, double beta);

struct AttentionFusion {
  Var fused;    // M x d, tanh(sum_r eta_r Z_r)
  Var weights;  // M x (R+1), rows sum to one
};

// score_(r,e) = a^T tanh(W_a Z_r[e] + b_a), softmax over r per dual vertex.
AttentionFusion attention_fuse(const std::vector<Var>& z, const Linear& score_hidden,
                               const Var& score_vector);

// 3N x M operator De^-1 H^T; rows of dropped nodes are zero.
Tensor projection_back_operator(const DualHypergraph& hg);
Var project_back(const DualHypergraph& hg, const Var& s_star);

// Per utterance W [s_t || s_a || s_v] + b over the 3N x d node features.
Var fuse(const BoundParams& p, const Var& s_bar);

// Mean ||h_i - h_j||^2 over same-speaker pairs i < j; 0 when there are none.
Var loss_cons(const Var& h_prt, const std::vector<std::size_t>& speakers);

// (1/3N) sum ||x~ - D_prt,m(s_bar)||^2 with one decoder per modality.
Var loss_rec_prt(const BoundParams& p, const Var& x_tilde, const Var& s_bar);

Var loss_prt(const Var& rec, const Var& cons, double beta);

// Topology-only precomputation for one conversation.
struct PrivateStructure {
  std::vector<Edge> edges;
  bool fallback = false;  // no edges: filtering is bypassed and s_bar = x~
  DualHypergraph hypergraph;
  Tensor laplacian;
  double lambda_max = 0.0;
  Tensor rescaled;
  Tensor back;  // projection_back_operator
};

PrivateStructure build_structure(const std::vector<std::size_t>& speakers, std::size_t w_same,
                                 std::size_t w_cross, std::size_t eig_cap);

struct BranchOutput {
  Var x_tilde;  // 3N x d
  Var s_bar;    // 3N x d
  Var attention;  // invalid on the fallback path
};

// Speaker injection, dual hypergraph filtering, attention fusion and
// projection back. `run_filters` false reproduces the fallback (s_bar = x~).
BranchOutput forward(const BoundParams& p, const PrivateStructure& st, const Var& x_prt,
                     const std::vector<std::size_t>& speakers, double jacobi_alpha,
                     double jacobi_beta, std::size_t order, bool run_filters = true);

void init_params(ParamStore& store, std::size_t latent_dim, std::size_t speakers,
                 std::size_t order, Rng& rng, bool with_filters = true);

}  // namespace merc::priv
