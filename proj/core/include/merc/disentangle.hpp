#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "merc/data.hpp"
#include "merc/params.hpp"
#include "merc/rng.hpp"
#include "merc/tape.hpp"

namespace merc::disentangle {

using ModalityVars = std::array<Var, kNumModalities>;

// Modality-invariant (com) and modality-specific (prt) codes, each N x d per modality.
struct DisentangledFeatures {
  ModalityVars com;
  ModalityVars prt;

  std::size_t utterances() const { return com[0].rows(); }
  // 3N x d stacks in node order (m * N + i).
  Var stacked_com() const { return concat_rows({com[0], com[1], com[2]}); }
  Var stacked_prt() const { return concat_rows({prt[0], prt[1], prt[2]}); }
};

// A (modality, utterance) node of the 3N-node layout.
struct NodeRef {
  std::size_t modality = 0;
  std::size_t utterance = 0;

  std::size_t index(std::size_t n) const { return modality * n + utterance; }
  friend bool operator==(const NodeRef&, const NodeRef&) = default;
};

struct Triplet {
  NodeRef anchor;
  NodeRef positive;
  NodeRef negative;
};

// Registers input projections d_m -> d, the shared encoder, three private
// encoders and three decoders (2d -> d -> d).
void init_params(ParamStore& store, const std::array<std::size_t, kNumModalities>& input_dims,
                 std::size_t latent_dim, Rng& rng, bool with_encoders = true);

// N x d_m raw features -> N x d projected features.
ModalityVars project_inputs(const BoundParams& p, const ModalityVars& raw);

// One shared encoder applied to every modality, one private encoder per modality.
DisentangledFeatures forward(const BoundParams& p, const ModalityVars& projected);

// Decoder output D_m([com || prt]) per modality.
ModalityVars reconstruct(const BoundParams& p, const DisentangledFeatures& dis);

// (1/3N) sum_m sum_i ||target_m[i] - approx_m[i]||^2
Var mean_sq_error(const ModalityVars& target, const ModalityVars& approx);

Var loss_rec(const BoundParams& p, const ModalityVars& projected, const DisentangledFeatures& dis);
Var loss_cyc(const BoundParams& p, const DisentangledFeatures& dis);

// Anchors range over all 3N nodes. Positives share the anchor's label in a
// different modality; negatives carry a different label. Up to `per_anchor`
// (positive, negative) draws per anchor.
std::vector<Triplet> mine_triplets(const std::vector<std::size_t>& labels, std::size_t per_anchor,
                                   Rng& rng);

// Mean hinge max(0, alpha - cos(a, p) + cos(a, n)) over triplets of shared
// codes; 0 for an empty set.
Var loss_mar(const DisentangledFeatures& dis, const std::vector<Triplet>& triplets, double alpha,
             double eps = 1e-8);

// (1/3N) sum |cos(com, prt)|.
Var loss_ort(const DisentangledFeatures& dis, double eps = 1e-8);

Var loss_dec(const Var& rec, const Var& cyc, const Var& mar, const Var& ort, double gamma1,
             double gamma2);

}  // namespace merc::disentangle
