#pragma once

#include <cstddef>
#include <vector>

#include "merc/params.hpp"
#include "merc/rng.hpp"
#include "merc/tape.hpp"
#include "merc/tensor.hpp"

namespace merc::fusion {

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 0.1;
  double lambda3 = 1.0;
};

struct EncoderShape {
  std::size_t layers = 2;
  std::size_t heads = 2;
  double layer_norm_eps = 1e-5;
};

// Registers branch projections, fusion token, type embeddings, encoder layers
// and the classifier. With `transformer` false only the direct fusion layer
// (4d -> d_f) and the classifier are created.
void init_params(ParamStore& store, std::size_t latent_dim, std::size_t d_fusion,
                 std::size_t layers, std::size_t classes, Rng& rng, bool transformer = true);

// Tokens for all N utterances stacked type-major into 5N x d_f:
// rows [0,N) fusion token, then shared, text, audio, visual.
Var build_tokens(const BoundParams& p, const Var& h_com, const Var& s_bar);

// Post-norm encoder layers over each utterance's five tokens. Tokens of
// different utterances never attend to each other. Per-layer, per-head
// attention matrices (5N x 5N) are appended to `attention` when given.
Var transformer_encode(const BoundParams& p, const Var& tokens, std::size_t utterances,
                       const EncoderShape& shape, std::vector<Tensor>* attention = nullptr);

// Encoded fusion-token rows, N x d_f.
Var fused_tokens(const Var& encoded, std::size_t utterances);

// Fusion ablation: linear map of [h_com || s_t || s_a || s_v] to d_f.
Var direct_fusion(const BoundParams& p, const Var& h_com, const Var& s_bar);

// W_2 relu(W_1 u + b_1) + b_2, N x C.
Var classifier_logits(const BoundParams& p, const Var& u);

struct Classification {
  Tensor probs;                     // N x C
  std::vector<std::size_t> labels;  // argmax, lowest index on ties
};
Classification classify(const Tensor& logits);
std::vector<std::size_t> argmax_rows(const Tensor& m);

// -(1/N) sum_i log p_(i, y_i) from N x C log-probabilities.
Var loss_cls(const Var& log_probs, const std::vector<std::size_t>& labels);

Var loss_total(const Var& cls, const Var& dec, const Var& cl, const Var& prt, const LossWeights& w);

}  // namespace merc::fusion
