#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

#include "merc/config.hpp"
#include "merc/data.hpp"
#include "merc/params.hpp"
#include "merc/private_branch.hpp"
#include "merc/rng.hpp"
#include "merc/shared_branch.hpp"
#include "merc/tape.hpp"

namespace merc {

// Everything about one conversation that depends only on topology and input
// features, computed once and reused across steps.
struct ConversationPlan {
  std::size_t utterances = 0;
  std::vector<std::size_t> speakers;
  std::vector<std::size_t> labels;
  std::array<Tensor, kNumModalities> inputs;
  std::shared_ptr<const shared::SharedGraph> graph;
  shared::SpectralOperators filters;
  priv::PrivateStructure private_structure;
};

struct LossTerms {
  Var total;
  Var cls;
  Var dec, rec, cyc, mar, ort;
  Var cl;
  Var prt, rec_prt, cons;
};

struct ForwardResult {
  Var logits;     // N x C
  LossTerms loss;  // only valid when losses were requested
};

// Scalar snapshot of LossTerms.
struct LossValues {
  double total = 0, cls = 0, dec = 0, rec = 0, cyc = 0, mar = 0, ort = 0, cl = 0, prt = 0,
         rec_prt = 0, cons = 0;
  static LossValues from(const LossTerms& t);
};

// Full pipeline: disentanglement, Fourier graph branch, speaker-aware dual
// hypergraph branch, token fusion and classification, with ablation wiring.
class Model {
 public:
  // Parameters drawn uniformly in +-1/sqrt(fan_in) from `seed`; layer-norm
  // gains start at one and shifts at zero.
  Model(Config config, std::size_t classes, std::size_t speakers,
        std::array<std::size_t, kNumModalities> dims, std::uint64_t seed);

  static Model for_dataset(const Config& config, const Dataset& meta, std::uint64_t seed) {
    return Model(config, meta.num_classes, meta.num_speakers, meta.dims, seed);
  }

  const Config& config() const { return config_; }
  std::size_t classes() const { return classes_; }
  std::size_t speakers() const { return speakers_; }
  const std::array<std::size_t, kNumModalities>& dims() const { return dims_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  ConversationPlan plan(const Conversation& conv) const;
  std::vector<ConversationPlan> plan_all(const Dataset& d) const;

  // With `triplet_rng` null, only logits are produced. Otherwise all loss
  // terms are built and triplets are drawn from the generator.
  ForwardResult forward(const BoundParams& p, const ConversationPlan& plan,
                        Rng* triplet_rng) const;

  // Tape-free prediction helper.
  Tensor logits(const ConversationPlan& plan) const;

 private:
  void register_params(Rng& rng);

  Config config_;
  std::size_t classes_;
  std::size_t speakers_;
  std::array<std::size_t, kNumModalities> dims_;
  ParamStore params_;
  std::shared_ptr<shared::GraphCache> cache_;
};

}  // namespace merc
