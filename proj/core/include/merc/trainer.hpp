#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "merc/checkpoint.hpp"
#include "merc/config.hpp"
#include "merc/data.hpp"
#include "merc/gradcheck.hpp"
#include "merc/metrics.hpp"
#include "merc/model.hpp"

namespace merc {

// Bias-corrected first/second moment estimates per parameter.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}
  void step(ParamStore& params, const ParamGrads& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::unordered_map<std::string, Tensor> m_, v_;
};

struct StepRecord {
  std::size_t step = 0;
  std::string conversation;
  LossValues loss;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> log;
  bool diverged = false;
  std::string divergence;  // what went non-finite, when diverged
};

using StepCallback = std::function<void(const StepRecord&)>;

// One conversation per step, visiting conversations in a per-epoch shuffle
// drawn from the run seed. On a non-finite loss, training stops and the
// checkpoint holds the parameters from before the failing step.
TrainResult train(const Config& config, const Dataset& data, const StepCallback& on_step = {});

// Predictions for every utterance; conversations are evaluated in parallel
// across `threads` workers (0 = hardware concurrency) and merged in order.
Metrics evaluate(const Model& model, const Dataset& data, std::size_t threads = 0);
Metrics evaluate(const Checkpoint& checkpoint, const Dataset& data, std::size_t threads = 0);

// Sum of loss_total over all conversations with triplets drawn from
// `triplet_seed`; the gradient-check objective.
double dataset_loss(const Model& model, const ParamStore& params,
                    const std::vector<ConversationPlan>& plans, std::uint64_t triplet_seed);
// Per-conversation weighted addends of loss_total (cls, l1*dec, l2*cl, l3*prt).
std::vector<double> dataset_loss_terms(const Model& model, const ParamStore& params,
                                       const std::vector<ConversationPlan>& plans,
                                       std::uint64_t triplet_seed);
ParamGrads dataset_gradient(const Model& model, const ParamStore& params,
                            const std::vector<ConversationPlan>& plans, std::uint64_t triplet_seed);

GradCheckReport gradient_check(const Config& config, const Dataset& data,
                               const GradCheckOptions& opts = {});

struct AblationOutcome {
  std::string name;  // "full" or the flag list
  AblationFlags flags;
  Metrics train_metrics;
  Metrics test_metrics;
  bool diverged = false;
};

// Trains the full model and each requested flag set on the train split and
// scores them on the held-out split.
std::vector<AblationOutcome> run_ablations(const Config& config, const Dataset& data,
                                           const std::vector<AblationFlags>& variants,
                                           double train_frac, std::uint64_t split_seed);

// Synthetic-data parameters taken from the synth_* config keys and the run seed.
SynthSpec synth_spec(const Config& config);

// One JSON object per line.
std::string to_json_line(const StepRecord& rec);
std::string to_json_line(const std::string& split, std::size_t step, const Metrics& m);
std::string to_json_line(const AblationOutcome& o);

AblationFlags parse_ablation_flags(const std::string& spec);  // comma-separated flag names
std::string ablation_name(const AblationFlags& flags);

}  // namespace merc
