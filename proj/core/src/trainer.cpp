#include "merc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "merc/error.hpp"
#include "merc/fusion.hpp"

namespace merc {

void Adam::step(ParamStore& params, const ParamGrads& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (auto& e : params.entries()) {
    auto it = grads.find(e.name);
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    auto [mi, mnew] = m_.try_emplace(e.name, e.value.rows(), e.value.cols());
    auto [vi, vnew] = v_.try_emplace(e.name, e.value.rows(), e.value.cols());
    Tensor& m = mi->second;
    Tensor& v = vi->second;
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
      v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
      e.value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

namespace {

bool grads_finite(const ParamGrads& g) {
  for (const auto& [name, t] : g)
    if (!t.all_finite()) return false;
  return true;
}

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
}

}  // namespace

TrainResult train(const Config& config, const Dataset& data, const StepCallback& on_step) {
  config.validate();
  data.validate();
  if (data.conversations.empty()) throw Error("train: dataset has no conversations");

  Model model = Model::for_dataset(config, data, config.seed);
  const auto plans = model.plan_all(data);
  Adam adam(config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps);
  Rng order_rng(mix_seed(config.seed, 1));

  TrainResult result;
  std::vector<std::size_t> order(plans.size());
  std::size_t cursor = order.size();
  std::size_t step = 0;
  for (; step < config.steps; ++step) {
    if (cursor == order.size()) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      shuffle(order, order_rng);
      cursor = 0;
    }
    const std::size_t ci = order[cursor++];
    Rng triplet_rng(mix_seed(config.seed, 1000 + step));
    Tape tape;
    BoundParams p(tape, model.params());
    StepRecord rec;
    rec.step = step;
    rec.conversation = data.conversations[ci].id;
    ParamGrads grads;
    try {
      ForwardResult f = model.forward(p, plans[ci], &triplet_rng);
      rec.loss = LossValues::from(f.loss);
      tape.backward(f.loss.total);
      grads = p.grads();
    } catch (const NumericError& e) {
      result.diverged = true;
      result.divergence = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
    if (!std::isfinite(rec.loss.total) || !grads_finite(grads)) {
      result.diverged = true;
      result.divergence = "step " + std::to_string(step) + ": non-finite loss or gradient";
      break;
    }
    adam.step(model.params(), grads);
    if (on_step) on_step(rec);
    result.log.push_back(std::move(rec));
  }
  if (result.diverged) spdlog::warn("training diverged at {}", result.divergence);
  result.checkpoint = Checkpoint::from_model(model, step, order_rng.state());
  return result;
}

Metrics evaluate(const Model& model, const Dataset& data, std::size_t threads) {
  if (data.num_classes != model.classes()) {
    throw Error("evaluate: dataset has " + std::to_string(data.num_classes) +
                " classes, model has " + std::to_string(model.classes()));
  }
  const std::size_t n = data.conversations.size();
  std::vector<std::vector<std::size_t>> preds(n);
  std::vector<std::exception_ptr> errors(n);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));

  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += threads) {
      try {
        preds[i] = fusion::argmax_rows(model.logits(model.plan(data.conversations[i])));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < threads; ++w) pool.emplace_back(work, 0 + w);
  work(0);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<std::size_t> truth, predicted;
  for (std::size_t i = 0; i < n; ++i) {
    const auto labels = data.conversations[i].labels();
    truth.insert(truth.end(), labels.begin(), labels.end());
    predicted.insert(predicted.end(), preds[i].begin(), preds[i].end());
  }
  return compute_metrics(truth, predicted, data.num_classes);
}

Metrics evaluate(const Checkpoint& checkpoint, const Dataset& data, std::size_t threads) {
  return evaluate(checkpoint.to_model(), data, threads);
}

double dataset_loss(const Model& model, const ParamStore& params,
                    const std::vector<ConversationPlan>& plans, std::uint64_t triplet_seed) {
  double total = 0.0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    Tape tape;
    BoundParams p(tape, params, false);
    Rng rng(mix_seed(triplet_seed, i));
    total += model.forward(p, plans[i], &rng).loss.total.item();
  }
  return total;
}

std::vector<double> dataset_loss_terms(const Model& model, const ParamStore& params,
                                       const std::vector<ConversationPlan>& plans,
                                       std::uint64_t triplet_seed) {
  const Config& c = model.config();
  std::vector<double> terms;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    Tape tape;
    BoundParams p(tape, params, false);
    Rng rng(mix_seed(triplet_seed, i));
    const LossValues v = LossValues::from(model.forward(p, plans[i], &rng).loss);
    terms.insert(terms.end(), {v.cls, c.lambda1 * v.dec, c.lambda2 * v.cl, c.lambda3 * v.prt});
  }
  return terms;
}

ParamGrads dataset_gradient(const Model& model, const ParamStore& params,
                            const std::vector<ConversationPlan>& plans, std::uint64_t triplet_seed) {
  ParamGrads sum;
  for (const auto& e : params.entries()) sum.emplace(e.name, Tensor(e.value.rows(), e.value.cols()));
  for (std::size_t i = 0; i < plans.size(); ++i) {
    Tape tape;
    BoundParams p(tape, params);
    Rng rng(mix_seed(triplet_seed, i));
    tape.backward(model.forward(p, plans[i], &rng).loss.total);
    for (auto& [name, g] : p.grads()) kernels::axpy(1.0, g, sum.at(name));
  }
  return sum;
}

GradCheckReport gradient_check(const Config& config, const Dataset& data,
                               const GradCheckOptions& opts) {
  config.validate();
  data.validate();
  Model model = Model::for_dataset(config, data, config.seed);
  const auto plans = model.plan_all(data);
  const std::uint64_t tseed = mix_seed(config.seed, 7);
  return finite_diff_check(
      model.params(),
      LossTermsFn([&](const ParamStore& ps) { return dataset_loss_terms(model, ps, plans, tseed); }),
      [&](const ParamStore& ps) { return dataset_gradient(model, ps, plans, tseed); }, opts);
}

std::vector<AblationOutcome> run_ablations(const Config& config, const Dataset& data,
                                           const std::vector<AblationFlags>& variants,
                                           double train_frac, std::uint64_t split_seed) {
  const auto [train_set, test_set] = split_dataset(data, train_frac, split_seed);
  std::vector<AblationFlags> all{AblationFlags{}};
  all.insert(all.end(), variants.begin(), variants.end());
  std::vector<AblationOutcome> out;
  for (const auto& flags : all) {
    Config c = config;
    c.ablation = flags;
    c.validate();
    TrainResult r = train(c, train_set);
    const Model m = r.checkpoint.to_model();
    AblationOutcome o;
    o.name = ablation_name(flags);
    o.flags = flags;
    o.diverged = r.diverged;
    o.train_metrics = evaluate(m, train_set);
    o.test_metrics = evaluate(m, test_set);
    out.push_back(std::move(o));
  }
  return out;
}

SynthSpec synth_spec(const Config& config) {
  SynthSpec s;
  s.conversations = config.synth_conversations;
  s.max_len = config.synth_max_len;
  s.classes = config.synth_classes;
  s.speakers = config.synth_speakers;
  s.dims = config.synth_dims;
  s.seed = config.seed;
  return s;
}

namespace {

nlohmann::json metrics_json(const Metrics& m) {
  return {{"accuracy", m.accuracy},
          {"weighted_f1", m.weighted_f1},
          {"per_class_f1", m.per_class_f1},
          {"confusion", m.confusion}};
}

}  // namespace

std::string to_json_line(const StepRecord& rec) {
  const LossValues& l = rec.loss;
  nlohmann::json j = {{"type", "step"},      {"step", rec.step},   {"conversation", rec.conversation},
                      {"total", l.total},    {"cls", l.cls},       {"dec", l.dec},
                      {"rec", l.rec},        {"cyc", l.cyc},       {"mar", l.mar},
                      {"ort", l.ort},        {"cl", l.cl},         {"prt", l.prt},
                      {"rec_prt", l.rec_prt}, {"cons", l.cons}};
  return j.dump();
}

std::string to_json_line(const std::string& split, std::size_t step, const Metrics& m) {
  nlohmann::json j = metrics_json(m);
  j["type"] = "eval";
  j["split"] = split;
  j["step"] = step;
  return j.dump();
}

std::string to_json_line(const AblationOutcome& o) {
  return nlohmann::json{{"type", "ablation"},
                        {"variant", o.name},
                        {"diverged", o.diverged},
                        {"train", metrics_json(o.train_metrics)},
                        {"test", metrics_json(o.test_metrics)}}
      .dump();
}

AblationFlags parse_ablation_flags(const std::string& spec) {
  AblationFlags f;
  std::istringstream is(spec);
  std::string name;
  while (std::getline(is, name, ',')) {
    if (name.empty()) continue;
    if (name == "disable_decoupler") f.disable_decoupler = true;
    else if (name == "disable_shared_branch") f.disable_shared_branch = true;
    else if (name == "disable_private_branch") f.disable_private_branch = true;
    else if (name == "disable_transformer_fusion") f.disable_transformer_fusion = true;
    else throw ConfigError("unknown ablation flag '" + name + "'");
  }
  return f;
}

std::string ablation_name(const AblationFlags& flags) {
  std::string s;
  auto add = [&](bool on, const char* n) {
    if (!on) return;
    if (!s.empty()) s += ',';
    s += n;
  };
  add(flags.disable_decoupler, "disable_decoupler");
  add(flags.disable_shared_branch, "disable_shared_branch");
  add(flags.disable_private_branch, "disable_private_branch");
  add(flags.disable_transformer_fusion, "disable_transformer_fusion");
  return s.empty() ? "full" : s;
}

}  // namespace merc
