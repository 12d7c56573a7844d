#include "merc/model.hpp"

#include "merc/disentangle.hpp"
#include "merc/error.hpp"
#include "merc/fusion.hpp"

namespace merc {

LossValues LossValues::from(const LossTerms& t) {
  auto v = [](const Var& x) { return x.valid() ? x.item() : 0.0; };
  return {v(t.total), v(t.cls), v(t.dec), v(t.rec), v(t.cyc), v(t.mar),
          v(t.ort),   v(t.cl),  v(t.prt), v(t.rec_prt), v(t.cons)};
}

Model::Model(Config config, std::size_t classes, std::size_t speakers,
             std::array<std::size_t, kNumModalities> dims, std::uint64_t seed)
    : config_(std::move(config)), classes_(classes), speakers_(speakers), dims_(dims) {
  config_.validate();
  if (classes_ == 0 || speakers_ == 0) throw ConfigError("model needs C >= 1 and K >= 1");
  EigOptions eo;
  eo.size_cap = config_.eig_cap;
  cache_ = std::make_shared<shared::GraphCache>(eo);
  Rng rng(seed);
  register_params(rng);
}

void Model::register_params(Rng& rng) {
  const auto& c = config_;
  const auto& ab = c.ablation;
  const std::size_t d = c.latent_dim;
  disentangle::init_params(params_, dims_, d, rng, !ab.disable_decoupler);
  if (!ab.disable_shared_branch) shared::init_params(params_, d, c.proj_dim, rng);
  priv::init_params(params_, d, speakers_, c.jacobi_order_R, rng, !ab.disable_private_branch);
  fusion::init_params(params_, d, c.d_fusion, c.n_layers, classes_, rng,
                      !ab.disable_transformer_fusion);
}

ConversationPlan Model::plan(const Conversation& conv) const {
  if (conv.utterances.empty()) throw Error("conversation '" + conv.id + "' is empty");
  ConversationPlan pl;
  pl.utterances = conv.size();
  pl.speakers = conv.speakers();
  pl.labels = conv.labels();
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    pl.inputs[m] = conv.modality_matrix(static_cast<Modality>(m));
    if (pl.inputs[m].cols() != dims_[m]) {
      throw ShapeError("conversation '" + conv.id + "': modality " + std::to_string(m) +
                       " has dimension " + std::to_string(pl.inputs[m].cols()) + ", model expects " +
                       std::to_string(dims_[m]));
    }
  }
  for (auto s : pl.speakers)
    if (s >= speakers_) throw Error("conversation '" + conv.id + "': speaker id out of range");
  for (auto y : pl.labels)
    if (y >= classes_) throw Error("conversation '" + conv.id + "': label out of range");
  if (!config_.ablation.disable_shared_branch) {
    pl.graph = cache_->get(pl.utterances, config_.window_k);
    pl.filters = shared::spectral_operators(*pl.graph, config_.tau_low, config_.tau_high);
  }
  if (!config_.ablation.disable_private_branch) {
    pl.private_structure = priv::build_structure(pl.speakers, config_.w_same, config_.w_cross,
                                                 config_.eig_cap);
  }
  return pl;
}

std::vector<ConversationPlan> Model::plan_all(const Dataset& d) const {
  std::vector<ConversationPlan> out;
  out.reserve(d.conversations.size());
  for (const auto& c : d.conversations) out.push_back(plan(c));
  return out;
}

ForwardResult Model::forward(const BoundParams& p, const ConversationPlan& plan,
                             Rng* triplet_rng) const {
  const auto& c = config_;
  const auto& ab = c.ablation;
  Tape& t = p.tape();
  const std::size_t n = plan.utterances;

  disentangle::ModalityVars raw;
  for (std::size_t m = 0; m < kNumModalities; ++m) raw[m] = t.constant(plan.inputs[m]);
  const disentangle::ModalityVars projected = disentangle::project_inputs(p, raw);

  disentangle::DisentangledFeatures dis;
  if (ab.disable_decoupler) {
    dis.com = projected;
    dis.prt = projected;
  } else {
    dis = disentangle::forward(p, projected);
  }

  shared::FrequencyViews views;
  Var h_com;
  if (ab.disable_shared_branch) {
    h_com = scale(add(add(dis.com[0], dis.com[1]), dis.com[2]), 1.0 / 3.0);
  } else {
    views = shared::spectral_filter(plan.filters, dis.stacked_com());
    h_com = shared::fuse(p, views);
  }

  const priv::BranchOutput prt =
      priv::forward(p, plan.private_structure, dis.stacked_prt(), plan.speakers, c.jacobi_alpha,
                    c.jacobi_beta, c.jacobi_order_R, !ab.disable_private_branch);

  Var u;
  if (ab.disable_transformer_fusion) {
    u = fusion::direct_fusion(p, h_com, prt.s_bar);
  } else {
    Var tokens = fusion::build_tokens(p, h_com, prt.s_bar);
    Var enc = fusion::transformer_encode(p, tokens, n, {c.n_layers, c.n_heads, c.layer_norm_eps});
    u = fusion::fused_tokens(enc, n);
  }

  ForwardResult out;
  out.logits = fusion::classifier_logits(p, u);
  if (triplet_rng == nullptr) return out;

  LossTerms& L = out.loss;
  auto zero = [&] { return t.constant(Tensor::scalar(0.0)); };
  L.cls = fusion::loss_cls(log_softmax_rows(out.logits), plan.labels);

  if (ab.disable_decoupler) {
    L.rec = L.cyc = L.mar = L.ort = L.dec = zero();
  } else {
    L.rec = disentangle::loss_rec(p, projected, dis);
    L.cyc = disentangle::loss_cyc(p, dis);
    const auto triplets =
        disentangle::mine_triplets(plan.labels, c.triplets_per_anchor, *triplet_rng);
    L.mar = disentangle::loss_mar(dis, triplets, c.alpha, c.cosine_eps);
    L.ort = disentangle::loss_ort(dis, c.cosine_eps);
    L.dec = disentangle::loss_dec(L.rec, L.cyc, L.mar, L.ort, c.gamma1, c.gamma2);
  }

  L.cl = ab.disable_shared_branch ? zero()
                                  : shared::contrastive_loss(p, views, c.nce_temperature,
                                                             c.cosine_eps);

  if (ab.disable_private_branch) {
    L.rec_prt = L.cons = L.prt = zero();
  } else {
    Var h_prt = priv::fuse(p, prt.s_bar);
    L.cons = priv::loss_cons(h_prt, plan.speakers);
    L.rec_prt = priv::loss_rec_prt(p, prt.x_tilde, prt.s_bar);
    L.prt = priv::loss_prt(L.rec_prt, L.cons, c.beta_cons);
  }

  L.total = fusion::loss_total(L.cls, L.dec, L.cl, L.prt, {c.lambda1, c.lambda2, c.lambda3});
  return out;
}

Tensor Model::logits(const ConversationPlan& plan) const {
  Tape tape;
  BoundParams p(tape, params_, /*differentiable=*/false);
  return forward(p, plan, nullptr).logits.value();
}

}  // namespace merc
