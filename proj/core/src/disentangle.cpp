#include "merc/disentangle.hpp"

#include <string>

#include "merc/error.hpp"
#include "merc/layers.hpp"

namespace merc::disentangle {

namespace {

constexpr const char* kTag[kNumModalities] = {"t", "a", "v"};

std::string mod(const char* prefix, std::size_t m) { return std::string(prefix) + "." + kTag[m]; }

Var zero_scalar(Tape& t) { return t.constant(Tensor::scalar(0.0)); }

}  // namespace

void init_params(ParamStore& store, const std::array<std::size_t, kNumModalities>& input_dims,
                 std::size_t d, Rng& rng, bool with_encoders) {
  for (std::size_t m = 0; m < kNumModalities; ++m)
    Linear::init(store, mod("dis.proj", m), input_dims[m], d, rng);
  if (!with_encoders) return;
  TanhMlp::init(store, "dis.enc_com", d, d, d, rng);
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    TanhMlp::init(store, mod("dis.enc_prt", m), d, d, d, rng);
    TanhMlp::init(store, mod("dis.dec", m), 2 * d, d, d, rng);
  }
}

ModalityVars project_inputs(const BoundParams& p, const ModalityVars& raw) {
  ModalityVars out;
  for (std::size_t m = 0; m < kNumModalities; ++m) out[m] = Linear::bind(p, mod("dis.proj", m))(raw[m]);
  return out;
}

DisentangledFeatures forward(const BoundParams& p, const ModalityVars& projected) {
  const std::size_t n = projected[0].rows();
  const TanhMlp shared = TanhMlp::bind(p, "dis.enc_com");
  DisentangledFeatures out;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    if (projected[m].rows() != n) {
      throw ShapeError("disentangle: modality " + std::string(kTag[m]) + " has " +
                       std::to_string(projected[m].rows()) + " rows, expected " +
                       std::to_string(n));
    }
    out.com[m] = shared(projected[m]);
    out.prt[m] = TanhMlp::bind(p, mod("dis.enc_prt", m))(projected[m]);
  }
  return out;
}

ModalityVars reconstruct(const BoundParams& p, const DisentangledFeatures& dis) {
  ModalityVars out;
  for (std::size_t m = 0; m < kNumModalities; ++m)
    out[m] = TanhMlp::bind(p, mod("dis.dec", m))(concat_cols({dis.com[m], dis.prt[m]}));
  return out;
}

Var mean_sq_error(const ModalityVars& target, const ModalityVars& approx) {
  const std::size_t n = target[0].rows();
  Var total;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    Var e = sq_norm(sub(target[m], approx[m]));
    total = total.valid() ? add(total, e) : e;
  }
  return scale(total, 1.0 / (3.0 * static_cast<double>(n)));
}

Var loss_rec(const BoundParams& p, const ModalityVars& projected, const DisentangledFeatures& dis) {
  return mean_sq_error(projected, reconstruct(p, dis));
}

Var loss_cyc(const BoundParams& p, const DisentangledFeatures& dis) {
  const ModalityVars recon = reconstruct(p, dis);
  ModalityVars cycled;
  for (std::size_t m = 0; m < kNumModalities; ++m)
    cycled[m] = TanhMlp::bind(p, mod("dis.enc_prt", m))(recon[m]);
  return mean_sq_error(dis.prt, cycled);
}

std::vector<Triplet> mine_triplets(const std::vector<std::size_t>& labels, std::size_t per_anchor,
                                   Rng& rng) {
  const std::size_t n = labels.size();
  std::vector<Triplet> out;
  std::vector<NodeRef> pos, neg;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      pos.clear();
      neg.clear();
      for (std::size_t m2 = 0; m2 < kNumModalities; ++m2)
        for (std::size_t j = 0; j < n; ++j) {
          if (labels[j] != labels[i]) {
            neg.push_back({m2, j});
          } else if (m2 != m) {
            pos.push_back({m2, j});
          }
        }
      if (pos.empty() || neg.empty()) continue;
      for (std::size_t k = 0; k < per_anchor; ++k) {
        const NodeRef& p = pos[rng.below(pos.size())];
        const NodeRef& q = neg[rng.below(neg.size())];
        out.push_back({{m, i}, p, q});
      }
    }
  }
  return out;
}

Var loss_mar(const DisentangledFeatures& dis, const std::vector<Triplet>& triplets, double alpha,
             double eps) {
  Tape& t = *dis.com[0].tape();
  if (triplets.empty()) return zero_scalar(t);
  const std::size_t n = dis.utterances();
  Var unit = normalize_rows(dis.stacked_com(), eps);
  Var cos = matmul(unit, transpose(unit));
  std::vector<std::pair<std::size_t, std::size_t>> ap, an;
  ap.reserve(triplets.size());
  an.reserve(triplets.size());
  for (const auto& tr : triplets) {
    ap.emplace_back(tr.anchor.index(n), tr.positive.index(n));
    an.emplace_back(tr.anchor.index(n), tr.negative.index(n));
  }
  Var hinge = relu(add_scalar(sub(gather(cos, an), gather(cos, ap)), alpha));
  return mean(hinge);
}

Var loss_ort(const DisentangledFeatures& dis, double eps) {
  Var c = normalize_rows(dis.stacked_com(), eps);
  Var p = normalize_rows(dis.stacked_prt(), eps);
  return mean(abs(row_sum(mul(c, p))));
}

Var loss_dec(const Var& rec, const Var& cyc, const Var& mar, const Var& ort, double gamma1,
             double gamma2) {
  return add(add(rec, cyc), add(scale(mar, gamma1), scale(ort, gamma2)));
}

}  // namespace merc::disentangle
