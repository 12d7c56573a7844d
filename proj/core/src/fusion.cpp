#include "merc/fusion.hpp"

#include <cmath>
#include <string>

#include "merc/data.hpp"
#include "merc/error.hpp"
#include "merc/layers.hpp"

namespace merc::fusion {

namespace {

constexpr const char* kTag[kNumModalities] = {"t", "a", "v"};
constexpr double kMasked = -1e30;

std::string layer(std::size_t l) { return "fus.L" + std::to_string(l); }

Tensor block_mask(std::size_t n) {
  const std::size_t rows = 5 * n;
  Tensor m(rows, rows, kMasked);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < rows; ++c)
      if (r % n == c % n) m(r, c) = 0.0;
  return m;
}

Var layer_norm(const BoundParams& p, const std::string& prefix, const Var& x, double eps) {
  return add(mul(layer_norm_rows(x, eps), p[prefix + ".g"]), p[prefix + ".b"]);
}

}  // namespace

void init_params(ParamStore& store, std::size_t d, std::size_t df, std::size_t layers,
                 std::size_t classes, Rng& rng, bool transformer) {
  if (transformer) {
    Linear::init(store, "fus.proj_com", d, df, rng);
    for (std::size_t m = 0; m < kNumModalities; ++m)
      Linear::init(store, std::string("fus.proj.") + kTag[m], d, df, rng);
    store.add_uniform("fus.token", 1, df, df, rng);
    for (const char* t : {"com", "t", "a", "v"})
      store.add_uniform(std::string("fus.type.") + t, 1, df, df, rng);
    for (std::size_t l = 0; l < layers; ++l) {
      const std::string pre = layer(l);
      for (const char* w : {".wq", ".wk", ".wv"}) store.add_uniform(pre + w, df, df, df, rng);
      Linear::init(store, pre + ".out", df, df, rng);
      store.add(pre + ".ln1.g", Tensor::ones(1, df));
      store.add(pre + ".ln1.b", Tensor::zeros(1, df));
      Linear::init(store, pre + ".ff1", df, 4 * df, rng);
      Linear::init(store, pre + ".ff2", 4 * df, df, rng);
      store.add(pre + ".ln2.g", Tensor::ones(1, df));
      store.add(pre + ".ln2.b", Tensor::zeros(1, df));
    }
  } else {
    Linear::init(store, "fus.direct", 4 * d, df, rng);
  }
  Linear::init(store, "cls.l1", df, df, rng);
  Linear::init(store, "cls.l2", df, classes, rng);
}

Var build_tokens(const BoundParams& p, const Var& h_com, const Var& s_bar) {
  const std::size_t n = h_com.rows();
  if (s_bar.rows() != kNumModalities * n) {
    throw ShapeError("build_tokens: shared rows " + std::to_string(n) + " vs private rows " +
                     std::to_string(s_bar.rows()));
  }
  Tape& t = *h_com.tape();
  std::vector<Var> blocks;
  blocks.push_back(matmul(t.constant(Tensor::ones(n, 1)), p["fus.token"]));
  blocks.push_back(add(Linear::bind(p, "fus.proj_com")(h_com), p["fus.type.com"]));
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    const std::string tag = kTag[m];
    blocks.push_back(add(Linear::bind(p, "fus.proj." + tag)(slice_rows(s_bar, m * n, n)),
                         p["fus.type." + tag]));
  }
  return concat_rows(blocks);
}

Var transformer_encode(const BoundParams& p, const Var& tokens, std::size_t n,
                       const EncoderShape& shape, std::vector<Tensor>* attention) {
  if (tokens.rows() != 5 * n) {
    throw ShapeError("transformer_encode: expected " + std::to_string(5 * n) + " tokens, got " +
                     std::to_string(tokens.rows()));
  }
  const std::size_t df = tokens.cols();
  if (shape.heads == 0 || df % shape.heads != 0) {
    throw ShapeError("transformer_encode: width " + std::to_string(df) +
                     " not divisible by heads " + std::to_string(shape.heads));
  }
  const std::size_t dh = df / shape.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Tape& t = *tokens.tape();
  Var mask = t.constant(block_mask(n));

  Var x = tokens;
  for (std::size_t l = 0; l < shape.layers; ++l) {
    const std::string pre = layer(l);
    Var q = matmul(x, p[pre + ".wq"]);
    Var k = matmul(x, p[pre + ".wk"]);
    Var v = matmul(x, p[pre + ".wv"]);
    std::vector<Var> heads;
    for (std::size_t h = 0; h < shape.heads; ++h) {
      Var qh = slice_cols(q, h * dh, dh);
      Var kh = slice_cols(k, h * dh, dh);
      Var vh = slice_cols(v, h * dh, dh);
      Var a = softmax_rows(add(scale(matmul(qh, transpose(kh)), inv_sqrt), mask));
      if (attention) attention->push_back(a.value());
      heads.push_back(matmul(a, vh));
    }
    Var attn = Linear::bind(p, pre + ".out")(concat_cols(heads));
    x = layer_norm(p, pre + ".ln1", add(x, attn), shape.layer_norm_eps);
    Var ff = Linear::bind(p, pre + ".ff2")(relu(Linear::bind(p, pre + ".ff1")(x)));
    x = layer_norm(p, pre + ".ln2", add(x, ff), shape.layer_norm_eps);
  }
  return x;
}

Var fused_tokens(const Var& encoded, std::size_t n) { return slice_rows(encoded, 0, n); }

Var direct_fusion(const BoundParams& p, const Var& h_com, const Var& s_bar) {
  const std::size_t n = h_com.rows();
  return Linear::bind(p, "fus.direct")(concat_cols(
      {h_com, slice_rows(s_bar, 0, n), slice_rows(s_bar, n, n), slice_rows(s_bar, 2 * n, n)}));
}

Var classifier_logits(const BoundParams& p, const Var& u) {
  return Linear::bind(p, "cls.l2")(relu(Linear::bind(p, "cls.l1")(u)));
}

std::vector<std::size_t> argmax_rows(const Tensor& m) {
  std::vector<std::size_t> out(m.rows(), 0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 1; j < m.cols(); ++j)
      if (m(i, j) > m(i, out[i])) out[i] = j;
  return out;
}

Classification classify(const Tensor& logits) {
  Classification c;
  c.probs = Tensor(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double mx = logits(i, 0);
    for (double v : logits.row_span(i)) mx = std::max(mx, v);
    double s = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) s += (c.probs(i, j) = std::exp(logits(i, j) - mx));
    for (std::size_t j = 0; j < logits.cols(); ++j) c.probs(i, j) /= s;
  }
  c.labels = argmax_rows(logits);
  return c;
}

Var loss_cls(const Var& log_probs, const std::vector<std::size_t>& labels) {
  if (labels.size() != log_probs.rows()) {
    throw ShapeError("loss_cls: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(log_probs.rows()) + " rows");
  }
  std::vector<std::pair<std::size_t, std::size_t>> idx;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= log_probs.cols()) throw Error("loss_cls: label out of range");
    idx.emplace_back(i, labels[i]);
  }
  return scale(sum(gather(log_probs, idx)), -1.0 / static_cast<double>(labels.size()));
}

Var loss_total(const Var& cls, const Var& dec, const Var& cl, const Var& prt, const LossWeights& w) {
  return add(add(cls, scale(dec, w.lambda1)), add(scale(cl, w.lambda2), scale(prt, w.lambda3)));
}

}  // namespace merc::fusion
