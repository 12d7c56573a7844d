#include "merc/private_branch.hpp"

#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

#include "merc/data.hpp"
#include "merc/eig.hpp"
#include "merc/error.hpp"

namespace merc::priv {

namespace {
constexpr const char* kTag[kNumModalities] = {"t", "a", "v"};
}

Var inject_speaker(const Var& x_prt, const std::vector<std::size_t>& speakers,
                   const Var& speaker_table) {
  const std::size_t n = speakers.size();
  const std::size_t k = speaker_table.rows();
  if (x_prt.rows() != kNumModalities * n) {
    throw ShapeError("inject_speaker: expected " + std::to_string(kNumModalities * n) +
                     " rows, got " + std::to_string(x_prt.rows()));
  }
  Tensor onehot(kNumModalities * n, k);
  for (std::size_t i = 0; i < n; ++i) {
    if (speakers[i] >= k) {
      throw Error("inject_speaker: speaker id " + std::to_string(speakers[i]) +
                  " out of range [0," + std::to_string(k) + ")");
    }
    for (std::size_t m = 0; m < kNumModalities; ++m) onehot(m * n + i, speakers[i]) = 1.0;
  }
  return add(x_prt, matmul(x_prt.tape()->constant(std::move(onehot)), speaker_table));
}

std::vector<Edge> build_speaker_graph(const std::vector<std::size_t>& speakers, std::size_t w_same,
                                      std::size_t w_cross) {
  const std::size_t n = speakers.size();
  std::vector<Edge> edges;
  for (std::size_t m = 0; m < kNumModalities; ++m)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const std::size_t gap = j - i;
        const bool same = speakers[i] == speakers[j];
        if ((same && gap <= w_same) || (!same && gap <= w_cross))
          edges.push_back({m * n + i, m * n + j});
      }
  return edges;
}

DualHypergraph dual_transform(const std::vector<Edge>& edges, std::size_t nodes) {
  if (edges.empty()) throw Error("dual_transform: graph has no edges");
  DualHypergraph hg;
  hg.nodes = nodes;
  hg.edges = edges;
  const std::size_t m = edges.size();
  hg.incidence = Tensor(m, nodes);
  hg.hyperedge_weight.assign(nodes, 1.0);
  hg.vertex_degree.assign(m, 0.0);
  hg.edge_degree.assign(nodes, 0.0);
  for (std::size_t e = 0; e < m; ++e) {
    const auto [p, q] = edges[e];
    if (p >= nodes || q >= nodes || p == q) {
      throw Error("dual_transform: invalid edge (" + std::to_string(p) + ", " +
                  std::to_string(q) + ")");
    }
    hg.incidence(e, p) = 1.0;
    hg.incidence(e, q) = 1.0;
  }
  for (std::size_t e = 0; e < m; ++e)
    for (std::size_t p = 0; p < nodes; ++p) {
      hg.vertex_degree[e] += hg.hyperedge_weight[p] * hg.incidence(e, p);
      hg.edge_degree[p] += hg.incidence(e, p);
    }
  return hg;
}

Var dual_vertex_features(const DualHypergraph& hg, const Var& x_tilde) {
  Tensor avg = hg.incidence;
  for (double& v : avg.data()) v *= 0.5;
  return matmul(x_tilde.tape()->constant(std::move(avg)), x_tilde);
}

Tensor hypergraph_laplacian(const DualHypergraph& hg) {
  const std::size_t m = hg.dual_vertices();
  for (std::size_t e = 0; e < m; ++e) {
    double deg = 0.0;
    for (std::size_t p = 0; p < hg.nodes; ++p)
      if (hg.retained(p)) deg += hg.hyperedge_weight[p] * hg.incidence(e, p);
    if (!(deg > 0.0)) {
      throw Error("hypergraph_laplacian: dual vertex " + std::to_string(e) + " has zero degree");
    }
  }
  Tensor lap(m, m);
  for (std::size_t e = 0; e < m; ++e)
    for (std::size_t f = e; f < m; ++f) {
      double s = 0.0;
      for (std::size_t p = 0; p < hg.nodes; ++p) {
        if (!hg.retained(p)) continue;
        s += hg.incidence(e, p) * hg.hyperedge_weight[p] * hg.incidence(f, p) / hg.edge_degree[p];
      }
      s /= std::sqrt(hg.vertex_degree[e] * hg.vertex_degree[f]);
      const double v = (e == f ? 1.0 : 0.0) - s;
      lap(e, f) = v;
      lap(f, e) = v;
    }
  return lap;
}

double laplacian_lambda_max(const Tensor& laplacian, std::size_t eig_cap) {
  double lmax = 2.0;
  if (laplacian.rows() <= eig_cap) {
    EigOptions opts;
    opts.size_cap = eig_cap;
    lmax = symmetric_eig(laplacian, opts).values.back();
  }
  if (lmax <= 1e-12) {
    spdlog::debug("hypergraph Laplacian is degenerate (lambda_max={}); using lambda_max=1", lmax);
    lmax = 1.0;
  }
  return lmax;
}

Tensor rescale_laplacian(const Tensor& laplacian, double lambda_max) {
  Tensor out = laplacian;
  const double s = 2.0 / lambda_max;
  for (double& v : out.data()) v *= s;
  for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) -= 1.0;
  return out;
}

namespace {

// Coefficients of P_{n+1} = ((c1 + c2 x) P_n - c3 P_{n-1}) / c0, n >= 1.
struct Recurrence {
  double c0, c1, c2, c3;
};

Recurrence jacobi_recurrence(std::size_t n, double a, double b) {
  const double nn = static_cast<double>(n);
  const double s = 2.0 * nn + a + b;
  return {2.0 * (nn + 1.0) * (nn + a + b + 1.0) * s, (s + 1.0) * (a * a - b * b),
          s * (s + 1.0) * (s + 2.0), 2.0 * (nn + a) * (nn + b) * (s + 2.0)};
}

}  // namespace

double jacobi_value(std::size_t r, double alpha, double beta, double x) {
  double prev = 1.0;
  if (r == 0) return prev;
  double cur = 0.5 * ((alpha - beta) + (alpha + beta + 2.0) * x);
  for (std::size_t n = 1; n < r; ++n) {
    const Recurrence c = jacobi_recurrence(n, alpha, beta);
    const double next = ((c.c1 + c.c2 * x) * cur - c.c3 * prev) / c.c0;
    prev = cur;
    cur = next;
  }
  return cur;
}

std::vector<Var> jacobi_filter_bank(const Tensor& rescaled, const Var& x_star,
                                    const std::vector<Var>& weights, double alpha, double beta) {
  if (weights.empty()) throw Error("jacobi_filter_bank: need at least one filter");
  if (rescaled.rows() != x_star.rows()) {
    throw ShapeError("jacobi_filter_bank: operator " + rescaled.shape_str() + " vs features " +
                     x_star.value().shape_str());
  }
  Tape& t = *x_star.tape();
  Var op = t.constant(rescaled);
  std::vector<Var> out;
  Var prev = x_star;
  out.push_back(matmul(prev, weights[0]));
  if (weights.size() == 1) return out;
  Var cur = add(scale(x_star, 0.5 * (alpha - beta)),
                scale(matmul(op, x_star), 0.5 * (alpha + beta + 2.0)));
  out.push_back(matmul(cur, weights[1]));
  for (std::size_t n = 1; n + 1 < weights.size(); ++n) {
    const Recurrence c = jacobi_recurrence(n, alpha, beta);
    Var next = scale(sub(add(scale(cur, c.c1), scale(matmul(op, cur), c.c2)), scale(prev, c.c3)),
                     1.0 / c.c0);
    prev = cur;
    cur = next;
    out.push_back(matmul(cur, weights[n + 1]));
  }
  return out;
}

AttentionFusion attention_fuse(const std::vector<Var>& z, const Linear& score_hidden,
                               const Var& score_vector) {
  if (z.empty()) throw Error("attention_fuse: no filter outputs");
  std::vector<Var> scores;
  for (const auto& zr : z) {
    if (zr.rows() != z[0].rows() || zr.cols() != z[0].cols()) {
      throw ShapeError("attention_fuse: filter outputs differ in shape");
    }
    scores.push_back(matmul(tanh(score_hidden(zr)), score_vector));
  }
  Var eta = softmax_rows(concat_cols(scores));
  Var acc;
  for (std::size_t r = 0; r < z.size(); ++r) {
    Var term = mul(z[r], slice_cols(eta, r, 1));
    acc = acc.valid() ? add(acc, term) : term;
  }
  return {tanh(acc), eta};
}

Tensor projection_back_operator(const DualHypergraph& hg) {
  Tensor back(hg.nodes, hg.dual_vertices());
  for (std::size_t p = 0; p < hg.nodes; ++p) {
    if (!hg.retained(p)) continue;
    for (std::size_t e = 0; e < hg.dual_vertices(); ++e)
      back(p, e) = hg.incidence(e, p) / hg.edge_degree[p];
  }
  return back;
}

Var project_back(const DualHypergraph& hg, const Var& s_star) {
  return matmul(s_star.tape()->constant(projection_back_operator(hg)), s_star);
}

Var fuse(const BoundParams& p, const Var& s_bar) {
  const std::size_t n = s_bar.rows() / kNumModalities;
  return Linear::bind(p, "prt.fuse")(
      concat_cols({slice_rows(s_bar, 0, n), slice_rows(s_bar, n, n), slice_rows(s_bar, 2 * n, n)}));
}

Var loss_cons(const Var& h_prt, const std::vector<std::size_t>& speakers) {
  const std::size_t n = speakers.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (speakers[i] == speakers[j]) pairs.emplace_back(i, j);
  Tape& t = *h_prt.tape();
  if (pairs.empty()) return t.constant(Tensor::scalar(0.0));
  Tensor diff(pairs.size(), n);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    diff(k, pairs[k].first) = 1.0;
    diff(k, pairs[k].second) = -1.0;
  }
  return scale(sq_norm(matmul(t.constant(std::move(diff)), h_prt)),
               1.0 / static_cast<double>(pairs.size()));
}

Var loss_rec_prt(const BoundParams& p, const Var& x_tilde, const Var& s_bar) {
  const std::size_t n = x_tilde.rows() / kNumModalities;
  Var total;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    const TanhMlp dec = TanhMlp::bind(p, std::string("prt.dec.") + kTag[m]);
    Var e = sq_norm(sub(slice_rows(x_tilde, m * n, n), dec(slice_rows(s_bar, m * n, n))));
    total = total.valid() ? add(total, e) : e;
  }
  return scale(total, 1.0 / (3.0 * static_cast<double>(n)));
}

Var loss_prt(const Var& rec, const Var& cons, double beta) { return add(rec, scale(cons, beta)); }

PrivateStructure build_structure(const std::vector<std::size_t>& speakers, std::size_t w_same,
                                 std::size_t w_cross, std::size_t eig_cap) {
  PrivateStructure st;
  st.edges = build_speaker_graph(speakers, w_same, w_cross);
  if (st.edges.empty()) {
    st.fallback = true;
    return st;
  }
  st.hypergraph = dual_transform(st.edges, kNumModalities * speakers.size());
  st.laplacian = hypergraph_laplacian(st.hypergraph);
  st.lambda_max = laplacian_lambda_max(st.laplacian, eig_cap);
  st.rescaled = rescale_laplacian(st.laplacian, st.lambda_max);
  st.back = projection_back_operator(st.hypergraph);
  return st;
}

BranchOutput forward(const BoundParams& p, const PrivateStructure& st, const Var& x_prt,
                     const std::vector<std::size_t>& speakers, double jacobi_alpha,
                     double jacobi_beta, std::size_t order, bool run_filters) {
  BranchOutput out;
  out.x_tilde = inject_speaker(x_prt, speakers, p["prt.spk"]);
  if (!run_filters || st.fallback) {
    out.s_bar = out.x_tilde;
    return out;
  }
  Var x_star = dual_vertex_features(st.hypergraph, out.x_tilde);
  std::vector<Var> weights;
  for (std::size_t r = 0; r <= order; ++r) weights.push_back(p["prt.jacobi.w" + std::to_string(r)]);
  const auto z = jacobi_filter_bank(st.rescaled, x_star, weights, jacobi_alpha, jacobi_beta);
  const AttentionFusion att =
      attention_fuse(z, Linear::bind(p, "prt.att.hidden"), p["prt.att.score.w"]);
  out.attention = att.weights;
  Tape& t = *x_prt.tape();
  out.s_bar = matmul(t.constant(st.back), att.fused);
  return out;
}

void init_params(ParamStore& store, std::size_t d, std::size_t speakers, std::size_t order,
                 Rng& rng, bool with_filters) {
  store.add_uniform("prt.spk", speakers, d, speakers, rng);
  if (!with_filters) return;
  for (std::size_t r = 0; r <= order; ++r)
    store.add_uniform("prt.jacobi.w" + std::to_string(r), d, d, d, rng);
  Linear::init(store, "prt.att.hidden", d, d, rng);
  Linear::init(store, "prt.att.score", d, 1, rng, /*bias=*/false);
  Linear::init(store, "prt.fuse", 3 * d, d, rng);
  for (std::size_t m = 0; m < kNumModalities; ++m)
    TanhMlp::init(store, std::string("prt.dec.") + kTag[m], d, d, d, rng);
}

}  // namespace merc::priv
