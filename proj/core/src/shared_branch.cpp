#include "merc/shared_branch.hpp"

#include <cmath>
#include <mutex>

#include "merc/data.hpp"
#include "merc/error.hpp"
#include "merc/layers.hpp"

namespace merc::shared {

Tensor build_adjacency(std::size_t n, std::size_t k) {
  if (n == 0 || k == 0) throw Error("build_adjacency: N and k must be >= 1");
  Tensor a(kNumModalities * n, kNumModalities * n);
  for (std::size_t m = 0; m < kNumModalities; ++m)
    for (std::size_t m2 = 0; m2 < kNumModalities; ++m2)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t gap = i > j ? i - j : j - i;
          const bool edge = (m == m2) ? gap < k : i == j;
          if (edge) a(m * n + i, m2 * n + j) = 1.0;
        }
  return a;
}

SharedGraph normalize_and_decompose(const Tensor& adjacency, const EigOptions& opts) {
  const std::size_t nodes = adjacency.rows();
  if (adjacency.cols() != nodes || nodes % kNumModalities != 0) {
    throw ShapeError("shared graph adjacency must be 3N x 3N, got " + adjacency.shape_str());
  }
  SharedGraph g;
  g.utterances = nodes / kNumModalities;
  g.adjacency = adjacency;
  std::vector<double> inv_sqrt_deg(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    double deg = 0.0;
    for (double v : adjacency.row_span(i)) deg += v;
    if (!(deg > 0.0)) throw Error("shared graph node " + std::to_string(i) + " has zero degree");
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  g.normalized = Tensor(nodes, nodes);
  g.laplacian = Tensor(nodes, nodes);
  for (std::size_t i = 0; i < nodes; ++i)
    for (std::size_t j = 0; j < nodes; ++j) {
      const double v = inv_sqrt_deg[i] * adjacency(i, j) * inv_sqrt_deg[j];
      g.normalized(i, j) = v;
      g.laplacian(i, j) = (i == j ? 1.0 : 0.0) - v;
    }
  // Products above are symmetric up to operand order; force exact symmetry.
  for (std::size_t i = 0; i < nodes; ++i)
    for (std::size_t j = i + 1; j < nodes; ++j) {
      g.normalized(j, i) = g.normalized(i, j);
      g.laplacian(j, i) = g.laplacian(i, j);
    }
  g.eig = symmetric_eig(g.laplacian, opts);
  for (double& l : g.eig.values) {
    if (l < 0.0 && l >= -1e-9) l = 0.0;
    if (l > 2.0 && l <= 2.0 + 1e-9) l = 2.0;
  }
  return g;
}

SpectralOperators spectral_operators(const SharedGraph& g, double tau_low, double tau_high) {
  const Tensor& u = g.eig.vectors;
  const std::size_t n = u.rows();
  Tensor ul = u, uh = u;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      ul(i, k) *= low_pass(g.eig.values[k], tau_low);
      uh(i, k) *= high_pass(g.eig.values[k], tau_high);
    }
  return {kernels::matmul_a_bt(ul, u), kernels::matmul_a_bt(uh, u)};
}

FrequencyViews spectral_filter(const SpectralOperators& ops, const Var& x) {
  Tape& t = *x.tape();
  if (ops.low.cols() != x.rows()) {
    throw ShapeError("spectral_filter: operator " + ops.low.shape_str() + " vs features " +
                     x.value().shape_str());
  }
  return {matmul(t.constant(ops.low), x), matmul(t.constant(ops.high), x)};
}

FrequencyViews spectral_filter(const SharedGraph& g, const Var& x, double tau_low,
                               double tau_high) {
  return spectral_filter(spectral_operators(g, tau_low, tau_high), x);
}

void init_params(ParamStore& store, std::size_t d, std::size_t proj_dim, Rng& rng) {
  Linear::init(store, "shared.fuse", 6 * d, d, rng);
  Linear::init(store, "shared.head_low", d, proj_dim, rng, /*bias=*/false);
  Linear::init(store, "shared.head_high", d, proj_dim, rng, /*bias=*/false);
}

Var fuse(const BoundParams& p, const FrequencyViews& views) {
  const std::size_t n = views.low.rows() / kNumModalities;
  std::vector<Var> parts;
  for (const Var* v : {&views.low, &views.high})
    for (std::size_t m = 0; m < kNumModalities; ++m) parts.push_back(slice_rows(*v, m * n, n));
  return Linear::bind(p, "shared.fuse")(concat_cols(parts));
}

Var info_nce(const Var& z_low, const Var& z_high, double temperature, double eps) {
  if (z_low.rows() != z_high.rows() || z_low.cols() != z_high.cols()) {
    throw ShapeError("info_nce: view shapes differ " + z_low.value().shape_str() + " vs " +
                     z_high.value().shape_str());
  }
  const std::size_t b = z_low.rows();
  Tape& t = *z_low.tape();
  Var sim = scale(matmul(normalize_rows(z_low, eps), transpose(normalize_rows(z_high, eps))),
                  1.0 / temperature);
  Var diag = t.constant(Tensor::identity(b));
  const double inv_b = 1.0 / static_cast<double>(b);
  Var low_to_high = scale(sum(mul(log_softmax_rows(sim), diag)), -inv_b);
  Var high_to_low = scale(sum(mul(log_softmax_rows(transpose(sim)), diag)), -inv_b);
  return add(low_to_high, high_to_low);
}

Var contrastive_loss(const BoundParams& p, const FrequencyViews& views, double temperature,
                     double eps) {
  Var zl = Linear::bind(p, "shared.head_low", false)(views.low);
  Var zh = Linear::bind(p, "shared.head_high", false)(views.high);
  return info_nce(zl, zh, temperature, eps);
}

std::shared_ptr<const SharedGraph> GraphCache::get(std::size_t n, std::size_t k) {
  const auto key = std::make_pair(n, k);
  {
    std::shared_lock lock(mu_);
    auto it = graphs_.find(key);
    if (it != graphs_.end()) return it->second;
  }
  auto g = std::make_shared<const SharedGraph>(normalize_and_decompose(build_adjacency(n, k), opts_));
  std::unique_lock lock(mu_);
  auto [it, inserted] = graphs_.emplace(key, std::move(g));
  return it->second;
}

std::size_t GraphCache::size() const {
  std::shared_lock lock(mu_);
  return graphs_.size();
}

}  // namespace merc::shared
