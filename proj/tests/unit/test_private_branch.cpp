#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "merc/eig.hpp"
#include "merc/error.hpp"
#include "merc/layers.hpp"
#include "merc/private_branch.hpp"
#include "test_util.hpp"

using namespace merc;
using namespace merc::priv;
using merc::test::random_tensor;

namespace {

std::vector<std::size_t> random_speakers(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> s(n);
  for (auto& v : s) v = rng.below(k);
  return s;
}

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m(i, j) = t(i, j);
  return m;
}

// Dense formula with zero-degree columns removed, built independently.
Eigen::MatrixXd laplacian_oracle(const std::vector<Edge>& edges, std::size_t nodes) {
  std::vector<std::size_t> deg(nodes, 0);
  for (auto [p, q] : edges) ++deg[p], ++deg[q];
  std::vector<std::size_t> keep;
  for (std::size_t p = 0; p < nodes; ++p)
    if (deg[p] > 0) keep.push_back(p);
  const auto m = static_cast<Eigen::Index>(edges.size());
  const auto k = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, k);
  Eigen::VectorXd de(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    de(c) = static_cast<double>(deg[keep[c]]);
    for (Eigen::Index e = 0; e < m; ++e)
      if (edges[e].p == keep[c] || edges[e].q == keep[c]) h(e, c) = 1.0;
  }
  const Eigen::VectorXd dv = h.rowwise().sum();
  const Eigen::MatrixXd dv_is = dv.cwiseSqrt().cwiseInverse().asDiagonal();
  return Eigen::MatrixXd::Identity(m, m) -
         dv_is * h * de.cwiseInverse().asDiagonal() * h.transpose() * dv_is;
}

}  // namespace

TEST(SpeakerInjection, ZeroTableIsIdentity) {
  Rng rng(1);
  Tape t;
  const Tensor x = random_tensor(6, 3, rng);
  const Var out = inject_speaker(t.constant(x), {0, 1}, t.constant(Tensor(2, 3)));
  EXPECT_EQ(out.value(), x);
}

TEST(SpeakerInjection, RowsShiftedBySpeakerEmbedding) {
  Rng rng(2);
  Tape t;
  const Tensor x = random_tensor(9, 2, rng);
  const Tensor table = Tensor::from_rows({{1.0, -2.0}, {0.5, 3.0}});
  const std::vector<std::size_t> spk{1, 0, 1};
  const Var out = inject_speaker(t.constant(x), spk, t.constant(table));
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        EXPECT_DOUBLE_EQ(out.value()(m * 3 + i, j), x(m * 3 + i, j) + table(spk[i], j));
}

TEST(SpeakerInjection, OutOfRangeSpeakerRejected) {
  Tape t;
  EXPECT_THROW(inject_speaker(t.constant(Tensor(3, 2)), {2}, t.constant(Tensor(2, 2))), Error);
}

TEST(SpeakerGraph, SingleUtteranceHasNoEdges) {
  EXPECT_TRUE(build_speaker_graph({0}, 3, 1).empty());
  EXPECT_TRUE(build_structure({0}, 3, 1, 1500).fallback);
}

TEST(SpeakerGraph, ThreeTurnExample) {
  const auto e = build_speaker_graph({0, 1, 0}, 2, 1);
  ASSERT_EQ(e.size(), 9u);
  for (std::size_t m = 0; m < 3; ++m) {
    const std::size_t o = 3 * m;
    std::vector<Edge> block(e.begin() + 3 * m, e.begin() + 3 * m + 3);
    EXPECT_EQ(block, (std::vector<Edge>{{o + 0, o + 1}, {o + 0, o + 2}, {o + 1, o + 2}}));
  }
}

TEST(SpeakerGraph, SingleSpeakerHasNoCrossEdges) {
  const auto e = build_speaker_graph({0, 0, 0, 0, 0}, 1, 4);
  for (const auto& ed : e) EXPECT_EQ(ed.q - ed.p, 1u);
  EXPECT_EQ(e.size(), 12u);
}

// Enumeration oracle of the edge rule.
TEST(SpeakerGraph, MatchesDefinition) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    const auto spk = random_speakers(n, 3, rng);
    const std::size_t ws = rng.below(4), wc = rng.below(3);
    const auto edges = build_speaker_graph(spk, ws, wc);
    std::size_t expected = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        expected += (spk[i] == spk[j] && j - i <= ws) || (spk[i] != spk[j] && j - i <= wc);
    EXPECT_EQ(edges.size(), 3 * expected);
    for (const auto& ed : edges) {
      EXPECT_LT(ed.p, ed.q);
      EXPECT_EQ(ed.p / n, ed.q / n);  // same modality block
    }
  }
}

TEST(DualHypergraph, PathFixture) {
  const auto hg = dual_transform({{0, 1}, {1, 2}}, 3);
  EXPECT_EQ(hg.incidence, Tensor::from_rows({{1, 1, 0}, {0, 1, 1}}));
  EXPECT_EQ(hg.edge_degree, (std::vector<double>{1, 2, 1}));
  EXPECT_EQ(hg.vertex_degree, (std::vector<double>{2, 2}));
  const Tensor l = hypergraph_laplacian(hg);
  EXPECT_LT((to_eigen(l) - laplacian_oracle(hg.edges, 3)).cwiseAbs().maxCoeff(), 1e-15);
  const auto e = symmetric_eig(l);
  EXPECT_GE(e.values.front(), -1e-12);
  EXPECT_LE(e.values.back(), 2.0 + 1e-12);
}

TEST(DualHypergraph, EmptyEdgeSetRejected) { EXPECT_THROW(dual_transform({}, 3), Error); }

TEST(DualHypergraph, SingleEdgeLaplacianIsZero) {
  const auto hg = dual_transform({{0, 1}}, 2);
  const Tensor l = hypergraph_laplacian(hg);
  EXPECT_NEAR(l(0, 0), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(laplacian_lambda_max(l, 1500), 1.0);  // degenerate fallback
}

TEST(DualHypergraph, DualFeaturesAverageEndpoints) {
  Rng rng(4);
  Tape t;
  const Tensor x = random_tensor(4, 3, rng);
  const auto hg = dual_transform({{0, 1}, {2, 3}, {1, 3}}, 4);
  const Var xs = dual_vertex_features(hg, t.constant(x));
  ASSERT_EQ(xs.rows(), 3u);
  for (std::size_t e = 0; e < 3; ++e)
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_DOUBLE_EQ(xs.value()(e, j), 0.5 * (x(hg.edges[e].p, j) + x(hg.edges[e].q, j)));
}

TEST(DualHypergraph, InvariantsOnRandomGraphs) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(8);
    const auto edges = build_speaker_graph(random_speakers(n, 3, rng), 1 + rng.below(3), rng.below(2));
    if (edges.empty()) continue;
    const auto hg = dual_transform(edges, 3 * n);
    std::vector<double> deg(3 * n, 0.0);
    for (auto [p, q] : edges) deg[p] += 1, deg[q] += 1;
    EXPECT_EQ(hg.edge_degree, deg);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      double row = 0.0;
      for (std::size_t p = 0; p < 3 * n; ++p) row += hg.incidence(e, p);
      EXPECT_EQ(row, 2.0);
      EXPECT_EQ(hg.vertex_degree[e], 2.0);
    }
    const Tensor l = hypergraph_laplacian(hg);
    EXPECT_LT((to_eigen(l) - laplacian_oracle(edges, 3 * n)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(l, Tensor(kernels::transpose(l)));
    const auto e = symmetric_eig(l);
    EXPECT_GE(e.values.front(), -1e-9);
    EXPECT_LE(e.values.back(), 2.0 + 1e-9);
  }
}

TEST(DualHypergraph, NullSpaceWhenHyperedgeDegreesEqual) {
  // A 4-cycle within one modality: every node has degree 2.
  const auto hg = dual_transform({{0, 1}, {1, 2}, {2, 3}, {0, 3}}, 4);
  const Tensor l = hypergraph_laplacian(hg);
  Tensor v(4, 1);
  for (std::size_t e = 0; e < 4; ++e) v(e, 0) = std::sqrt(hg.vertex_degree[e]);
  EXPECT_LT(kernels::max_abs(kernels::matmul(l, v)), 1e-12);
}

TEST(Jacobi, ScalarLegendreValues) {
  EXPECT_EQ(jacobi_value(2, 0.0, 0.0, 0.5), (3 * 0.25 - 1) / 2);
  EXPECT_EQ(jacobi_value(0, 0.3, 0.1, 0.7), 1.0);
  EXPECT_DOUBLE_EQ(jacobi_value(1, 0.0, 0.0, -0.4), -0.4);
  for (double x = -1.0; x <= 1.0; x += 0.25) {
    EXPECT_NEAR(jacobi_value(3, 0, 0, x), 0.5 * (5 * x * x * x - 3 * x), 1e-14);
    EXPECT_NEAR(jacobi_value(4, 0, 0, x), (35 * std::pow(x, 4) - 30 * x * x + 3) / 8, 1e-14);
  }
}

TEST(Jacobi, GeneralParametersMatchExplicitForms) {
  // P_1 and P_2 from the closed forms of Jacobi polynomials.
  const double a = 0.5, b = -0.3;
  for (double x = -1.0; x <= 1.0; x += 0.2) {
    EXPECT_NEAR(jacobi_value(1, a, b, x), 0.5 * ((a - b) + (a + b + 2) * x), 1e-14);
    const double p2 = (a + 1) * (a + 2) / 2 + (a + 2) * (a + b + 3) * (x - 1) / 2 +
                      (a + b + 3) * (a + b + 4) * (x - 1) * (x - 1) / 8;
    EXPECT_NEAR(jacobi_value(2, a, b, x), p2, 1e-13);
  }
}

TEST(Jacobi, MatrixRecurrenceMatchesScalarOnEigenvectors) {
  const auto st = build_structure({0, 1, 0, 0, 1}, 3, 1, 1500);
  const auto e = symmetric_eig(st.rescaled);
  const std::size_t m = st.rescaled.rows();
  Tape t;
  for (std::size_t k = 0; k < m; ++k) {
    Tensor v(m, 1);
    for (std::size_t i = 0; i < m; ++i) v(i, 0) = e.vectors(i, k);
    std::vector<Var> w1;
    for (std::size_t r = 0; r <= 5; ++r) w1.push_back(t.constant(Tensor::identity(1)));
    const auto z = jacobi_filter_bank(st.rescaled, t.constant(v), w1, 0.0, 0.0);
    for (std::size_t r = 0; r <= 5; ++r) {
      const double pr = jacobi_value(r, 0.0, 0.0, e.values[k]);
      for (std::size_t i = 0; i < m; ++i) EXPECT_NEAR(z[r].value()(i, 0), pr * v(i, 0), 1e-8);
    }
  }
}

TEST(Jacobi, FirstOrderIsRescaledLaplacianForLegendre) {
  Rng rng(7);
  const auto st = build_structure({0, 1, 1}, 2, 1, 1500);
  const std::size_t m = st.rescaled.rows();
  const Tensor x = random_tensor(m, 3, rng), w = random_tensor(3, 3, rng);
  Tape t;
  const auto z = jacobi_filter_bank(st.rescaled, t.constant(x), {t.constant(w), t.constant(w)}, 0, 0);
  EXPECT_LT(kernels::max_abs_diff(z[1].value(), kernels::matmul(kernels::matmul(st.rescaled, x), w)),
            1e-13);
}

TEST(Attention, SingleFilterHasUnitWeight) {
  Rng rng(8);
  ParamStore s;
  Linear::init(s, "h", 3, 3, rng);
  s.add_uniform("a", 3, 1, 3, rng);
  Tape t;
  BoundParams p(t, s);
  const Tensor z0 = random_tensor(4, 3, rng);
  const auto out = attention_fuse({t.constant(z0)}, Linear::bind(p, "h"), p["a"]);
  for (std::size_t e = 0; e < 4; ++e) EXPECT_DOUBLE_EQ(out.weights.value()(e, 0), 1.0);
  for (std::size_t i = 0; i < z0.size(); ++i) EXPECT_DOUBLE_EQ(out.fused.value()[i], std::tanh(z0[i]));
}

TEST(Attention, IdenticalFiltersShareWeightEvenly) {
  Rng rng(9);
  ParamStore s;
  Linear::init(s, "h", 3, 3, rng);
  s.add_uniform("a", 3, 1, 3, rng);
  Tape t;
  BoundParams p(t, s);
  const Tensor z0 = random_tensor(5, 3, rng);
  const Var z = t.constant(z0);
  const auto out = attention_fuse({z, z, z, z}, Linear::bind(p, "h"), p["a"]);
  for (std::size_t e = 0; e < 5; ++e) {
    double sum = 0;
    for (std::size_t r = 0; r < 4; ++r) {
      EXPECT_NEAR(out.weights.value()(e, r), 0.25, 1e-15);
      sum += out.weights.value()(e, r);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  for (std::size_t i = 0; i < z0.size(); ++i) EXPECT_NEAR(out.fused.value()[i], std::tanh(z0[i]), 1e-14);
}

TEST(ProjectBack, PathFixtureAveragesIncidentDuals) {
  const auto hg = dual_transform({{0, 1}, {1, 2}}, 4);  // node 3 isolated
  Tape t;
  const Tensor s = Tensor::from_rows({{1, 2}, {3, 6}});
  const Var back = project_back(hg, t.constant(s));
  EXPECT_EQ(back.value(), Tensor::from_rows({{1, 2}, {2, 4}, {3, 6}, {0, 0}}));
  EXPECT_EQ(project_back(hg, t.constant(Tensor(2, 2))).value(), Tensor(4, 2));
}

TEST(PrivateFuse, ZeroInputZeroBiasAndShape) {
  Rng rng(10);
  ParamStore s;
  init_params(s, 4, 2, 2, rng);
  s.at("prt.fuse.b") = Tensor(1, 4);
  Tape t;
  BoundParams p(t, s);
  const Var h = fuse(p, t.constant(Tensor(9, 4)));
  EXPECT_EQ(h.value(), Tensor(3, 4));
}

TEST(PrivateLosses, ConsistencyClosedForms) {
  Tape t;
  const Tensor same = Tensor::from_rows({{1, 2}, {1, 2}, {1, 2}});
  EXPECT_EQ(loss_cons(t.constant(same), {0, 0, 1}).item(), 0.0);
  EXPECT_DOUBLE_EQ(loss_cons(t.constant(Tensor::from_rows({{1, 2}, {1, 3}})), {4, 4}).item(), 1.0);
  EXPECT_EQ(loss_cons(t.constant(Tensor::from_rows({{1, 2}, {5, 3}})), {0, 1}).item(), 0.0);
}

TEST(PrivateLosses, CombinationClosedForms) {
  Tape t;
  auto s = [&](double v) { return t.constant(Tensor::scalar(v)); };
  EXPECT_EQ(loss_prt(s(0), s(0), 0.5).item(), 0.0);
  EXPECT_DOUBLE_EQ(loss_prt(s(1), s(2), 0.5).item(), 2.0);
  EXPECT_DOUBLE_EQ(loss_prt(s(1.25), s(7), 0.0).item(), 1.25);
}

TEST(PrivateBranch, FallbackPassesFeaturesThrough) {
  Rng rng(11);
  ParamStore s;
  init_params(s, 3, 2, 3, rng);
  const auto st = build_structure({1}, 3, 1, 1500);
  Tape t;
  BoundParams p(t, s);
  const Tensor x = random_tensor(3, 3, rng);
  const auto out = forward(p, st, t.constant(x), {1}, 0, 0, 3);
  EXPECT_EQ(out.s_bar.value(), out.x_tilde.value());
  EXPECT_FALSE(out.attention.valid());
}

TEST(PrivateBranch, RelabelingEquivariance) {
  // Reversing turn order maps the speaker graph onto itself with reversed labels.
  Rng rng(12);
  ParamStore s;
  const std::size_t n = 4, d = 3;
  init_params(s, d, 2, 3, rng);
  const std::vector<std::size_t> spk{0, 1, 1, 0}, spk_rev{0, 1, 1, 0};
  const Tensor x = random_tensor(3 * n, d, rng);
  Tensor xr(3 * n, d);
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) xr(m * n + i, j) = x(m * n + (n - 1 - i), j);
  const auto st = build_structure(spk, 3, 1, 1500);
  const auto st_rev = build_structure(spk_rev, 3, 1, 1500);
  Tape t;
  BoundParams p(t, s);
  const Var h = fuse(p, forward(p, st, t.constant(x), spk, 0, 0, 3).s_bar);
  const Var hr = fuse(p, forward(p, st_rev, t.constant(xr), spk_rev, 0, 0, 3).s_bar);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(hr.value()(i, j), h.value()(n - 1 - i, j), 1e-10);
}

TEST(PrivateBranch, GradientMatchesFiniteDifferences) {
  Rng rng(13);
  ParamStore s;
  const std::size_t d = 4;
  const std::vector<std::size_t> spk{0, 1, 0, 1};
  init_params(s, d, 2, 3, rng);
  s.add("x", random_tensor(12, d, rng, -1.0, 1.0));
  const auto st = build_structure(spk, 3, 1, 1500);
  auto loss = [&](const BoundParams& p) {
    const auto out = forward(p, st, p["x"], spk, 0.0, 0.0, 3);
    return loss_prt(loss_rec_prt(p, out.x_tilde, out.s_bar), loss_cons(fuse(p, out.s_bar), spk), 0.5);
  };
  const auto rep = merc::test::check_store(s, loss, 400, 1e-5);
  EXPECT_LT(rep.max_rel_error, 1e-5) << rep.worst_param << "[" << rep.worst_index << "] "
                                     << rep.worst_analytic << " vs " << rep.worst_numeric;
}
