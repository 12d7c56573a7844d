// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "merc/disentangle.hpp"
#include "merc/eig.hpp"
#include "merc/fusion.hpp"
#include "merc/private_branch.hpp"
#include "merc/shared_branch.hpp"
#include "merc/trainer.hpp"

using namespace merc;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_asymmetry(const Tensor& a) { return kernels::max_abs_diff(a, kernels::transpose(a)); }

Outcome gradient_fidelity() {
  Outcome o;
  const auto t0 = Clock::now();
  Config c;
  c.synth_conversations = 2;
  const Dataset d = synth_generate(synth_spec(c));
  GradCheckOptions opts;
  opts.step = 1e-6;
  opts.samples = 256;
  const GradCheckReport r = gradient_check(c, d, opts);
  const double secs = seconds_since(t0);
  const std::string info = "max_rel_err=" + fmt("%.3e", r.max_rel_error) + " samples=" + std::to_string(r.checked) +
             " worst=" + r.worst_param + "[" + std::to_string(r.worst_index) + "] analytic=" +
             fmt("%.6e", r.worst_analytic) + " numeric=" + fmt("%.6e", r.worst_numeric) +
             " time=" + fmt("%.1fs", secs);
  o.require(r.checked >= 200, "fewer than 200 samples");
  o.require(r.max_rel_error < 1e-5, "relative error above 1e-5");
  o.require(secs < 300.0, "runtime above 5 min");
  o.detail = (o.pass ? "" : o.detail + " | ") + info;
  return o;
}

Outcome spectral_invariants() {
  Outcome o;
  Rng rng(2);
  double worst_sym = 0, worst_rec = 0, lo = 0, hi = 0, worst_min = -1;
  for (int g = 0; g < 50; ++g) {
    const std::size_t n = 1 + rng.below(12), k = 1 + rng.below(4);
    const auto sg = shared::normalize_and_decompose(shared::build_adjacency(n, k));
    worst_sym = std::max(worst_sym, max_asymmetry(sg.laplacian));
    worst_rec = std::max(worst_rec, reconstruction_residual(sg.eig, sg.laplacian));
    lo = std::min(lo, sg.eig.values.front());
    hi = std::max(hi, sg.eig.values.back());
    worst_min = std::max(worst_min, sg.eig.values.front());
  }
  o.require(worst_sym == 0.0, "L not symmetric");
  o.require(lo >= -1e-9 && hi <= 2.0 + 1e-9, "eigenvalue outside [-1e-9, 2+1e-9]");
  o.require(worst_min <= 1e-9, "lambda_min above 1e-9");
  o.require(worst_rec <= 1e-8, "reconstruction above 1e-8");
  o.detail = (o.pass ? "" : o.detail + " | ") + "graphs=50 asym=" + fmt("%.1e", worst_sym) +
             " range=[" + fmt("%.3e", lo) + "," + fmt("%.12f", hi) + "] max_lambda_min=" +
             fmt("%.1e", worst_min) + " recon=" + fmt("%.1e", worst_rec);
  return o;
}

Outcome filter_sanity() {
  Outcome o;
  const auto g = shared::normalize_and_decompose(shared::build_adjacency(1, 1));
  Tensor x(3, 5);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) x(i, j) = 0.3 * static_cast<double>(j) - 0.7;
  Tape t;
  const auto v = shared::spectral_filter(g, t.constant(x), 1.0, 1.0);
  const double high = kernels::max_abs(v.high.value());
  const double low = kernels::max_abs_diff(v.low.value(), x);
  o.require(high <= 1e-9, "X_high not ~0");
  o.require(low <= 1e-9, "X_low != X");
  o.require(shared::low_pass(0.0, 1.0) == 1.0, "g_low(0) != 1");
  o.require(shared::high_pass(0.0, 1.0) == 0.0, "g_high(0) != 0");
  o.detail = (o.pass ? "" : o.detail + " | ") + "|X_high|=" + fmt("%.1e", high) +
             " |X_low-X|=" + fmt("%.1e", low);
  return o;
}

Outcome infonce_closed_forms() {
  Outcome o;
  double worst = 0;
  for (std::size_t b = 1; b <= 12; ++b) {
    Tensor z(b, 6);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < 6; ++j) z(i, j) = 0.25 * static_cast<double>(j) - 0.4;
    Tape t;
    const double l = shared::info_nce(t.constant(z), t.constant(z), 0.5).item();
    worst = std::max(worst, std::abs(l - 2.0 * std::log(static_cast<double>(b))));
    if (b == 1) o.require(std::abs(l) <= 1e-10, "B=1 not zero");
  }
  o.require(worst <= 1e-10, "2 log B not matched");
  o.detail = (o.pass ? "" : o.detail + " | ") + "B=1..12 max_err=" + fmt("%.1e", worst);
  return o;
}

Outcome dual_hypergraph_invariants() {
  Outcome o;
  Rng rng(5);
  int graphs = 0;
  double worst_sym = 0, worst_neg = 0;
  bool rows_ok = true, degree_ok = true;
  while (graphs < 50) {
    const std::size_t n = 2 + rng.below(11), speakers = 1 + rng.below(3);
    std::vector<std::size_t> spk(n);
    for (auto& s : spk) s = rng.below(speakers);
    const auto edges = priv::build_speaker_graph(spk, 1 + rng.below(4), rng.below(3));
    if (edges.empty()) continue;
    ++graphs;
    const auto hg = priv::dual_transform(edges, 3 * n);
    std::vector<double> deg(3 * n, 0.0);
    for (const auto& e : edges) deg[e.p] += 1, deg[e.q] += 1;
    for (std::size_t p = 0; p < 3 * n; ++p) degree_ok &= hg.edge_degree[p] == deg[p];
    for (std::size_t e = 0; e < hg.dual_vertices(); ++e) {
      double s = 0;
      for (std::size_t p = 0; p < 3 * n; ++p) s += hg.incidence(e, p);
      rows_ok &= s == 2.0;
    }
    const Tensor l = priv::hypergraph_laplacian(hg);
    worst_sym = std::max(worst_sym, max_asymmetry(l));
    worst_neg = std::min(worst_neg, symmetric_eig(l).values.front());
  }
  o.require(rows_ok, "H row sums != 2");
  o.require(degree_ok, "D_e* != original degrees");
  o.require(worst_sym <= 1e-9, "L* not symmetric");
  o.require(worst_neg >= -1e-9, "L* not PSD");

  const auto path = priv::dual_transform({{0, 1}, {1, 2}}, 3);
  o.require(path.incidence == Tensor::from_rows({{1, 1, 0}, {0, 1, 1}}), "path H mismatch");
  o.require(path.edge_degree == std::vector<double>{1, 2, 1}, "path D_e* mismatch");
  o.detail = (o.pass ? "" : o.detail + " | ") + "graphs=50 asym=" + fmt("%.1e", worst_sym) +
             " min_eig=" + fmt("%.1e", worst_neg) + " path fixture exact";
  return o;
}

Outcome jacobi_oracle() {
  Outcome o;
  Rng rng(6);
  double worst = 0;
  int graphs = 0;
  while (graphs < 10) {
    const std::size_t n = 2 + rng.below(5);
    std::vector<std::size_t> spk(n);
    for (auto& s : spk) s = rng.below(2);
    const auto st = priv::build_structure(spk, 1 + rng.below(3), rng.below(2), 1500);
    if (st.fallback) continue;
    ++graphs;
    const auto e = symmetric_eig(st.rescaled);
    const std::size_t m = st.rescaled.rows();
    Tape t;
    std::vector<Var> unit;
    for (std::size_t r = 0; r <= 5; ++r) unit.push_back(t.constant(Tensor::identity(1)));
    for (std::size_t k = 0; k < m; ++k) {
      Tensor v(m, 1);
      for (std::size_t i = 0; i < m; ++i) v(i, 0) = e.vectors(i, k);
      const auto z = priv::jacobi_filter_bank(st.rescaled, t.constant(v), unit, 0.0, 0.0);
      for (std::size_t r = 0; r <= 5; ++r) {
        const double pr = priv::jacobi_value(r, 0.0, 0.0, e.values[k]);
        for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, std::abs(z[r].value()(i, 0) - pr * v(i, 0)));
      }
    }
  }
  const double p2 = priv::jacobi_value(2, 0.0, 0.0, 0.5);
  o.require(worst <= 1e-8, "matrix recurrence deviates above 1e-8");
  // Legendre P2(x) = (3x^2 - 1) / 2 evaluates to -0.125 at x = 0.5.
  o.require(p2 == (3 * 0.25 - 1) / 2, "P2(0.5) != (3*0.25-1)/2");
  o.detail = (o.pass ? "" : o.detail + " | ") + "graphs=10 r<=5 max_err=" + fmt("%.1e", worst) +
             " P2(0.5)=" + fmt("%.17g", p2);
  return o;
}

Outcome loss_closed_forms() {
  Outcome o;
  Tape t;
  const double ce = fusion::loss_cls(log_softmax_rows(t.constant(Tensor(5, 4))), {0, 1, 2, 3, 1}).item();
  const double ce_err = std::abs(ce - std::log(4.0));

  disentangle::DisentangledFeatures mar_case;
  const Tensor e0 = Tensor::row({1, 0, 0}), e1 = Tensor::row({0, 1, 0});
  mar_case.com = {t.constant(e0), t.constant(e0), t.constant(e1)};
  mar_case.prt = mar_case.com;
  const double mar = disentangle::loss_mar(mar_case, {{{0, 0}, {1, 0}, {2, 0}}}, 0.5).item();

  disentangle::DisentangledFeatures ort_case;
  const Tensor a = Tensor::from_rows({{1, 0}, {0, 2}}), b = Tensor::from_rows({{0, -3}, {4, 0}});
  ort_case.com = {t.constant(a), t.constant(a), t.constant(a)};
  ort_case.prt = {t.constant(b), t.constant(b), t.constant(b)};
  const double ort = disentangle::loss_ort(ort_case).item();

  o.require(ce_err <= 1e-12, "uniform cross-entropy != ln 4");
  o.require(mar == 0.0, "loss_mar != 0");
  o.require(ort == 0.0, "loss_ort != 0");
  o.detail = (o.pass ? "" : o.detail + " | ") + "|ce-ln4|=" + fmt("%.1e", ce_err) + " mar=" +
             fmt("%g", mar) + " ort=" + fmt("%g", ort);
  return o;
}

Outcome toy_overfit() {
  Outcome o;
  const auto t0 = Clock::now();
  const Config c;  // defaults: 300 steps, seed 0, 8 conversations, C=4, K=2
  const Dataset d = synth_generate(synth_spec(c));
  const TrainResult r = train(c, d);
  const Metrics m = evaluate(r.checkpoint, d);
  const double secs = seconds_since(t0);
  o.require(!r.diverged, "diverged: " + r.divergence);
  o.require(m.accuracy >= 0.95, "accuracy below 0.95");
  o.require(m.weighted_f1 >= 0.95, "WF1 below 0.95");
  o.require(secs < 600.0, "runtime above 10 min");
  o.detail = (o.pass ? "" : o.detail + " | ") + "steps=" + std::to_string(r.log.size()) + " accuracy=" +
             fmt("%.4f", m.accuracy) + " wf1=" + fmt("%.4f", m.weighted_f1) + " time=" + fmt("%.1fs", secs);
  return o;
}

Outcome ablation_monotonicity() {
  Outcome o;
  const Config c;
  const Dataset d = synth_generate(synth_spec(c));
  std::vector<AblationFlags> variants;
  for (const char* f : {"disable_decoupler", "disable_shared_branch", "disable_private_branch",
                        "disable_transformer_fusion"})
    variants.push_back(parse_ablation_flags(f));
  std::vector<AblationOutcome> out;
  try {
    out = run_ablations(c, d, variants, 0.75, 0);
  } catch (const std::exception& e) {
    o.require(false, std::string("error: ") + e.what());
    return o;
  }
  const double full = out.front().test_metrics.weighted_f1;
  std::string summary = "full=" + fmt("%.4f", full);
  for (std::size_t i = 1; i < out.size(); ++i) {
    const double v = out[i].test_metrics.weighted_f1;
    summary += " " + out[i].name + "=" + fmt("%.4f", v);
    o.require(!out[i].diverged, out[i].name + " diverged");
    o.require(full >= v - 0.05, "full below " + out[i].name + " - 0.05");
  }
  o.require(!out.front().diverged, "full diverged");
  o.detail = (o.pass ? "" : o.detail + " | ") + "test WF1 " + summary;
  return o;
}

Outcome determinism_and_persistence() {
  Outcome o;
  const Config c;
  const Dataset d = synth_generate(synth_spec(c));
  const TrainResult a = train(c, d), b = train(c, d);
  const std::string ea = to_json_line("train", a.checkpoint.step, evaluate(a.checkpoint, d));
  const std::string eb = to_json_line("train", b.checkpoint.step, evaluate(b.checkpoint, d));
  o.require(ea == eb, "metrics differ between runs");
  o.require(a.checkpoint.serialize() == b.checkpoint.serialize(), "checkpoints differ between runs");
  bool logs_equal = a.log.size() == b.log.size();
  for (std::size_t i = 0; logs_equal && i < a.log.size(); ++i)
    logs_equal = to_json_line(a.log[i]) == to_json_line(b.log[i]);
  o.require(logs_equal, "step logs differ between runs");

  const auto path = std::filesystem::temp_directory_path() / "merc_acceptance.ckpt";
  a.checkpoint.save(path.string());
  const Checkpoint loaded = Checkpoint::load(path.string());
  std::filesystem::remove(path);
  const std::string el = to_json_line("train", loaded.step, evaluate(loaded, d));
  o.require(el == ea, "reloaded checkpoint evaluates differently");
  o.require(loaded.serialize() == a.checkpoint.serialize(), "reloaded checkpoint re-serializes differently");
  o.detail = (o.pass ? "" : o.detail + " | ") + "two runs bit-identical, reload eval identical";
  return o;
}

Outcome metric_correctness() {
  Outcome o;
  const double wf1 = metrics_from_confusion({{1, 1}, {0, 2}}).weighted_f1;
  o.require(std::abs(wf1 - 0.7333) <= 1e-4, "WF1 != 0.7333");
  o.detail = (o.pass ? "" : o.detail + " | ") + "wf1=" + fmt("%.6f", wf1);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient fidelity", gradient_fidelity},
      {"spectral invariants", spectral_invariants},
      {"filter sanity", filter_sanity},
      {"InfoNCE closed forms", infonce_closed_forms},
      {"dual hypergraph invariants", dual_hypergraph_invariants},
      {"Jacobi recurrence oracle", jacobi_oracle},
      {"loss closed forms", loss_closed_forms},
      {"toy overfit", toy_overfit},
      {"ablation monotonicity", ablation_monotonicity},
      {"determinism and persistence", determinism_and_persistence},
      {"metric correctness", metric_correctness},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
