// One pass/fail line per acceptance criterion; exit status 1 if any fails.

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "elliptorus/estimates.hpp"
#include "elliptorus/geometry.hpp"
#include "elliptorus/harness.hpp"
#include "elliptorus/model.hpp"
#include "elliptorus/normalizer.hpp"
#include "index_oracle.hpp"
#include "random_series.hpp"

using namespace elliptorus;
using namespace elliptorus::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

NormalizeResult toy_run(double eps, int r_max = 3, const ModelInput& model = toy_model()) {
  PrepareConfig pc;
  pc.epsilon = eps;
  StepConfig sc;
  sc.keep_stage_tables = true;
  return normalize(prepare_hamiltonian(model, pc), r_max, sc);
}

const HamiltonianState& state_before(const NormalizeResult& run, int r) {
  return r == 1 ? run.initial : run.states[r - 2];
}

// Term-by-term bracket straight from the exponents.
Series naive_bracket(const Series& g, const Series& h) {
  const Dimensions d = g.dims();
  const Complex I(0.0, 1.0);
  std::vector<Term> out;
  for (const auto& a : g.terms())
    for (const auto& b : h.terms()) {
      for (int i = 0; i < d.n1; ++i) {
        const int w = a.key.k(i) * b.key.m(i) - a.key.m(i) * b.key.k(i);
        if (w == 0) continue;
        MonomialKey key;
        for (int t = 0; t < d.n1; ++t) {
          key.set_m(t, a.key.m(t) + b.key.m(t) - (t == i));
          key.set_k(t, a.key.k(t) + b.key.k(t));
        }
        for (int j = 0; j < d.n2; ++j) {
          key.set_l(j, a.key.l(j) + b.key.l(j));
          key.set_lbar(j, a.key.lbar(j) + b.key.lbar(j));
        }
        out.push_back({key, I * static_cast<double>(w) * a.coeff * b.coeff});
      }
      for (int j = 0; j < d.n2; ++j) {
        const int w = a.key.lbar(j) * b.key.l(j) - a.key.l(j) * b.key.lbar(j);
        if (w == 0) continue;
        MonomialKey key;
        for (int t = 0; t < d.n1; ++t) {
          key.set_m(t, a.key.m(t) + b.key.m(t));
          key.set_k(t, a.key.k(t) + b.key.k(t));
        }
        for (int t = 0; t < d.n2; ++t) {
          key.set_l(t, a.key.l(t) + b.key.l(t) - (t == j));
          key.set_lbar(t, a.key.lbar(t) + b.key.lbar(t) - (t == j));
        }
        out.push_back({key, static_cast<double>(w) * a.coeff * b.coeff});
      }
    }
  return Series::from_terms(d, std::move(out));
}

Outcome grading() {
  Outcome o;
  std::mt19937_64 rng(20240601);
  int pairs = 0, class_fail = 0, dal = 0;
  double worst = 0.0;
  while (pairs < 100) {
    std::uniform_int_distribution<int> nd(1, 3), n2d(0, 3), gd(0, 6), Kd(1, 4);
    Dimensions d(nd(rng), n2d(rng));
    const int K = Kd(rng);
    std::uniform_int_distribution<int> sd(0, 8 / K);
    int l1 = gd(rng), l2 = gd(rng);
    if (d.n2 == 0) l1 -= l1 % 2, l2 -= l2 % 2;
    const int s1 = sd(rng), s2 = sd(rng);
    const auto g = random_class_series(rng, d, l1, s1, K, 6);
    const auto h = random_class_series(rng, d, l2, s2, K, 6);
    if (g.empty() || h.empty()) continue;
    if (!verify_class(g, {l1, s1}, K) || !verify_class(h, {l2, s2}, K)) ++class_fail;
    const auto b = poisson_bracket(g, h);
    if (l1 + l2 - 2 < 0 ? !b.empty() : !verify_class(b, {l1 + l2 - 2, s1 + s2}, K)) ++class_fail;
    dal += static_cast<int>(dalembert_violations(b));
    const auto ref = naive_bracket(g, h);
    const double scale = std::max(max_abs_coeff(g) * max_abs_coeff(h), 1e-300);
    worst = std::max(worst, max_abs_coeff(b - ref) / scale);
    ++pairs;
  }
  o.require(class_fail == 0, "class membership");
  o.require(dal == 0, "d'Alembert");
  o.require(worst <= 1e-12, "coefficients");
  o.detail << pairs << " pairs, " << class_fail << " class violations, coefficient error " << worst;
  return o;
}

Outcome homological() {
  Outcome o;
  double worst = 0.0;
  int equations = 0;
  for (const auto& model : {toy_model(), planar_model()}) {
    const auto run = toy_run(1e-3, 3, model);
    o.require(run.generators.size() == 3, "three steps");
    for (std::size_t i = 0; i < run.generators.size(); ++i) {
      const int r = static_cast<int>(i) + 1;
      const auto& g = run.generators[i];
      const auto& pre = state_before(run, r);
      const auto kern = kernel_series(pre.dims, pre.omega, pre.Omega, pre.epsilon);
      auto check = [&](const Series& chi, const Series& f, const Series& avg) {
        const double scale = max_abs_coeff(f);
        const double res = max_abs_coeff(poisson_bracket(kern, chi) + f - avg);
        worst = std::max(worst, scale > 0 ? res / scale : max_abs_coeff(chi));
        ++equations;
      };
      const Series f0 = pre.blocks.at(0, r);
      check(g.chi0, f0, average_q(f0));
      const Series f1 = g.after_I->at(1, r);
      check(g.chi1, f1, Series(pre.dims));
      const Series f2 = g.after_II->at(2, r);
      check(g.chi2, f2, average_q(f2));
      if (!g.g1.empty()) {
        // the transformed quadratic part has no off-diagonal z_i zeta_j left
        const double eps = pre.epsilon;
        std::vector<Series> X;
        for (std::size_t j = 0; j < g.D2.size(); ++j)
          X.push_back(g.D2[j] * Complex(std::pow(eps, static_cast<double>(j + 1) * (r - 1))));
        const auto Z0 = kernel_series(pre.dims, Eigen::VectorXd::Zero(pre.dims.n1), pre.Omega, 1.0);
        const Series input = g.g1 * Complex(std::pow(eps, r));
        const Series out = lie_transform(Z0 * Complex(eps) + input, X, 1e-18);
        double off = 0.0;
        for (const auto& t : out.terms())
          if (t.key.l_vec(pre.dims) != t.key.lbar_vec(pre.dims)) off = std::max(off, std::abs(t.coeff));
        worst = std::max(worst, off / max_abs_coeff(input));
        ++equations;
      }
    }
  }
  o.require(worst <= 1e-12, "residual");
  o.detail << equations << " equations (toy and planar), worst relative residual " << worst;
  return o;
}

Outcome sequences() {
  Outcome o;
  const CountingSequences nu(12);
  int bad = 0;
  for (int r = 0; r <= 12; ++r)
    for (int s = 0; s <= 12; ++s) bad += nu.nu(r, s) != nu.nu_collapsed(r, s);
  for (int r = 1; r <= 12; ++r) bad += nu.nu(r, r) != 8 * nu.nu(r - 1, r);
  for (int s = 0; s <= 10; ++s)
    for (int r = 0; r <= s; ++r) bad += nu.nu(r, s) > (static_cast<BigCount>(1) << (8 * s));
  bad += theta(0) != 1;
  bad += theta(1) != 7;
  for (int j = 0; j <= 30; ++j) bad += theta(j + 1) > 8 * theta(j);
  for (int r = 1; r <= 30; ++r) bad += catalan(r) > (1ULL << (2 * (r - 1)));
  long long num = 0, den = 1;
  for (long long s = 1; s <= 100; ++s) {
    const long long d2 = s * (s + 1);
    num = num * d2 + den;
    den *= d2;
    const long long g = std::gcd(num, den);
    num /= g;
    den /= g;
    bad += num != s || den != s + 1;
  }
  o.require(bad == 0, "identities");
  o.detail << bad << " failing identities over nu (r,s <= 12), theta (j <= 30), lambda (r <= 30), sums (s <= 100)";
  return o;
}

Outcome index_sets() {
  Outcome o;
  EstimateConfig cfg;
  cfg.gamma = 1.0;
  cfg.tau = 2.0;
  cfg.K = 4;
  double worst = 0.0;
  for (int r = 1; r <= 10; ++r)
    for (int s = 1; s <= 10; ++s) {
      const double b = brute_log_T(r, s, cfg);
      worst = std::max(worst, std::abs(log_T(r, s, cfg) - b) / std::max(1.0, std::abs(b)));
    }
  o.require(worst <= 1e-13, "greedy against brute force");

  std::size_t lemma_fail = 0, checked = 0;
  for (int s = 1; s <= 8; ++s)
    for (int r = 0; r <= 8; ++r) {
      const auto J = enumerate_J(r, s);
      for (const auto& I : J) lemma_fail += !jrs_contains(I, r, s);
      lemma_fail += J != enumerate_J(std::min(r, s / 2), s);
      if (r >= 1)
        for (const auto& I : enumerate_J(r - 1, s)) lemma_fail += !jrs_contains(I, r, s);
    }
  for (int r = 1; r <= 8; ++r)
    for (int s = 1; s <= 8; ++s)
      for (const auto& I : enumerate_J(r - 1, r))
        for (const auto& Ip : enumerate_J(r, s)) {
          IndexSet U = I;
          U.insert(U.end(), Ip.begin(), Ip.end());
          U.push_back(std::min(r, s));
          ++checked;
          lemma_fail += !jrs_contains(U, r, r + s);
        }
  o.require(lemma_fail == 0, "index-set lemmas");

  const double Gamma = gamma_condition_tau(cfg).value;
  double growth = -1e300;
  for (int r = 1; r <= 10; ++r)
    for (int s = 1; s <= 10; ++s) {
      const double lhs = log_T(r, s, cfg) - std::log(cfg.a(s) * delta_r(s) * delta_r(s));
      growth = std::max(growth, lhs - s * (15.0 * std::log(2.0) + Gamma));
    }
  o.require(growth <= 0.0, "growth bound");
  o.detail << "T greedy error " << worst << ", " << checked << " unions, " << lemma_fail
           << " lemma failures, worst log growth margin " << growth;
  return o;
}

Outcome bound_audit() {
  Outcome o;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.02, 0.25);
  DomainParams dom;
  dom.rho = 0.7;
  dom.R = 0.5;
  dom.sigma = 0.4;
  double slack_pois = 1e300, slack_lie = 1e300;
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> dn(1, 3);
    Dimensions d(dn(rng), dn(rng));
    auto g = random_series(rng, d, 5, 6, 10);
    auto gp = random_series(rng, d, 5, 6, 10);
    const double dd = u(rng), dp = u(rng), delta = u(rng);
    const double lhs = weighted_norm(poisson_bracket(g, gp), dom, dd + dp + delta);
    const double rhs = poisson_bracket_bound(dom, dd, delta, weighted_norm(g, dom, dd + dp), weighted_norm(gp, dom, dp));
    if (lhs > 0) slack_pois = std::min(slack_pois, rhs / lhs);
    auto X = random_series(rng, d, 4, 4, 6);
    Series L = g;
    double fact = 1.0;
    for (int j = 1; j <= 3; ++j) {
      L = poisson_bracket(L, X);
      fact *= j;
      const double l2 = weighted_norm(L, dom, dd + dp) / fact;
      const double r2 = lie_series_bound(dom, j, dd, weighted_norm(X, dom, dp), weighted_norm(g, dom, dp));
      if (l2 > 0) slack_lie = std::min(slack_lie, r2 / l2);
    }
  }
  o.require(slack_pois >= 1.0 && slack_lie >= 1.0, "random instances");

  const ModelInput model = toy_model();
  PrepareConfig pc;
  PrepareReport prep;
  prepare_hamiltonian(model, pc, &prep);
  EstimateConfig ec;
  ec.gamma = 0.1;
  ec.tau = 3.0;
  ec.K = model.K;
  ec.Ebar = prep.Ebar;
  const auto th = thresholds(ec, gamma_condition_tau(ec).value);
  const auto run = toy_run(th.eps_an);
  const auto audit = audit_run(run, prep.Ebar, pc.domain);
  o.require(run.reports.size() == 3, "toy run at eps_an");
  o.require(audit.hypotheses_hold(), "hypotheses");
  o.require(audit.violations() == 0, "main-lemma table");
  o.detail << "slack bracket " << slack_pois << ", Lie series " << slack_lie << "; toy at eps_an = " << th.eps_an
           << ": " << audit.records.size() << " audited inequalities, " << audit.violations() << " violations";
  return o;
}

Outcome decay() {
  Outcome o;
  RunConfig c;
  const RunArtifacts a = run_pipeline(c);
  o.require(a.run.states.size() == 3, "three steps");
  std::size_t leftover = 0;
  for (std::size_t i = 0; i < a.run.states.size(); ++i) {
    const int r = static_cast<int>(i) + 1;
    for (int ell = 0; ell <= 2; ++ell)
      for (int s = 0; s <= r; ++s) leftover += a.run.states[i].blocks.at(ell, s).size();
  }
  o.require(leftover == 0, "blocks with s <= r");
  o.detail << leftover << " terms left in normalized blocks; factors";
  for (std::size_t r = 1; r < a.torus.size(); ++r) {
    const double f = a.torus[r].vector_field_residual() / a.torus[r - 1].vector_field_residual();
    o.require(f < 1.0, "strict decrease");
    o.require(f <= 0.1 * 1.5, "factor");
    o.detail << " " << f;
  }
  return o;
}

Outcome frequency_shifts() {
  Outcome o;
  RunConfig c;
  const RunArtifacts a = run_pipeline(c);
  o.require(a.run.reports.size() == 3, "three steps");
  const auto& first = a.run.reports[0];
  o.require(first.delta_omega.cwiseAbs().maxCoeff() == 0.0 && first.delta_Omega.cwiseAbs().maxCoeff() == 0.0,
            "step 1 shifts");
  const double log_eps = std::log(c.epsilon), log_A = a.thresholds.log_A, sigma = c.domain.sigma;
  o.detail << "log10 margins";
  for (int r = 2; r <= 3; ++r) {
    const auto& rep = a.run.reports[r - 1];
    const double dw = rep.delta_omega.cwiseAbs().maxCoeff(), dW = rep.delta_Omega.cwiseAbs().maxCoeff();
    const double bw = std::log(sigma) + r * (log_eps + log_A);
    const double bW = (r - 1) * log_eps + r * log_A;
    o.require(dw == 0.0 || std::log(dw) <= bw, "omega shift");
    o.require(dW == 0.0 || std::log(dW) <= bW, "Omega shift");
    o.detail << " r=" << r << ": " << (bw - std::log(dw)) / std::log(10.0) << ", "
             << (bW - std::log(dW)) / std::log(10.0);
  }
  return o;
}

Outcome exchange() {
  Outcome o;
  const auto run = toy_run(1e-3);
  o.require(run.generators.size() == 3, "three steps");
  o.detail << "max relative error";
  for (int r = 1; r <= 3; ++r) {
    const auto e = exchange_check(run, r, 20, 100 + r);
    o.require(e.ok(1e-9), "r=" + std::to_string(r));
    o.detail << " " << e.max_rel_error;
  }
  return o;
}

Outcome measure() {
  Outcome o;
  const double alpha = 0.137;
  const Box unit{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)};
  const auto slab = mc_measure(unit, [&](const Eigen::VectorXd& x) { return x[0] < alpha; }, 1000000, 7);
  o.require(std::abs(slab.value - alpha) <= 3.0 * slab.std_error, "slab");
  o.detail << "slab " << (slab.value - alpha) / slab.std_error << " SE;";

  GeometryConfig g;
  g.est.n1 = 2;
  g.est.tau = 3;
  g.est.K = 2;
  g.est.J0 = 0.7;
  g.est.epsilon = 1e-3;
  g.grid = 32;
  g.r_max = 3;
  const Box W0{Eigen::Vector2d(0.95, 0.568), Eigen::Vector2d(1.05, 0.668)};
  const auto atlas = build_atlas(toy_model(), W0, g);
  std::vector<double> lg, lmc;
  for (double gamma : {0.05, 0.1, 0.2}) {
    g.est.gamma = gamma;
    const auto rep = measure_resonant_volume(atlas, g);
    o.require(rep.mc.value > 0.0 && rep.mc.value < rep.bound, "bound at gamma " + std::to_string(gamma));
    o.detail << " gamma " << gamma << ": " << rep.mc.value << " < " << rep.bound << ";";
    lg.push_back(std::log(gamma));
    lmc.push_back(std::log(rep.mc.value));
  }

  std::vector<double> x, y;
  for (double gamma = 0.01; gamma < 0.5; gamma *= 1.5) {
    x.push_back(std::log(gamma));
    y.push_back(std::log(measure_bound(2, 1, gamma, 3, 2, W0.diameter())));
  }
  const double sb = ls_slope(x, y);
  o.require(std::abs(sb - 1.0) <= 0.01, "bound slope");

  x.clear();
  y.clear();
  for (double l = std::log(1e-4); l <= std::log(1e-1) + 1e-12; l += std::log(10.0) / 4) {
    EstimateConfig c;
    c.gamma = std::exp(l);
    c.tau = 3.0;
    c.K = 2;
    c.Ebar = 2.0;
    x.push_back(l);
    y.push_back(thresholds(c, gamma_condition_tau(c).value).log_eps_an);
  }
  const double se = ls_slope(x, y);
  o.require(std::abs(se - 6.0) <= 0.05, "eps_an slope");
  o.detail << " bound slope " << sb << " (sampled volume " << ls_slope(lg, lmc) << "), eps_an slope " << se;
  return o;
}

Outcome dalembert() {
  Outcome o;
  const auto run = toy_run(1e-3);
  std::size_t series = 0, bad = 0;
  auto scan_table = [&](const BlockTable& t) {
    for (int ell = 0; ell <= t.ell_max(); ++ell)
      for (int s = 0; s <= t.s_max(); ++s) {
        bad += dalembert_violations(t.at(ell, s));
        ++series;
      }
  };
  auto scan = [&](const Series& s) {
    bad += dalembert_violations(s);
    ++series;
  };
  scan_table(run.initial.blocks);
  for (const auto& st : run.states) scan_table(st.blocks);
  for (const auto& g : run.generators) {
    for (const auto* t : {&g.after_I, &g.after_II, &g.after_III})
      if (*t) scan_table(**t);
    for (const Series* s : {&g.chi0, &g.chi1, &g.chi2, &g.g1, &g.f2_avg}) scan(*s);
    for (const auto& D : g.D2) scan(D);
    for (const auto& Z : g.Z) scan(Z);
  }
  o.require(run.states.size() == 3, "three steps");
  o.require(bad == 0, "violations");
  o.detail << series << " series, " << bad << " violations";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"grading closure", grading},
      {"homological back-substitution", homological},
      {"sequence identities", sequences},
      {"index-set calculus", index_sets},
      {"analytic bound audit", bound_audit},
      {"normal-form decay", decay},
      {"frequency-shift bounds", frequency_shifts},
      {"exchange check", exchange},
      {"measure", measure},
      {"d'Alembert invariance", dalembert},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failed += !o.pass;
    std::printf("%s  %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
