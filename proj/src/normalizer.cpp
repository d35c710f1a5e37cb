#include "elliptorus/normalizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace elliptorus {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const Complex kI(0.0, 1.0);

std::string vec_str(const std::vector<int>& v) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ')';
  return os.str();
}

double dot_k(const MonomialKey& key, const Eigen::VectorXd& omega) {
  double s = 0.0;
  for (int i = 0; i < omega.size(); ++i) s += key.k(i) * omega[i];
  return s;
}

double dot_l(const MonomialKey& key, const Eigen::VectorXd& Omega) {
  double s = 0.0;
  for (int j = 0; j < Omega.size(); ++j) s += (key.l(j) - key.lbar(j)) * Omega[j];
  return s;
}

std::vector<int> l_minus_lbar(const MonomialKey& key, int n2) {
  std::vector<int> v(n2);
  for (int j = 0; j < n2; ++j) v[j] = key.l(j) - key.lbar(j);
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------

void for_each_half_lattice(int n, int kmax, const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> k(n, 0);
  for (int norm = 1; norm <= kmax; ++norm) {
    // enumerate all k with |k|_1 == norm in lexicographic order, keep the canonical half
    std::function<void(int, int)> rec = [&](int i, int left) {
      if (i == n - 1) {
        for (int v : {-left, left}) {
          k[i] = v;
          int first = 0;
          for (int x : k)
            if (x != 0) {
              first = x;
              break;
            }
          if (first > 0) f(k);
          if (left == 0) break;
        }
        return;
      }
      for (int v = -left; v <= left; ++v) {
        k[i] = v;
        rec(i + 1, left - std::abs(v));
      }
    };
    rec(0, norm);
  }
}

void for_each_lattice_ball(int n, int lmax, const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> l(n, 0);
  if (n == 0) {
    f(l);
    return;
  }
  for (int norm = 0; norm <= lmax; ++norm) {
    std::function<void(int, int)> rec = [&](int i, int left) {
      if (i == n - 1) {
        for (int v : {-left, left}) {
          l[i] = v;
          f(l);
          if (left == 0) break;
        }
        return;
      }
      for (int v = -left; v <= left; ++v) {
        l[i] = v;
        rec(i + 1, left - std::abs(v));
      }
    };
    rec(0, norm);
  }
}

NonresonanceResult check_nonresonance(const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega, double epsilon, int r,
                                      int K, double a_min, double b_min) {
  if (r < 1) throw Error("check_nonresonance: r must be >= 1");
  const int n1 = static_cast<int>(omega.size()), n2 = static_cast<int>(Omega.size());
  NonresonanceResult res;
  res.a_r = kInf;
  for_each_half_lattice(n1, r * K, [&](const std::vector<int>& k) {
    double kw = 0.0;
    for (int i = 0; i < n1; ++i) kw += k[i] * omega[i];
    for_each_lattice_ball(n2, 2, [&](const std::vector<int>& l) {
      double lW = 0.0;
      for (int j = 0; j < n2; ++j) lW += l[j] * Omega[j];
      const double v = std::abs(kw + epsilon * lW);
      if (v < res.a_r) {
        res.a_r = v;
        res.k_min = k;
        res.l_min = l;
      }
    });
  });
  res.b_r = kInf;
  for (int i = 0; i < n2; ++i)
    for (int j = i + 1; j < n2; ++j) res.b_r = std::min(res.b_r, std::abs(Omega[i] - Omega[j]));

  if (res.a_r <= a_min) {
    std::ostringstream os;
    os << "resonance at r=" << r << ": |k.omega + eps l.Omega| = " << res.a_r << " for k=" << vec_str(res.k_min)
       << " l=" << vec_str(res.l_min);
    throw ResonanceDetected(os.str(), res.k_min, res.l_min, r);
  }
  if (n2 >= 2 && res.b_r <= b_min) {
    std::vector<int> l(n2, 0);
    for (int i = 0; i < n2; ++i)
      for (int j = i + 1; j < n2; ++j)
        if (std::abs(Omega[i] - Omega[j]) == res.b_r && l == std::vector<int>(n2, 0)) l[i] = 1, l[j] = -1;
    throw ResonanceDetected("transversal frequencies too close at r=" + std::to_string(r), std::vector<int>(n1, 0), l,
                            r);
  }
  return res;
}

// ---------------------------------------------------------------------------

namespace {

/// Divides every k != 0 (or off-diagonal) term by i[k.omega + eps (l-lbar).Omega].
HomologicalSolution solve_generic(const Series& f, const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega,
                                  double epsilon, const DivisorOptions& opt) {
  const Dimensions& d = f.dims();
  const double wmax = omega.size() ? omega.cwiseAbs().maxCoeff() : 1.0;
  std::vector<Term> chi, avg;
  double min_div = kInf;
  for (const auto& t : f.terms()) {
    if (t.key.abs_k() == 0) {
      avg.push_back(t);
      continue;
    }
    const double div = dot_k(t.key, omega) + epsilon * (Omega.size() ? dot_l(t.key, Omega) : 0.0);
    const double floor = opt.tol * std::max(1.0, t.key.abs_k() * wmax);
    if (std::abs(div) < floor)
      throw ResonanceDetected("vanishing divisor " + std::to_string(div), t.key.k_vec(d), l_minus_lbar(t.key, d.n2), 0);
    min_div = std::min(min_div, std::abs(div));
    chi.push_back({t.key, t.coeff / (kI * div)});
  }
  return {Series::from_terms(d, std::move(chi)), Series::from_terms(d, std::move(avg)), min_div};
}

}  // namespace

HomologicalSolution solve_chi0(const Series& f0, const Eigen::VectorXd& omega, const DivisorOptions& opt) {
  for (const auto& t : f0.terms())
    if (t.key.grade() != 0) throw InvariantViolation("solve_chi0: input is not of grade 0");
  return solve_generic(f0, omega, Eigen::VectorXd(), 0.0, opt);
}

HomologicalSolution solve_chi1(const Series& f1, const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega,
                               double epsilon, const DivisorOptions& opt) {
  for (const auto& t : f1.terms()) {
    if (t.key.grade() != 1) throw InvariantViolation("solve_chi1: input is not of grade 1");
    if (!characteristics(t.key, f1.dims()).dalembert_ok)
      throw InvariantViolation("solve_chi1: term violates the d'Alembert rule");
    if (t.key.abs_k() == 0) throw InvariantViolation("solve_chi1: input has a nonzero angular average");
  }
  return solve_generic(f1, omega, Omega, epsilon, opt);
}

HomologicalSolution solve_chi2(const Series& f2, const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega,
                               double epsilon, const DivisorOptions& opt) {
  for (const auto& t : f2.terms())
    if (t.key.grade() != 2) throw InvariantViolation("solve_chi2: input is not of grade 2");
  return solve_generic(f2, omega, Omega, epsilon, opt);
}

double homological_residual(const Series& chi, const Series& f, const Series& average, const Eigen::VectorXd& omega,
                            const Eigen::VectorXd& Omega, double epsilon) {
  const double scale = max_abs_coeff(f);
  if (scale == 0.0) return max_abs_coeff(chi);
  const Series kernel = kernel_series(f.dims(), omega, Omega, epsilon);
  return max_abs_coeff(poisson_bracket(kernel, chi) + f - average) / scale;
}

// ---------------------------------------------------------------------------

BlockTable apply_lie_series(const BlockTable& blocks, const Series& chi, Stage stage, int r, const Series& kernel_image,
                            TruncationCounters* counters) {
  const int g = static_cast<int>(stage);  // grade of chi
  const int shift = 2 - g;                // grade lost per bracket
  BlockTable out = blocks;
  if (chi.empty() && kernel_image.empty()) return out;
  for (const auto& t : chi.terms())
    if (t.key.grade() != g) throw InvariantViolation("apply_lie_series: generator has the wrong grade for the stage");

  // Every source block starts a chain B_j = L^j_chi f / j! that lands on (ell - j shift, s + j r);
  // the kernel is a virtual source at (2, 0) whose first image is supplied.
  auto run_chain = [&](Series b, int ell, int s, int j_start) {
    for (int j = j_start;; ++j) {
      const int tl = ell - j * shift, ts = s + j * r;
      if (tl < 0) break;
      if (j > j_start) b = poisson_bracket(b, chi) * Complex(1.0 / j);
      if (b.empty()) break;
      if (ts > blocks.s_max()) {
        if (counters) {
          ++counters->dropped_blocks;
          counters->dropped_terms += b.size();
        }
        break;
      }
      if (j > 0) out.at(tl, ts) += b;
    }
  };

  for (int ell = 0; ell <= blocks.ell_max(); ++ell)
    for (int s = 0; s <= blocks.s_max(); ++s)
      if (!blocks.at(ell, s).empty()) run_chain(blocks.at(ell, s), ell, s, 0);
  if (!kernel_image.empty()) run_chain(kernel_image, 2, 0, 1);

  for (int ell = 0; ell <= out.ell_max(); ++ell)
    for (int s = 0; s <= out.s_max(); ++s)
      for (const auto& t : out.at(ell, s).terms())
        if (t.key.grade() != ell || !characteristics(t.key, out.dims()).dalembert_ok)
          throw InvariantViolation("apply_lie_series: produced block (" + std::to_string(ell) + "," +
                                   std::to_string(s) + ") leaves its class");
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Series> lie_transform_terms(const Series& g, const std::vector<Series>& X, double tol, int max_order) {
  std::vector<Series> E{g};
  const double scale = max_abs_coeff(g);
  if (X.empty() || scale == 0.0) return E;
  const int nx = static_cast<int>(X.size());
  int small_run = 0;
  for (int j = 1; j <= max_order; ++j) {
    Series ej(g.dims());
    for (int i = 1; i <= std::min(j, nx); ++i) {
      if (X[i - 1].empty() || E[j - i].empty()) continue;
      ej += poisson_bracket(E[j - i], X[i - 1]) * Complex(static_cast<double>(i) / j);
    }
    const bool small = max_abs_coeff(ej) < tol * scale;
    E.push_back(std::move(ej));
    small_run = small ? small_run + 1 : 0;
    // E_j depends on E_{j-1..j-nx}; nx consecutive negligible terms end the expansion.
    if (j >= nx && small_run >= nx) break;
  }
  return E;
}

Series lie_transform(const Series& g, const std::vector<Series>& X, double tol, int max_order) {
  Series out(g.dims());
  for (const auto& e : lie_transform_terms(g, X, tol, max_order)) out += e;
  return out;
}

DiagonalizationResult diagonalize(const Eigen::VectorXd& Omega, const Series& g1, int r, double epsilon,
                                  const DiagonalizeOptions& opt) {
  DiagonalizationResult res;
  res.min_divisor = kInf;
  if (g1.empty()) return res;
  const Dimensions d = g1.dims();
  for (const auto& t : g1.terms()) {
    if (t.key.abs_k() != 0 || t.key.abs_m() != 0)
      throw InvariantViolation("diagonalize: g1 must depend on (z, zeta) only");
    if (t.key.abs_l() != 1 || t.key.abs_lbar() != 1)
      throw InvariantViolation("diagonalize: g1 contains a |l|=2 or |lbar|=2 term");
  }
  const Series Z0 = kernel_series(d, Eigen::VectorXd::Zero(d.n1), Omega, 1.0);
  const double gscale = max_abs_coeff(g1);
  const double eps_step = std::pow(epsilon, r - 1);
  const double omax = Omega.size() ? Omega.cwiseAbs().maxCoeff() : 1.0;

  // E_m Z0 and E_m g1 with the unscaled generators D_1..D_m
  std::vector<Series> EZ{Z0}, Eg{g1};
  auto next_E = [&](std::vector<Series>& E, int m) {
    Series e(d);
    for (int i = 1; i <= m; ++i)
      if (!res.D[i - 1].empty() && !E[m - i].empty())
        e += poisson_bracket(E[m - i], res.D[i - 1]) * Complex(static_cast<double>(i) / m);
    E.push_back(std::move(e));
  };

  for (int j = 1; j <= opt.max_order; ++j) {
    // Psi_j = sum_{i<j} (i/j) L_{D_i}(Z_{j-i} - E_{j-i-1} g1) + E_{j-1} g1
    if (j >= 2) next_E(Eg, j - 1);
    Series psi = Eg[j - 1];
    for (int i = 1; i < j; ++i) {
      if (res.D[i - 1].empty()) continue;
      Series inner = res.Z[j - i - 1] - Eg[j - i - 1];
      if (!inner.empty()) psi += poisson_bracket(inner, res.D[i - 1]) * Complex(static_cast<double>(i) / j);
    }
    std::vector<Term> dterms, zterms;
    for (const auto& t : psi.terms()) {
      bool diag = true;
      for (int q = 0; q < d.n2; ++q) diag = diag && t.key.l(q) == t.key.lbar(q);
      if (diag) {
        zterms.push_back(t);
        continue;
      }
      const double div = dot_l(t.key, Omega);
      if (std::abs(div) < opt.divisor_tol * std::max(1.0, omax))
        throw ResonanceDetected("diagonalize: transversal divisor " + std::to_string(div), std::vector<int>(d.n1, 0),
                                l_minus_lbar(t.key, d.n2), r);
      res.min_divisor = std::min(res.min_divisor, std::abs(div));
      dterms.push_back({t.key, t.coeff / (kI * div)});
    }
    res.D.push_back(Series::from_terms(d, std::move(dterms)));
    res.Z.push_back(Series::from_terms(d, std::move(zterms)));

    // back-substitution: E_j Z0 + E_{j-1} g1 = Z_j
    next_E(EZ, j);
    const double resid = max_abs_coeff(EZ[j] + Eg[j - 1] - res.Z.back());
    const double inputs = std::max({gscale, max_abs_coeff(EZ[j]), max_abs_coeff(Eg[j - 1]), max_abs_coeff(res.Z.back())});
    res.max_residual = std::max(res.max_residual, resid / inputs);

    const double size = max_abs_coeff(res.D.back()) + max_abs_coeff(res.Z.back());
    if (size == 0.0 || std::pow(eps_step, j) * size < opt.tail_tol * gscale) break;
  }
  while (!res.D.empty() && res.D.back().empty()) res.D.pop_back();
  while (!res.Z.empty() && res.Z.back().empty()) res.Z.pop_back();
  return res;
}

FrequencyUpdate update_frequencies(const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega, const Series& f2_avg,
                                   const std::vector<Series>& Z, int r, double epsilon) {
  FrequencyUpdate u{omega, Omega, Eigen::VectorXd::Zero(omega.size()), Eigen::VectorXd::Zero(Omega.size())};
  if (r <= 1) return u;
  const double er = std::pow(epsilon, r);
  for (const auto& t : f2_avg.terms()) {
    if (t.key.abs_k() != 0) throw InvariantViolation("update_frequencies: f2 average depends on q");
    if (t.key.abs_m() == 1)
      for (int i = 0; i < omega.size(); ++i)
        if (t.key.m(i) == 1) u.delta_omega[i] += er * t.coeff.real();
  }
  // coefficient c on z_j zeta_j equals i c on z_j conj(z_j)
  for (std::size_t i = 0; i < Z.size(); ++i) {
    const double f = std::pow(epsilon, static_cast<double>((i + 1) * (r - 1)));
    for (const auto& t : Z[i].terms())
      for (int j = 0; j < Omega.size(); ++j)
        if (t.key.l(j) == 1 && t.key.lbar(j) == 1) u.delta_Omega[j] += f * (kI * t.coeff).real();
  }
  u.omega += u.delta_omega;
  u.Omega += u.delta_Omega;
  return u;
}

// ---------------------------------------------------------------------------

double coupling_norm(const BlockTable& b, int s) {
  if (s > b.s_max()) return 0.0;
  double n = 0.0;
  for (int ell = 0; ell <= 2; ++ell) n += max_abs_coeff(b.at(ell, s));
  return n;
}

namespace {

void check_generator(const Series& g, ClassTag tag, int K, const char* name) {
  if (!verify_class(g, tag, K)) throw InvariantViolation(std::string(name) + " outside its class");
  if (!average_q(g).empty() && tag.s > 0) throw InvariantViolation(std::string(name) + " has a nonzero average");
}

}  // namespace

StepResult normalization_step(const HamiltonianState& state, const StepConfig& cfg) {
  const int r = state.r + 1;
  const auto& B = state.blocks;
  if (r > B.s_max()) throw Error("normalization_step: step " + std::to_string(r) + " exceeds s_max");
  const Dimensions d = state.dims;
  const double eps = state.epsilon;

  StepResult out;
  StepReport& rep = out.report;
  GeneratingSet& gen = out.gen;
  rep.r = gen.r = r;

  auto nr = check_nonresonance(state.omega, state.Omega, eps, r, state.K, cfg.a_min, cfg.b_min);
  rep.a_r = nr.a_r;
  rep.b_r = nr.b_r;
  rep.k_min = nr.k_min;
  rep.l_min = nr.l_min;
  for (int s = 0; s <= B.s_max(); ++s) rep.coupling_norm_before.push_back(coupling_norm(B, s));

  auto guard = [&](double resid, const char* what) {
    if (!(resid <= cfg.homological_tol))
      throw InvariantViolation(std::string(what) + " back-substitution residual " + std::to_string(resid));
  };

  // Stage I
  const Series& f0 = B.at(0, r);
  auto s0 = solve_chi0(f0, state.omega, cfg.divisors);
  rep.residual_chi0 = homological_residual(s0.chi, f0, s0.average, state.omega, state.Omega, eps);
  guard(rep.residual_chi0, "chi0");
  BlockTable T1 = apply_lie_series(B, s0.chi, Stage::I, r, -oscillating_part(f0), &rep.truncation);
  if (!(T1.at(0, r) == s0.average)) throw InvariantViolation("stage I left a non-constant f0 at order r");
  if (!s0.average.empty()) {
    const Complex c = s0.average.coeff(MonomialKey{});
    rep.dropped_constant_re = c.real();
    rep.dropped_constant_im = c.imag();
  }
  T1.at(0, r) = Series(d);

  // Stage II
  const Series f1 = T1.at(1, r);
  auto s1 = solve_chi1(f1, state.omega, state.Omega, eps, cfg.divisors);
  rep.residual_chi1 = homological_residual(s1.chi, f1, s1.average, state.omega, state.Omega, eps);
  guard(rep.residual_chi1, "chi1");
  BlockTable T2 = apply_lie_series(T1, s1.chi, Stage::II, r, -f1, &rep.truncation);
  if (!T2.at(0, r).empty() || !T2.at(1, r).empty()) throw InvariantViolation("stage II left f0 or f1 at order r");

  // Stage III
  const Series f2 = T2.at(2, r);
  auto s2 = solve_chi2(f2, state.omega, state.Omega, eps, cfg.divisors);
  rep.residual_chi2 = homological_residual(s2.chi, f2, s2.average, state.omega, state.Omega, eps);
  guard(rep.residual_chi2, "chi2");
  BlockTable T3 = apply_lie_series(T2, s2.chi, Stage::III, r, -oscillating_part(f2), &rep.truncation);
  if (!(T3.at(2, r) == s2.average)) throw InvariantViolation("stage III: f2 at order r differs from its average");
  if (!(s2.average + oscillating_part(f2) == f2))
    throw InvariantViolation("stage III: average split does not reproduce f2");
  if (r == 1 && !s2.average.empty()) throw InvariantViolation("f2^(III;1,1) must vanish at the first step");

  // Stage IV: diagonalize the (z, zeta) part of the average and apply the Lie transform
  std::vector<Term> g1_terms, p_terms;
  for (const auto& t : s2.average.terms()) (t.key.abs_m() == 0 ? g1_terms : p_terms).push_back(t);
  gen.g1 = Series::from_terms(d, std::move(g1_terms));
  gen.f2_avg = s2.average;
  auto diag = diagonalize(state.Omega, gen.g1, r, eps, cfg.diag);
  rep.residual_diag = diag.max_residual;
  guard(rep.residual_diag, "diagonalization");
  rep.diag_order = diag.D.size();

  // E_j with unscaled D carries eps^{j(r-1)}, so it lands at order s + j(r-1).
  HamiltonianState next = state;
  next.r = r;
  next.blocks = BlockTable(d, T3.ell_max(), T3.s_max());
  for (int ell = 0; ell <= T3.ell_max(); ++ell) {
    for (int s = 0; s <= T3.s_max(); ++s) {
      if (ell <= 2 && s <= r) continue;
      const Series& src = T3.at(ell, s);
      if (src.empty()) continue;
      if (s == 0 || diag.D.empty()) {
        next.blocks.at(ell, s) += src;
        continue;
      }
      const int room = (T3.s_max() - s) / (r - 1);
      auto E = lie_transform_terms(src, diag.D, cfg.diag.tail_tol, room + 1);
      for (std::size_t j = 0; j < E.size(); ++j) {
        const int target = s + static_cast<int>(j) * (r - 1);
        if (target > T3.s_max()) {
          if (!E[j].empty()) {
            ++rep.truncation.dropped_blocks;
            rep.truncation.dropped_terms += E[j].size();
          }
          continue;
        }
        next.blocks.at(ell, target) += E[j];
      }
    }
  }
  auto fu = update_frequencies(state.omega, state.Omega, s2.average, diag.Z, r, eps);
  next.omega = fu.omega;
  next.Omega = fu.Omega;
  rep.delta_omega = fu.delta_omega;
  rep.delta_Omega = fu.delta_Omega;

  gen.chi0 = s0.chi;
  gen.chi1 = s1.chi;
  gen.chi2 = s2.chi;
  gen.D2 = diag.D;
  gen.Z = diag.Z;
  gen.min_divisor_chi0 = s0.min_divisor;
  gen.min_divisor_chi1 = s1.min_divisor;
  gen.min_divisor_chi2 = s2.min_divisor;
  gen.min_divisor_diag = diag.min_divisor;
  if (cfg.keep_stage_tables) {
    gen.after_I = T1;
    gen.after_II = T2;
    gen.after_III = T3;
  }

  check_generator(gen.chi0, {0, r}, state.K, "chi0");
  check_generator(gen.chi1, {1, r}, state.K, "chi1");
  check_generator(gen.chi2, {2, r}, state.K, "chi2");
  for (const auto& D : gen.D2) check_generator(D, {2, 0}, state.K, "D2");

  for (const BlockTable* t : {&T1, &T2, &T3, &next.blocks})
    for (int ell = 0; ell <= t->ell_max(); ++ell)
      for (int s = 0; s <= t->s_max(); ++s) rep.dalembert_violations += dalembert_violations(t->at(ell, s));
  for (const Series* g : {&gen.chi0, &gen.chi1, &gen.chi2}) rep.dalembert_violations += dalembert_violations(*g);
  for (const auto& D : gen.D2) rep.dalembert_violations += dalembert_violations(D);
  if (rep.dalembert_violations) throw InvariantViolation("d'Alembert rule violated during step");

  if (auto msg = check_state_invariants(next); !msg.empty()) throw InvariantViolation("after step: " + msg);
  for (int s = 0; s <= next.blocks.s_max(); ++s) rep.coupling_norm_after.push_back(coupling_norm(next.blocks, s));
  rep.cauchy_increment = max_abs_coeff(next.hamiltonian() - state.hamiltonian());
  out.state = std::move(next);
  return out;
}

NormalizeResult normalize(const HamiltonianState& state0, int r_max, const StepConfig& cfg) {
  NormalizeResult res;
  res.initial = state0;
  res.final_state = state0;
  for (int r = state0.r + 1; r <= state0.r + r_max; ++r) {
    try {
      auto step = normalization_step(res.final_state, cfg);
      res.final_state = step.state;
      res.states.push_back(std::move(step.state));
      res.reports.push_back(std::move(step.report));
      res.generators.push_back(std::move(step.gen));
    } catch (const ResonanceDetected& e) {
      res.stop_reason = e.what();
      res.resonance = e;
      break;
    }
  }
  return res;
}

}  // namespace elliptorus
