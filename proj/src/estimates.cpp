#include "elliptorus/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "elliptorus/errors.hpp"
#include "elliptorus/normalizer.hpp"

namespace elliptorus {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLog2 = std::log(2.0);

using Int = CountingSequences::Int;

Int checked_mul(Int a, Int b) {
  if (a != 0 && b > std::numeric_limits<Int>::max() / a) throw NumericalError("counting sequence overflows 128 bits");
  return a * b;
}

Int checked_add(Int a, Int b) {
  if (b > std::numeric_limits<Int>::max() - a) throw NumericalError("counting sequence overflows 128 bits");
  return a + b;
}

Int checked_pow(Int a, int j) {
  Int out = 1;
  for (int i = 0; i < j; ++i) out = checked_mul(out, a);
  return out;
}

// sum_{r>N} log r / (r(r+1)), bracketed by integrals of log x / x^2
void log_tail(int N, double& lo, double& hi) {
  const double n = N;
  hi = (1.0 + std::log(n)) / n;
  lo = (1.0 + std::log(n + 1.0)) / (n + 2.0);
}

}  // namespace

double delta_r(int r) {
  if (r <= 0) return 0.0;
  return 3.0 / (8.0 * std::numbers::pi * std::numbers::pi * r * static_cast<double>(r));
}

RestrictionSequences restriction_sequences(int r) {
  if (r < 0) throw std::invalid_argument("restriction_sequences: r < 0");
  RestrictionSequences out;
  out.delta = delta_r(r);
  // summed from the small end to keep the tail accurate
  for (int i = r; i >= 1; --i) out.d += 4.0 * delta_r(i);
  for (int i = 2; i <= r; ++i) {
    const double t = std::ldexp(1.0, -(i + 6));
    out.zeta += t / (1.0 - t);
  }
  return out;
}

IndexSet istar_set(int s) {
  if (s < 1) throw std::invalid_argument("istar_set: s < 1");
  IndexSet I;
  for (int j = s; j >= 2; --j) I.push_back(s / j);
  return I;
}

bool index_precedes(IndexSet I, IndexSet J) {
  std::sort(I.begin(), I.end());
  std::sort(J.begin(), J.end());
  const std::size_t n = std::max(I.size(), J.size());
  I.insert(I.begin(), n - I.size(), 0);
  J.insert(J.begin(), n - J.size(), 0);
  for (std::size_t m = 0; m < n; ++m)
    if (I[m] > J[m]) return false;
  return true;
}

bool jrs_contains(const IndexSet& I, int r, int s) {
  if (s < 1) throw std::invalid_argument("jrs_contains: s < 1");
  if (static_cast<int>(I.size()) > s - 1) return false;
  const int cap = std::min(r, s / 2);
  for (int j : I)
    if (j < 0 || j > cap) return false;
  return index_precedes(I, istar_set(s));
}

double EstimateConfig::a(int r) const {
  if (a_rule) return a_rule(r);
  return gamma / std::pow(static_cast<double>(r) * K, tau);
}

double EstimateConfig::b(int r) const { return b_rule ? b_rule(r) : bbar; }

double EstimateConfig::eta() const { return std::min(1.0 / K, sigma); }

void EstimateConfig::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("EstimateConfig: gamma must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("EstimateConfig: tau must be positive");
  if (K < 1) throw std::invalid_argument("EstimateConfig: K must be >= 1");
  if (!(Ebar > 0.0) || !(bbar > 0.0) || !(rho > 0.0) || !(R > 0.0) || !(sigma > 0.0))
    throw std::invalid_argument("EstimateConfig: Ebar, bbar, rho, R, sigma must be positive");
  if (J0 < 0.0 || n1 < 1) throw std::invalid_argument("EstimateConfig: J0 >= 0 and n1 >= 1 required");
}

double lie_constant(double rho, double R, double sigma) {
  const double e = std::numbers::e;
  return 2.0 * e / (rho * sigma) + e * e / (R * R);
}

double constant_M(const EstimateConfig& cfg) {
  return std::max(1.0, cfg.Ebar * lie_constant(cfg.rho, cfg.R, cfg.sigma));
}

double log_T(int r, int s, const EstimateConfig& cfg) {
  if (r <= 0 || s <= 0) return 0.0;
  const int cap = std::min(r, s / 2);
  // best[v] = max(0, max_{1<=j<=v} log 1/(a_j delta_j^2))
  std::vector<double> best(cap + 1, 0.0);
  for (int j = 1; j <= cap; ++j) {
    const double dj = delta_r(j);
    best[j] = std::max(best[j - 1], -std::log(cfg.a(j)) - 2.0 * std::log(dj));
  }
  double out = 0.0;
  for (int c : istar_set(s)) out += best[std::min(c, cap)];
  return out;
}

double T_rs(int r, int s, const EstimateConfig& cfg) { return std::exp(log_T(r, s, cfg)); }

BigCount theta(int i) {
  if (i < 0 || i > 60) throw std::invalid_argument("theta: index out of [0, 60]");
  BigCount sum = 0;
  for (int j = 0; j <= i; ++j) sum += (static_cast<BigCount>(1) << (2 * j + 1)) - (static_cast<BigCount>(1) << j);
  return sum;
}

unsigned long long catalan(int j) {
  if (j < 1 || j > 35) throw std::invalid_argument("catalan: index out of [1, 35]");
  std::vector<unsigned long long> lam(j + 1, 0);
  lam[1] = 1;
  for (int n = 2; n <= j; ++n)
    for (int i = 1; i < n; ++i) lam[n] += lam[i] * lam[n - i];
  return lam[j];
}

CountingSequences::CountingSequences(int s_max) : s_max_(s_max) {
  if (s_max < 0) throw std::invalid_argument("CountingSequences: s_max < 0");
  const std::size_t n = static_cast<std::size_t>(s_max + 1) * (s_max + 1);
  nu_.assign(n, 0);
  nuI_.assign(n, 0);
  nuII_.assign(n, 0);
  nuc_.assign(n, 0);
  auto at = [&](std::vector<Int>& v, int r, int s) -> Int& { return v[static_cast<std::size_t>(r) * (s_max + 1) + s]; };
  for (int s = 0; s <= s_max; ++s) at(nu_, 0, s) = at(nuc_, 0, s) = 1;
  for (int r = 1; r <= s_max; ++r) {
    for (int s = 0; s <= s_max; ++s) {
      Int sum = 0, sumc = 0;
      for (int j = 0; j <= s / r; ++j) {
        sum = checked_add(sum, checked_mul(checked_pow(at(nu_, r - 1, r), j), at(nu_, r - 1, s - j * r)));
        const Int w = checked_mul(theta(j), checked_pow(at(nuc_, r - 1, r), j));
        sumc = checked_add(sumc, checked_mul(w, at(nuc_, r - 1, s - j * r)));
      }
      at(nuI_, r, s) = sum;
      at(nuc_, r, s) = sumc;
    }
    for (int s = 0; s <= s_max; ++s) {
      Int sum = 0;
      for (int j = 0; j <= s / r; ++j)
        sum = checked_add(sum, checked_mul(checked_pow(at(nuI_, r, r), j), at(nuI_, r, s - j * r)));
      at(nuII_, r, s) = sum;
    }
    for (int s = 0; s <= s_max; ++s) {
      Int sum = 0;
      for (int j = 0; j <= s / r; ++j)
        sum = checked_add(sum, checked_mul(checked_pow(at(nuII_, r, r), j), at(nuII_, r, s - j * r)));
      at(nu_, r, s) = sum;
    }
  }
}

std::size_t CountingSequences::idx(int r, int s) const {
  if (s < 0 || s > s_max_ || r < 0) throw std::out_of_range("CountingSequences: index out of range");
  // nu_{r,s} is constant for r >= s
  r = std::min(r, s_max_);
  return static_cast<std::size_t>(r) * (s_max_ + 1) + s;
}

double CountingSequences::log2_nu(int r, int s) const {
  Int v = nu(r, s);
  int shift = 0;
  while (v >= (static_cast<Int>(1) << 64)) {
    v >>= 1;
    ++shift;
  }
  return std::log2(static_cast<double>(static_cast<unsigned long long>(v))) + shift;
}

GammaResult gamma_condition_tau(const EstimateConfig& cfg, int r_terms, GammaTail tail) {
  if (r_terms < 4) throw std::invalid_argument("gamma_condition_tau: need at least 4 terms");
  GammaResult out;
  out.terms = r_terms;
  auto neglog = [&](int r) {
    const double a = cfg.a(r);
    if (!(a > 0.0)) throw NumericalError("gamma_condition_tau: a_r must be positive");
    return -std::log(a);
  };
  // Kahan sum from the small end
  double sum = 0.0, comp = 0.0;
  for (int r = r_terms; r >= 1; --r) {
    const double t = neglog(r) / (static_cast<double>(r) * (r + 1.0)) - comp;
    const double u = sum + t;
    comp = (u - sum) - t;
    sum = u;
  }
  out.partial = sum;

  // -log a_r growing linearly in r makes the series diverge logarithmically
  const double big = neglog(r_terms), half = neglog(r_terms / 2);
  if (big > 1.0 && half > 0.0 && (big / std::log(r_terms)) / (half / std::log(r_terms / 2)) > 1.9)
    throw NumericalError("gamma_condition_tau: a_r decays faster than any power, Gamma diverges");

  if (tail == GammaTail::diophantine) {
    double lo = 0.0, hi = 0.0;
    log_tail(r_terms, lo, hi);
    const double c = -std::log(cfg.gamma) + cfg.tau * std::log(static_cast<double>(cfg.K));
    // sum_{r>N} 1/(r(r+1)) = 1/(N+1)
    const double base = c / (r_terms + 1.0);
    out.tail_lower = base + cfg.tau * lo;
    out.tail_upper = base + cfg.tau * hi;
  }
  out.value = out.partial + out.tail_upper;
  return out;
}

Thresholds thresholds(const EstimateConfig& cfg, double Gamma) {
  cfg.validate();
  Thresholds t;
  t.M = constant_M(cfg);
  t.Gamma = Gamma;
  t.log_A = 3.0 * (18.0 * kLog2 + std::log(t.M) + Gamma);
  t.A = std::exp(t.log_A);
  t.log_eps_an = 2.0 * (std::log(std::min(1.0, cfg.bbar)) - t.log_A) - 8.0 * kLog2;
  t.eps_an = std::exp(t.log_eps_an);
  const double eta = cfg.eta();
  t.h0 = std::min(cfg.gamma * eta / (4.0 * std::pow(cfg.K, cfg.tau)), cfg.J0 > 0 ? cfg.bbar / (4.0 * cfg.J0) : kInf);
  const double inner = std::min({1.0, t.h0 / (8.0 * t.A), cfg.bbar / (8.0 * t.A)});
  t.eps_ge = std::min(1.0 / ((2.0 * cfg.J0 + 1.0) * eta), std::exp(-(cfg.tau + 3.0) * kLog2 - t.log_A) * inner);
  t.eps_star = std::min({t.eps_an, t.eps_ge, 1.0 / (4.0 * (2.0 * cfg.J0 + 1.0)),
                         kLog2 / (cfg.sigma * cfg.n1 * static_cast<double>(cfg.n1))});
  return t;
}

std::vector<double> h_sequence(const EstimateConfig& cfg, int r_max) {
  std::vector<double> h;
  h.push_back(std::min(cfg.gamma * cfg.eta() / (4.0 * std::pow(cfg.K, cfg.tau)),
                       cfg.J0 > 0 ? cfg.bbar / (4.0 * cfg.J0) : kInf));
  const double ratio = std::pow(2.0, cfg.tau + 2.0);
  for (int r = 1; r <= r_max; ++r) h.push_back(h.back() / ratio);
  return h;
}

double poisson_bracket_bound(const DomainParams& dom, double d, double delta, double norm_g, double norm_gp) {
  const double c = 2.0 / (std::numbers::e * dom.rho * dom.sigma) + 1.0 / (dom.R * dom.R);
  return c / ((d + delta) * delta) * norm_g * norm_gp;
}

double lie_series_bound(const DomainParams& dom, int j, double d, double norm_X, double norm_g) {
  const double c = lie_constant(dom.rho, dom.R, dom.sigma);
  return std::exp(-2.0) * std::pow(c / (d * d) * norm_X, j) * norm_g;
}

double AuditRecord::slack() const {
  if (lhs == 0.0) return kInf;
  return rhs / lhs;
}

bool AuditReport::hypotheses_hold() const {
  return std::all_of(records.begin(), records.end(), [](const AuditRecord& a) { return !a.hypothesis || a.ok(); });
}

std::size_t AuditReport::violations() const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const AuditRecord& a) { return !a.hypothesis && !a.ok(); }));
}

AuditReport audit_run(const NormalizeResult& run, double Ebar, const DomainParams& dom) {
  AuditReport rep;
  const auto& st0 = run.initial;
  const double eps = st0.epsilon;
  const int steps = static_cast<int>(run.reports.size());
  const int s_max = st0.blocks.s_max();
  const int ell_max = st0.blocks.ell_max();

  std::vector<double> a, b;
  for (const auto& r : run.reports) {
    a.push_back(r.a_r);
    b.push_back(r.b_r);
  }
  EstimateConfig cfg;
  cfg.Ebar = Ebar;
  cfg.rho = dom.rho;
  cfg.R = dom.R;
  cfg.sigma = dom.sigma;
  cfg.a_rule = [a](int j) { return a.at(j - 1); };
  const double M = constant_M(cfg);
  const double C = lie_constant(dom.rho, dom.R, dom.sigma);
  const CountingSequences nu(std::max(s_max, steps));
  auto add = [&](std::string name, int r, int s, int ell, double lhs, double rhs, bool hyp = false) {
    rep.records.push_back({std::move(name), r, s, ell, lhs, rhs, hyp});
  };
  // a_j delta_j^2 as a log
  auto log_ad = [&](int j) { return std::log(a[j - 1]) + 2.0 * std::log(delta_r(j)); };
  const double logM = std::log(M);

  for (int ell = 0; ell <= ell_max; ++ell)
    for (int s = 0; s <= s_max; ++s) {
      const auto& f = st0.blocks.at(ell, s);
      if (!f.empty()) add("initial_block", 0, s, ell, weighted_norm(f, dom), std::ldexp(Ebar, -ell));
    }

  for (int r = 1; r <= steps; ++r) {
    const auto& gen = run.generators[r - 1];
    const auto& st = run.states[r - 1];
    const auto& report = run.reports[r - 1];
    const auto prev = restriction_sequences(r - 1);
    const auto cur = restriction_sequences(r);
    const double dr = cur.delta;

    if (r >= 2) {
      const double lhs = std::exp((r - 1) * std::log(eps) + 3 * r * logM - std::log(b[r - 1]) +
                                  3 * log_T(r, r, cfg) - 2 * log_ad(r) + std::log(nu.nu_d(r, r)) + r * prev.zeta);
      add("diagonalization_smallness", r, r, 2, std::isinf(b[r - 1]) ? 0.0 : lhs, std::ldexp(1.0, -(r + 6)), true);
    }

    const double pre = C / (dr * dr);
    add("generator_chi0", r, r, 0, pre * weighted_norm(gen.chi0, dom, prev.d),
        std::exp((3 * r - 2) * logM + 3 * log_T(r - 1, r, cfg) - log_ad(r) + std::log(nu.nu_d(r - 1, r)) +
                 r * prev.zeta));
    add("generator_chi1", r, r, 1, pre * weighted_norm(gen.chi1, dom, prev.d + dr),
        std::exp((3 * r - 1) * logM + 3 * log_T(r, r, cfg) - 2 * log_ad(r) +
                 std::log(static_cast<double>(nu.nuI(r, r))) + r * prev.zeta));
    add("generator_chi2", r, r, 2, pre * weighted_norm(gen.chi2, dom, prev.d + 2 * dr),
        std::exp(3 * r * logM + 3 * (log_T(r, r, cfg) - log_ad(r)) + std::log(static_cast<double>(nu.nuII(r, r))) +
                 r * prev.zeta));

    if (gen.after_III && !gen.D2.empty()) {
      for (int ell = 0; ell <= ell_max; ++ell)
        for (int s = 1; s <= s_max; ++s) {
          if (ell <= 2 && s <= r) continue;
          const auto& g = gen.after_III->at(ell, s);
          if (g.empty()) continue;
          const double gn = weighted_norm(g, dom, prev.d + 3 * dr);
          const auto E = lie_transform_terms(g, gen.D2, 0.0, 4);
          for (std::size_t j = 1; j < E.size(); ++j)
            add("lie_transform", r, s, ell, std::pow(eps, j * (r - 1.0)) * weighted_norm(E[j], dom, cur.d),
                std::ldexp(gn, -static_cast<int>(j) * (r + 6)));
        }
    }

    for (int ell = 0; ell <= ell_max; ++ell)
      for (int s = 0; s <= s_max; ++s) {
        const auto& f = st.blocks.at(ell, s);
        if (ell <= 2 && s <= r) continue;
        const double lhs = weighted_norm(f, dom, cur.d);
        const double base = std::log(Ebar) - ell * kLog2 + std::log(nu.nu_d(r, s)) + s * cur.zeta;
        if (ell <= 2) {
          add("block_low_grade", r, s, ell,
              lhs, std::exp(base + (3 * s - 3 + ell) * logM + 3 * log_T(r, s, cfg) - ell * log_ad(r)));
        } else if (s == 0) {
          add("block_actions", r, s, ell, lhs, std::exp(base));
        } else {
          const int m = std::min(r, s);
          add("block_high_grade", r, s, ell, lhs, std::exp(base + 3 * s * logM + 3 * (log_T(r, s, cfg) - log_ad(m))));
        }
      }

    if (r >= 2) {
      double lhs = 0.0;
      for (int i = 0; i < report.delta_omega.size(); ++i) lhs = std::max(lhs, std::abs(report.delta_omega[i]) / dom.sigma);
      for (int j = 0; j < report.delta_Omega.size(); ++j) lhs = std::max(lhs, eps * std::abs(report.delta_Omega[j]));
      add("frequency_shift", r, r, 0, lhs,
          std::exp(r * std::log(eps) + 3 * r * logM + 3 * (log_T(r, r, cfg) - log_ad(r)) + std::log(nu.nu_d(r, r)) +
                   r * cur.zeta));
    }
  }
  return rep;
}

}  // namespace elliptorus
