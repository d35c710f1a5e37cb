#pragma once

#include <functional>
#include <string>
#include <vector>

#include "elliptorus/series.hpp"

namespace elliptorus {

struct NormalizeResult;

/// delta_r = 3/(8 pi^2 r^2) (delta_0 = 0), d_r = 4 sum_{i<=r} delta_i, zeta_r from zeta_0 = zeta_1 = 0.
struct RestrictionSequences {
  double delta = 0.0;
  double d = 0.0;
  double zeta = 0.0;
};
RestrictionSequences restriction_sequences(int r);
double delta_r(int r);

/// Multisets of indexes are sorted vectors.
using IndexSet = std::vector<int>;

/// {floor(s/s), floor(s/(s-1)), ..., floor(s/2)}, ascending, s - 1 elements.
IndexSet istar_set(int s);
/// I <| J: after sorting and padding the shorter one with zeros, I_m <= J_m for every m.
bool index_precedes(IndexSet I, IndexSet J);
bool jrs_contains(const IndexSet& I, int r, int s);

struct EstimateConfig {
  int n1 = 2;
  double gamma = 1.0;
  double tau = 2.0;
  int K = 1;
  double Ebar = 1.0;
  double bbar = 1.0;
  double epsilon = 1e-3;
  double rho = 1.0;
  double R = 1.0;
  double sigma = 1.0;
  double J0 = 1.0;
  /// a_r for r >= 1; empty means the Diophantine rule gamma/(rK)^tau.
  std::function<double(int)> a_rule;
  /// b_r for r >= 1; empty means bbar.
  std::function<double(int)> b_rule;

  double a(int r) const;
  double b(int r) const;
  double eta() const;
  void validate() const;
};

/// M = max{1, Ebar (2e/(rho sigma) + e^2/R^2)}.
double constant_M(const EstimateConfig& cfg);
/// 2e/(rho sigma) + e^2/R^2, the factor of the Lie-series estimate.
double lie_constant(double rho, double R, double sigma);

/// log T_{r,s}. Each slot m of the ascending I*_s takes the best index in [0, min(I*_m, r, s/2)]
/// (index 0 contributes 1); with 1/(a_j delta_j^2) nondecreasing this is the capped I*_s.
double log_T(int r, int s, const EstimateConfig& cfg);
double T_rs(int r, int s, const EstimateConfig& cfg);

using BigCount = unsigned __int128;

/// theta_i = sum_{j<=i} (2^{2j+1} - 2^j), 0 <= i <= 60.
BigCount theta(int i);
/// Catalan numbers lambda_1 = 1, lambda_j = sum_{i<j} lambda_i lambda_{j-i}.
unsigned long long catalan(int j);

/// nu_{r,s}, nu^I, nu^II for 0 <= r, s <= s_max. Exact while the values fit in 128 bits.
class CountingSequences {
 public:
  using Int = BigCount;
  explicit CountingSequences(int s_max);

  int s_max() const { return s_max_; }
  Int nu(int r, int s) const { return nu_[idx(r, s)]; }
  Int nuI(int r, int s) const { return nuI_[idx(r, s)]; }
  Int nuII(int r, int s) const { return nuII_[idx(r, s)]; }
  /// nu from the single recursion with theta weights.
  Int nu_collapsed(int r, int s) const { return nuc_[idx(r, s)]; }
  double nu_d(int r, int s) const { return static_cast<double>(nu(r, s)); }
  double log2_nu(int r, int s) const;

 private:
  std::size_t idx(int r, int s) const;
  int s_max_;
  std::vector<Int> nu_, nuI_, nuII_, nuc_;
};

struct GammaResult {
  double value = 0.0;  // partial sum plus the upper tail bound
  double partial = 0.0;
  double tail_lower = 0.0;
  double tail_upper = 0.0;
  int terms = 0;
};

enum class GammaTail { none, diophantine };

/// Gamma = -sum_{r>=1} log a_r / (r(r+1)). Throws NumericalError when the terms decay slower than a power law.
GammaResult gamma_condition_tau(const EstimateConfig& cfg, int r_terms = 100000,
                                GammaTail tail = GammaTail::diophantine);

struct Thresholds {
  double M = 1.0;
  double Gamma = 0.0;
  double log_A = 0.0;  // A = (2^18 M e^Gamma)^3
  double A = 0.0;
  double h0 = 0.0;
  double eps_an = 0.0;
  double eps_ge = 0.0;
  double eps_star = 0.0;
  double log_eps_an = 0.0;
};

Thresholds thresholds(const EstimateConfig& cfg, double Gamma);

/// h_0 = min{gamma eta/(4K^tau), bbar/(4 J0)}, h_r = h_{r-1}/2^{tau+2}.
std::vector<double> h_sequence(const EstimateConfig& cfg, int r_max);

/// Right-hand side of the single Poisson bracket estimate.
double poisson_bracket_bound(const DomainParams& dom, double d, double delta, double norm_g, double norm_gp);
/// Right-hand side of the estimate of L_X^j g / j!.
double lie_series_bound(const DomainParams& dom, int j, double d, double norm_X, double norm_g);

struct AuditRecord {
  std::string name;
  int r = 0, s = 0, ell = 0;
  double lhs = 0.0, rhs = 0.0;
  /// Hypotheses are recorded but a failing one does not count as a bound violation.
  bool hypothesis = false;
  bool ok() const { return lhs <= rhs; }
  double slack() const;
};

struct AuditReport {
  std::vector<AuditRecord> records;
  bool hypotheses_hold() const;
  std::size_t violations() const;
};

/// Evaluates the bounds on generating functions, on the blocks of every H^(r) and on the frequency
/// shifts of a completed run. a_r and b_r are the run's measured values. Stage tables (keep_stage_tables)
/// enable the Lie-transform check.
AuditReport audit_run(const NormalizeResult& run, double Ebar, const DomainParams& dom);

}  // namespace elliptorus
