#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "elliptorus/series.hpp"
#include "elliptorus/state.hpp"

namespace elliptorus {

struct NonresonanceResult {
  double a_r = 0.0;
  double b_r = 0.0;  // +inf when n2 < 2
  std::vector<int> k_min, l_min;
};

/// a_r = min |k.omega + eps l.Omega| over 0 < |k| <= rK, |l| <= 2; b_r = min_{i<j} |Omega_i - Omega_j|.
/// Throws ResonanceDetected when a_r <= a_min or b_r <= b_min.
NonresonanceResult check_nonresonance(const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega, double epsilon, int r,
                                      int K, double a_min = 0.0, double b_min = 0.0);

/// Visits every k in Z^n with 1 <= |k|_1 <= kmax whose first nonzero entry is positive.
void for_each_half_lattice(int n, int kmax, const std::function<void(const std::vector<int>&)>& f);
/// Visits every l in Z^n with |l|_1 <= lmax, in order of increasing |l|_1.
void for_each_lattice_ball(int n, int lmax, const std::function<void(const std::vector<int>&)>& f);

struct DivisorOptions {
  /// Abort when |divisor| < tol * max(1, |k| max|omega_i|).
  double tol = 1e-10;
};

struct HomologicalSolution {
  Series chi;
  Series average;          // part left in normal form (<f> for chi0 and chi2)
  double min_divisor = 0;  // smallest |divisor| used (inf when nothing divided)
};

HomologicalSolution solve_chi0(const Series& f0, const Eigen::VectorXd& omega, const DivisorOptions& opt = {});
HomologicalSolution solve_chi1(const Series& f1, const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega,
                               double epsilon, const DivisorOptions& opt = {});
HomologicalSolution solve_chi2(const Series& f2, const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega,
                               double epsilon, const DivisorOptions& opt = {});

/// || L_chi(kernel) + f - <f>_avg || / ||f|| using max-modulus coefficients.
double homological_residual(const Series& chi, const Series& f, const Series& average, const Eigen::VectorXd& omega,
                            const Eigen::VectorXd& Omega, double epsilon);

enum class Stage { I = 0, II = 1, III = 2 };

struct TruncationCounters {
  std::size_t dropped_blocks = 0;  // nonzero contributions that landed beyond s_max
  std::size_t dropped_terms = 0;
};

/// One Lie-series stage exp(eps^r L_chi) on the block table. kernel_image is L_chi applied to the
/// kernel omega.p + eps Omega.z zbar; inside a step it is -(f - <f>) of the target block, which
/// makes the target block equal to its average exactly.
BlockTable apply_lie_series(const BlockTable& blocks, const Series& chi, Stage stage, int r, const Series& kernel_image,
                            TruncationCounters* counters = nullptr);

struct DiagonalizationResult {
  std::vector<Series> D;  // D_2^{(r;j)}, j = 1..
  std::vector<Series> Z;  // Z_j, j = 1.. (diagonal, multiples of z_j zeta_j)
  double max_residual = 0.0;
  double min_divisor = 0.0;
};

struct DiagonalizeOptions {
  double tail_tol = 1e-16;
  int max_order = 64;
  double divisor_tol = 1e-10;
};

/// Lie-transform diagonalization of eps Z0 + eps^r g1 with Z0 = sum Omega_j z_j zbar_j.
DiagonalizationResult diagonalize(const Eigen::VectorXd& Omega, const Series& g1, int r, double epsilon,
                                  const DiagonalizeOptions& opt = {});

/// E_j g for j = 0.. with generators X_i (index 0 holds X_1); stops when terms fall under tol * ||g||.
std::vector<Series> lie_transform_terms(const Series& g, const std::vector<Series>& X, double tol = 1e-16,
                                        int max_order = 200);
Series lie_transform(const Series& g, const std::vector<Series>& X, double tol = 1e-16, int max_order = 200);

struct FrequencyUpdate {
  Eigen::VectorXd omega, Omega;
  /// The increments themselves, exact even when they vanish against omega in floating point.
  Eigen::VectorXd delta_omega, delta_Omega;
};

FrequencyUpdate update_frequencies(const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega, const Series& f2_avg,
                                   const std::vector<Series>& Z, int r, double epsilon);

struct StepConfig {
  DivisorOptions divisors;
  DiagonalizeOptions diag;
  double a_min = 0.0;
  double b_min = 0.0;
  double homological_tol = 1e-12;
  /// Keep the block tables after stages I-III in the generating set (used by the bound audit).
  bool keep_stage_tables = false;
};

struct GeneratingSet {
  int r = 0;
  Series chi0, chi1, chi2;
  std::vector<Series> D2;  // unscaled D_2^{(r;j)}
  std::vector<Series> Z;
  double min_divisor_chi0 = 0, min_divisor_chi1 = 0, min_divisor_chi2 = 0, min_divisor_diag = 0;
  std::optional<BlockTable> after_I, after_II, after_III;
  Series g1;       // angle-free (z, zeta) part of <f2^{(II;r,r)}>
  Series f2_avg;   // <f2^{(II;r,r)}>
};

struct StepReport {
  int r = 0;
  double a_r = 0, b_r = 0;
  std::vector<int> k_min, l_min;
  std::vector<double> coupling_norm_before;  // sum_{ell<=2} max|c| of f[ell][s], indexed by s
  std::vector<double> coupling_norm_after;
  Eigen::VectorXd delta_omega, delta_Omega;
  double dropped_constant_re = 0, dropped_constant_im = 0;
  double residual_chi0 = 0, residual_chi1 = 0, residual_chi2 = 0, residual_diag = 0;
  std::size_t diag_order = 0;
  TruncationCounters truncation;
  std::size_t dalembert_violations = 0;
  double cauchy_increment = 0;  // max|c| of H^(r) - H^(r-1)
};

struct StepResult {
  HamiltonianState state;
  GeneratingSet gen;
  StepReport report;
};

StepResult normalization_step(const HamiltonianState& state, const StepConfig& cfg = {});

struct NormalizeResult {
  HamiltonianState initial;
  HamiltonianState final_state;
  std::vector<HamiltonianState> states;  // after each completed step
  std::vector<StepReport> reports;
  std::vector<GeneratingSet> generators;
  std::optional<std::string> stop_reason;  // set when a step aborted
  std::optional<ResonanceDetected> resonance;
};

NormalizeResult normalize(const HamiltonianState& state0, int r_max, const StepConfig& cfg = {});

/// Coupling norm at order s: sum over ell <= 2 of max|c| of f[ell][s].
double coupling_norm(const BlockTable& b, int s);

}  // namespace elliptorus
