#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "elliptorus/series.hpp"
#include "elliptorus/state.hpp"

namespace elliptorus {

/// Hamiltonian in real variables (p, q, x, y). Series here reuse MonomialKey with the l slots
/// holding powers of x and the lbar slots powers of y.
struct ModelInput {
  Dimensions dims;
  int K = 1;
  Eigen::VectorXd omega0;
  Eigen::VectorXd Omega0;
  /// dOmega/domega (n2 x n1) used when omega0 is varied in the geometry pass; zero by default.
  Eigen::MatrixXd dOmega;
  Series F0, F1, F2;  // order eps
  Series Fint;        // order 1, actions only
  Series Fhot;        // order eps, grade >= 3
};

/// Model file: `dims`, `K`, `omega`, `Omega`, optional `dOmega` (row-major), then `block NAME`
/// sections (F0, F1, F2, Fint, Fhot) with term lines in the series format over (p,q,x,y).
ModelInput read_model(std::istream& is);
ModelInput load_model(const std::string& path);
void write_model(std::ostream& os, const ModelInput& m);

/// x = (z - i zeta)/sqrt2, y = (zeta - i z)/sqrt2 substituted into a real-variable series.
Series complexify(const Series& real_xy);
/// Inverse substitution z = (x + i y)/sqrt2, zeta = (i x + y)/sqrt2.
Series realify(const Series& complex_zzeta);

struct PrepareConfig {
  int ell_max = 6;
  int s_max = 6;
  double epsilon = 1e-3;
  DomainParams domain;
};

struct PrepareReport {
  double Ebar = 0.0;
  double dropped_constant = 0.0;   // modulus of the discarded constant of Fint
  std::size_t promoted_terms = 0;  // Fourier modes moved to a higher s to respect |k| <= sK
  std::size_t dropped_terms = 0;   // terms beyond ell_max or s_max
  bool real = true;
};

HamiltonianState prepare_hamiltonian(const ModelInput& model, const PrepareConfig& cfg, PrepareReport* report = nullptr);

/// Frequencies of the model evaluated at a shifted omega0 (Omega follows dOmega).
ModelInput with_omega(const ModelInput& model, const Eigen::VectorXd& omega0);

/// Secular toy model: n1 = 2, n2 = 1, F0 = cos(q1 - q2), F1 couples z with e^{iq}, F2 has zero average.
ModelInput toy_model();
/// A model whose only perturbation is Fint = p1^2 (already in normal form).
ModelInput normal_form_model();
/// n1 = 2, n2 = 2 variant whose transversal modes couple, so the diagonalization is nontrivial.
ModelInput planar_model();

}  // namespace elliptorus
