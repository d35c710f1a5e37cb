#pragma once

#include <vector>

#include <Eigen/Dense>

#include "elliptorus/series.hpp"

namespace elliptorus {

/// Graded table f[ell][s], 0 <= ell <= ell_max, 0 <= s <= s_max. Block (ell, s) carries eps^s.
class BlockTable {
 public:
  BlockTable() = default;
  BlockTable(Dimensions dims, int ell_max, int s_max);

  int ell_max() const { return ell_max_; }
  int s_max() const { return s_max_; }
  const Dimensions& dims() const { return dims_; }

  bool contains(int ell, int s) const { return ell >= 0 && ell <= ell_max_ && s >= 0 && s <= s_max_; }
  Series& at(int ell, int s) { return data_[index(ell, s)]; }
  const Series& at(int ell, int s) const { return data_[index(ell, s)]; }

  /// Sum_s eps^s f[ell][s] over all ell.
  Series summed(double epsilon) const;
  std::size_t term_count() const;

 private:
  std::size_t index(int ell, int s) const;
  Dimensions dims_;
  int ell_max_ = 0;
  int s_max_ = 0;
  std::vector<Series> data_;
};

/// omega.p + eps sum Omega_j z_j conj(z_j), stored with -i eps Omega_j on z_j zeta_j.
Series kernel_series(const Dimensions& dims, const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega, double epsilon);

struct HamiltonianState {
  Dimensions dims;
  int K = 1;
  int r = 0;
  double epsilon = 0.0;
  Eigen::VectorXd omega;
  Eigen::VectorXd Omega;
  BlockTable blocks;

  /// Kernel plus all blocks with their numeric eps^s factors.
  Series hamiltonian() const;
};

/// Returns a description of the first violated invariant, or an empty string.
std::string check_state_invariants(const HamiltonianState& st);

}  // namespace elliptorus
