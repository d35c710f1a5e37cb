#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "elliptorus/errors.hpp"

namespace elliptorus {

using Complex = std::complex<double>;

inline constexpr int kMaxN1 = 6;
inline constexpr int kMaxN2 = 6;

/// Number of action-angle pairs (p,q) and of transversal pairs (z, zeta = i conj(z)).
struct Dimensions {
  int n1 = 1;
  int n2 = 0;

  Dimensions() = default;
  Dimensions(int n1_, int n2_);
  friend bool operator==(const Dimensions&, const Dimensions&) = default;
};

/// Exponents of p^m z^l zeta^lbar exp(i k.q), packed in fixed slots.
class MonomialKey {
 public:
  static constexpr int kSlots = 2 * kMaxN1 + 2 * kMaxN2;

  int m(int i) const { return e_[i]; }
  int l(int j) const { return e_[kMaxN1 + j]; }
  int lbar(int j) const { return e_[kMaxN1 + kMaxN2 + j]; }
  int k(int i) const { return e_[kMaxN1 + 2 * kMaxN2 + i]; }

  void set_m(int i, int v) { e_[i] = narrow(v); }
  void set_l(int j, int v) { e_[kMaxN1 + j] = narrow(v); }
  void set_lbar(int j, int v) { e_[kMaxN1 + kMaxN2 + j] = narrow(v); }
  void set_k(int i, int v) { e_[kMaxN1 + 2 * kMaxN2 + i] = narrow(v); }

  /// Builds a key from explicit vectors; sizes must match dims.
  static MonomialKey make(const Dimensions& dims, const std::vector<int>& m, const std::vector<int>& l,
                          const std::vector<int>& lbar, const std::vector<int>& k);

  std::vector<int> m_vec(const Dimensions& d) const;
  std::vector<int> l_vec(const Dimensions& d) const;
  std::vector<int> lbar_vec(const Dimensions& d) const;
  std::vector<int> k_vec(const Dimensions& d) const;

  int abs_m() const;
  int abs_l() const;
  int abs_lbar() const;
  int abs_k() const;
  /// 2|m| + |l| + |lbar|
  int grade() const { return 2 * abs_m() + abs_l() + abs_lbar(); }

  const std::array<std::int8_t, kSlots>& raw() const { return e_; }
  friend auto operator<=>(const MonomialKey&, const MonomialKey&) = default;
  friend bool operator==(const MonomialKey&, const MonomialKey&) = default;

 private:
  static std::int8_t narrow(int v);
  std::array<std::int8_t, kSlots> e_{};
};

struct MonomialKeyHash {
  std::size_t operator()(const MonomialKey& key) const noexcept;
};

struct Characteristics {
  int cM = 0;
  int cI = 0;
  bool dalembert_ok = true;
};

Characteristics characteristics(const MonomialKey& key, const Dimensions& dims);

struct Term {
  MonomialKey key;
  Complex coeff;
};

/// Coefficients with modulus below this are removed.
inline constexpr double kZeroThreshold = 1e-300;

/// Sparse Taylor-Fourier series. Terms are kept sorted by key with no zero coefficients;
/// values are immutable once built.
class Series {
 public:
  Series() = default;
  explicit Series(Dimensions dims) : dims_(dims) {}

  /// Sums duplicate keys (in input order) and drops zeros.
  static Series from_terms(Dimensions dims, std::vector<Term> terms);
  static Series monomial(Dimensions dims, const MonomialKey& key, Complex c);
  static Series constant(Dimensions dims, Complex c);

  const Dimensions& dims() const { return dims_; }
  std::span<const Term> terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  /// Coefficient of key, zero when absent.
  Complex coeff(const MonomialKey& key) const;

  Series& operator+=(const Series& o);
  Series& operator-=(const Series& o);
  Series& operator*=(Complex c);

  friend Series operator+(Series a, const Series& b) { return a += b; }
  friend Series operator-(Series a, const Series& b) { return a -= b; }
  friend Series operator*(Series a, Complex c) { return a *= c; }
  friend Series operator*(Complex c, Series a) { return a *= c; }
  friend Series operator-(Series a) { return a *= Complex(-1.0); }
  friend bool operator==(const Series& a, const Series& b);

 private:
  Dimensions dims_;
  std::vector<Term> terms_;
};

void check_same_dims(const Series& a, const Series& b);

/// Polynomial grade and Fourier budget index of a class P_{ell, sK}.
struct ClassTag {
  int ell = 0;
  int s = 0;
};

bool verify_class(const Series& g, ClassTag tag, int K);
/// Number of keys violating the d'Alembert rule.
std::size_t dalembert_violations(const Series& g);

inline constexpr int kNoGradeCap = std::numeric_limits<int>::max();

struct BracketStats {
  bool truncated = false;
  std::size_t dropped_terms = 0;
};

/// {g, h} with q before p and zeta before z. Terms of grade above ell_max are dropped
/// and reported through stats.
Series poisson_bracket(const Series& g, const Series& h, int ell_max = kNoGradeCap, BracketStats* stats = nullptr);

/// L_chi g = {g, chi}
inline Series lie_derivative(const Series& g, const Series& chi) { return poisson_bracket(g, chi); }

Series multiply(const Series& a, const Series& b);
Series average_q(const Series& g);
/// g minus its angular average.
Series oscillating_part(const Series& g);
Series truncate(const Series& g, int ell_max, int k_max);
/// Terms with a prescribed grade.
Series grade_part(const Series& g, int ell);

enum class Var { p, q, z, zeta };
Series derivative(const Series& g, Var v, int index);

/// Radii of the complex domain: actions, transversal ball, angular strip, frequency extension.
struct DomainParams {
  double rho = 1.0;
  double R = 1.0;
  double sigma = 1.0;
  double h = 1.0;
};

/// Coefficient majorant sum_k e^{|k| sigma'} sum |c| rho'^{|m|} R'^{|l|+|lbar|} with primes
/// meaning multiplication by (1 - shrink).
double weighted_norm(const Series& g, const DomainParams& d, double shrink = 0.0);
double max_abs_coeff(const Series& g);

/// Evaluation point; q may be complex. zeta is the stored variable i conj(z) on the real slice.
struct PhasePoint {
  Eigen::VectorXcd p, q, z, zeta;
};

Complex evaluate(const Series& g, const PhasePoint& x);

/// Conjugation involution of the real structure: c at (m,l,lbar,k) maps to conj(c) (-i)^{|l|+|lbar|}
/// at (m,lbar,l,-k). A series is real-valued on the real slice iff it is a fixed point.
Series conjugate_series(const Series& g);
bool is_real(const Series& g, double rel_tol = 1e-13);

}  // namespace elliptorus
