#include "elliptorus/series.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <unordered_map>

namespace elliptorus {

Dimensions::Dimensions(int n1_, int n2_) : n1(n1_), n2(n2_) {
  if (n1 < 1 || n1 > kMaxN1 || n2 < 0 || n2 > kMaxN2)
    throw DimensionError("dimensions out of range: n1=" + std::to_string(n1) + " n2=" + std::to_string(n2));
}

std::int8_t MonomialKey::narrow(int v) {
  if (v < -127 || v > 127) throw DimensionError("exponent or Fourier index out of range: " + std::to_string(v));
  return static_cast<std::int8_t>(v);
}

MonomialKey MonomialKey::make(const Dimensions& dims, const std::vector<int>& m, const std::vector<int>& l,
                              const std::vector<int>& lbar, const std::vector<int>& k) {
  if (static_cast<int>(m.size()) != dims.n1 || static_cast<int>(k.size()) != dims.n1 ||
      static_cast<int>(l.size()) != dims.n2 || static_cast<int>(lbar.size()) != dims.n2)
    throw DimensionError("monomial key vectors do not match dimensions");
  MonomialKey key;
  for (int i = 0; i < dims.n1; ++i) {
    if (m[i] < 0) throw DimensionError("negative power of p");
    key.set_m(i, m[i]);
    key.set_k(i, k[i]);
  }
  for (int j = 0; j < dims.n2; ++j) {
    if (l[j] < 0 || lbar[j] < 0) throw DimensionError("negative power of z or zeta");
    key.set_l(j, l[j]);
    key.set_lbar(j, lbar[j]);
  }
  return key;
}

std::vector<int> MonomialKey::m_vec(const Dimensions& d) const {
  std::vector<int> v(d.n1);
  for (int i = 0; i < d.n1; ++i) v[i] = m(i);
  return v;
}
std::vector<int> MonomialKey::l_vec(const Dimensions& d) const {
  std::vector<int> v(d.n2);
  for (int j = 0; j < d.n2; ++j) v[j] = l(j);
  return v;
}
std::vector<int> MonomialKey::lbar_vec(const Dimensions& d) const {
  std::vector<int> v(d.n2);
  for (int j = 0; j < d.n2; ++j) v[j] = lbar(j);
  return v;
}
std::vector<int> MonomialKey::k_vec(const Dimensions& d) const {
  std::vector<int> v(d.n1);
  for (int i = 0; i < d.n1; ++i) v[i] = k(i);
  return v;
}

// Unused slots are zero, so the sums can run over the full capacity.
int MonomialKey::abs_m() const {
  int s = 0;
  for (int i = 0; i < kMaxN1; ++i) s += m(i);
  return s;
}
int MonomialKey::abs_l() const {
  int s = 0;
  for (int j = 0; j < kMaxN2; ++j) s += l(j);
  return s;
}
int MonomialKey::abs_lbar() const {
  int s = 0;
  for (int j = 0; j < kMaxN2; ++j) s += lbar(j);
  return s;
}
int MonomialKey::abs_k() const {
  int s = 0;
  for (int i = 0; i < kMaxN1; ++i) s += std::abs(k(i));
  return s;
}

std::size_t MonomialKeyHash::operator()(const MonomialKey& key) const noexcept {
  // FNV-1a over the packed bytes
  std::size_t h = 1469598103934665603ull;
  for (auto b : key.raw()) {
    h ^= static_cast<std::uint8_t>(b);
    h *= 1099511628211ull;
  }
  return h;
}

Characteristics characteristics(const MonomialKey& key, const Dimensions& dims) {
  Characteristics c;
  for (int j = 0; j < dims.n2; ++j) c.cM += key.l(j) - key.lbar(j);
  for (int i = 0; i < dims.n1; ++i) c.cI += key.k(i);
  c.dalembert_ok = c.cM == c.cI;
  return c;
}

// ---------------------------------------------------------------------------

Series Series::from_terms(Dimensions dims, std::vector<Term> terms) {
  std::stable_sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.key < b.key; });
  Series out(dims);
  out.terms_.reserve(terms.size());
  for (std::size_t i = 0; i < terms.size();) {
    Complex c = terms[i].coeff;
    std::size_t j = i + 1;
    for (; j < terms.size() && terms[j].key == terms[i].key; ++j) c += terms[j].coeff;
    if (std::abs(c) >= kZeroThreshold) out.terms_.push_back({terms[i].key, c});
    i = j;
  }
  return out;
}

Series Series::monomial(Dimensions dims, const MonomialKey& key, Complex c) {
  return from_terms(dims, {{key, c}});
}

Series Series::constant(Dimensions dims, Complex c) { return from_terms(dims, {{MonomialKey{}, c}}); }

Complex Series::coeff(const MonomialKey& key) const {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), key, [](const Term& t, const MonomialKey& k) { return t.key < k; });
  if (it != terms_.end() && it->key == key) return it->coeff;
  return {};
}

void check_same_dims(const Series& a, const Series& b) {
  if (!(a.dims() == b.dims())) throw DimensionError("series dimensions differ");
}

namespace {

template <class Op>
std::vector<Term> merge(const std::vector<Term>& a, std::span<const Term> b, Op op) {
  std::vector<Term> out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].key < b[j].key)) {
      out.push_back(a[i++]);
    } else if (i == a.size() || b[j].key < a[i].key) {
      out.push_back({b[j].key, op(Complex{}, b[j].coeff)});
      ++j;
    } else {
      Complex c = op(a[i].coeff, b[j].coeff);
      if (std::abs(c) >= kZeroThreshold) out.push_back({a[i].key, c});
      ++i;
      ++j;
    }
  }
  return out;
}

}  // namespace

Series& Series::operator+=(const Series& o) {
  if (o.empty()) return *this;
  if (empty()) {
    *this = o;
    return *this;
  }
  check_same_dims(*this, o);
  terms_ = merge(terms_, o.terms(), [](Complex x, Complex y) { return x + y; });
  return *this;
}

Series& Series::operator-=(const Series& o) {
  if (o.empty()) return *this;
  if (!empty()) check_same_dims(*this, o);
  if (empty()) dims_ = o.dims_;
  terms_ = merge(terms_, o.terms(), [](Complex x, Complex y) { return x - y; });
  return *this;
}

Series& Series::operator*=(Complex c) {
  std::vector<Term> out;
  out.reserve(terms_.size());
  for (const auto& t : terms_) {
    Complex v = t.coeff * c;
    if (std::abs(v) >= kZeroThreshold) out.push_back({t.key, v});
  }
  terms_ = std::move(out);
  return *this;
}

bool operator==(const Series& a, const Series& b) {
  if (a.size() != b.size()) return false;
  if (a.empty()) return true;
  if (!(a.dims() == b.dims())) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a.terms()[i].key == b.terms()[i].key) || a.terms()[i].coeff != b.terms()[i].coeff) return false;
  return true;
}

bool verify_class(const Series& g, ClassTag tag, int K) {
  for (const auto& t : g.terms()) {
    if (t.key.grade() != tag.ell) return false;
    if (t.key.abs_k() > tag.s * K) return false;
    if (!characteristics(t.key, g.dims()).dalembert_ok) return false;
  }
  return true;
}

std::size_t dalembert_violations(const Series& g) {
  std::size_t n = 0;
  for (const auto& t : g.terms())
    if (!characteristics(t.key, g.dims()).dalembert_ok) ++n;
  return n;
}

// ---------------------------------------------------------------------------

namespace {

using Accumulator = std::unordered_map<MonomialKey, Complex, MonomialKeyHash>;

MonomialKey add_keys(const MonomialKey& a, const MonomialKey& b) {
  MonomialKey s;
  for (int i = 0; i < kMaxN1; ++i) {
    s.set_m(i, a.m(i) + b.m(i));
    s.set_k(i, a.k(i) + b.k(i));
  }
  for (int j = 0; j < kMaxN2; ++j) {
    s.set_l(j, a.l(j) + b.l(j));
    s.set_lbar(j, a.lbar(j) + b.lbar(j));
  }
  return s;
}

Series collect(Dimensions dims, Accumulator& acc) {
  std::vector<Term> terms;
  terms.reserve(acc.size());
  for (auto& [k, c] : acc) terms.push_back({k, c});
  return Series::from_terms(dims, std::move(terms));
}

}  // namespace

Series poisson_bracket(const Series& g, const Series& h, int ell_max, BracketStats* stats) {
  if (g.empty() || h.empty()) return Series(g.empty() ? h.dims() : g.dims());
  check_same_dims(g, h);
  const Dimensions dims = g.dims();
  const Complex I(0.0, 1.0);
  Accumulator acc;
  acc.reserve(g.size() * 4);
  // Summation order per key is fixed by the (g, h, j) loop order, so results are deterministic.
  for (const auto& a : g.terms()) {
    for (const auto& b : h.terms()) {
      const MonomialKey sum = add_keys(a.key, b.key);
      const int out_grade = a.key.grade() + b.key.grade() - 2;
      const Complex cc = a.coeff * b.coeff;
      for (int j = 0; j < dims.n1; ++j) {
        // d_q g d_p h - d_p g d_q h, same resulting key
        const int w = a.key.k(j) * b.key.m(j) - a.key.m(j) * b.key.k(j);
        if (w == 0) continue;
        if (out_grade > ell_max) {
          if (stats) stats->truncated = true, ++stats->dropped_terms;
          continue;
        }
        MonomialKey key = sum;
        key.set_m(j, sum.m(j) - 1);
        acc[key] += I * static_cast<double>(w) * cc;
      }
      for (int j = 0; j < dims.n2; ++j) {
        // d_zeta g d_z h - d_z g d_zeta h
        const int w = a.key.lbar(j) * b.key.l(j) - a.key.l(j) * b.key.lbar(j);
        if (w == 0) continue;
        if (out_grade > ell_max) {
          if (stats) stats->truncated = true, ++stats->dropped_terms;
          continue;
        }
        MonomialKey key = sum;
        key.set_l(j, sum.l(j) - 1);
        key.set_lbar(j, sum.lbar(j) - 1);
        acc[key] += static_cast<double>(w) * cc;
      }
    }
  }
  return collect(dims, acc);
}

Series multiply(const Series& a, const Series& b) {
  if (a.empty() || b.empty()) return Series(a.empty() ? b.dims() : a.dims());
  check_same_dims(a, b);
  Accumulator acc;
  for (const auto& x : a.terms())
    for (const auto& y : b.terms()) acc[add_keys(x.key, y.key)] += x.coeff * y.coeff;
  return collect(a.dims(), acc);
}

namespace {
template <class Pred>
Series filter(const Series& g, Pred keep) {
  std::vector<Term> out;
  for (const auto& t : g.terms())
    if (keep(t.key)) out.push_back(t);
  return Series::from_terms(g.dims(), std::move(out));
}
}  // namespace

Series average_q(const Series& g) {
  return filter(g, [](const MonomialKey& k) { return k.abs_k() == 0; });
}

Series oscillating_part(const Series& g) {
  return filter(g, [](const MonomialKey& k) { return k.abs_k() != 0; });
}

Series truncate(const Series& g, int ell_max, int k_max) {
  return filter(g, [&](const MonomialKey& k) { return k.grade() <= ell_max && k.abs_k() <= k_max; });
}

Series grade_part(const Series& g, int ell) {
  return filter(g, [&](const MonomialKey& k) { return k.grade() == ell; });
}

Series derivative(const Series& g, Var v, int index) {
  const Complex I(0.0, 1.0);
  std::vector<Term> out;
  for (const auto& t : g.terms()) {
    MonomialKey key = t.key;
    switch (v) {
      case Var::p:
        if (key.m(index) == 0) continue;
        out.push_back({(key.set_m(index, key.m(index) - 1), key), t.coeff * static_cast<double>(t.key.m(index))});
        break;
      case Var::q:
        if (key.k(index) == 0) continue;
        out.push_back({key, t.coeff * I * static_cast<double>(key.k(index))});
        break;
      case Var::z:
        if (key.l(index) == 0) continue;
        out.push_back({(key.set_l(index, key.l(index) - 1), key), t.coeff * static_cast<double>(t.key.l(index))});
        break;
      case Var::zeta:
        if (key.lbar(index) == 0) continue;
        out.push_back({(key.set_lbar(index, key.lbar(index) - 1), key), t.coeff * static_cast<double>(t.key.lbar(index))});
        break;
    }
  }
  return Series::from_terms(g.dims(), std::move(out));
}

double weighted_norm(const Series& g, const DomainParams& d, double shrink) {
  if (!(shrink < 1.0)) throw Error("weighted_norm: shrink must be < 1");
  const double f = 1.0 - shrink;
  const double rho = f * d.rho, R = f * d.R, sigma = f * d.sigma;
  double total = 0.0;
  for (const auto& t : g.terms()) {
    const auto& k = t.key;
    total += std::abs(t.coeff) * std::pow(rho, k.abs_m()) * std::pow(R, k.abs_l() + k.abs_lbar()) *
             std::exp(sigma * k.abs_k());
  }
  return total;
}

double max_abs_coeff(const Series& g) {
  double m = 0.0;
  for (const auto& t : g.terms()) m = std::max(m, std::abs(t.coeff));
  return m;
}

Complex evaluate(const Series& g, const PhasePoint& x) {
  const Dimensions& d = g.dims();
  const Complex I(0.0, 1.0);
  Complex total{};
  for (const auto& t : g.terms()) {
    Complex v = t.coeff;
    Complex phase{};
    for (int i = 0; i < d.n1; ++i) {
      if (t.key.m(i)) v *= std::pow(x.p[i], t.key.m(i));
      phase += static_cast<double>(t.key.k(i)) * x.q[i];
    }
    for (int j = 0; j < d.n2; ++j) {
      if (t.key.l(j)) v *= std::pow(x.z[j], t.key.l(j));
      if (t.key.lbar(j)) v *= std::pow(x.zeta[j], t.key.lbar(j));
    }
    total += v * std::exp(I * phase);
  }
  return total;
}

namespace {
// (-i)^n
Complex minus_i_pow(int n) {
  switch (((n % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, -1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, 1.0};
  }
}
}  // namespace

Series conjugate_series(const Series& g) {
  const Dimensions& d = g.dims();
  std::vector<Term> out;
  out.reserve(g.size());
  for (const auto& t : g.terms()) {
    MonomialKey key;
    for (int i = 0; i < d.n1; ++i) {
      key.set_m(i, t.key.m(i));
      key.set_k(i, -t.key.k(i));
    }
    for (int j = 0; j < d.n2; ++j) {
      key.set_l(j, t.key.lbar(j));
      key.set_lbar(j, t.key.l(j));
    }
    out.push_back({key, std::conj(t.coeff) * minus_i_pow(t.key.abs_l() + t.key.abs_lbar())});
  }
  return Series::from_terms(d, std::move(out));
}

bool is_real(const Series& g, double rel_tol) {
  const double scale = max_abs_coeff(g);
  if (scale == 0.0) return true;
  return max_abs_coeff(g - conjugate_series(g)) <= rel_tol * scale;
}

}  // namespace elliptorus
