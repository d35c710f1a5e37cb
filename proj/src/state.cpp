#include "elliptorus/state.hpp"

#include <cmath>
#include <string>

namespace elliptorus {

BlockTable::BlockTable(Dimensions dims, int ell_max, int s_max)
    : dims_(dims), ell_max_(ell_max), s_max_(s_max), data_(static_cast<std::size_t>((ell_max + 1) * (s_max + 1)), Series(dims)) {
  if (ell_max < 2 || s_max < 1) throw Error("block table needs ell_max >= 2 and s_max >= 1");
}

std::size_t BlockTable::index(int ell, int s) const {
  if (!contains(ell, s)) throw Error("block index out of range: (" + std::to_string(ell) + "," + std::to_string(s) + ")");
  return static_cast<std::size_t>(ell * (s_max_ + 1) + s);
}

Series BlockTable::summed(double epsilon) const {
  Series out(dims_);
  for (int s = 0; s <= s_max_; ++s) {
    const double f = std::pow(epsilon, s);
    for (int ell = 0; ell <= ell_max_; ++ell)
      if (!at(ell, s).empty()) out += at(ell, s) * Complex(f);
  }
  return out;
}

std::size_t BlockTable::term_count() const {
  std::size_t n = 0;
  for (const auto& b : data_) n += b.size();
  return n;
}

Series kernel_series(const Dimensions& dims, const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega, double epsilon) {
  std::vector<Term> terms;
  for (int i = 0; i < dims.n1; ++i) {
    MonomialKey k;
    k.set_m(i, 1);
    terms.push_back({k, Complex(omega[i])});
  }
  for (int j = 0; j < dims.n2; ++j) {
    MonomialKey k;
    k.set_l(j, 1);
    k.set_lbar(j, 1);
    terms.push_back({k, Complex(0.0, -epsilon * Omega[j])});
  }
  return Series::from_terms(dims, std::move(terms));
}

Series HamiltonianState::hamiltonian() const {
  return kernel_series(dims, omega, Omega, epsilon) + blocks.summed(epsilon);
}

std::string check_state_invariants(const HamiltonianState& st) {
  const auto& b = st.blocks;
  for (int ell = 0; ell <= b.ell_max(); ++ell) {
    for (int s = 0; s <= b.s_max(); ++s) {
      const auto& f = b.at(ell, s);
      if (!verify_class(f, {ell, s}, st.K))
        return "block (" + std::to_string(ell) + "," + std::to_string(s) + ") outside its class";
      if (ell <= 2 && s <= st.r && !f.empty())
        return "block (" + std::to_string(ell) + "," + std::to_string(s) + ") not in normal form";
      if (s == 0)
        for (const auto& t : f.terms())
          if (t.key.abs_k() != 0 || t.key.abs_l() + t.key.abs_lbar() != 0)
            return "block (" + std::to_string(ell) + ",0) depends on more than p";
    }
  }
  return {};
}

}  // namespace elliptorus
