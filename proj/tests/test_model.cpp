#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "elliptorus/model.hpp"
#include "elliptorus/series_io.hpp"
#include "random_series.hpp"

using namespace elliptorus;

namespace {

const Complex I(0.0, 1.0);

Series mono(const Dimensions& d, std::vector<int> m, std::vector<int> l, std::vector<int> lb, std::vector<int> k,
            Complex c = 1.0) {
  return Series::monomial(d, MonomialKey::make(d, m, l, lb, k), c);
}

ModelInput empty_model(Dimensions d) {
  ModelInput m;
  m.dims = d;
  m.K = 1;
  m.omega0 = Eigen::VectorXd::LinSpaced(d.n1, 1.0, 1.0 + 0.618 * (d.n1 - 1));
  m.Omega0 = Eigen::VectorXd::Constant(d.n2, 0.1);
  m.dOmega = Eigen::MatrixXd::Zero(d.n2, d.n1);
  m.F0 = m.F1 = m.F2 = m.Fint = m.Fhot = Series(d);
  return m;
}

/// Independent evaluation of a real-variable series at real (p, q, x, y).
double eval_real(const Series& g, const Eigen::VectorXd& p, const Eigen::VectorXd& q, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& y) {
  Complex total = 0.0;
  const auto& d = g.dims();
  for (const auto& t : g.terms()) {
    Complex v = t.coeff;
    double phase = 0.0;
    for (int i = 0; i < d.n1; ++i) {
      v *= std::pow(p[i], t.key.m(i));
      phase += t.key.k(i) * q[i];
    }
    for (int j = 0; j < d.n2; ++j) v *= std::pow(x[j], t.key.l(j)) * std::pow(y[j], t.key.lbar(j));
    total += v * std::exp(I * phase);
  }
  return total.real();
}

}  // namespace

TEST_CASE("complexify stores z zbar as -i z zeta") {
  Dimensions d(1, 1);
  auto quad = mono(d, {0}, {2}, {0}, {0}, 0.5) + mono(d, {0}, {0}, {2}, {0}, 0.5);
  CHECK(complexify(quad) == mono(d, {0}, {1}, {1}, {0}, -I));
}

TEST_CASE("complexify agrees with pointwise evaluation and realify inverts it") {
  std::mt19937_64 rng(17);
  Dimensions d(2, 2);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = elliptorus::testing::random_series(rng, d, 5, 3, 12);
    auto gc = complexify(g);
    Eigen::VectorXd p = Eigen::VectorXd::Random(2), q = Eigen::VectorXd::Random(2), x = Eigen::VectorXd::Random(2),
                    y = Eigen::VectorXd::Random(2);
    PhasePoint pt;
    pt.p = p.cast<Complex>();
    pt.q = q.cast<Complex>();
    pt.z = ((x.cast<Complex>() + I * y.cast<Complex>()) / std::sqrt(2.0)).eval();
    pt.zeta = ((I * x.cast<Complex>() + y.cast<Complex>()) / std::sqrt(2.0)).eval();
    Complex direct = 0.0;
    for (const auto& t : g.terms()) {
      auto one = Series::monomial(d, t.key, t.coeff);
      direct += Complex(eval_real(one, p, q, x, y), eval_real(one * Complex(-I), p, q, x, y));
    }
    CHECK(std::abs(evaluate(gc, pt) - direct) < 1e-12 * (1.0 + std::abs(direct)));

    auto back = realify(gc);
    CHECK(max_abs_coeff(back - g) <= 4e-16 * max_abs_coeff(g));
  }
}

TEST_CASE("round trip is exact for even transversal degree with dyadic coefficients") {
  Dimensions d(1, 1);
  auto g = mono(d, {1}, {2}, {0}, {1}, 0.25) + mono(d, {0}, {1}, {1}, {0}, -1.5) + mono(d, {0}, {0}, {4}, {-2}, 3.0) +
           mono(d, {2}, {1}, {1}, {0}, Complex(0.5, -0.125));
  CHECK(realify(complexify(g)) == g);
}

TEST_CASE("real inputs produce conjugate-paired coefficients") {
  auto m = toy_model();
  for (const Series* s : {&m.F0, &m.F1, &m.F2, &m.Fint, &m.Fhot}) {
    auto g = complexify(*s);
    CHECK(is_real(g, 0.0));
  }
}

TEST_CASE("prepare: already normal form") {
  auto m = empty_model(Dimensions(1, 1));
  m.Fint = mono(m.dims, {2}, {0}, {0}, {0});
  PrepareConfig cfg;
  auto st = prepare_hamiltonian(m, cfg);
  CHECK(st.blocks.at(4, 0) == mono(m.dims, {2}, {0}, {0}, {0}));
  CHECK(st.blocks.term_count() == 1);
}

TEST_CASE("prepare: toy F0 gives two Fourier terms of coefficient 1/2") {
  auto m = toy_model();
  PrepareConfig cfg;
  PrepareReport rep;
  auto st = prepare_hamiltonian(m, cfg, &rep);
  const auto& f0 = st.blocks.at(0, 1);
  REQUIRE(f0.size() == 2);
  // Euler: cos(q1 - q2) = (e^{i(q1-q2)} + e^{-i(q1-q2)})/2
  CHECK(f0.coeff(MonomialKey::make(m.dims, {0, 0}, {0}, {0}, {1, -1})) == Complex(0.5));
  CHECK(f0.coeff(MonomialKey::make(m.dims, {0, 0}, {0}, {0}, {-1, 1})) == Complex(0.5));
  CHECK(rep.real);
  CHECK(rep.promoted_terms == 0);
  CHECK(check_state_invariants(st).empty());
  for (int ell = 0; ell <= cfg.ell_max; ++ell)
    for (int s = 0; s <= cfg.s_max; ++s) {
      CHECK(verify_class(st.blocks.at(ell, s), {ell, s}, m.K));
      CHECK(std::ldexp(weighted_norm(st.blocks.at(ell, s), cfg.domain), ell) <= rep.Ebar);
    }
  CHECK(rep.Ebar > 0.0);
}

TEST_CASE("prepare: hypothesis violations") {
  Dimensions d(2, 1);
  PrepareConfig cfg;
  {
    auto m = empty_model(d);
    m.F1 = mono(d, {0, 0}, {1}, {0}, {2, 0}) + mono(d, {0, 0}, {1}, {0}, {-2, 0});  // x cos(2 q1)
    CHECK_THROWS_AS(prepare_hamiltonian(m, cfg), ModelError);
  }
  {
    auto m = empty_model(d);
    m.F2 = mono(d, {1, 0}, {0}, {0}, {0, 0});  // nonzero average of f2
    CHECK_THROWS_AS(prepare_hamiltonian(m, cfg), ModelError);
  }
  {
    auto m = empty_model(d);
    m.F0 = mono(d, {1, 0}, {0}, {0}, {1, -1});  // F0 depends on p
    CHECK_THROWS_AS(prepare_hamiltonian(m, cfg), ModelError);
  }
  {
    auto m = empty_model(d);
    m.Fint = mono(d, {1, 0}, {0}, {0}, {0, 0});  // linear action term
    CHECK_THROWS_AS(prepare_hamiltonian(m, cfg), ModelError);
  }
  {
    auto m = empty_model(d);
    m.Fhot = mono(d, {0, 0}, {1}, {1}, {0, 0});  // grade 2 in the hot block
    CHECK_THROWS_AS(prepare_hamiltonian(m, cfg), ModelError);
  }
}

TEST_CASE("prepare: Fourier modes beyond K move to higher order") {
  Dimensions d(2, 0);
  auto m = empty_model(d);
  m.K = 1;
  m.F0 = mono(d, {0, 0}, {}, {}, {2, -2}, 0.5) + mono(d, {0, 0}, {}, {}, {-2, 2}, 0.5);
  PrepareConfig cfg;
  cfg.epsilon = 0.01;
  PrepareReport rep;
  auto st = prepare_hamiltonian(m, cfg, &rep);
  CHECK(rep.promoted_terms == 2);
  CHECK(st.blocks.at(0, 1).empty());
  // eps cos(2(q1-q2)) = eps^4 (cos(...)/eps^3)
  CHECK(st.blocks.at(0, 4).coeff(MonomialKey::make(d, {0, 0}, {}, {}, {2, -2})).real() == doctest::Approx(0.5 / 1e-6));
}

TEST_CASE("model file round trip") {
  auto m = toy_model();
  std::ostringstream os;
  write_model(os, m);
  std::istringstream is(os.str());
  auto back = read_model(is);
  CHECK(back.dims == m.dims);
  CHECK(back.K == m.K);
  CHECK(back.omega0 == m.omega0);
  CHECK(back.Omega0 == m.Omega0);
  CHECK(back.dOmega == m.dOmega);
  CHECK(back.F0 == m.F0);
  CHECK(back.F1 == m.F1);
  CHECK(back.F2 == m.F2);
  CHECK(back.Fint == m.Fint);
  CHECK(back.Fhot == m.Fhot);

  std::istringstream bad("dims 2 1\nK 2\nomega 1\nOmega 0.1\n");
  CHECK_THROWS_AS(read_model(bad), IoError);
  std::istringstream bad2("dims 1 0\nK 1\nomega 1\nOmega\n0 | | | 1 | 1 0\n");
  CHECK_THROWS_AS(read_model(bad2), IoError);
  std::istringstream bad3("dims 1 0\nK 1\nomega 1\nOmega\nblock Fzz\n");
  CHECK_THROWS_AS(read_model(bad3), IoError);
}

TEST_CASE("with_omega moves Omega along dOmega") {
  auto m = toy_model();
  Eigen::Vector2d w(1.01, 0.6);
  auto m2 = with_omega(m, w);
  CHECK(m2.Omega0[0] == doctest::Approx(0.3 + 0.5 * 0.01 - 0.2 * (0.6 - m.omega0[1])));
}
