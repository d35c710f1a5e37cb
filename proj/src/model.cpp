#include "elliptorus/model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <utility>
#include <sstream>

#include "elliptorus/series_io.hpp"

namespace elliptorus {

namespace {

using GaussInt = std::complex<double>;  // integer-valued parts only, so products stay exact

double binomial(int n, int k) {
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}

GaussInt unit_pow(GaussInt u, int n) {
  GaussInt r(1.0, 0.0);
  for (int i = 0; i < n; ++i) r *= u;
  return r;
}

/// 2^{-n/2}, exact for even n.
double half_sqrt2_pow(int n) {
  if (n % 2 == 0) return std::ldexp(1.0, -n / 2);
  return std::ldexp(M_SQRT1_2, -(n - 1) / 2);
}

struct Partial {
  std::vector<int> a, b;  // target exponents of the two transversal variables
  GaussInt w;
};

/// Expands prod_j (u1 A + u2 B)^{e1_j} (v1 A + v2 B)^{e2_j} into monomials A^a B^b with Gaussian-integer weights.
std::vector<Partial> expand_linear(const Dimensions& d, const MonomialKey& key, GaussInt u1, GaussInt u2, GaussInt v1,
                                   GaussInt v2) {
  std::vector<Partial> acc{{std::vector<int>(d.n2, 0), std::vector<int>(d.n2, 0), GaussInt(1.0)}};
  for (int j = 0; j < d.n2; ++j) {
    const int e1 = key.l(j), e2 = key.lbar(j);
    std::vector<Partial> next;
    for (const auto& p : acc) {
      for (int u = 0; u <= e1; ++u) {
        for (int v = 0; v <= e2; ++v) {
          // (u1 A + u2 B)^e1 -> choose u copies of B; (v1 A + v2 B)^e2 -> choose v copies of A
          Partial q = p;
          q.a[j] += (e1 - u) + v;
          q.b[j] += u + (e2 - v);
          q.w *= binomial(e1, u) * binomial(e2, v) * unit_pow(u1, e1 - u) * unit_pow(u2, u) * unit_pow(v1, v) *
                 unit_pow(v2, e2 - v);
          next.push_back(std::move(q));
        }
      }
    }
    acc = std::move(next);
  }
  return acc;
}

Series substitute(const Series& g, GaussInt u1, GaussInt u2, GaussInt v1, GaussInt v2) {
  const Dimensions& d = g.dims();
  std::vector<Term> out;
  for (const auto& t : g.terms()) {
    const int n = t.key.abs_l() + t.key.abs_lbar();
    const Complex scale = t.coeff * half_sqrt2_pow(n);
    // Sum weights per target key first so that the coefficient sees a single rounding.
    std::map<MonomialKey, GaussInt> w;
    for (const auto& p : expand_linear(d, t.key, u1, u2, v1, v2)) {
      MonomialKey key = t.key;
      for (int j = 0; j < d.n2; ++j) {
        key.set_l(j, p.a[j]);
        key.set_lbar(j, p.b[j]);
      }
      w[key] += p.w;
    }
    for (const auto& [key, wt] : w)
      if (wt != GaussInt(0.0)) out.push_back({key, wt * scale});
  }
  return Series::from_terms(d, std::move(out));
}

}  // namespace

Series complexify(const Series& real_xy) {
  // x = (z - i zeta)/sqrt2, y = (-i z + zeta)/sqrt2
  const GaussInt I(0.0, 1.0);
  return substitute(real_xy, 1.0, -I, -I, 1.0);
}

Series realify(const Series& complex_zzeta) {
  // z = (x + i y)/sqrt2, zeta = (i x + y)/sqrt2
  const GaussInt I(0.0, 1.0);
  return substitute(complex_zzeta, 1.0, I, I, 1.0);
}

// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd parse_vector(std::istringstream& ss) {
  std::vector<double> v;
  std::string tok;
  while (ss >> tok) v.push_back(parse_double(tok));
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Series* block_by_name(ModelInput& m, const std::string& name) {
  if (name == "F0") return &m.F0;
  if (name == "F1") return &m.F1;
  if (name == "F2") return &m.F2;
  if (name == "Fint") return &m.Fint;
  if (name == "Fhot" || name == "Fni") return &m.Fhot;
  return nullptr;
}

}  // namespace

ModelInput read_model(std::istream& is) {
  ModelInput m;
  bool have_dims = false;
  std::map<std::string, std::vector<Term>> blocks;
  std::string current;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) { throw IoError("model line " + std::to_string(lineno) + ": " + msg); };
  while (std::getline(is, line)) {
    ++lineno;
    line = detail::trim(detail::strip_comment(line));
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    try {
      if (tag == "dims") {
        int n1 = 0, n2 = 0;
        if (!(ss >> n1 >> n2)) fail("expected 'dims n1 n2'");
        m.dims = Dimensions(n1, n2);
        have_dims = true;
        m.F0 = m.F1 = m.F2 = m.Fint = m.Fhot = Series(m.dims);
        m.dOmega = Eigen::MatrixXd::Zero(n2, n1);
        continue;
      }
      if (!have_dims) fail("'dims' must come first");
      if (tag == "K") {
        if (!(ss >> m.K) || m.K < 1) fail("K must be a positive integer");
      } else if (tag == "omega") {
        m.omega0 = parse_vector(ss);
      } else if (tag == "Omega") {
        m.Omega0 = parse_vector(ss);
      } else if (tag == "dOmega") {
        Eigen::VectorXd v = parse_vector(ss);
        if (v.size() != m.dims.n1 * m.dims.n2) fail("dOmega needs n2*n1 values");
        for (int i = 0; i < m.dims.n2; ++i)
          for (int j = 0; j < m.dims.n1; ++j) m.dOmega(i, j) = v[i * m.dims.n1 + j];
      } else if (tag == "block") {
        if (!(ss >> current) || !block_by_name(m, current)) fail("unknown block name");
        blocks[current];
      } else {
        if (current.empty()) fail("term line outside a block");
        auto f = detail::split_fields(line, '|');
        if (f.size() != 5) fail("expected 5 '|'-separated fields");
        std::istringstream cs(f[4]);
        std::string re, im;
        if (!(cs >> re >> im)) fail("expected 're im'");
        auto key = MonomialKey::make(m.dims, detail::parse_ints(f[0]), detail::parse_ints(f[1]),
                                     detail::parse_ints(f[2]), detail::parse_ints(f[3]));
        blocks[current].push_back({key, Complex(parse_double(re), parse_double(im))});
      }
    } catch (const DimensionError& e) {
      fail(e.what());
    } catch (const IoError& e) {
      if (std::string(e.what()).rfind("model line", 0) == 0) throw;
      fail(e.what());
    }
  }
  if (!have_dims) throw IoError("model: missing 'dims'");
  if (m.omega0.size() != m.dims.n1) throw IoError("model: omega must have n1 entries");
  if (m.Omega0.size() != m.dims.n2) throw IoError("model: Omega must have n2 entries");
  for (auto& [name, terms] : blocks) *block_by_name(m, name) = Series::from_terms(m.dims, std::move(terms));
  return m;
}

ModelInput load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open model " + path);
  return read_model(is);
}

void write_model(std::ostream& os, const ModelInput& m) {
  os << "dims " << m.dims.n1 << ' ' << m.dims.n2 << '\n';
  os << "K " << m.K << '\n';
  os << "omega";
  for (int i = 0; i < m.omega0.size(); ++i) os << ' ' << format_double(m.omega0[i]);
  os << "\nOmega";
  for (int i = 0; i < m.Omega0.size(); ++i) os << ' ' << format_double(m.Omega0[i]);
  os << '\n';
  if (m.dOmega.size() > 0 && !m.dOmega.isZero(0.0)) {
    os << "dOmega";
    for (int i = 0; i < m.dOmega.rows(); ++i)
      for (int j = 0; j < m.dOmega.cols(); ++j) os << ' ' << format_double(m.dOmega(i, j));
    os << '\n';
  }
  const std::pair<const char*, const Series*> blocks[] = {
      {"F0", &m.F0}, {"F1", &m.F1}, {"F2", &m.F2}, {"Fint", &m.Fint}, {"Fhot", &m.Fhot}};
  for (const auto& [name, s] : blocks) {
    if (s->empty()) continue;
    os << "block " << name << '\n';
    std::string body = series_to_string(*s);
    os << body.substr(body.find('\n') + 1);
  }
}

// ---------------------------------------------------------------------------

namespace {

void check_real_grades(const Series& g, const char* name, int want_min, int want_max, bool p_only, bool angle_free) {
  for (const auto& t : g.terms()) {
    const int gr = t.key.grade();
    if (gr < want_min || gr > want_max)
      throw ModelError(std::string("block ") + name + " has a term of grade " + std::to_string(gr));
    if (p_only && t.key.abs_l() + t.key.abs_lbar() != 0)
      throw ModelError(std::string("block ") + name + " must depend on p only");
    if (angle_free && t.key.abs_k() != 0) throw ModelError(std::string("block ") + name + " must not depend on q");
  }
}

}  // namespace

HamiltonianState prepare_hamiltonian(const ModelInput& model, const PrepareConfig& cfg, PrepareReport* report) {
  const Dimensions d = model.dims;
  if (model.omega0.size() != d.n1 || model.Omega0.size() != d.n2) throw ModelError("frequency vector sizes");
  if (cfg.ell_max < 2 || cfg.s_max < 1) throw ModelError("need ell_max >= 2 and s_max >= 1");
  for (const Series* s : {&model.F0, &model.F1, &model.F2, &model.Fint, &model.Fhot})
    if (!s->empty() && !(s->dims() == d)) throw ModelError("block dimensions differ from model dims");

  check_real_grades(model.F0, "F0", 0, 0, false, false);
  check_real_grades(model.F1, "F1", 1, 1, false, false);
  for (const auto& t : model.F1.terms())
    if (t.key.abs_m() != 0) throw ModelError("block F1 must not depend on p");
  check_real_grades(model.F2, "F2", 2, 2, false, false);
  check_real_grades(model.Fint, "Fint", 0, kNoGradeCap, true, true);
  for (const auto& t : model.Fint.terms())
    if (t.key.abs_m() == 1) throw ModelError("linear action terms belong in omega, not Fint");
  check_real_grades(model.Fhot, "Fhot", 3, kNoGradeCap, false, false);

  PrepareReport rep;
  HamiltonianState st;
  st.dims = d;
  st.K = model.K;
  st.r = 0;
  st.epsilon = cfg.epsilon;
  st.omega = model.omega0;
  st.Omega = model.Omega0;
  st.blocks = BlockTable(d, cfg.ell_max, cfg.s_max);

  std::vector<std::vector<std::vector<Term>>> cells(cfg.ell_max + 1, std::vector<std::vector<Term>>(cfg.s_max + 1));
  auto place = [&](const Series& real_block, int s0) {
    const Series g = complexify(real_block);
    if (!is_real(g)) rep.real = false;
    for (const auto& t : g.terms()) {
      if (!characteristics(t.key, d).dalembert_ok) throw ModelError("d'Alembert rule violated by an input term");
      if (s0 == 0 && t.key.abs_m() == 0) {
        rep.dropped_constant += std::abs(t.coeff);
        continue;
      }
      int s = s0;
      Complex c = t.coeff;
      const int need = (t.key.abs_k() + model.K - 1) / model.K;
      if (need > s) {
        // eps^{s0} c e^{ikq} = eps^{need} (c / eps^{need - s0}) e^{ikq}
        c /= std::pow(cfg.epsilon, need - s);
        s = need;
        ++rep.promoted_terms;
      }
      const int ell = t.key.grade();
      if (ell > cfg.ell_max || s > cfg.s_max) {
        ++rep.dropped_terms;
        continue;
      }
      cells[ell][s].push_back({t.key, c});
    }
  };
  place(model.F0, 1);
  place(model.F1, 1);
  place(model.F2, 1);
  place(model.Fhot, 1);
  place(model.Fint, 0);
  for (int ell = 0; ell <= cfg.ell_max; ++ell)
    for (int s = 0; s <= cfg.s_max; ++s) st.blocks.at(ell, s) = Series::from_terms(d, std::move(cells[ell][s]));

  if (!average_q(st.blocks.at(2, 1)).empty()) throw ModelError("f2 at order eps has a nonzero angular average");

  for (int ell = 0; ell <= cfg.ell_max; ++ell)
    for (int s = 0; s <= cfg.s_max; ++s)
      rep.Ebar = std::max(rep.Ebar, std::ldexp(weighted_norm(st.blocks.at(ell, s), cfg.domain), ell));

  if (auto msg = check_state_invariants(st); !msg.empty()) throw ModelError("prepared state: " + msg);
  if (report) *report = rep;
  return st;
}

ModelInput with_omega(const ModelInput& model, const Eigen::VectorXd& omega0) {
  ModelInput m = model;
  m.omega0 = omega0;
  if (m.dOmega.size() > 0) m.Omega0 = model.Omega0 + model.dOmega * (omega0 - model.omega0);
  return m;
}

// ---------------------------------------------------------------------------

namespace {

/// Collects real-variable terms c p^m x^a y^b e^{ikq}.
struct RealBuilder {
  explicit RealBuilder(Dimensions dims) : d(dims) {}
  Dimensions d;
  std::vector<Term> terms;
  void add(std::vector<int> m, std::vector<int> a, std::vector<int> b, std::vector<int> k, Complex c) {
    terms.push_back({MonomialKey::make(d, m, a, b, k), c});
  }
  /// amp * mono * cos(k.q)
  void add_cos(std::vector<int> m, std::vector<int> a, std::vector<int> b, std::vector<int> k, double amp) {
    std::vector<int> mk(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) mk[i] = -k[i];
    add(m, a, b, k, amp / 2);
    add(m, a, b, mk, amp / 2);
  }
  /// amp * mono * sin(k.q)
  void add_sin(std::vector<int> m, std::vector<int> a, std::vector<int> b, std::vector<int> k, double amp) {
    std::vector<int> mk(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) mk[i] = -k[i];
    add(m, a, b, k, Complex(0.0, -amp / 2));
    add(m, a, b, mk, Complex(0.0, amp / 2));
  }
  Series build() { return Series::from_terms(d, std::move(terms)); }
};

}  // namespace

ModelInput toy_model() {
  ModelInput m;
  m.dims = Dimensions(2, 1);
  m.K = 2;
  m.omega0 = Eigen::Vector2d(1.0, (std::sqrt(5.0) - 1.0) / 2.0);
  m.Omega0 = Eigen::VectorXd::Constant(1, 0.3);
  m.dOmega = Eigen::MatrixXd(1, 2);
  m.dOmega << 0.5, -0.2;
  const auto& d = m.dims;

  RealBuilder f0(d);
  f0.add_cos({0, 0}, {0}, {0}, {1, -1}, 1.0);
  m.F0 = f0.build();

  // 0.5 (x cos q1 - y sin q1) + 0.25 (x cos q2 - y sin q2)
  RealBuilder f1(d);
  f1.add_cos({0, 0}, {1}, {0}, {1, 0}, 0.5);
  f1.add_sin({0, 0}, {0}, {1}, {1, 0}, -0.5);
  f1.add_cos({0, 0}, {1}, {0}, {0, 1}, 0.25);
  f1.add_sin({0, 0}, {0}, {1}, {0, 1}, -0.25);
  m.F1 = f1.build();

  // (0.3 p1 + 0.2 p2 + 0.1 (x^2 + y^2)) cos(q1 - q2) + 0.1 ((x^2 - y^2) cos(q1 + q2) - 2 x y sin(q1 + q2))
  RealBuilder f2(d);
  f2.add_cos({1, 0}, {0}, {0}, {1, -1}, 0.3);
  f2.add_cos({0, 1}, {0}, {0}, {1, -1}, 0.2);
  f2.add_cos({0, 0}, {2}, {0}, {1, -1}, 0.1);
  f2.add_cos({0, 0}, {0}, {2}, {1, -1}, 0.1);
  f2.add_cos({0, 0}, {2}, {0}, {1, 1}, 0.1);
  f2.add_cos({0, 0}, {0}, {2}, {1, 1}, -0.1);
  f2.add_sin({0, 0}, {1}, {1}, {1, 1}, -0.2);
  m.F2 = f2.build();

  RealBuilder fint(d);
  fint.add({2, 0}, {0}, {0}, {0, 0}, -0.5);
  fint.add({1, 1}, {0}, {0}, {0, 0}, 0.25);
  fint.add({0, 2}, {0}, {0}, {0, 0}, -0.3);
  m.Fint = fint.build();

  // 0.2 p1 (x cos q1 - y sin q1) + 0.025 (x^2 + y^2)^2 + 0.05 p1^2 cos(q1 - q2)
  RealBuilder fh(d);
  fh.add_cos({1, 0}, {1}, {0}, {1, 0}, 0.2);
  fh.add_sin({1, 0}, {0}, {1}, {1, 0}, -0.2);
  fh.add({0, 0}, {4}, {0}, {0, 0}, 0.025);
  fh.add({0, 0}, {2}, {2}, {0, 0}, 0.05);
  fh.add({0, 0}, {0}, {4}, {0, 0}, 0.025);
  fh.add_cos({2, 0}, {0}, {0}, {1, -1}, 0.05);
  m.Fhot = fh.build();
  return m;
}

ModelInput normal_form_model() {
  ModelInput m;
  m.dims = Dimensions(2, 1);
  m.K = 2;
  m.omega0 = Eigen::Vector2d(1.0, (std::sqrt(5.0) - 1.0) / 2.0);
  m.Omega0 = Eigen::VectorXd::Constant(1, 0.3);
  m.dOmega = Eigen::MatrixXd::Zero(1, 2);
  m.F0 = m.F1 = m.F2 = m.Fhot = Series(m.dims);
  RealBuilder fint(m.dims);
  fint.add({2, 0}, {0}, {0}, {0, 0}, 1.0);
  m.Fint = fint.build();
  return m;
}

ModelInput planar_model() {
  ModelInput m;
  m.dims = Dimensions(2, 2);
  const Dimensions& d = m.dims;
  m.K = 2;
  m.omega0 = Eigen::Vector2d(1.0, (std::sqrt(5.0) - 1.0) / 2.0);
  m.Omega0 = Eigen::Vector2d(0.3, 0.17);
  m.dOmega = Eigen::MatrixXd::Zero(2, 2);
  m.dOmega << 0.5, -0.2, 0.1, 0.3;

  RealBuilder f0(d);
  f0.add_cos({0, 0}, {0, 0}, {0, 0}, {1, -1}, 1.0);
  m.F0 = f0.build();

  // 0.5 (x1 cos q1 - y1 sin q1) + 0.3 (x2 cos q1 - y2 sin q1) + 0.2 (x2 cos q2 - y2 sin q2)
  RealBuilder f1(d);
  f1.add_cos({0, 0}, {1, 0}, {0, 0}, {1, 0}, 0.5);
  f1.add_sin({0, 0}, {0, 0}, {1, 0}, {1, 0}, -0.5);
  f1.add_cos({0, 0}, {0, 1}, {0, 0}, {1, 0}, 0.3);
  f1.add_sin({0, 0}, {0, 0}, {0, 1}, {1, 0}, -0.3);
  f1.add_cos({0, 0}, {0, 1}, {0, 0}, {0, 1}, 0.2);
  f1.add_sin({0, 0}, {0, 0}, {0, 1}, {0, 1}, -0.2);
  m.F1 = f1.build();

  // (0.2 p1 + 0.1 (x1 x2 + y1 y2)) cos(q1 - q2)
  RealBuilder f2(d);
  f2.add_cos({1, 0}, {0, 0}, {0, 0}, {1, -1}, 0.2);
  f2.add_cos({0, 0}, {1, 1}, {0, 0}, {1, -1}, 0.1);
  f2.add_cos({0, 0}, {0, 0}, {1, 1}, {1, -1}, 0.1);
  m.F2 = f2.build();

  RealBuilder fint(d);
  fint.add({2, 0}, {0, 0}, {0, 0}, {0, 0}, -0.5);
  fint.add({1, 1}, {0, 0}, {0, 0}, {0, 0}, 0.2);
  fint.add({0, 2}, {0, 0}, {0, 0}, {0, 0}, -0.4);
  m.Fint = fint.build();

  // 0.1 p1 (x1 cos q1 - y1 sin q1) + 0.1 p2 (x2 cos q1 - y2 sin q1)
  //   + 0.02 (x1^2 + y1^2)(x2^2 + y2^2) + 0.03 (x1 x2 + y1 y2)(x1^2 + y1^2)
  RealBuilder fh(d);
  fh.add_cos({1, 0}, {1, 0}, {0, 0}, {1, 0}, 0.1);
  fh.add_sin({1, 0}, {0, 0}, {1, 0}, {1, 0}, -0.1);
  fh.add_cos({0, 1}, {0, 1}, {0, 0}, {1, 0}, 0.1);
  fh.add_sin({0, 1}, {0, 0}, {0, 1}, {1, 0}, -0.1);
  for (auto [a, b] : {std::pair{std::vector<int>{2, 2}, std::vector<int>{0, 0}},
                      {{2, 0}, {0, 2}}, {{0, 2}, {2, 0}}, {{0, 0}, {2, 2}}})
    fh.add({0, 0}, a, b, {0, 0}, 0.02);
  for (auto [a, b] : {std::pair{std::vector<int>{3, 1}, std::vector<int>{0, 0}},
                      {{1, 1}, {2, 0}}, {{2, 0}, {1, 1}}, {{0, 0}, {3, 1}}})
    fh.add({0, 0}, a, b, {0, 0}, 0.03);
  m.Fhot = fh.build();
  return m;
}

}  // namespace elliptorus
