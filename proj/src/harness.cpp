#include "elliptorus/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "elliptorus/errors.hpp"

namespace elliptorus {

using nlohmann::json;

namespace {

MonomialKey unit_key(const Dimensions& d, Var v, int index) {
  std::vector<int> m(d.n1, 0), l(d.n2, 0), lb(d.n2, 0), k(d.n1, 0);
  if (v == Var::p) m[index] = 1;
  if (v == Var::z) l[index] = 1;
  if (v == Var::zeta) lb[index] = 1;
  return MonomialKey::make(d, m, l, lb, k);
}

/// {c, X} for a coordinate function; {q_i, X} = dX/dp_i.
Series bracket(const CoordinateFunction& c, const Series& X) {
  Series out = poisson_bracket(c.S, X);
  if (c.q_index >= 0) out += derivative(X, Var::p, c.q_index);
  return out;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

PhasePoint random_point(const Dimensions& d, std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), ang(0.0, 2.0 * std::numbers::pi);
  const std::complex<double> I(0.0, 1.0);
  PhasePoint x;
  x.p = Eigen::VectorXcd(d.n1);
  x.q = Eigen::VectorXcd(d.n1);
  x.z = Eigen::VectorXcd(d.n2);
  x.zeta = Eigen::VectorXcd(d.n2);
  for (int i = 0; i < d.n1; ++i) x.p[i] = radius * u(rng), x.q[i] = ang(rng);
  for (int j = 0; j < d.n2; ++j) {
    x.z[j] = radius * std::complex<double>(u(rng), u(rng)) / std::sqrt(2.0);
    x.zeta[j] = I * std::conj(x.z[j]);
  }
  return x;
}

}  // namespace

double TorusResidualReport::vector_field_residual() const { return std::max({pdot, zdot, qdot_error}); }

TorusResidualReport verify_torus_residual(const HamiltonianState& st, int samples, std::uint64_t seed) {
  const Dimensions d = st.dims;
  TorusResidualReport rep;
  rep.r = st.r;
  rep.omega = st.omega;
  rep.Omega = st.Omega;
  if (st.r + 1 <= st.blocks.s_max())
    rep.block_residual = std::pow(st.epsilon, st.r + 1) * coupling_norm(st.blocks, st.r + 1);
  const Series H = st.hamiltonian();
  std::vector<Series> dq, dp, dz, dzeta;
  for (int i = 0; i < d.n1; ++i) dq.push_back(derivative(H, Var::q, i)), dp.push_back(derivative(H, Var::p, i));
  for (int j = 0; j < d.n2; ++j) dz.push_back(derivative(H, Var::z, j)), dzeta.push_back(derivative(H, Var::zeta, j));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
  PhasePoint x;
  x.p = Eigen::VectorXcd::Zero(d.n1);
  x.q = Eigen::VectorXcd(d.n1);
  x.z = Eigen::VectorXcd::Zero(d.n2);
  x.zeta = Eigen::VectorXcd::Zero(d.n2);
  for (int t = 0; t < samples; ++t) {
    for (int i = 0; i < d.n1; ++i) x.q[i] = ang(rng);
    for (int i = 0; i < d.n1; ++i) {
      rep.pdot = std::max(rep.pdot, std::abs(evaluate(dq[i], x)));
      rep.qdot_error = std::max(rep.qdot_error, std::abs(evaluate(dp[i], x) - st.omega[i]));
    }
    for (int j = 0; j < d.n2; ++j)
      rep.zdot = std::max({rep.zdot, std::abs(evaluate(dz[j], x)), std::abs(evaluate(dzeta[j], x))});
  }
  return rep;
}

std::vector<CoordinateFunction> identity_coordinates(const Dimensions& d) {
  std::vector<CoordinateFunction> c;
  for (int i = 0; i < d.n1; ++i) c.push_back({-1, Series::monomial(d, unit_key(d, Var::p, i), 1.0)});
  for (int i = 0; i < d.n1; ++i) c.push_back({i, Series(d)});
  for (int j = 0; j < d.n2; ++j) c.push_back({-1, Series::monomial(d, unit_key(d, Var::z, j), 1.0)});
  for (int j = 0; j < d.n2; ++j) c.push_back({-1, Series::monomial(d, unit_key(d, Var::zeta, j), 1.0)});
  return c;
}

void apply_lie_series_to_coordinates(std::vector<CoordinateFunction>& coords, const Series& chi, double tol) {
  if (chi.empty()) return;
  for (auto& c : coords) {
    Series term = bracket(c, chi);
    Series sum = c.S;
    for (int j = 1; !term.empty() && j <= 200; ++j) {
      if (j > 1) term = poisson_bracket(term, chi) * Complex(1.0 / j);
      if (term.empty()) break;
      sum += term;
      if (max_abs_coeff(term) < tol) break;
    }
    c.S = std::move(sum);
  }
}

void apply_lie_transform_to_coordinates(std::vector<CoordinateFunction>& coords, const std::vector<Series>& X,
                                        double tol) {
  if (X.empty()) return;
  const int nx = static_cast<int>(X.size());
  for (auto& c : coords) {
    // E_0 is the coordinate itself; E_j = sum_i (i/j) L_{X_i} E_{j-i}
    std::vector<Series> E{c.S};
    Series sum = c.S;
    int small_run = 0;
    for (int j = 1; j <= 200; ++j) {
      Series ej(c.S.dims());
      for (int i = 1; i <= std::min(j, nx); ++i) {
        if (X[i - 1].empty()) continue;
        const Series b = j - i == 0 ? bracket(c, X[i - 1]) : poisson_bracket(E[j - i], X[i - 1]);
        ej += b * Complex(static_cast<double>(i) / j);
      }
      small_run = max_abs_coeff(ej) < tol ? small_run + 1 : 0;
      sum += ej;
      E.push_back(std::move(ej));
      if (j >= nx && small_run >= nx) break;
    }
    c.S = std::move(sum);
  }
}

std::vector<CoordinateFunction> step_coordinates(const NormalizeResult& run, int r) {
  if (r < 0 || r > static_cast<int>(run.generators.size()))
    throw DimensionError("step_coordinates: run has fewer completed steps");
  const Dimensions d = run.initial.dims;
  const double eps = run.initial.epsilon;
  auto coords = identity_coordinates(d);
  for (int s = 1; s <= r; ++s) {
    const GeneratingSet& g = run.generators[s - 1];
    const Complex w(std::pow(eps, s));
    for (const Series* chi : {&g.chi0, &g.chi1, &g.chi2}) apply_lie_series_to_coordinates(coords, *chi * w);
    std::vector<Series> X;
    for (std::size_t j = 0; j < g.D2.size(); ++j)
      X.push_back(g.D2[j] * Complex(std::pow(eps, static_cast<double>(j + 1) * (s - 1))));
    apply_lie_transform_to_coordinates(coords, X);
  }
  return coords;
}

PhasePoint evaluate_coordinates(const std::vector<CoordinateFunction>& coords, const Dimensions& d,
                                const PhasePoint& x) {
  PhasePoint y;
  y.p = Eigen::VectorXcd(d.n1);
  y.q = Eigen::VectorXcd(d.n1);
  y.z = Eigen::VectorXcd(d.n2);
  y.zeta = Eigen::VectorXcd(d.n2);
  auto value = [&](const CoordinateFunction& c) {
    Complex v = evaluate(c.S, x);
    if (c.q_index >= 0) v += x.q[c.q_index];
    return v;
  };
  for (int i = 0; i < d.n1; ++i) y.p[i] = value(coords[i]), y.q[i] = value(coords[d.n1 + i]);
  for (int j = 0; j < d.n2; ++j)
    y.z[j] = value(coords[2 * d.n1 + j]), y.zeta[j] = value(coords[2 * d.n1 + d.n2 + j]);
  return y;
}

ExchangeReport exchange_check(const NormalizeResult& run, int r, int points, std::uint64_t seed, double radius) {
  ExchangeReport rep;
  rep.r = r;
  rep.points = points;
  const Dimensions d = run.initial.dims;
  const double eps = run.initial.epsilon;
  const auto coords = step_coordinates(run, r);
  const Series H0 = run.initial.hamiltonian();
  const Series Hr = r == 0 ? H0 : run.states[r - 1].hamiltonian();
  Complex dropped = 0.0;
  for (int s = 1; s <= r; ++s) {
    const auto& sr = run.reports[s - 1];
    dropped += std::pow(eps, s) * Complex(sr.dropped_constant_re, sr.dropped_constant_im);
  }
  std::mt19937_64 rng(seed);
  for (int t = 0; t < points; ++t) {
    const PhasePoint x = random_point(d, rng, radius);
    const Complex lhs = evaluate(H0, evaluate_coordinates(coords, d, x));
    const Complex rhs = evaluate(Hr, x) + dropped;
    const double err = std::abs(lhs - rhs);
    rep.max_abs_error = std::max(rep.max_abs_error, err);
    rep.max_rel_error = std::max(rep.max_rel_error, err / std::max(std::abs(rhs), 1e-300));
  }
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T x{};
  is >> x;
  if (!is || !(is >> std::ws).eof()) throw IoError("config: bad value for " + key + ": '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw IoError("config: bad boolean for " + key + ": '" + v + "'");
}

}  // namespace

void RunConfig::apply(const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string v = trim(raw_value);
  if (key == "model") model = v;
  else if (key == "rmax" || key == "r_max") r_max = parse_number<int>(key, v);
  else if (key == "epsilon") epsilon = parse_number<double>(key, v);
  else if (key == "ell_max") ell_max = parse_number<int>(key, v);
  else if (key == "s_max") s_max = parse_number<int>(key, v);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, v);
  else if (key == "out") out = v;
  else if (key == "gamma") gamma = parse_number<double>(key, v);
  else if (key == "tau") tau = parse_number<double>(key, v);
  else if (key == "bigk" || key == "K") K = parse_number<int>(key, v);
  else if (key == "bbar") bbar = parse_number<double>(key, v);
  else if (key == "rho") domain.rho = parse_number<double>(key, v);
  else if (key == "R") domain.R = parse_number<double>(key, v);
  else if (key == "sigma") domain.sigma = parse_number<double>(key, v);
  else if (key == "h") domain.h = parse_number<double>(key, v);
  else if (key == "geometry") geometry = parse_bool(key, v);
  else if (key == "grid") grid = parse_number<int>(key, v);
  else if (key == "mc_samples") mc_samples = parse_number<long>(key, v);
  else if (key == "box_halfwidth") box_halfwidth = parse_number<double>(key, v);
  else if (key == "threads") threads = parse_number<int>(key, v);
  else if (key == "verify_samples") verify_samples = parse_number<int>(key, v);
  else if (key == "exchange_points") exchange_points = parse_number<int>(key, v);
  else if (key == "measure_gammas") {
    measure_gammas.clear();
    std::istringstream is(v);
    for (std::string item; std::getline(is, item, ',');) measure_gammas.push_back(parse_number<double>(key, trim(item)));
  } else
    throw IoError("config: unknown key '" + key + "'");
}

void RunConfig::read(std::istream& is) {
  std::string line;
  for (int n = 1; std::getline(is, line); ++n) {
    if (auto c = line.find('#'); c != std::string::npos) line.resize(c);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("config line " + std::to_string(n) + ": expected key = value");
    apply(line.substr(0, eq), line.substr(eq + 1));
  }
}

ModelInput resolve_model(const std::string& name) {
  if (name == "toy") return toy_model();
  if (name == "planar") return planar_model();
  if (name == "normal_form") return normal_form_model();
  return load_model(name);
}

EstimateConfig estimate_config(const RunConfig& cfg, const ModelInput& model, double Ebar) {
  EstimateConfig e;
  e.n1 = model.dims.n1;
  e.gamma = cfg.gamma;
  e.tau = cfg.tau;
  e.K = model.K;
  e.Ebar = Ebar > 0.0 ? Ebar : 1.0;
  e.bbar = cfg.bbar;
  e.epsilon = cfg.epsilon;
  e.rho = cfg.domain.rho;
  e.R = cfg.domain.R;
  e.sigma = cfg.domain.sigma;
  e.J0 = model.dOmega.size() ? model.dOmega.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
  e.validate();
  return e;
}

GeometryArtifacts run_geometry(const RunConfig& cfg, const ModelInput& model, const EstimateConfig& est) {
  GeometryConfig g;
  g.est = est;
  g.grid = cfg.grid;
  g.mc_samples = cfg.mc_samples;
  g.seed = cfg.seed;
  g.r_max = cfg.r_max;
  g.threads = cfg.threads;
  const Eigen::VectorXd hw = Eigen::VectorXd::Constant(model.dims.n1, cfg.box_halfwidth);
  const Box W0{model.omega0 - hw, model.omega0 + hw};
  const Thresholds th = thresholds(est, gamma_condition_tau(est).value);

  GeometryArtifacts out;
  out.atlas = build_atlas(model, W0, g);
  for (int r = 1; r <= cfg.r_max; ++r) out.inversions.push_back(invert_atlas(out.atlas, r, g, th.A));
  for (int r = 2; r <= cfg.r_max; ++r) {
    out.carves.push_back(carve_resonances(out.atlas, r, g));
    out.hulls.push_back(hull_and_lipschitz_checks(out.atlas, r, g));
  }
  for (double gamma : cfg.measure_gammas) {
    GeometryConfig gg = g;
    gg.est.gamma = gamma;
    out.measures.emplace_back(gamma, measure_resonant_volume(out.atlas, gg));
  }
  out.appendix = appendix_conditions(est, th.A, cfg.r_max);
  return out;
}

RunArtifacts run_pipeline(const RunConfig& cfg) {
  RunArtifacts a;
  a.config = cfg;
  a.model = resolve_model(cfg.model);
  if (cfg.K > 0) a.model.K = cfg.K;
  PrepareConfig pc;
  pc.ell_max = cfg.ell_max;
  pc.s_max = cfg.s_max;
  pc.epsilon = cfg.epsilon;
  pc.domain = cfg.domain;
  const HamiltonianState st = prepare_hamiltonian(a.model, pc, &a.prepare);
  a.estimates = estimate_config(cfg, a.model, a.prepare.Ebar);
  a.thresholds = thresholds(a.estimates, gamma_condition_tau(a.estimates).value);

  StepConfig sc;
  sc.keep_stage_tables = true;
  try {
    a.run = normalize(st, cfg.r_max, sc);
  } catch (const InvariantViolation& e) {
    a.run.initial = st;
    a.run.final_state = st;
    a.failures.push_back(std::string("normalization: ") + e.what());
  }
  a.audit = audit_run(a.run, a.prepare.Ebar, cfg.domain);
  if (cfg.epsilon <= a.thresholds.eps_an && a.audit.violations() > 0)
    a.failures.push_back("bound audit: " + std::to_string(a.audit.violations()) + " violations below the threshold");

  a.torus.push_back(verify_torus_residual(a.run.initial, cfg.verify_samples, cfg.seed));
  for (const auto& s : a.run.states) {
    a.torus.push_back(verify_torus_residual(s, cfg.verify_samples, cfg.seed));
    if (auto msg = check_state_invariants(s); !msg.empty()) a.failures.push_back("state: " + msg);
  }
  const int nx = std::min(3, static_cast<int>(a.run.states.size()));
  for (int r = 1; r <= nx; ++r) {
    a.exchange.push_back(exchange_check(a.run, r, cfg.exchange_points, cfg.seed + static_cast<std::uint64_t>(r)));
    if (!a.exchange.back().ok()) a.failures.push_back("exchange check at r = " + std::to_string(r));
  }
  if (cfg.geometry) {
    try {
      a.geometry = run_geometry(cfg, a.model, a.estimates);
    } catch (const NumericalError& e) {
      a.failures.push_back(std::string("geometry: ") + e.what());
    }
  }
  a.exit_code = !a.failures.empty() ? kExitInvariant : a.run.resonance ? kExitResonance : kExitOk;
  return a;
}

// ---------------------------------------------------------------------------

namespace {

json audit_json(const AuditReport& a) {
  json recs = json::array();
  for (const auto& r : a.records)
    recs.push_back({{"name", r.name}, {"r", r.r}, {"s", r.s}, {"ell", r.ell}, {"lhs", r.lhs}, {"rhs", r.rhs},
                    {"slack", r.slack()}, {"hypothesis", r.hypothesis}, {"holds", r.ok()}});
  return {{"violations", a.violations()}, {"hypotheses_hold", a.hypotheses_hold()}, {"records", recs}};
}

json number(double x) { return std::isfinite(x) ? json(x) : json(x > 0 ? "inf" : x < 0 ? "-inf" : "nan"); }

}  // namespace

json to_json(const GeometryArtifacts& g) {
  json j;
  const auto& a = g.atlas;
  j["box"] = {{"lo", to_vec(a.W0.lo)}, {"hi", to_vec(a.W0.hi)}, {"diameter", a.W0.diameter()}};
  j["grid"] = a.grid;
  j["h"] = a.h;
  json inv = json::array();
  for (std::size_t i = 0; i < g.inversions.size(); ++i) {
    const auto& v = g.inversions[i];
    inv.push_back({{"r", i + 1}, {"max_shift", v.max_shift}, {"shift_bound", number(v.shift_bound)},
                   {"newton_max_residual", v.inv.max_residual}, {"newton_max_iterations", v.inv.max_iterations},
                   {"lipschitz", v.lipschitz}, {"lipschitz_bound", v.lipschitz_bound}});
  }
  j["inversion"] = inv;
  json carve = json::array();
  for (const auto& c : g.carves)
    carve.push_back({{"r", c.r}, {"removed", c.removed}, {"survivors", c.survivors}, {"failed_nodes", c.failed_nodes},
                     {"strip_width", c.strip_width}, {"margin", c.margin}, {"min_divisor", number(c.min_divisor)},
                     {"divisors_ok", c.divisors_ok}, {"min_transversal_gap", number(c.min_transversal)},
                     {"transversal_ok", c.transversal_ok}, {"nested_violations", c.nested_violations}});
  j["carving"] = carve;
  json hull = json::array();
  for (const auto& h : g.hulls)
    hull.push_back({{"r", h.r}, {"max_gradient", h.max_gradient}, {"max_Omega_jacobian", h.max_Omega_jacobian},
                    {"min_hull_distance", number(h.min_hull_distance)}, {"hull_ok", h.hull_ok},
                    {"max_det", h.max_det}, {"det_ok", h.det_ok}, {"max_lipschitz", h.max_lipschitz}});
  j["hull"] = hull;
  json meas = json::array();
  for (const auto& [gamma, m] : g.measures)
    meas.push_back({{"gamma", gamma}, {"mc", m.mc.value}, {"mc_std_error", m.mc.std_error},
                    {"samples", m.mc.samples}, {"bound", m.bound}, {"ok", m.ok}});
  j["measure"] = meas;
  json app = json::array();
  for (const auto& s : g.appendix.steps)
    app.push_back({{"r", s.r}, {"mu", s.mu}, {"Jbar", s.Jbar}, {"J", s.J}, {"mu_small", s.i},
                   {"Jbar_bound", s.ii}, {"J_bound", s.iii}, {"transversal_gap", s.iv}, {"h_decay", s.v}});
  j["extension_conditions"] = {{"mu_tilde", number(g.appendix.mu_tilde)}, {"steps", app}, {"all", g.appendix.all()}};
  return j;
}

json to_json(const RunArtifacts& a) {
  json j;
  const auto& c = a.config;
  j["config"] = {{"model", c.model}, {"r_max", c.r_max}, {"epsilon", c.epsilon}, {"ell_max", c.ell_max},
                 {"s_max", c.s_max}, {"seed", c.seed}, {"gamma", c.gamma}, {"tau", c.tau}, {"K", a.model.K},
                 {"bbar", c.bbar}, {"rho", c.domain.rho}, {"R", c.domain.R}, {"sigma", c.domain.sigma}};
  j["prepare"] = {{"Ebar", a.prepare.Ebar}, {"promoted_terms", a.prepare.promoted_terms},
                  {"dropped_terms", a.prepare.dropped_terms}, {"real", a.prepare.real}};
  const auto& t = a.thresholds;
  j["thresholds"] = {{"M", t.M}, {"Gamma", t.Gamma}, {"log_A", t.log_A}, {"h0", number(t.h0)},
                     {"eps_analytic", t.eps_an}, {"eps_geometric", t.eps_ge}, {"eps_star", t.eps_star},
                     {"below_threshold", c.epsilon < t.eps_star}};
  json steps = json::array();
  for (const auto& r : a.run.reports)
    steps.push_back({{"r", r.r}, {"a_r", r.a_r}, {"b_r", number(r.b_r)}, {"k_min", r.k_min}, {"l_min", r.l_min},
                     {"delta_omega", to_vec(r.delta_omega)}, {"delta_Omega", to_vec(r.delta_Omega)},
                     {"residual_chi0", r.residual_chi0}, {"residual_chi1", r.residual_chi1},
                     {"residual_chi2", r.residual_chi2}, {"residual_diagonalization", r.residual_diag},
                     {"diagonalization_order", r.diag_order},
                     {"dropped_constant", {r.dropped_constant_re, r.dropped_constant_im}},
                     {"truncated_blocks", r.truncation.dropped_blocks},
                     {"truncated_terms", r.truncation.dropped_terms},
                     {"dalembert_violations", r.dalembert_violations},
                     {"coupling_norm_after", r.coupling_norm_after}});
  j["steps"] = steps;
  json torus = json::array();
  for (const auto& r : a.torus)
    torus.push_back({{"r", r.r}, {"omega", to_vec(r.omega)}, {"Omega", to_vec(r.Omega)},
                     {"block_residual", r.block_residual}, {"pdot", r.pdot}, {"zdot", r.zdot},
                     {"qdot_error", r.qdot_error}, {"vector_field_residual", r.vector_field_residual()}});
  j["torus"] = torus;
  json ex = json::array();
  for (const auto& e : a.exchange)
    ex.push_back({{"r", e.r}, {"points", e.points}, {"max_rel_error", e.max_rel_error},
                  {"max_abs_error", e.max_abs_error}, {"ok", e.ok()}});
  j["exchange"] = ex;
  j["audit"] = audit_json(a.audit);
  if (a.geometry) j["geometry"] = to_json(*a.geometry);
  json status = {{"completed_steps", a.run.states.size()}, {"failures", a.failures}, {"exit_code", a.exit_code}};
  if (a.run.resonance)
    status["resonance"] = {{"message", a.run.resonance->what()}, {"k", a.run.resonance->k},
                           {"l", a.run.resonance->l}, {"r", a.run.resonance->r}};
  j["status"] = status;
  return j;
}

json estimate_report(const EstimateConfig& est, int s_max) {
  json j;
  const GammaResult g = gamma_condition_tau(est);
  const Thresholds t = thresholds(est, g.value);
  j["Gamma"] = {{"value", g.value}, {"partial", g.partial}, {"tail_lower", g.tail_lower},
                {"tail_upper", g.tail_upper}, {"terms", g.terms}};
  j["thresholds"] = {{"M", t.M}, {"log_A", t.log_A}, {"h0", number(t.h0)}, {"eps_analytic", t.eps_an},
                     {"eps_geometric", t.eps_ge}, {"eps_star", t.eps_star}};
  j["h"] = h_sequence(est, s_max);
  json seq = json::array();
  for (int r = 0; r <= s_max; ++r) {
    const auto rs = restriction_sequences(r);
    seq.push_back({{"r", r}, {"delta", rs.delta}, {"d", rs.d}, {"zeta", rs.zeta}});
  }
  j["restriction"] = seq;
  const CountingSequences nu(s_max);
  json logT = json::array(), log2nu = json::array();
  for (int r = 0; r <= s_max; ++r) {
    json rowT = json::array(), rowN = json::array();
    for (int s = 0; s <= s_max; ++s) {
      rowT.push_back(r >= 1 && s >= 1 ? json(log_T(r, s, est)) : json(nullptr));
      rowN.push_back(nu.log2_nu(r, s));
    }
    logT.push_back(rowT);
    log2nu.push_back(rowN);
  }
  j["log_T"] = logT;
  j["log2_nu"] = log2nu;
  return j;
}

void emit_reports(const RunArtifacts& a, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  auto open = [&](const std::string& name) {
    std::ofstream os(fs::path(dir) / name);
    if (!os) throw IoError("cannot write " + (fs::path(dir) / name).string());
    os.precision(17);
    return os;
  };
  {
    auto os = open("report.json");
    os << to_json(a).dump(2) << '\n';
  }
  {
    auto os = open("residual_vs_r.csv");
    os << "r,vector_field_residual,block_residual,pdot,zdot,qdot_error\n";
    for (const auto& t : a.torus)
      os << t.r << ',' << t.vector_field_residual() << ',' << t.block_residual << ',' << t.pdot << ',' << t.zdot
         << ',' << t.qdot_error << '\n';
  }
  {
    auto os = open("norms_vs_s.csv");
    os << "r,s,coupling_norm\n";
    for (const auto& r : a.run.reports)
      for (std::size_t s = 0; s < r.coupling_norm_after.size(); ++s)
        os << r.r << ',' << s << ',' << r.coupling_norm_after[s] << '\n';
  }
  if (a.geometry) {
    auto os = open("atlas.csv");
    write_atlas_csv(os, a.geometry->atlas);
    auto ms = open("measure_vs_gamma.csv");
    ms << "gamma,mc,mc_std_error,bound\n";
    for (const auto& [gamma, m] : a.geometry->measures)
      ms << gamma << ',' << m.mc.value << ',' << m.mc.std_error << ',' << m.bound << '\n';
  }
}

}  // namespace elliptorus
