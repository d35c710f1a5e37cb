#include "elliptorus/geometry.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <thread>

#include "elliptorus/errors.hpp"
#include "elliptorus/normalizer.hpp"

namespace elliptorus {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sup_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f) {
  unsigned t = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
  t = static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(n, 1)));
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex mu;
  for (unsigned w = 0; w < t; ++w)
    pool.emplace_back([&] {
      try {
        for (std::size_t i; (i = next++) < n;) f(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!err) err = std::current_exception();
        next = n;
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

struct StripSet {
  std::vector<Eigen::VectorXd> k;
  std::vector<Eigen::VectorXd> l;
};

/// k in the half lattice with rK < |k|_1 <= (r+1)K, l in the ball |l|_1 <= 2 (signs of k are covered by l -> -l).
StripSet strip_set(int n1, int n2, int r, int K) {
  StripSet s;
  for_each_half_lattice(n1, (r + 1) * K, [&](const std::vector<int>& k) {
    int norm = 0;
    for (int v : k) norm += std::abs(v);
    if (norm <= r * K) return;
    Eigen::VectorXd kv(n1);
    for (int i = 0; i < n1; ++i) kv[i] = k[i];
    s.k.push_back(kv);
  });
  for_each_lattice_ball(n2, 2, [&](const std::vector<int>& l) {
    Eigen::VectorXd lv(n2);
    for (int j = 0; j < n2; ++j) lv[j] = l[j];
    s.l.push_back(lv);
  });
  return s;
}

double min_divisor(const StripSet& s, const Eigen::VectorXd& omega, const Eigen::VectorXd& Omega, double eps) {
  double m = kInf;
  for (const auto& k : s.k) {
    const double kw = k.dot(omega);
    for (const auto& l : s.l) m = std::min(m, std::abs(kw + eps * (l.size() ? l.dot(Omega) : 0.0)));
  }
  return m;
}

double min_pair_gap(const Eigen::VectorXd& Omega) {
  double m = kInf;
  for (Eigen::Index i = 0; i < Omega.size(); ++i)
    for (Eigen::Index j = i + 1; j < Omega.size(); ++j) m = std::min(m, std::abs(Omega[i] - Omega[j]));
  return m;
}

double strip_width(const EstimateConfig& est, int r) {
  return 2.0 * est.gamma / std::pow((r + 1.0) * est.K, est.tau);
}

}  // namespace

double Box::diameter() const { return lo.size() ? (hi - lo).maxCoeff() : 0.0; }

double Box::volume() const { return (hi - lo).prod(); }

bool Box::contains(const Eigen::VectorXd& x) const {
  return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

GridField::GridField(Box box, int n, std::vector<Eigen::VectorXd> values)
    : box_(std::move(box)), n_(n), values_(std::move(values)) {
  std::size_t expect = 1;
  for (int d = 0; d < dim(); ++d) expect *= static_cast<std::size_t>(n_);
  if (n_ < 2 || values_.size() != expect) throw DimensionError("GridField: need n >= 2 and n^dim values");
}

Eigen::VectorXd GridField::operator()(const Eigen::VectorXd& x) const {
  const int d = dim();
  std::vector<std::size_t> base(d);
  std::vector<double> frac(d);
  for (int a = 0; a < d; ++a) {
    const double t = (x[a] - box_.lo[a]) / (box_.hi[a] - box_.lo[a]) * (n_ - 1);
    const int i = std::clamp(static_cast<int>(std::floor(t)), 0, n_ - 2);
    base[a] = static_cast<std::size_t>(i);
    frac[a] = t - i;
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(values_.front().size());
  for (unsigned corner = 0; corner < (1u << d); ++corner) {
    double w = 1.0;
    std::size_t idx = 0, stride = 1;
    for (int a = 0; a < d; ++a) {
      const bool up = corner >> a & 1u;
      w *= up ? frac[a] : 1.0 - frac[a];
      idx += (base[a] + (up ? 1 : 0)) * stride;
      stride *= static_cast<std::size_t>(n_);
    }
    if (w != 0.0) out += w * values_[idx];
  }
  return out;
}

Eigen::MatrixXd GridField::jacobian(const Eigen::VectorXd& x, double h) const {
  const int d = dim();
  Eigen::MatrixXd J(values_.front().size(), d);
  for (int a = 0; a < d; ++a) {
    Eigen::VectorXd xp = x, xm = x;
    xp[a] += h;
    xm[a] -= h;
    J.col(a) = ((*this)(xp) - (*this)(xm)) / (2.0 * h);
  }
  return J;
}

std::size_t GridField::nearest(const Eigen::VectorXd& x) const {
  std::size_t idx = 0, stride = 1;
  for (int a = 0; a < dim(); ++a) {
    const double t = (x[a] - box_.lo[a]) / (box_.hi[a] - box_.lo[a]) * (n_ - 1);
    idx += static_cast<std::size_t>(std::clamp(static_cast<int>(std::lround(t)), 0, n_ - 1)) * stride;
    stride *= static_cast<std::size_t>(n_);
  }
  return idx;
}

std::vector<Eigen::VectorXd> grid_nodes(const Box& box, int n) {
  const int d = static_cast<int>(box.lo.size());
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(n);
  std::vector<Eigen::VectorXd> out(total, Eigen::VectorXd(d));
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rest = i;
    for (int a = 0; a < d; ++a) {
      const auto j = rest % static_cast<std::size_t>(n);
      rest /= static_cast<std::size_t>(n);
      out[i][a] = n == 1 ? box.lo[a] : box.lo[a] + (box.hi[a] - box.lo[a]) * static_cast<double>(j) / (n - 1);
    }
  }
  return out;
}

GridField FrequencyAtlas::omega_field(int r) const { return GridField(W0, grid, omega.at(r)); }

GridField FrequencyAtlas::Omega_field(int r) const {
  if (n2 == 0) return GridField(W0, grid, std::vector<Eigen::VectorXd>(nodes.size(), Eigen::VectorXd::Zero(1)));
  return GridField(W0, grid, Omega.at(r));
}

std::size_t FrequencyAtlas::survivors(int r) const {
  return static_cast<std::size_t>(std::count(alive.at(r).begin(), alive.at(r).end(), 1));
}

namespace {

FrequencyAtlas empty_atlas(const Box& W0, int grid, int n2, int r_max, double epsilon, const EstimateConfig& est) {
  if (W0.lo.size() < 1 || W0.lo.size() > 3 || W0.hi.size() != W0.lo.size())
    throw DimensionError("geometry: W0 must be a box in R^n1 with 1 <= n1 <= 3");
  if ((W0.hi.array() <= W0.lo.array()).any()) throw DimensionError("geometry: empty box");
  if (grid < 2 || r_max < 1) throw DimensionError("geometry: grid >= 2 and r_max >= 1 required");
  FrequencyAtlas a;
  a.n1 = static_cast<int>(W0.lo.size());
  a.n2 = n2;
  a.W0 = W0;
  a.grid = grid;
  a.epsilon = epsilon;
  a.r_max = r_max;
  a.nodes = grid_nodes(W0, grid);
  const std::size_t n = a.nodes.size();
  a.omega.assign(r_max + 1, std::vector<Eigen::VectorXd>(n));
  a.Omega.assign(r_max + 1, std::vector<Eigen::VectorXd>(n));
  a.steps_done.assign(n, r_max);
  a.alive.assign(r_max + 1, std::vector<char>(n, 1));
  a.h = h_sequence(est, r_max);
  return a;
}

}  // namespace

FrequencyAtlas build_atlas(const ModelInput& model, const Box& W0, const GeometryConfig& cfg) {
  cfg.est.validate();
  if (W0.lo.size() != model.dims.n1) throw DimensionError("build_atlas: box dimension differs from n1");
  FrequencyAtlas a = empty_atlas(W0, cfg.grid, model.dims.n2, cfg.r_max, cfg.est.epsilon, cfg.est);
  PrepareConfig pc;
  pc.ell_max = 4;
  pc.s_max = cfg.r_max + 1;
  pc.epsilon = cfg.est.epsilon;
  parallel_for(a.nodes.size(), cfg.threads, [&](std::size_t i) {
    const ModelInput m = with_omega(model, a.nodes[i]);
    a.omega[0][i] = m.omega0;
    a.Omega[0][i] = m.Omega0;
    int done = 0;
    try {
      const HamiltonianState st = prepare_hamiltonian(m, pc);
      a.omega[0][i] = st.omega;
      a.Omega[0][i] = st.Omega;
      const NormalizeResult res = normalize(st, cfg.r_max);
      done = static_cast<int>(res.states.size());
      for (int r = 1; r <= done; ++r) {
        a.omega[r][i] = res.states[r - 1].omega;
        a.Omega[r][i] = res.states[r - 1].Omega;
      }
    } catch (const Error&) {
    }
    // failed steps keep the last frequencies so interpolation stays defined
    for (int r = done + 1; r <= cfg.r_max; ++r) {
      a.omega[r][i] = a.omega[r - 1][i];
      a.Omega[r][i] = a.Omega[r - 1][i];
    }
    a.steps_done[i] = done;
  });
  return a;
}

FrequencyAtlas sample_atlas(const Box& W0, int grid, int n2, int r_max, double epsilon, const FrequencyMaps& maps,
                            const EstimateConfig& est) {
  FrequencyAtlas a = empty_atlas(W0, grid, n2, r_max, epsilon, est);
  for (int r = 0; r <= r_max; ++r)
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
      auto [w, W] = maps(r, a.nodes[i]);
      if (w.size() != a.n1 || W.size() != n2) throw DimensionError("sample_atlas: map returned wrong sizes");
      a.omega[r][i] = std::move(w);
      a.Omega[r][i] = std::move(W);
    }
  return a;
}

InversionResult invert_frequency_map(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& omega_r,
                                     const std::vector<Eigen::VectorXd>& targets, double tol, int max_iter,
                                     double fd_step) {
  InversionResult out;
  out.phi.resize(targets.size());
  out.converged.assign(targets.size(), 0);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Eigen::VectorXd& target = targets[t];
    const Eigen::Index d = target.size();
    Eigen::VectorXd x = target;
    Eigen::VectorXd res = omega_r(x) - target;
    int it = 0;
    while (sup_norm(res) > tol && it < max_iter) {
      Eigen::MatrixXd J(d, d);
      for (Eigen::Index a = 0; a < d; ++a) {
        Eigen::VectorXd xp = x, xm = x;
        xp[a] += fd_step;
        xm[a] -= fd_step;
        J.col(a) = (omega_r(xp) - omega_r(xm)) / (2.0 * fd_step);
      }
      const Eigen::VectorXd dx = J.partialPivLu().solve(res);
      if (!dx.allFinite()) break;
      // damped step: halve until the residual does not grow
      double lambda = 1.0;
      Eigen::VectorXd xn, rn;
      for (int k = 0; k < 30; ++k, lambda *= 0.5) {
        xn = x - lambda * dx;
        rn = omega_r(xn) - target;
        if (sup_norm(rn) <= sup_norm(res)) break;
      }
      x = xn;
      res = rn;
      ++it;
    }
    out.phi[t] = x;
    const double r = sup_norm(res);
    out.converged[t] = r <= tol;
    out.max_residual = std::max(out.max_residual, r);
    out.max_iterations = std::max(out.max_iterations, it);
  }
  return out;
}

AtlasInversion invert_atlas(const FrequencyAtlas& atlas, int r, const GeometryConfig& cfg, double A) {
  AtlasInversion out;
  const GridField F = atlas.omega_field(r);
  out.inv = invert_frequency_map([&](const Eigen::VectorXd& x) { return F(x); }, atlas.nodes);
  for (std::size_t i = 0; i < atlas.nodes.size(); ++i)
    if (atlas.valid(i, r)) out.max_shift = std::max(out.max_shift, sup_norm(atlas.omega[r][i] - atlas.omega[0][i]));
  const double eps = atlas.epsilon;
  out.shift_bound = cfg.est.sigma * std::pow(eps * A, r);
  out.lipschitz_bound = eps * cfg.est.sigma;
  const std::size_t n = static_cast<std::size_t>(atlas.grid);
  for (std::size_t i = 0; i < atlas.nodes.size(); ++i) {
    if (!out.inv.converged[i] || !atlas.valid(i, r)) continue;
    std::size_t stride = 1;
    for (int a = 0; a < atlas.n1; ++a, stride *= n) {
      const std::size_t j = i + stride;
      if ((i / stride) % n == n - 1 || !out.inv.converged[j] || !atlas.valid(j, r)) continue;
      const Eigen::VectorXd di = out.inv.phi[i] - atlas.nodes[i];
      const Eigen::VectorXd dj = out.inv.phi[j] - atlas.nodes[j];
      out.lipschitz = std::max(out.lipschitz, sup_norm(di - dj) / sup_norm(atlas.nodes[i] - atlas.nodes[j]));
    }
  }
  return out;
}

CarveReport carve_resonances(FrequencyAtlas& atlas, int r, const GeometryConfig& cfg, double J_r) {
  if (r < 1 || r > atlas.r_max) throw DimensionError("carve_resonances: r outside 1..r_max");
  const EstimateConfig& est = cfg.est;
  if (J_r < 0.0) J_r = 2.0 * est.J0 + 1.0;
  CarveReport rep;
  rep.r = r;
  rep.strip_width = strip_width(est, r);
  const double h_r = r < static_cast<int>(atlas.h.size()) ? atlas.h[r] : h_sequence(est, r).back();
  rep.margin = 3.0 * est.K * h_r + 2.0 * atlas.epsilon * J_r * h_r;
  const StripSet strips = strip_set(atlas.n1, atlas.n2, r, est.K);
  const GridField G = atlas.Omega_field(r);
  const AtlasInversion inv = invert_atlas(atlas, r, cfg, 0.0);
  const GridField F = atlas.omega_field(r);

  const auto& prev = atlas.alive[r - 1];
  auto& cur = atlas.alive[r];
  rep.min_divisor = kInf;
  rep.min_transversal = kInf;
  for (std::size_t i = 0; i < atlas.nodes.size(); ++i) {
    cur[i] = 0;
    if (!prev[i]) continue;
    const Eigen::VectorXd& phi = inv.inv.phi[i];
    if (!inv.inv.converged[i] || !atlas.valid(F.nearest(phi), r)) {
      ++rep.failed_nodes;
      ++rep.removed;
      continue;
    }
    const Eigen::VectorXd Omega = atlas.n2 ? G(phi) : Eigen::VectorXd();
    const double m = min_divisor(strips, atlas.nodes[i], Omega, atlas.epsilon);
    if (m < rep.strip_width) {
      ++rep.removed;
      continue;
    }
    cur[i] = 1;
    ++rep.survivors;
    rep.min_divisor = std::min(rep.min_divisor, m);
    rep.min_transversal = std::min(rep.min_transversal, min_pair_gap(Omega));
  }
  // phi^(r)(W^(r)) inside phi^(r-1)(W^(r-1)): omega^(r-1)(phi^(r)(w)) must land on a node of W^(r-1)
  const GridField Fprev = atlas.omega_field(r - 1);
  for (std::size_t i = 0; i < atlas.nodes.size(); ++i)
    if (cur[i] && !prev[Fprev.nearest(Fprev(inv.inv.phi[i]))]) ++rep.nested_violations;
  if (rep.survivors == 0) throw NumericalError("carve_resonances: no node survives step " + std::to_string(r));
  const double need = est.gamma / std::pow((r + 1.0) * est.K, est.tau);
  rep.divisors_ok = rep.min_divisor - rep.margin >= need;
  rep.transversal_ok = rep.min_transversal >= est.bbar;
  return rep;
}

int transversal_count(int n2) { return (2 * n2 + 2) * (2 * n2 + 1) / 2; }

double measure_bound(int n1, int n2, double gamma, double tau, int K, double D) {
  if (!(tau > n1)) throw DimensionError("measure_bound: needs tau > n1");
  const double p = tau - n1 + 1.0;
  const double tail = std::riemann_zeta(p) - 1.0 - std::pow(2.0, -p);
  return gamma * std::pow(2.0, n1 + 4) * transversal_count(n2) * std::pow(D, n1 - 1) * std::pow(K, -(tau - n1)) *
         tail;
}

McEstimate mc_measure(const Box& box, const std::function<bool(const Eigen::VectorXd&)>& inside, long samples,
                      std::uint64_t seed) {
  if (samples <= 0) throw DimensionError("mc_measure: samples must be positive");
  // fixed chunking keeps the estimate independent of the number of threads
  constexpr long kChunks = 64;
  std::vector<long> hits(kChunks, 0);
  parallel_for(kChunks, 0, [&](std::size_t c) {
    std::seed_seq ss{static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(c)};
    std::mt19937_64 rng(ss);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const long begin = samples * static_cast<long>(c) / kChunks, end = samples * static_cast<long>(c + 1) / kChunks;
    Eigen::VectorXd x(box.lo.size());
    for (long s = begin; s < end; ++s) {
      for (Eigen::Index a = 0; a < x.size(); ++a) x[a] = box.lo[a] + (box.hi[a] - box.lo[a]) * u(rng);
      if (inside(x)) ++hits[c];
    }
  });
  long total = 0;
  for (long h : hits) total += h;
  const double p = static_cast<double>(total) / static_cast<double>(samples);
  McEstimate e;
  e.samples = samples;
  e.value = box.volume() * p;
  e.std_error = box.volume() * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
  return e;
}

MeasureReport measure_resonant_volume(const FrequencyAtlas& atlas, const GeometryConfig& cfg) {
  const EstimateConfig& est = cfg.est;
  MeasureReport rep;
  rep.bound = measure_bound(atlas.n1, atlas.n2, est.gamma, est.tau, est.K, atlas.W0.diameter());
  std::vector<StripSet> strips;
  std::vector<GridField> F, G;
  for (int r = 2; r <= atlas.r_max; ++r) {
    strips.push_back(strip_set(atlas.n1, atlas.n2, r, est.K));
    F.push_back(atlas.omega_field(r));
    G.push_back(atlas.Omega_field(r));
  }
  rep.mc = mc_measure(
      atlas.W0,
      [&](const Eigen::VectorXd& w0) {
        for (std::size_t j = 0; j < strips.size(); ++j) {
          const int r = static_cast<int>(j) + 2;
          if (!atlas.valid(F[j].nearest(w0), r)) return true;
          const Eigen::VectorXd Omega = atlas.n2 ? G[j](w0) : Eigen::VectorXd();
          if (min_divisor(strips[j], F[j](w0), Omega, atlas.epsilon) < strip_width(est, r)) return true;
        }
        return false;
      },
      cfg.mc_samples, cfg.seed);
  rep.undersampled = rep.mc.std_error > 0.1 * rep.bound;
  rep.ok = rep.mc.value <= rep.bound * (1.0 + 3.0 * rep.mc.std_error / std::max(rep.mc.value, 1e-300));
  if (rep.undersampled) throw NumericalError("measure_resonant_volume: undersampled, raise mc_samples");
  return rep;
}

double hull_distance_lower_bound(const Eigen::VectorXd& k, const std::vector<Eigen::VectorXd>& pts, int iters) {
  if (pts.empty()) throw DimensionError("hull_distance_lower_bound: empty point set");
  Eigen::VectorXd x = pts.front();
  double best = 0.0;
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd g = x - k;
    std::size_t arg = 0;
    double lo = kInf;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double v = g.dot(pts[i]);
      if (v < lo) lo = v, arg = i;
    }
    const double f = 0.5 * g.squaredNorm();
    const double gap = g.dot(x) - lo;
    best = std::max(best, std::sqrt(std::max(0.0, 2.0 * (f - gap))));
    const Eigen::VectorXd dir = pts[arg] - x;
    const double dd = dir.squaredNorm();
    if (gap <= 1e-15 * std::max(1.0, f) || dd == 0.0) break;
    x += std::clamp(-g.dot(dir) / dd, 0.0, 1.0) * dir;
  }
  return best;
}

HullReport hull_and_lipschitz_checks(const FrequencyAtlas& atlas, int r, const GeometryConfig& cfg) {
  HullReport rep;
  rep.r = r;
  const GridField F = atlas.omega_field(r);
  const GridField G = atlas.Omega_field(r);
  const AtlasInversion inv = invert_atlas(atlas, r, cfg, 0.0);
  const double step = 0.25 * (atlas.W0.hi - atlas.W0.lo).minCoeff() / (atlas.grid - 1);
  const int n1 = atlas.n1, n2 = atlas.n2;

  std::vector<Eigen::MatrixXd> dOmega;  // d(Omega o phi)/d omega per surviving node
  for (std::size_t i = 0; i < atlas.nodes.size(); ++i) {
    if (!atlas.alive[r][i] || !inv.inv.converged[i]) continue;
    const Eigen::VectorXd& phi = inv.inv.phi[i];
    const Eigen::MatrixXd JF = F.jacobian(phi, step);
    const Eigen::MatrixXd dphi = JF.inverse();
    rep.max_det = std::max(rep.max_det, dphi.determinant());
    rep.max_lipschitz = std::max(
        rep.max_lipschitz, (dphi - Eigen::MatrixXd::Identity(n1, n1)).cwiseAbs().rowwise().sum().maxCoeff());
    if (n2 > 0) {
      Eigen::MatrixXd d = G.jacobian(phi, step) * dphi;
      rep.max_Omega_jacobian = std::max(rep.max_Omega_jacobian, d.cwiseAbs().rowwise().sum().maxCoeff());
      dOmega.push_back(std::move(d));
    }
  }
  rep.det_ok = rep.max_det <= 2.0;

  // gradient sets per l; l = 0 gives {0}
  std::vector<std::vector<Eigen::VectorXd>> sets;
  sets.push_back({Eigen::VectorXd::Zero(n1)});
  if (n2 > 0 && !dOmega.empty())
    for_each_lattice_ball(n2, 2, [&](const std::vector<int>& l) {
      Eigen::VectorXd lv(n2);
      bool zero = true;
      for (int j = 0; j < n2; ++j) lv[j] = l[j], zero = zero && l[j] == 0;
      if (zero) return;
      std::vector<Eigen::VectorXd> pts;
      for (const auto& d : dOmega) {
        pts.push_back(atlas.epsilon * (d.transpose() * lv));
        rep.max_gradient = std::max(rep.max_gradient, pts.back().cwiseAbs().sum());
      }
      sets.push_back(std::move(pts));
    });

  rep.min_hull_distance = kInf;
  for_each_half_lattice(n1, (r + 1) * cfg.est.K, [&](const std::vector<int>& k) {
    for (int sign : {1, -1}) {
      Eigen::VectorXd kv(n1);
      for (int a = 0; a < n1; ++a) kv[a] = sign * k[a];
      for (const auto& pts : sets) {
        double radius = 0.0;
        for (const auto& p : pts) radius = std::max(radius, p.norm());
        double lb = kv.norm() - radius;
        if (lb < 0.5) lb = std::max(lb, hull_distance_lower_bound(kv, pts));
        rep.min_hull_distance = std::min(rep.min_hull_distance, lb);
      }
    }
  });
  rep.hull_ok = rep.min_hull_distance >= 0.5;
  return rep;
}

bool AppendixConditions::all() const {
  return std::all_of(steps.begin(), steps.end(), [](const AppendixStep& s) { return s.i && s.ii && s.iii && s.iv && s.v; });
}

AppendixConditions appendix_conditions(const EstimateConfig& cfg, double A, int r_max) {
  cfg.validate();
  const double eps = cfg.epsilon, sigma = cfg.sigma, eA = eps * A;
  AppendixConditions out;
  // mu_s = 4 sigma (eps A)^{s+1} / h_s for s >= 1
  const auto mu = [&](int s, double h_s) { return 4.0 * sigma * std::pow(eA, s + 1) / h_s; };
  {
    double h = h_sequence(cfg, 1)[1];
    const double ratio = std::pow(2.0, cfg.tau + 2.0);
    for (int s = 1; s <= 400; ++s, h /= ratio) {
      const double m = mu(s, h);
      if (!std::isfinite(m)) {
        out.mu_tilde = kInf;
        break;
      }
      out.mu_tilde += m;
      if (m <= 1e-17 * out.mu_tilde) break;
    }
  }
  const std::vector<double> h = h_sequence(cfg, r_max);
  const double bound_ii = std::expm1(out.mu_tilde);
  const double bound_iii = (cfg.J0 + out.mu_tilde / (2.0 * eps * sigma)) * std::exp(out.mu_tilde);
  double Jbar = 0.0, J = cfg.J0;
  for (int r = 2; r <= r_max; ++r) {
    AppendixStep st;
    st.r = r;
    st.mu = mu(r - 1, h[r - 1]);
    const double J_prev = J;
    Jbar = Jbar * (1.0 + st.mu) + st.mu;
    J = (J + st.mu / (2.0 * eps * sigma)) * (1.0 + st.mu);
    st.Jbar = Jbar;
    st.J = J;
    st.i = st.mu <= std::min(1.0, eps * sigma) / std::pow(2.0, r);
    st.ii = Jbar <= bound_ii && bound_ii <= eps * sigma;
    st.iii = J <= bound_iii && bound_iii <= 2.0 * cfg.J0 + 1.0;
    st.iv = std::pow(eA, r - 1) <= cfg.bbar / (std::pow(2.0, r + 1) * A * (1.0 + eps * J_prev * sigma));
    const double rK = (r + 1.0) * cfg.K;
    const double cap = cfg.gamma / (std::pow(2.0, r + 1) * std::pow(rK, cfg.tau)) /
                       (std::max(rK / 2.0, 1.0 / sigma) + eps * J);
    st.v = h[r] <= std::min(h[r - 1] / 4.0, cap);
    out.steps.push_back(st);
  }
  return out;
}

void write_atlas_csv(std::ostream& os, const FrequencyAtlas& atlas) {
  const int r = atlas.r_max;
  for (int a = 0; a < atlas.n1; ++a) os << "omega0_" << a + 1 << ',';
  for (int a = 0; a < atlas.n1; ++a) os << "omega" << r << '_' << a + 1 << ',';
  for (int j = 0; j < atlas.n2; ++j) os << "Omega" << r << '_' << j + 1 << ',';
  os << "survives\n";
  os.precision(17);
  for (std::size_t i = 0; i < atlas.nodes.size(); ++i) {
    for (int a = 0; a < atlas.n1; ++a) os << atlas.nodes[i][a] << ',';
    for (int a = 0; a < atlas.n1; ++a) os << atlas.omega[r][i][a] << ',';
    for (int j = 0; j < atlas.n2; ++j) os << atlas.Omega[r][i][j] << ',';
    os << (atlas.alive[r][i] ? 1 : 0) << '\n';
  }
}

}  // namespace elliptorus
