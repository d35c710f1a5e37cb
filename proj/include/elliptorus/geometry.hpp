#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "elliptorus/estimates.hpp"
#include "elliptorus/model.hpp"

namespace elliptorus {

struct Box {
  Eigen::VectorXd lo, hi;
  /// Sup-norm diameter.
  double diameter() const;
  double volume() const;
  bool contains(const Eigen::VectorXd& x) const;
};

/// Multilinear interpolation of a vector field sampled on a regular n^dim grid over a box
/// (axis 0 fastest). Points outside the box are extrapolated from the boundary cell.
class GridField {
 public:
  GridField() = default;
  GridField(Box box, int n, std::vector<Eigen::VectorXd> values);
  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
  /// Central-difference Jacobian with step h.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, double h) const;
  /// Index of the node nearest to x.
  std::size_t nearest(const Eigen::VectorXd& x) const;
  int dim() const { return static_cast<int>(box_.lo.size()); }

 private:
  Box box_;
  int n_ = 0;
  std::vector<Eigen::VectorXd> values_;
};

/// Regular grid nodes over a box, axis 0 fastest.
std::vector<Eigen::VectorXd> grid_nodes(const Box& box, int n);

struct GeometryConfig {
  EstimateConfig est;  // gamma, tau, K, sigma, bbar, J0, epsilon
  int grid = 64;
  long mc_samples = 1000000;
  std::uint64_t seed = 1;
  int r_max = 3;
  int threads = 0;  // 0: hardware concurrency
};

struct FrequencyAtlas {
  int n1 = 0, n2 = 0;
  Box W0;
  int grid = 0;
  double epsilon = 0.0;
  int r_max = 0;
  std::vector<Eigen::VectorXd> nodes;               // omega^(0) samples
  std::vector<std::vector<Eigen::VectorXd>> omega;  // [r][node], r = 0..r_max
  std::vector<std::vector<Eigen::VectorXd>> Omega;
  std::vector<int> steps_done;                      // completed normalization steps per node
  std::vector<std::vector<char>> alive;             // [r][node], nodes of W^(r) in omega coordinates
  std::vector<double> h;

  bool valid(std::size_t node, int r) const { return steps_done[node] >= r; }
  GridField omega_field(int r) const;
  GridField Omega_field(int r) const;
  std::size_t survivors(int r) const;
};

/// Re-runs the normalizer (ell_max = 4, s_max = r_max + 1) at every grid node of W0.
FrequencyAtlas build_atlas(const ModelInput& model, const Box& W0, const GeometryConfig& cfg);

/// Atlas from given maps (omega, Omega) = maps(r, omega0); every node valid.
using FrequencyMaps = std::function<std::pair<Eigen::VectorXd, Eigen::VectorXd>(int, const Eigen::VectorXd&)>;
FrequencyAtlas sample_atlas(const Box& W0, int grid, int n2, int r_max, double epsilon, const FrequencyMaps& maps,
                            const EstimateConfig& est);

struct InversionResult {
  std::vector<Eigen::VectorXd> phi;
  std::vector<char> converged;
  double max_residual = 0.0;
  int max_iterations = 0;
};

/// Newton solve of omega_r(phi) = target for each target, with a central-difference Jacobian.
InversionResult invert_frequency_map(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& omega_r,
                                     const std::vector<Eigen::VectorXd>& targets, double tol = 1e-12,
                                     int max_iter = 50, double fd_step = 1e-6);

struct AtlasInversion {
  InversionResult inv;
  double max_shift = 0.0;     // max |omega^(r) - omega^(0)| over valid nodes
  double shift_bound = 0.0;   // sigma (eps A)^r
  double lipschitz = 0.0;     // empirical |d(phi - Id)| over neighbouring surviving nodes
  double lipschitz_bound = 0.0;
};

/// phi^(r) at the grid nodes (read as omega coordinates) from the interpolated omega^(r).
AtlasInversion invert_atlas(const FrequencyAtlas& atlas, int r, const GeometryConfig& cfg, double A);

struct CarveReport {
  int r = 0;
  std::size_t removed = 0, survivors = 0, failed_nodes = 0;
  double strip_width = 0.0;     // 2 gamma/((r+1)K)^tau
  double margin = 0.0;          // 3K h_r + 2 eps J_r h_r
  double min_divisor = 0.0;     // smallest |k.omega + eps l.Omega| over survivors and new k
  bool divisors_ok = true;      // min_divisor - margin >= gamma/((r+1)K)^tau
  double min_transversal = 0.0; // min |Omega_i - Omega_j| over survivors
  bool transversal_ok = true;
  std::size_t nested_violations = 0;  // survivors whose image leaves the previous image (grid resolution)
};

/// Removes from W^(r-1) the nodes in a resonant strip of step r. The pipeline carves r >= 2 only
/// (W^(1) = W^(0)); r = 1 is accepted for direct use. Throws NumericalError when nothing survives.
/// J_r < 0 means the bound 2 J0 + 1.
CarveReport carve_resonances(FrequencyAtlas& atlas, int r, const GeometryConfig& cfg, double J_r = -1.0);

/// (2 n2 + 2)(2 n2 + 1)/2.
int transversal_count(int n2);
/// gamma 2^{n1+4} c_{n2} D^{n1-1} K^{-(tau-n1)} sum_{r>=3} r^{-(tau-n1+1)}; needs tau > n1.
double measure_bound(int n1, int n2, double gamma, double tau, int K, double D);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long samples = 0;
};

/// Uniform Monte Carlo volume of {x in box : inside(x)}.
McEstimate mc_measure(const Box& box, const std::function<bool(const Eigen::VectorXd&)>& inside, long samples,
                      std::uint64_t seed);

struct MeasureReport {
  McEstimate mc;
  double bound = 0.0;
  bool undersampled = false;
  bool ok = false;  // mc <= bound (1 + 3 sigma_mc)
};

/// Volume, in omega^(0) coordinates, of the points whose frequencies fall in a strip at some step 2..r_max.
MeasureReport measure_resonant_volume(const FrequencyAtlas& atlas, const GeometryConfig& cfg);

struct HullReport {
  int r = 0;
  double max_gradient = 0.0;        // sup |d(eps l.Omega o phi)/d omega|
  double max_Omega_jacobian = 0.0;  // sup |d(Omega o phi)/d omega|_inf
  double min_hull_distance = 0.0;   // lower bound of dist(k, hull) over sampled k
  bool hull_ok = true;
  double max_det = 0.0;             // sup det(d phi / d omega)
  bool det_ok = true;
  double max_lipschitz = 0.0;       // sup |d(phi - Id)|_inf
};

HullReport hull_and_lipschitz_checks(const FrequencyAtlas& atlas, int r, const GeometryConfig& cfg);

/// Lower bound of the euclidean distance from k to the convex hull of pts (Frank-Wolfe with duality gap).
double hull_distance_lower_bound(const Eigen::VectorXd& k, const std::vector<Eigen::VectorXd>& pts, int iters = 500);

struct AppendixStep {
  int r = 0;
  double mu = 0.0;  // mu_{r-1}
  double Jbar = 0.0, J = 0.0;
  bool i = false, ii = false, iii = false, iv = false, v = false;
};

struct AppendixConditions {
  double mu_tilde = 0.0;  // sum_{s>=1} mu_s
  std::vector<AppendixStep> steps;  // r = 2..r_max
  bool all() const;
};

AppendixConditions appendix_conditions(const EstimateConfig& cfg, double A, int r_max);

/// One row per node: omega^(0), omega^(r_max), Omega^(r_max), surviving flag.
void write_atlas_csv(std::ostream& os, const FrequencyAtlas& atlas);

}  // namespace elliptorus
