#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "elliptorus/estimates.hpp"
#include "elliptorus/geometry.hpp"
#include "elliptorus/model.hpp"
#include "elliptorus/normalizer.hpp"

namespace elliptorus {

struct TorusResidualReport {
  int r = 0;
  Eigen::VectorXd omega, Omega;
  /// eps^{r+1} times the coupling norm of the lowest untreated order.
  double block_residual = 0.0;
  /// Sampled on p = 0, z = zeta = 0: max |dp/dt|, max |dz/dt|, |dzeta/dt|, max |dq/dt - omega|.
  double pdot = 0.0, zdot = 0.0, qdot_error = 0.0;
  double vector_field_residual() const;
};

TorusResidualReport verify_torus_residual(const HamiltonianState& st, int samples, std::uint64_t seed);

/// A coordinate function: q_index >= 0 stands for q_{q_index} + S, otherwise S alone.
struct CoordinateFunction {
  int q_index = -1;
  Series S;
};

/// Identity coordinates (p_1..p_n1, q_1..q_n1, z_1..z_n2, zeta_1..zeta_n2).
std::vector<CoordinateFunction> identity_coordinates(const Dimensions& d);
/// exp(L_chi) applied to each coordinate function.
void apply_lie_series_to_coordinates(std::vector<CoordinateFunction>& coords, const Series& chi, double tol = 1e-22);
/// Lie transform with generators X_1, X_2, ... applied to each coordinate function.
void apply_lie_transform_to_coordinates(std::vector<CoordinateFunction>& coords, const std::vector<Series>& X,
                                        double tol = 1e-22);
/// Coordinates of the composed transformation of steps 1..r of a run (same order as on H).
std::vector<CoordinateFunction> step_coordinates(const NormalizeResult& run, int r);
PhasePoint evaluate_coordinates(const std::vector<CoordinateFunction>& coords, const Dimensions& d,
                                const PhasePoint& x);

struct ExchangeReport {
  int r = 0;
  int points = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool ok(double tol = 1e-9) const { return max_rel_error <= tol; }
};

/// H^(0) at the transformed coordinates against H^(r) plus the discarded constants, at random
/// real points with |p|, |z| <= radius.
ExchangeReport exchange_check(const NormalizeResult& run, int r, int points, std::uint64_t seed, double radius = 0.1);

struct RunConfig {
  std::string model = "toy";  // built-in name (toy, planar, normal_form) or model file
  int r_max = 3;
  double epsilon = 1e-3;
  int ell_max = 6;
  int s_max = 6;
  std::uint64_t seed = 1;
  std::string out = "elliptorus_out";
  double gamma = 0.1;
  double tau = 3.0;
  int K = 0;  // 0: take K from the model
  double bbar = 1.0;
  DomainParams domain;
  bool geometry = false;
  int grid = 64;
  long mc_samples = 1000000;
  double box_halfwidth = 0.05;
  int threads = 0;
  int verify_samples = 64;
  int exchange_points = 20;
  std::vector<double> measure_gammas{0.05, 0.1, 0.2};

  /// Applies `key = value` lines; unknown keys throw IoError.
  void apply(const std::string& key, const std::string& value);
  void read(std::istream& is);
};

ModelInput resolve_model(const std::string& name_or_path);
/// Estimate parameters for a prepared model: n1, K, J0 = |dOmega|_inf, Ebar from prepare.
EstimateConfig estimate_config(const RunConfig& cfg, const ModelInput& model, double Ebar);

struct GeometryArtifacts {
  FrequencyAtlas atlas;
  std::vector<CarveReport> carves;
  std::vector<AtlasInversion> inversions;  // r = 1..r_max
  std::vector<HullReport> hulls;           // r = 2..r_max
  std::vector<std::pair<double, MeasureReport>> measures;  // per gamma
  AppendixConditions appendix;
};

struct RunArtifacts {
  RunConfig config;
  ModelInput model;
  PrepareReport prepare;
  EstimateConfig estimates;
  Thresholds thresholds;
  NormalizeResult run;
  AuditReport audit;
  std::vector<TorusResidualReport> torus;  // r = 0..steps
  std::vector<ExchangeReport> exchange;
  std::optional<GeometryArtifacts> geometry;
  std::vector<std::string> failures;  // hard invariants
  int exit_code = 0;
};

enum ExitCode { kExitOk = 0, kExitResonance = 2, kExitInvariant = 3, kExitIo = 4 };

RunArtifacts run_pipeline(const RunConfig& cfg);
GeometryArtifacts run_geometry(const RunConfig& cfg, const ModelInput& model, const EstimateConfig& est);

nlohmann::json to_json(const RunArtifacts& a);
nlohmann::json to_json(const GeometryArtifacts& g);
/// Sequences and thresholds only.
nlohmann::json estimate_report(const EstimateConfig& est, int s_max);

/// Writes report.json, residual_vs_r.csv, norms_vs_s.csv and, with geometry, atlas.csv and
/// measure_vs_gamma.csv into cfg.out. Throws IoError.
void emit_reports(const RunArtifacts& a, const std::string& dir);

}  // namespace elliptorus
