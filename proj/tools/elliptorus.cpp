#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "elliptorus/errors.hpp"
#include "elliptorus/harness.hpp"

using namespace elliptorus;

namespace {

/// Flags are kept as text and applied on top of the config file, so both go through RunConfig::apply.
struct FlagSet {
  std::map<std::string, std::string> values;
  std::string config_file;
  bool geometry = false;

  void add_to(CLI::App* app, bool with_geometry_opts) {
    app->add_option("--config", config_file, "key = value file applied before the flags");
    for (const char* name : {"model", "rmax", "epsilon", "ell-max", "s-max", "seed", "out", "gamma", "tau", "bigk",
                             "bbar", "rho", "R", "sigma", "verify-samples", "exchange-points"})
      app->add_option(std::string("--") + name, values[name]);
    if (with_geometry_opts) {
      for (const char* name : {"grid", "mc-samples", "box-halfwidth", "threads", "measure-gammas"})
        app->add_option(std::string("--") + name, values[name]);
    }
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file.empty()) {
      std::ifstream is(config_file);
      if (!is) throw IoError("cannot open config " + config_file);
      cfg.read(is);
    }
    for (const auto& [k, v] : values)
      if (!v.empty()) cfg.apply(k, v);
    if (geometry) cfg.geometry = true;
    return cfg;
  }
};

int cmd_run(const RunConfig& cfg) {
  const RunArtifacts a = run_pipeline(cfg);
  emit_reports(a, cfg.out);
  std::cout << "steps " << a.run.states.size() << "/" << cfg.r_max << ", residual "
            << (a.torus.empty() ? 0.0 : a.torus.back().vector_field_residual()) << ", exit " << a.exit_code << '\n';
  if (a.run.resonance) std::cerr << "resonance: " << a.run.resonance->what() << '\n';
  for (const auto& f : a.failures) std::cerr << "failed: " << f << '\n';
  return a.exit_code;
}

int cmd_estimate(const RunConfig& cfg) {
  const ModelInput model = resolve_model(cfg.model);
  PrepareConfig pc;
  pc.ell_max = cfg.ell_max;
  pc.s_max = cfg.s_max;
  pc.epsilon = cfg.epsilon;
  pc.domain = cfg.domain;
  PrepareReport pr;
  ModelInput m = model;
  if (cfg.K > 0) m.K = cfg.K;
  prepare_hamiltonian(m, pc, &pr);
  std::cout << estimate_report(estimate_config(cfg, m, pr.Ebar), cfg.s_max).dump(2) << '\n';
  return kExitOk;
}

int cmd_geometry(RunConfig cfg) {
  cfg.geometry = true;
  return cmd_run(cfg);
}

int cmd_verify(const RunConfig& cfg) {
  const RunArtifacts a = run_pipeline(cfg);
  bool ok = a.failures.empty();
  for (std::size_t i = 1; i < a.torus.size(); ++i) {
    const double f = a.torus[i].vector_field_residual() / a.torus[i - 1].vector_field_residual();
    std::cout << "torus residual r=" << a.torus[i].r << ": " << a.torus[i].vector_field_residual() << " (factor " << f
              << ")\n";
  }
  for (const auto& e : a.exchange)
    std::cout << "exchange r=" << e.r << ": max relative error " << e.max_rel_error << (e.ok() ? " ok" : " FAIL")
              << '\n';
  for (const auto& f : a.failures) std::cout << "failed: " << f << '\n';
  std::cout << (ok ? "verify: ok" : "verify: FAIL") << '\n';
  if (!ok) return kExitInvariant;
  return a.run.resonance ? kExitResonance : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Normal forms for elliptic lower dimensional tori"};
  app.require_subcommand(1);
  FlagSet run_flags, est_flags, geo_flags, ver_flags;
  auto* run = app.add_subcommand("run", "prepare, normalize, audit and verify; optional geometry pass");
  run_flags.add_to(run, true);
  run->add_flag("--geometry", run_flags.geometry, "also sample the frequency maps");
  auto* est = app.add_subcommand("estimate", "sequences and thresholds only");
  est_flags.add_to(est, false);
  auto* geo = app.add_subcommand("geometry", "run with the geometry pass");
  geo_flags.add_to(geo, true);
  auto* ver = app.add_subcommand("verify", "torus residual and exchange check");
  ver_flags.add_to(ver, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitIo;
  }
  try {
    if (*run) return cmd_run(run_flags.resolve());
    if (*est) return cmd_estimate(est_flags.resolve());
    if (*geo) return cmd_geometry(geo_flags.resolve());
    if (*ver) return cmd_verify(ver_flags.resolve());
  } catch (const ResonanceDetected& e) {
    std::cerr << "resonance: " << e.what() << '\n';
    return kExitResonance;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}
