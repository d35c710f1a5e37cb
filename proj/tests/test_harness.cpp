#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "elliptorus/errors.hpp"
#include "elliptorus/harness.hpp"

using namespace elliptorus;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RunConfig toy_config(double eps = 1e-3, int r_max = 3) {
  RunConfig c;
  c.epsilon = eps;
  c.r_max = r_max;
  return c;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("elliptorus_test_" + name);
  fs::remove_all(p);
  return p;
}

// Recursive comparison; numbers within rel * max(|a|, |b|) + abs.
void compare_json(const json& a, const json& b, const std::string& path, double rel, double abs_floor) {
  INFO(path);
  REQUIRE(a.type_name() == std::string(b.type_name()));
  if (a.is_object()) {
    REQUIRE(a.size() == b.size());
    for (auto it = a.begin(); it != a.end(); ++it) {
      REQUIRE(b.contains(it.key()));
      compare_json(it.value(), b.at(it.key()), path + "/" + it.key(), rel, abs_floor);
    }
  } else if (a.is_array()) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      compare_json(a[i], b[i], path + "/" + std::to_string(i), rel, abs_floor);
  } else if (a.is_number_float() || b.is_number_float()) {
    const double x = a.get<double>(), y = b.get<double>();
    CHECK(std::abs(x - y) <= rel * std::max(std::abs(x), std::abs(y)) + abs_floor);
  } else {
    CHECK(a == b);
  }
}

}  // namespace

TEST_CASE("config file and flag values") {
  RunConfig c;
  std::istringstream is("# comment\nmodel = planar\nrmax = 2\n  epsilon=1e-4  \n\nell-max = 5\nbigk = 3\n"
                        "measure_gammas = 0.1, 0.3\ngeometry = true\n");
  c.read(is);
  CHECK(c.model == "planar");
  CHECK(c.r_max == 2);
  CHECK(c.epsilon == 1e-4);
  CHECK(c.ell_max == 5);
  CHECK(c.K == 3);
  CHECK(c.geometry);
  CHECK(c.measure_gammas == std::vector<double>{0.1, 0.3});
  CHECK(c.s_max == 6);

  CHECK_THROWS_AS(c.apply("nonsense", "1"), IoError);
  CHECK_THROWS_AS(c.apply("rmax", "three"), IoError);
  CHECK_THROWS_AS(c.apply("epsilon", "1e-3x"), IoError);
  std::istringstream bad("rmax 3\n");
  CHECK_THROWS_AS(c.read(bad), IoError);
  CHECK_THROWS_AS(resolve_model("/nonexistent/model.ham"), IoError);
}

TEST_CASE("shipped toy model file matches the built-in generator") {
  const ModelInput a = load_model(std::string(ELLIPTORUS_SOURCE_DIR) + "/models/toy.ham");
  const ModelInput b = toy_model();
  std::ostringstream sa, sb;
  write_model(sa, a);
  write_model(sb, b);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("already normal form: nothing to remove") {
  RunConfig c = toy_config();
  c.model = "normal_form";
  const RunArtifacts a = run_pipeline(c);
  REQUIRE(a.run.states.size() == 3);
  CHECK(a.exit_code == kExitOk);
  for (const auto& g : a.run.generators) {
    CHECK(g.chi0.empty());
    CHECK(g.chi1.empty());
    CHECK(g.chi2.empty());
    for (const auto& D : g.D2) CHECK(D.empty());
  }
  for (const auto& t : a.torus) {
    CHECK(t.vector_field_residual() == 0.0);
    CHECK(t.block_residual == 0.0);
    CHECK(t.qdot_error == 0.0);
    CHECK((t.omega - a.model.omega0).norm() == 0.0);
  }
}

TEST_CASE("toy run: three steps with shrinking residual") {
  const RunArtifacts a = run_pipeline(toy_config());
  REQUIRE(a.run.states.size() == 3);
  CHECK(a.exit_code == kExitOk);
  CHECK(a.failures.empty());
  REQUIRE(a.torus.size() == 4);
  for (int r = 1; r <= 3; ++r) {
    const double f = a.torus[r].vector_field_residual() / a.torus[r - 1].vector_field_residual();
    CHECK(f < 0.1);
    CHECK(f > 0.0);
    // q-dot picks up the untreated terms linear in p, so it shrinks with the rest
    CHECK(a.torus[r].qdot_error < a.torus[r - 1].qdot_error);
  }
}

TEST_CASE("residual order in epsilon") {
  // log residual against r: slope close to log eps once eps is small enough for the constants to fade
  const RunArtifacts a = run_pipeline(toy_config(1e-10));
  std::vector<double> r, lr;
  for (const auto& t : a.torus) {
    r.push_back(t.r);
    lr.push_back(std::log(t.vector_field_residual()));
  }
  const double s = slope(r, lr) / std::log(1e-10);
  CHECK(s > 0.85);
  CHECK(s < 1.15);

  // at fixed r the residual scales as eps^{r+1}
  const RunArtifacts b = run_pipeline(toy_config(1e-9));
  for (int k = 0; k <= 3; ++k) {
    const double es = std::log(b.torus[k].vector_field_residual() / a.torus[k].vector_field_residual()) / std::log(10.0);
    CHECK(es == doctest::Approx(k + 1).epsilon(0.01));
  }
}

TEST_CASE("exchange check, toy and planar") {
  for (const char* model : {"toy", "planar"}) {
    RunConfig c = toy_config();
    c.model = model;
    const RunArtifacts a = run_pipeline(c);
    REQUIRE(a.run.states.size() == 3);
    for (int r = 1; r <= 3; ++r) {
      const ExchangeReport e = exchange_check(a.run, r, 20, 7 + r);
      INFO(model << " r=" << r << " err=" << e.max_rel_error);
      CHECK(e.ok(1e-9));
    }
  }
}

TEST_CASE("exchange check detects a missing step") {
  const RunArtifacts a = run_pipeline(toy_config());
  for (int r = 1; r <= 3; ++r) {
    NormalizeResult broken = a.run;
    GeneratingSet& g = broken.generators[r - 1];
    g.chi0 = g.chi1 = g.chi2 = Series(g.chi0.dims());
    for (auto& D : g.D2) D = Series(D.dims());
    const ExchangeReport e = exchange_check(broken, r, 20, 3);
    INFO("r=" << r << " err=" << e.max_rel_error);
    CHECK(e.max_rel_error > 1e-6);
  }
}

TEST_CASE("reports are deterministic") {
  RunConfig c = toy_config();
  c.out = scratch("det_a").string();
  emit_reports(run_pipeline(c), c.out);
  const std::string out_b = scratch("det_b").string();
  emit_reports(run_pipeline(c), out_b);
  for (const char* f : {"report.json", "residual_vs_r.csv", "norms_vs_s.csv"})
    CHECK(slurp(fs::path(c.out) / f) == slurp(fs::path(out_b) / f));
}

TEST_CASE("empty run still produces the full schema") {
  RunConfig c = toy_config(1e-3, 0);
  const RunArtifacts a = run_pipeline(c);
  CHECK(a.exit_code == kExitOk);
  const json j = json::parse(to_json(a).dump());
  for (const char* k : {"config", "prepare", "thresholds", "steps", "torus", "exchange", "audit", "status"})
    CHECK(j.contains(k));
  CHECK(j["steps"].empty());
  CHECK(j["exchange"].empty());
  CHECK(j["torus"].size() == 1);
  CHECK(j["status"]["completed_steps"] == 0);
}

TEST_CASE("resonant frequencies stop the run with exit 2") {
  const fs::path dir = scratch("resonant");
  fs::create_directories(dir);
  const fs::path file = dir / "resonant.ham";
  {
    std::ofstream os(file);
    write_model(os, with_omega(toy_model(), Eigen::Vector2d(1.0, 1.0)));
  }
  RunConfig c = toy_config();
  c.model = file.string();
  const RunArtifacts a = run_pipeline(c);
  REQUIRE(a.run.resonance.has_value());
  CHECK(a.run.resonance->r == 1);
  CHECK(a.run.states.empty());
  CHECK(a.exit_code == kExitResonance);
  const json j = to_json(a);
  CHECK(j["status"]["exit_code"] == 2);
  CHECK(j["status"].contains("resonance"));
}

TEST_CASE("geometry pass writes atlas and measure data") {
  RunConfig c = toy_config();
  c.geometry = true;
  c.grid = 8;
  c.mc_samples = 20000;
  c.out = scratch("geometry").string();
  const RunArtifacts a = run_pipeline(c);
  INFO(a.failures.size());
  REQUIRE(a.geometry.has_value());
  emit_reports(a, c.out);
  const json j = json::parse(slurp(fs::path(c.out) / "report.json"));
  for (const char* k : {"box", "grid", "inversion", "carving", "hull", "measure", "extension_conditions"})
    CHECK(j["geometry"].contains(k));

  std::ifstream atlas(fs::path(c.out) / "atlas.csv");
  std::string line;
  int rows = 0;
  while (std::getline(atlas, line)) {
    if (line.empty()) continue;
    CHECK(std::count(line.begin(), line.end(), ',') + 1 == 2 + 2 + 1 + 1);
    ++rows;
  }
  CHECK(rows == 8 * 8 + 1);
  std::ifstream meas(fs::path(c.out) / "measure_vs_gamma.csv");
  rows = 0;
  while (std::getline(meas, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 1 + 3);
}

TEST_CASE("toy report matches the stored snapshot") {
  const json now = json::parse(to_json(run_pipeline(toy_config())).dump());
  std::ifstream is(std::string(ELLIPTORUS_SOURCE_DIR) + "/tests/golden/toy_report.json");
  REQUIRE(is.good());
  const json golden = json::parse(is);
  compare_json(now, golden, "", 1e-9, 1e-12);
}
