#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <string>

#include "tsctl/synth_local.hpp"

using namespace tsctl;
using nlohmann::json;

namespace {

json sine_json() {
  return json::parse(R"json({
    "name": "sine_2rule",
    "A": [[[4, -4], [-1, -2]], [[-2, -4], [20, -2]]],
    "B": [[[1], [10]], [[1], [1]]],
    "memberships": ["0.5*(1+sin(x1))", "0.5*(1-sin(x1))"],
    "gradients": [["0.5*cos(x1)", 0], ["-0.5*cos(x1)", 0]],
    "gradient_vertices": [[[0.5, 0], [-0.5, 0]], [[-0.5, 0], [0.5, 0]]],
    "state_bounds": [2.0, 4.2411500823462206],
    "synthesis": {"alpha": 0.006, "phi": 28.5, "mu": 0.83, "mode": "proposed"}
  })json");
}

// 1-state, 2-rule stand-in for the hand expansions.
TsModel make_scalar_model() {
  TsModel mdl;
  mdl.name = "scalar_local";
  mdl.n = 1;
  mdl.m = 1;
  mdl.r = 2;
  mdl.A = {Mat::Constant(1, 1, -2.0), Mat::Constant(1, 1, 1.0)};
  mdl.B = {Mat::Constant(1, 1, 0.5), Mat::Constant(1, 1, 1.0)};
  mdl.state_names = {"x1"};
  GradientSector s1, s2;
  s1.vertices = {Vec::Constant(1, 0.4)};
  s2.vertices = {Vec::Constant(1, 0.5), Vec::Constant(1, -0.5)};
  mdl.sectors = {s1, s2};
  mdl.state_bounds = Vec::Ones(1);
  return mdl;
}

struct Assignment {
  std::map<int, Mat> values;
  void set(const MatrixVar& v, const Mat& m) { values[v.id] = m; }
  Mat operator()(const MatrixVar& v) const { return values.at(v.id); }
};

}  // namespace

TEST_CASE("containment block matches the bordered form") {
  TsModel mdl = make_scalar_model();
  LmiProblem problem;
  GlobalVars vars = declare_global_vars(problem, mdl, SynthesisMode::kProposed);
  Assignment at;
  at.set(vars.R, Mat::Constant(1, 1, 1.0));
  at.set(vars.T[0], Mat::Constant(1, 1, 1.0));

  Mat B0 = assemble_region_block(vars, 0, 0, Vec::Ones(1)).eval(at);
  Mat expect(2, 2);
  expect << -1.0, 1.0, 1.0, -1.0;
  CHECK((B0 - expect).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Mat> es(B0, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(es.eigenvalues().maxCoeff() == doctest::Approx(0.0).epsilon(1e-14));  // boundary case

  at.set(vars.T[0], Mat::Constant(1, 1, 4.0));
  Mat B1 = assemble_region_block(vars, 0, 0, Vec::Ones(1)).eval(at);
  expect << -4.0, 1.0, 1.0, -1.0;
  CHECK((B1 - expect).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Mat> es1(B1, Eigen::EigenvaluesOnly);
  CHECK(es1.eigenvalues().maxCoeff() < 0.0);  // det 3 > 0, trace < 0

  // a huge box ceases to constrain: the corner runs off to -x_bar^2
  Mat B2 = assemble_region_block(vars, 0, 0, Vec::Constant(1, 1e6)).eval(at);
  CHECK(B2(1, 1) == -1e12);
}

TEST_CASE("rate block matches the hand expansion and skips the excluded rule") {
  TsModel mdl = make_scalar_model();
  const double a1 = mdl.A[0](0, 0), b1 = mdl.B[0](0, 0), s = 0.7, c = 0.4;
  const double mu = 0.9, phi = 2.0;
  Vec v(2);
  v << 1.0, -1.0;

  // without rate feedback the row is just zeta*(A_i R + B_i S_j)
  {
    LmiProblem problem;
    GlobalVars vars = declare_global_vars(problem, mdl, SynthesisMode::kTraditionalPdc);
    Assignment at;
    at.set(vars.R, Mat::Constant(1, 1, 1.0));
    at.set(vars.T[0], Mat::Constant(1, 1, 3.0));
    at.set(vars.T[1], Mat::Constant(1, 1, 3.0));
    at.set(vars.S[0], Mat::Constant(1, 1, s));
    at.set(vars.S[1], Mat::Constant(1, 1, s));
    Mat Q = assemble_rate_block(mdl, vars, 0, 0, 0, 0, v, mu, phi).eval(at);
    CHECK(Q(0, 0) == doctest::Approx(-3.0));
    CHECK(Q(1, 0) == doctest::Approx(c * (a1 + b1 * s)).epsilon(1e-14));
    CHECK(Q(0, 1) == doctest::Approx(Q(1, 0)).epsilon(1e-14));
    CHECK(Q(1, 1) == doctest::Approx(-mu * mu * phi * phi).epsilon(1e-14));
  }

  // with rate feedback, only the rules other than upsilon contribute U terms
  {
    LmiProblem problem;
    GlobalVars vars = declare_global_vars(problem, mdl, SynthesisMode::kProposed);
    Assignment at;
    at.set(vars.R, Mat::Constant(1, 1, 1.0));
    at.set(vars.T[0], Mat::Constant(1, 1, 3.0));
    at.set(vars.T[1], Mat::Constant(1, 1, 3.0));
    at.set(vars.S[0], Mat::Constant(1, 1, s));
    at.set(vars.S[1], Mat::Constant(1, 1, s));
    at.set(vars.U[0], Mat::Constant(1, 1, 0.9));
    at.set(vars.U[1], Mat::Constant(1, 1, 0.3));
    Mat Q = assemble_rate_block(mdl, vars, 0, 0, 0, 0, v, mu, phi).eval(at);
    CHECK(Q(1, 0) == doctest::Approx(c * (a1 + b1 * s) + v[1] * c * b1 * 0.3).epsilon(1e-14));

    at.set(vars.U[0], Mat::Constant(1, 1, -5.0));  // the excluded rule must not matter
    Mat Q2 = assemble_rate_block(mdl, vars, 0, 0, 0, 0, v, mu, phi).eval(at);
    CHECK((Q - Q2).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("well-posedness block matches the hand expansion") {
  TsModel mdl = make_scalar_model();
  LmiProblem problem;
  GlobalVars vars = declare_global_vars(problem, mdl, SynthesisMode::kProposed);
  Assignment at;
  at.set(vars.R, Mat::Constant(1, 1, 1.0));
  at.set(vars.T[0], Mat::Constant(1, 1, 2.0));
  at.set(vars.T[1], Mat::Constant(1, 1, 2.0));
  at.set(vars.U[0], Mat::Constant(1, 1, 0.6));
  at.set(vars.U[1], Mat::Constant(1, 1, 0.0));

  // i = 2 has B_i = 1; upsilon = 2's first sector vertex is 0.5
  Mat X = assemble_wellposed_block(mdl, vars, 1, 1, 0, 0.83).eval(at);
  CHECK(X(0, 0) == doctest::Approx(-2.0));
  CHECK(X(1, 0) == doctest::Approx(0.5 * 0.0).epsilon(1e-14));
  Mat X2 = assemble_wellposed_block(mdl, vars, 1, 0, 0, 0.83).eval(at);  // upsilon = 1, U_1 = 0.6
  CHECK(X2(1, 0) == doctest::Approx(0.4 * 1.0 * 0.6).epsilon(1e-14));
  CHECK(X2(1, 1) == doctest::Approx(-(1.0 - 0.83) * (1.0 - 0.83)).epsilon(1e-14));
  CHECK(X2(1, 1) == doctest::Approx(-0.0289).epsilon(1e-12));

  // the margin 1 limit forces the coupling row itself to vanish
  Mat X3 = assemble_wellposed_block(mdl, vars, 1, 0, 0, 1.0).eval(at);
  CHECK(X3(1, 1) == 0.0);

  // without rate feedback the block degenerates to the Lyapunov corner
  LmiProblem p2;
  GlobalVars plain = declare_global_vars(p2, mdl, SynthesisMode::kTraditionalPdc);
  Assignment at2;
  at2.set(plain.T[0], Mat::Constant(1, 1, 2.0));
  at2.set(plain.T[1], Mat::Constant(1, 1, 2.0));
  Mat X4 = assemble_wellposed_block(mdl, plain, 1, 0, 0, 0.83).eval(at2);
  CHECK(X4(1, 0) == 0.0);
  CHECK(X4(0, 1) == 0.0);
}

TEST_CASE("program block census follows the index sets") {
  TsModel mdl = parse_model(sine_json());
  SynthesisConfig cfg = parse_config(sine_json()["synthesis"], mdl.r);
  LocalProgram prog = build_local_program(mdl, cfg);

  std::map<std::string, int> census;
  auto zero = [&](const MatrixVar& v) { return Mat::Zero(v.rows, v.cols); };
  for (const auto& [name, margin] : prog.problem.margins_at(zero)) {
    (void)margin;
    census[name.substr(0, name.find('('))]++;
  }
  CHECK(census["M"] == 6);
  CHECK(census["Q"] == 24);
  CHECK(census["X"] == 8);
  CHECK(census["box"] == 4);
  CHECK(census["enl"] == 2);
  CHECK(prog.condition_count == 46);
  CHECK(prog.problem.block_count() == 46);

  SynthesisConfig trad = cfg;
  trad.mode = SynthesisMode::kTraditionalPdc;
  CHECK(build_local_program(mdl, trad).condition_count == 46);  // same structure, U terms absent
}

TEST_CASE("missing region inputs are rejected") {
  TsModel mdl = parse_model(sine_json());
  SynthesisConfig cfg = parse_config(sine_json()["synthesis"], mdl.r);

  TsModel no_sectors = mdl;
  no_sectors.sectors.clear();
  CHECK_THROWS_AS(build_local_program(no_sectors, cfg), ValidationError);

  TsModel no_bounds = mdl;
  no_bounds.state_bounds = Vec();
  CHECK_THROWS_AS(build_local_program(no_bounds, cfg), ValidationError);

  SynthesisConfig no_mu = cfg;
  no_mu.mu = Vec();
  CHECK_THROWS_AS(build_local_program(mdl, no_mu), ValidationError);

  SynthesisConfig no_phi = cfg;
  no_phi.phi = Vec();
  CHECK_THROWS_AS(build_local_program(mdl, no_phi), ValidationError);
}

TEST_CASE("published tuning yields a verified region certificate") {
  TsModel mdl = parse_model(sine_json());
  SynthesisConfig cfg = parse_config(sine_json()["synthesis"], mdl.r);
  LocalProgram prog = build_local_program(mdl, cfg);
  LmiSolution sol = prog.problem.solve();
  REQUIRE(sol.feasible());
  LocalCertificate cert = recover_local(mdl, cfg, prog, sol);

  // dense re-verification of every block at the returned point
  for (const auto& [name, margin] : prog.problem.margins_at([&](const MatrixVar& v) {
         return sol.value(v);
       })) {
    INFO(name);
    CHECK(margin >= -1e-7);
  }

  // the enlargement coupling holds densely
  for (const Mat& Ti : cert.T) {
    Mat e = -cert.R - cert.R.transpose() + Ti + cert.H_enl;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (e + e.transpose()), Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().maxCoeff() <= 1e-7);
  }

  CHECK(enlargement_boundary_level(cert) <= 1.0 + 1e-6);

  // the region certificate also passes the stability-certificate checks
  CertificateCheck global_check = verify_certificate(mdl, cert, 100);
  CHECK(global_check.ok);

  // ellipsoid chain on a grid slightly larger than the state box:
  // enlargement ellipsoid inside the sublevel set inside the box
  const Mat Hinv = cert.H_enl.inverse();
  const double bx = 1.05 * cert.x_bar[0], by = 1.05 * cert.x_bar[1];
  for (int gi = 0; gi <= 100; ++gi)
    for (int gj = 0; gj <= 100; ++gj) {
      Vec x(2);
      x << -bx + 2.0 * bx * gi / 100.0, -by + 2.0 * by * gj / 100.0;
      const Vec h = mdl.eval_membership(x);
      Mat Ph = h[0] * cert.P[0] + h[1] * cert.P[1];
      const double level = x.dot(Ph * x);
      if (x.dot(Hinv * x) <= 1.0) CHECK(level <= 1.0 + 1e-6);
      if (level <= 1.0) {
        CHECK(std::abs(x[0]) <= cert.x_bar[0] + 1e-9);
        CHECK(std::abs(x[1]) <= cert.x_bar[1] + 1e-9);
      }
    }
}

TEST_CASE("baseline tuning without rate feedback is feasible") {
  TsModel mdl = parse_model(sine_json());
  SynthesisConfig cfg = parse_config(sine_json()["synthesis"], mdl.r);
  cfg.mode = SynthesisMode::kTraditionalPdc;
  cfg.alpha = 0.016;
  cfg.phi = Vec::Constant(2, 12.0);
  cfg.mu = Vec::Ones(2);
  LocalOutcome out = synthesize_local(mdl, cfg);
  REQUIRE(out.status == SolveStatus::kFeasible);
  REQUIRE(out.certificate.has_value());
  for (const Mat& L : out.certificate->L) CHECK(L.cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.certificate->phi[0] == doctest::Approx(12.0));
  CHECK(out.certificate->mu[0] == doctest::Approx(1.0));
}

TEST_CASE("relaxing the box never shrinks the enlargement objective") {
  TsModel mdl = parse_model(sine_json());
  SynthesisConfig cfg = parse_config(sine_json()["synthesis"], mdl.r);
  LocalOutcome tight = synthesize_local(mdl, cfg);
  REQUIRE(tight.status == SolveStatus::kFeasible);

  TsModel wide = mdl;
  wide.state_bounds = 10.0 * mdl.state_bounds;
  LocalOutcome loose = synthesize_local(wide, cfg);
  REQUIRE(loose.status == SolveStatus::kFeasible);
  CHECK(loose.logdet_H >= tight.logdet_H - 1e-6);
}

TEST_CASE("enlargement coupling pins the scalar ceiling") {
  // with T = I and R = I the coupling reads gamma - 1 <= 0
  TsModel mdl = make_scalar_model();
  SynthesisConfig cfg;
  cfg.mode = SynthesisMode::kTraditionalPdc;
  cfg.alpha = 0.5;
  cfg.phi = Vec::Constant(2, 1.0);
  cfg.mu = Vec::Ones(2);
  LocalProgram prog = build_local_program(mdl, cfg);

  auto margin_of = [&](double gamma) {
    Assignment at;
    at.set(prog.vars.base.R, Mat::Constant(1, 1, 1.0));
    at.set(prog.vars.base.T[0], Mat::Constant(1, 1, 1.0));
    at.set(prog.vars.base.T[1], Mat::Constant(1, 1, 1.0));
    at.set(prog.vars.base.S[0], Mat::Zero(1, 1));
    at.set(prog.vars.base.S[1], Mat::Zero(1, 1));
    at.set(prog.vars.H, Mat::Constant(1, 1, gamma));
    for (const auto& [name, margin] :
         prog.problem.margins_at([&](const MatrixVar& v) { return at(v); }))
      if (name.rfind("enl(1", 0) == 0) return margin;
    REQUIRE(false);
    return 0.0;
  };
  CHECK(margin_of(0.9) == doctest::Approx(0.1).epsilon(1e-12));   // gamma below 1: satisfied
  CHECK(margin_of(1.0) == doctest::Approx(0.0).epsilon(1e-12));   // boundary
  CHECK(margin_of(1.1) == doctest::Approx(-0.1).epsilon(1e-12));  // above 1: violated
}
