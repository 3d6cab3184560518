#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tsctl/solver.hpp"

#include <cmath>

using tsctl::ConicBlock;
using tsctl::ConicProgram;
using tsctl::Mat;
using tsctl::SolveStatus;
using tsctl::Vec;

namespace {

ConicBlock scalar_block(double f0, int var, double coeff) {
  ConicBlock b;
  b.F0 = Mat::Constant(1, 1, f0);
  b.vars = {var};
  b.coeff = {Mat::Constant(1, 1, coeff)};
  return b;
}

}  // namespace

TEST_CASE("interval feasibility returns an interior point") {
  ConicProgram prog;
  prog.nvars = 1;
  prog.blocks.push_back(scalar_block(-1.0, 0, 1.0));  // y - 1 >= 0
  prog.blocks.push_back(scalar_block(2.0, 0, -1.0));  // 2 - y >= 0
  auto res = tsctl::solve_sdp(prog);
  REQUIRE(res.status == SolveStatus::kFeasible);
  CHECK(res.y[0] > 1.0);
  CHECK(res.y[0] < 2.0);
  CHECK(res.min_margin > 0.0);
}

TEST_CASE("linear objective drives the point to the boundary") {
  ConicProgram prog;
  prog.nvars = 1;
  prog.c = Vec::Constant(1, 1.0);  // minimize y
  prog.blocks.push_back(scalar_block(-1.0, 0, 1.0));
  prog.blocks.push_back(scalar_block(2.0, 0, -1.0));
  auto res = tsctl::solve_sdp(prog);
  REQUIRE(res.status == SolveStatus::kFeasible);
  CHECK(res.y[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.objective == doctest::Approx(1.0).epsilon(1e-6));

  prog.c = Vec::Constant(1, -1.0);  // maximize y
  res = tsctl::solve_sdp(prog);
  REQUIRE(res.status == SolveStatus::kFeasible);
  CHECK(res.y[0] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("contradictory scalar bounds are proven infeasible") {
  ConicProgram prog;
  prog.nvars = 1;
  prog.blocks.push_back(scalar_block(-2.0, 0, 1.0));  // y >= 2
  prog.blocks.push_back(scalar_block(1.0, 0, -1.0));  // y <= 1
  auto res = tsctl::solve_sdp(prog);
  REQUIRE(res.status == SolveStatus::kInfeasible);
  CHECK(res.infeas_bound > 0.0);
}

TEST_CASE("two-variable linear program") {
  ConicProgram prog;
  prog.nvars = 2;
  prog.c = Vec::Ones(2);
  prog.blocks.push_back(scalar_block(-1.0, 0, 1.0));  // y0 >= 1
  prog.blocks.push_back(scalar_block(-2.0, 1, 1.0));  // y1 >= 2
  auto res = tsctl::solve_sdp(prog);
  REQUIRE(res.status == SolveStatus::kFeasible);
  CHECK(res.objective == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(res.y[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(res.y[1] == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("semidefinite coupling: off-diagonal bounded by the diagonal") {
  // [[1, x], [x, 1]] >= 0  while maximizing x  ->  x -> 1
  ConicProgram prog;
  prog.nvars = 1;
  prog.c = Vec::Constant(1, -1.0);
  ConicBlock b;
  b.F0 = Mat::Identity(2, 2);
  Mat E(2, 2);
  E << 0, 1, 1, 0;
  b.vars = {0};
  b.coeff = {E};
  prog.blocks.push_back(b);
  auto res = tsctl::solve_sdp(prog);
  REQUIRE(res.status == SolveStatus::kFeasible);
  CHECK(res.y[0] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("log-det objective saturates its bounds") {
  // maximize logdet diag(y0, y1) subject to y0 <= 2, y1 <= 3
  ConicProgram prog;
  prog.nvars = 2;
  prog.blocks.push_back(scalar_block(2.0, 0, -1.0));
  prog.blocks.push_back(scalar_block(3.0, 1, -1.0));
  ConicBlock G;
  G.F0 = Mat::Zero(2, 2);
  Mat E0 = Mat::Zero(2, 2), E1 = Mat::Zero(2, 2);
  E0(0, 0) = 1.0;
  E1(1, 1) = 1.0;
  G.vars = {0, 1};
  G.coeff = {E0, E1};
  prog.det_block = 2;
  prog.blocks.push_back(G);
  auto res = tsctl::solve_sdp(prog);
  REQUIRE(res.status == SolveStatus::kFeasible);
  CHECK(res.y[0] == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(res.y[1] == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(res.objective == doctest::Approx(-std::log(6.0)).epsilon(1e-5));
}

TEST_CASE("unbounded direction is caught by the trust ball") {
  ConicProgram prog;
  prog.nvars = 1;
  prog.c = Vec::Constant(1, -1.0);                    // maximize y
  prog.blocks.push_back(scalar_block(1.0, 0, 1.0));   // y >= -1 only
  auto res = tsctl::solve_sdp(prog);
  REQUIRE(res.status == SolveStatus::kFeasible);
  CHECK(res.y[0] > 1e5);  // ran off to the ball, as documented
}

TEST_CASE("malformed programs report errors instead of crashing") {
  ConicProgram prog;
  auto res = tsctl::solve_sdp(prog);
  CHECK(res.status == SolveStatus::kError);

  prog.nvars = 1;
  prog.c = Vec::Ones(2);
  res = tsctl::solve_sdp(prog);
  CHECK(res.status == SolveStatus::kError);

  prog.c = Vec();
  ConicBlock bad;
  bad.F0 = Mat::Identity(1, 1);
  bad.vars = {0};
  res = tsctl::solve_sdp(prog);  // vars/coeff mismatch
  prog.blocks.push_back(bad);
  res = tsctl::solve_sdp(prog);
  CHECK(res.status == SolveStatus::kError);

  prog.blocks.clear();
  prog.blocks.push_back(scalar_block(1.0, 0, 1.0));
  prog.det_block = 5;
  res = tsctl::solve_sdp(prog);
  CHECK(res.status == SolveStatus::kError);
}

TEST_CASE("feasibility margin matches a hand-checkable depth") {
  // y <= 2 and y >= 0: deepest uniform slack is s = -1 at y = 1.
  ConicProgram prog;
  prog.nvars = 1;
  prog.blocks.push_back(scalar_block(0.0, 0, 1.0));
  prog.blocks.push_back(scalar_block(2.0, 0, -1.0));
  tsctl::SolverOptions opts;
  opts.feas_exit_margin = 0.9;  // force the phase to dig most of the way down
  auto res = tsctl::solve_sdp(prog, opts);
  REQUIRE(res.status == SolveStatus::kFeasible);
  CHECK(res.y[0] == doctest::Approx(1.0).epsilon(0.2));
  CHECK(res.min_margin > 0.9);
}
