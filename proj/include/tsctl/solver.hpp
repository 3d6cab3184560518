#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tsctl/common.hpp"

namespace tsctl {

// One affine matrix inequality  F(y) = F0 + sum_i y[vars[i]] * coeff[i]  >= 0.
struct ConicBlock {
  Mat F0;
  std::vector<int> vars;
  std::vector<Mat> coeff;

  int dim() const { return static_cast<int>(F0.rows()); }
  Mat eval(const Vec& y) const;
};

// minimize  c'y - det_weight * logdet( blocks[det_block](y) )
// subject to  blocks[j](y) >= 0 for all j,  |y| <= ball_radius.
//
// The trust ball bounds the homogeneous directions every feasibility-style
// synthesis program has; reported infeasibility is relative to it.
struct ConicProgram {
  int nvars = 0;
  Vec c;  // empty or zero means pure feasibility
  std::vector<ConicBlock> blocks;
  std::optional<int> det_block;
  double det_weight = 1.0;
  double ball_radius = 1e6;

  bool has_objective() const;
};

enum class SolveStatus { kFeasible, kInfeasible, kInaccurate, kError };

std::string to_string(SolveStatus status);

struct SolveResult {
  SolveStatus status = SolveStatus::kError;
  Vec y;
  double objective = 0.0;      // c'y - det_weight*logdet(G) at y
  double min_margin = 0.0;     // smallest block eigenvalue at y
  double infeas_bound = 0.0;   // proven lower bound on the feasibility gap
  int newton_iters = 0;
  std::string message;
};

struct SolverOptions {
  double gap_tol = 1e-9;          // barrier duality-gap target
  double feas_exit_margin = 1e-6; // stop the feasibility phase at this depth
  double t_init = 1.0;
  double t_factor = 8.0;
  int max_newton_per_stage = 200;
  int max_stages = 60;
  bool verbose = false;
};

// Dense log-barrier interior-point method. A feasibility phase drives the
// uniform slack  min s : F_j(y) + s I >= 0  below zero (or proves it cannot
// go there inside the ball); an optional second phase follows the central
// path of the objective from the interior point found.
SolveResult solve_sdp(const ConicProgram& prog, const SolverOptions& opts = {});

}  // namespace tsctl
