#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsctl/common.hpp"
#include "tsctl/lmi.hpp"
#include "tsctl/model.hpp"
#include "tsctl/synth_global.hpp"

namespace tsctl {

// Variables of the region-constrained program: the stability set plus the
// enlargement matrix whose 1-sublevel ellipsoid is pushed into the certified
// region.
struct LocalVars {
  GlobalVars base;
  MatrixVar H;
};

struct LocalProgram {
  LmiProblem problem;
  LocalVars vars;
  DerivativePolytope rates;
  int condition_count = 0;  // stability set + region/rate/well-posedness/enlargement blocks
};

// Containment block for rule i and coordinate k: the 1-sublevel set of the
// Lyapunov function stays inside |x_k| <= x_bar_k.
//   [[-T_i, R' e_k], [e_k' R, -x_bar_k^2]]        (n+1 x n+1, require <= 0)
AffineMatrixExpr assemble_region_block(const GlobalVars& vars, int i, int k, const Vec& x_bar);

// Rate-bound block for rule pair (i, j), gradient-sector vertex q of rule
// upsilon, at rate vertex v: certifies |hdot_upsilon| <= phi_upsilon inside
// the sublevel set.
//   [[-T_i, *], [z (A_i R + B_i S_j + B_i sum_{w != upsilon} v_w U_w), -mu^2 phi^2]]
AffineMatrixExpr assemble_rate_block(const TsModel& model, const GlobalVars& vars, int i, int j,
                                     int upsilon, int q, const Vec& vertex, double mu, double phi);

// Well-posedness block: keeps the implicit rate relation away from
// singularity, |1 - grad h_upsilon B(h) L_upsilon x| >= mu_upsilon.
//   [[-T_i, *], [z B_i U_upsilon, -(1 - mu)^2]]
AffineMatrixExpr assemble_wellposed_block(const TsModel& model, const GlobalVars& vars, int i,
                                          int upsilon, int q, double mu);

// Full region-constrained program: the vertex stability conditions (strict)
// plus, non-strict as stated, the containment blocks for every rule and
// coordinate, the rate-bound blocks for every rule pair / sector vertex /
// rate vertex, the well-posedness blocks for every rule / sector vertex, and
// the enlargement coupling -R - R' + T_i + H <= 0; the objective maximizes
// logdet(H). Requires gradient sectors, state bounds, and the mu/phi
// entries of the configuration.
LocalProgram build_local_program(const TsModel& model, const SynthesisConfig& cfg);

// Everything the stability certificate carries, plus the region data and the
// enlargement ellipsoid.
struct LocalCertificate : GlobalCertificate {
  Mat H_enl;  // symmetric positive definite; {x : x' H^-1 x <= 1} lies inside the estimate
  Vec mu;     // per-rule well-posedness margins
  Vec x_bar;  // box half-widths of the operating region
  Vec phi;    // per-rule rate magnitude caps
};

// Gain recovery plus extraction of the enlargement matrix. On top of the
// stability-certificate checks this samples the enlargement ellipsoid
// boundary and requires x' P_i x <= 1 + 1e-6 there.
LocalCertificate recover_local(const TsModel& model, const SynthesisConfig& cfg,
                               const LocalProgram& prog, const LmiSolution& sol);

struct LocalOutcome {
  SolveStatus status = SolveStatus::kError;
  std::string message;
  std::vector<std::pair<std::string, double>> block_margins;
  int condition_count = 0;
  double logdet_H = 0.0;  // attained enlargement objective (when feasible)
  std::optional<LocalCertificate> certificate;
};

// build + solve + recover in one call.
LocalOutcome synthesize_local(const TsModel& model, const SynthesisConfig& cfg,
                              const LmiSolveOptions& opts = {});

// Largest value of x' P_i x over a deterministic sample of the boundary
// {x : x' H^-1 x = 1}; at most 1 (up to tolerance) for a valid certificate.
double enlargement_boundary_level(const LocalCertificate& cert, int samples = 256);

}  // namespace tsctl
