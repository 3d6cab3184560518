#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsctl/common.hpp"
#include "tsctl/dpoly.hpp"
#include "tsctl/lmi.hpp"
#include "tsctl/model.hpp"

namespace tsctl {

// Decision-variable handles of the stability program. The slot accessor
// hides the quadratic mode's single shared Lyapunov variable behind the
// per-rule indexing the condition formulas use; U stays empty when the
// controller carries no rate feedback.
struct GlobalVars {
  MatrixVar R;
  std::vector<MatrixVar> T;
  std::vector<MatrixVar> S;
  std::vector<MatrixVar> U;

  const MatrixVar& t_slot(int i) const { return T.size() == 1 ? T[0] : T[i]; }
  bool has_rate_feedback() const { return !U.empty(); }
};

struct GlobalProgram {
  LmiProblem problem;
  GlobalVars vars;
  DerivativePolytope rates;
  int condition_count = 0;  // matrix inequalities before compilation
};

// One vertex condition: the 2n x 2n block for rule pair (i, j) at rate
// vertex v. Held negative definite on its own when i == j and summed with
// its (j, i) mirror otherwise.
//
//   (1,1)  sum_k v_k (T_k + B_i U_k + U_k' B_i') + A_i R + B_i S_j + (.)'
//   (2,1)  T_i - R' + alpha (A_i R + B_i S_j + B_i sum_k v_k U_k)
//   (2,2)  -alpha (R + R')
AffineMatrixExpr assemble_stability_block(const TsModel& model, const GlobalVars& vars,
                                          double alpha, int i, int j, const Vec& vertex);

// Admissible rate set for the configured mode: the vertex enumeration of the
// configured bounds, except in quadratic mode where the shared Lyapunov
// variable makes every rate term vanish and the single zero vector suffices.
DerivativePolytope make_rate_set(const TsModel& model, const SynthesisConfig& cfg);

// Declares R, the Lyapunov variables (one, shared, in quadratic mode) and
// the gain variables (U only with rate feedback) on `problem`.
GlobalVars declare_global_vars(LmiProblem& problem, const TsModel& model, SynthesisMode mode);

// Adds the vertex stability conditions: every Lyapunov variable positive
// definite, every diagonal block negative definite, every off-diagonal pair
// sum negative definite, across all rate vertices. Returns the number of
// conditions added.
int add_stability_conditions(LmiProblem& problem, const TsModel& model, const GlobalVars& vars,
                             double alpha, const DerivativePolytope& rates);

// Assembles the full program: the vertex stability conditions plus a small
// trace objective on the Lyapunov variables so the solver returns a
// well-conditioned point instead of an arbitrary interior one.
GlobalProgram build_global_program(const TsModel& model, const SynthesisConfig& cfg);

// Controller and Lyapunov data recovered from a solved program.
struct GlobalCertificate {
  SynthesisMode mode = SynthesisMode::kProposed;
  double alpha = 0.0;
  DerivativePolytope rates;

  Mat R;
  std::vector<Mat> T, S, U;  // decision values; U empty without rate feedback
  std::vector<Mat> K, L;     // gains; L holds exact zeros without rate feedback
  std::vector<Mat> P;        // R^-T T_i R^-1, symmetrized
  double cond_R = 0.0;
};

// K_i = S_i R^-1, L_k = U_k R^-1, P_i = R^-T T_i R^-1. Throws IllPosedError
// when cond(R) exceeds 1e12 and ValidationError when a recovered P_i is not
// positive definite.
GlobalCertificate recover_gains(const TsModel& model, const SynthesisConfig& cfg,
                                const GlobalVars& vars, const DerivativePolytope& rates,
                                const LmiSolution& sol);

struct SynthesisOutcome {
  SolveStatus status = SolveStatus::kError;
  std::string message;
  std::vector<std::pair<std::string, double>> block_margins;
  int condition_count = 0;
  std::optional<GlobalCertificate> certificate;
};

// build + solve + recover in one call; the certificate is present only for a
// clean feasible solve.
SynthesisOutcome synthesize_global(const TsModel& model, const SynthesisConfig& cfg,
                                   const LmiSolveOptions& opts = {});

// Dense value of the blended stability block at weights h and rate vector v,
// assembled from the recovered decision values. At h = e_i and a rate
// vertex it reproduces the corresponding assembled diagonal condition.
Mat stability_matrix(const TsModel& model, const GlobalCertificate& cert, const Vec& h,
                     const Vec& v);

struct CertificateCheck {
  bool ok = false;
  int samples = 0;
  double worst_stability = 0.0;  // largest eigenvalue seen across samples (want < 0)
  double worst_lyapunov = 0.0;   // smallest blended-T eigenvalue seen (want > 0)
  std::vector<std::string> failures;
};

// Re-checks a certificate independently of the solver: samples the weight
// simplex deterministically (basis vectors, barycenter, low-discrepancy
// fill) and at every rate vertex requires the blended block negative
// definite and the blended Lyapunov matrix positive definite.  `seed`
// offsets the start of the low-discrepancy fill; the same seed always
// yields the same sample set.
CertificateCheck verify_certificate(const TsModel& model, const GlobalCertificate& cert,
                                    int samples = 200, std::uint64_t seed = 0);

// Feasibility sweep over candidate coupling weights; one outcome per alpha,
// in the given order.
std::vector<std::pair<double, SynthesisOutcome>> alpha_grid_search(
    const TsModel& model, const SynthesisConfig& cfg, const std::vector<double>& alphas,
    const LmiSolveOptions& opts = {});

}  // namespace tsctl
