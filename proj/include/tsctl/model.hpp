#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsctl/common.hpp"
#include "tsctl/expr.hpp"

namespace tsctl {

// Convex-hull description of where one rule's membership gradient can live:
// every sampled gradient row must be a convex combination of these vertices.
struct GradientSector {
  std::vector<Vec> vertices;  // each of size n
};

// Rule-blended plant  xdot = A(h) x + B(h) u  with convex weights h(x).
//
// Vertex matrices are always present; membership expressions (and their
// gradients) are optional.  Without them the model supports synthesis only —
// anything that needs trajectories (simulation, attraction-domain estimates)
// refuses to run.
struct TsModel {
  std::string name;
  int n = 0;  // states
  int m = 0;  // inputs
  int r = 0;  // rules

  std::vector<Mat> A;  // r matrices, n x n
  std::vector<Mat> B;  // r matrices, n x m

  std::vector<std::string> state_names;  // "x1".."xn"
  std::vector<std::string> param_names;
  Vec param_values;

  std::vector<Expr> memberships;              // size r when present
  std::vector<std::vector<Expr>> gradients;   // r x n when present
  std::vector<GradientSector> sectors;        // size r when present
  Vec state_bounds;                           // |x_k| <= state_bounds[k]; empty if unbounded

  bool has_memberships() const { return !memberships.empty(); }
  bool has_gradients() const { return !gradients.empty(); }
  bool has_sectors() const { return !sectors.empty(); }
  bool has_state_bounds() const { return state_bounds.size() == n && n > 0; }

  // Weight vector h(x); throws ValidationError when the model carries no
  // membership expressions.
  Vec eval_membership(const Vec& x) const;

  // r x n matrix whose rows are the membership gradients at x.  Uses the
  // stored gradient expressions when available and central differences
  // (step 1e-6) otherwise.
  Mat membership_gradient(const Vec& x) const;

  // A(h) = sum_i h_i A_i and likewise for B.
  void blend(const Vec& h, Mat& Ah, Mat& Bh) const;
};

enum class SynthesisMode {
  kProposed,        // rate-dependent feedback, full variable set
  kTraditionalPdc,  // rate-dependent Lyapunov matrix, state feedback only
  kQuadratic,       // single Lyapunov matrix, state feedback only
};

std::string to_string(SynthesisMode mode);
SynthesisMode parse_mode(const std::string& text);

// Tuning knobs shared by the global and region-constrained synthesis paths.
// Vectors are sized r after parsing (scalars in the input broadcast).
struct SynthesisConfig {
  double alpha = 0.05;     // slack-variable coupling weight
  double epsilon = 1e-7;   // strict-inequality shift (scaled by block norms)
  Vec phi_lower, phi_upper;  // per-rule membership-rate bounds (global path)
  Vec phi;                   // per-rule rate magnitude cap (regional path)
  Vec mu;                    // per-rule well-posedness weight in (0,1]
  SynthesisMode mode = SynthesisMode::kProposed;
};

// Reads the "synthesis" section of a model file.  `r` fixes the broadcast
// length for scalar entries.
SynthesisConfig parse_config(const nlohmann::json& j, int r);

// Builds a model from its JSON description (see docs/model_schema.md).
// Matrix entries may be numbers or expression strings over the declared
// parameters; memberships and gradients are expressions over states and
// parameters.
TsModel parse_model(const nlohmann::json& j);

struct ValidationReport {
  int samples = 0;
  double max_partition_defect = 0.0;   // |sum h - 1|
  double min_membership = 0.0;         // most negative h_i seen
  double max_gradient_defect = 0.0;    // expression vs central difference
  double max_gradient_sum = 0.0;       // |sum of gradient rows| per coordinate
  double max_hull_residual = 0.0;      // sampled gradient vs sector hull
  std::vector<std::string> warnings;
  bool ok = false;
};

// Samples the state box with a low-discrepancy sequence and checks that the
// memberships form a partition of unity, that declared gradients match finite
// differences, that gradient rows sum to zero, and that each gradient row
// stays inside its declared sector hull.  Throws ValidationError on hard
// failures; soft issues are returned as warnings.
ValidationReport validate_model(const TsModel& model, int samples = 1000);

}  // namespace tsctl
