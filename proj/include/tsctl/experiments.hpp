#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "tsctl/sim.hpp"
#include "tsctl/synth_local.hpp"

namespace tsctl {

// The two-rule parametric benchmark plant: rule matrices fixed except for
// A2(0,0) = -a and B2(0,0) = -b.  Same matrices as data/parametric_ab.json.
TsModel parametric_model(double a, double b);

// Feasibility sweep over a parameter rectangle, one synthesis per grid point
// and mode.
struct SweepSpec {
  std::vector<double> a_values;  // non-empty, strictly increasing
  std::vector<double> b_values;
  std::vector<SynthesisMode> modes;
  std::function<TsModel(double, double)> make_model;  // template instantiation
  SynthesisConfig config;  // mode field is overridden per cell
  LmiSolveOptions solve_options{};
  int verify_samples = 200;
  std::uint64_t seed = 0;  // offsets the verification sampling
  int workers = 0;         // 0 = one per hardware thread
};

// The benchmark sweep: a in [0,10] by 0.5, b in [1,2] by 0.1, all three
// modes, coupling weight 0.04, rate bounds +-1.
SweepSpec default_sweep_spec();

struct SweepCell {
  double a = 0.0, b = 0.0;
  SynthesisMode mode = SynthesisMode::kProposed;
  bool feasible = false;       // solver success AND independent re-verification
  double solve_seconds = 0.0;
  // largest stability-block eigenvalue seen by the re-verification; negative
  // whenever `feasible` is set
  double verify_eigenvalue = std::numeric_limits<double>::quiet_NaN();
  std::string error;  // infeasibility/exception note, empty when feasible
};

struct SweepResult {
  std::vector<double> a_values, b_values;
  std::vector<SynthesisMode> modes;
  std::vector<SweepCell> cells;  // a-major, then b, then mode

  const SweepCell& at(std::size_t ia, std::size_t ib, std::size_t im) const;
  std::size_t feasible_count(SynthesisMode mode) const;
  // Indices into b_values that are feasible under `mode` at row a_values[ia].
  std::vector<std::size_t> feasible_b_set(SynthesisMode mode, std::size_t ia) const;
};

// Runs every grid cell through build + solve + gain recovery + independent
// verification.  Per-cell failures (infeasibility, solver exceptions) are
// recorded in the cell and never abort the sweep; cells are processed by a
// bounded worker pool and merged by index, so the result layout is
// deterministic.
SweepResult run_sweep(const SweepSpec& spec);

// Region-estimate comparison between a rate-feedback tuning and a
// no-rate-feedback baseline on the same plant.
struct DoaComparisonSpec {
  SynthesisConfig proposed;
  SynthesisConfig baseline;
  int resolution = 201;        // attraction-domain grid per axis
  int monitor_starts = 4;      // trajectories launched from the traced boundary
  double t_end = 10.0;
  double dt = 1e-3;
  LmiSolveOptions solve_options{};
};

// The documented baseline tuning for the comparison: no rate feedback,
// coupling weight 0.016, rate caps 12, well-posedness weights 1.
SynthesisConfig comparison_baseline(const SynthesisConfig& proposed);

struct DoaComparison {
  LocalOutcome proposed;
  LocalOutcome baseline;
  DoaEstimate doa_proposed;  // empty when that branch failed
  DoaEstimate doa_baseline;
  double ratio = 0.0;  // proposed area / baseline area
  bool ok = false;     // both branches feasible, verified, and bound-monitored
  std::vector<std::string> notes;
};

// Synthesizes both branches, grids both attraction-domain estimates, and
// replays boundary-start trajectories through the bound monitor.  Branch
// failures are reported in `notes` and clear `ok` instead of throwing.
DoaComparison run_doa_comparison(const TsModel& model, const DoaComparisonSpec& spec);

}  // namespace tsctl
