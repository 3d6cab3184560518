#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsctl/common.hpp"
#include "tsctl/model.hpp"
#include "tsctl/synth_local.hpp"

namespace tsctl {

// One closed-loop evaluation at a state: memberships, their rates (from the
// implicit relation), state derivative and control input.
struct RateResolution {
  Vec h;
  Vec hdot;
  Vec xdot;
  Vec u;
  double cond = 1.0;  // condition estimate of (I - W)
};

// Resolves the membership-rate coupling at x: solves (I - W) hdot = g with
// W_{uw} = grad h_u . B(h) L_w x and g_u = grad h_u . (A(h) + B(h) K(h)) x,
// then forms xdot and u. The result is re-checked against hdot = grad h xdot
// to 1e-9. Throws IllPosedError when cond(I - W) exceeds 1e10. Requires a
// model with memberships and a certificate with K and L.
RateResolution resolve_hdot(const TsModel& model, const GlobalCertificate& cert, const Vec& x);

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> x, h, hdot, u;
  std::vector<double> V;
  bool left_region = false;   // stopped after exiting the state box
  bool ill_conditioned = false;  // (I - W) condition exceeded 1e8 at some sample
  double stop_time = 0.0;

  std::size_t size() const { return t.size(); }
};

// Fixed-step classical 4th-order integration of the closed loop, resolving
// the rate coupling at every stage. Stops early (with the flag set) once the
// state leaves the box; a numerically singular rate relation is rethrown
// with the time stamp attached.
Trajectory integrate(const TsModel& model, const GlobalCertificate& cert, const Vec& x0,
                     double t_end, double dt = 1e-3);

// V(x) = x' P(h(x)) x.
double lyapunov_value(const TsModel& model, const GlobalCertificate& cert, const Vec& x);

struct DoaEstimate {
  int resolution = 0;  // cells per axis
  Vec x_bar;           // box half-widths
  std::vector<std::uint8_t> mask;  // odometer order over cell centers, 1 = V <= 1
  double area = 0.0;               // cell count x cell volume
  // level-1 contour polylines of V over the cell-center lattice (n = 2 only)
  std::vector<std::vector<Vec>> boundary;
};

// Grids the state box at `resolution` cells per axis, marks cells whose
// center satisfies V <= 1, accumulates the volume, and (for n = 2) traces
// the level-1 boundary with marching squares on the center lattice.
DoaEstimate estimate_doa(const TsModel& model, const GlobalCertificate& cert, int resolution);

// Points spaced evenly in arc length along the longest traced boundary loop,
// each polished by a radial bisection so that V(x) = 1 to high accuracy.
std::vector<Vec> boundary_starts(const TsModel& model, const GlobalCertificate& cert,
                                 const DoaEstimate& doa, int count);

struct BoundsReport {
  int samples_inside = 0;      // samples with V <= 1
  double worst_rate_margin = 0.0;       // min of phi_u - |hdot_u| inside (want > -1e-6)
  double worst_wellposed_margin = 0.0;  // min of |1 - grad h_u B L_u x| - mu_u inside
  std::vector<std::string> violations;
  bool ok = false;
};

// Checks the region certificate's runtime guarantees along a trajectory: at
// every stored sample with V <= 1, each |hdot_u| stays within phi_u and the
// rate relation stays at least mu_u away from singularity. Violations are
// reported, not thrown.
BoundsReport monitor_bounds(const TsModel& model, const LocalCertificate& cert,
                            const Trajectory& traj);

}  // namespace tsctl
