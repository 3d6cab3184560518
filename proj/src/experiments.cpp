#include "tsctl/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

namespace tsctl {

TsModel parametric_model(double a, double b) {
  TsModel mdl;
  mdl.name = "parametric_ab";
  mdl.n = 2;
  mdl.m = 1;
  mdl.r = 2;
  Mat A1(2, 2), A2(2, 2), B1(2, 1), B2(2, 1);
  A1 << 3.6, -1.6, 6.2, -4.3;
  A2 << -a, -1.6, 6.2, -4.3;
  B1 << -0.45, -3.0;
  B2 << -b, -3.0;
  mdl.A = {A1, A2};
  mdl.B = {B1, B2};
  mdl.state_names = {"x1", "x2"};
  return mdl;
}

SweepSpec default_sweep_spec() {
  SweepSpec spec;
  for (int i = 0; i <= 20; ++i) spec.a_values.push_back(0.5 * i);
  for (int j = 0; j <= 10; ++j) spec.b_values.push_back(1.0 + 0.1 * j);
  spec.modes = {SynthesisMode::kProposed, SynthesisMode::kTraditionalPdc,
                SynthesisMode::kQuadratic};
  spec.make_model = parametric_model;
  spec.config.alpha = 0.04;
  spec.config.phi_lower = Vec::Constant(2, -1.0);
  spec.config.phi_upper = Vec::Constant(2, 1.0);
  return spec;
}

const SweepCell& SweepResult::at(std::size_t ia, std::size_t ib, std::size_t im) const {
  return cells.at((ia * b_values.size() + ib) * modes.size() + im);
}

std::size_t SweepResult::feasible_count(SynthesisMode mode) const {
  std::size_t count = 0;
  for (const SweepCell& cell : cells)
    if (cell.mode == mode && cell.feasible) ++count;
  return count;
}

std::vector<std::size_t> SweepResult::feasible_b_set(SynthesisMode mode,
                                                     std::size_t ia) const {
  std::size_t im = modes.size();
  for (std::size_t m = 0; m < modes.size(); ++m)
    if (modes[m] == mode) im = m;
  if (im == modes.size()) throw ValidationError("mode not part of this sweep");
  std::vector<std::size_t> out;
  for (std::size_t ib = 0; ib < b_values.size(); ++ib)
    if (at(ia, ib, im).feasible) out.push_back(ib);
  return out;
}

namespace {

void check_grid(const std::vector<double>& grid, const char* label) {
  if (grid.empty()) throw ValidationError(std::string(label) + " grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw ValidationError(std::string(label) + " grid must be strictly increasing");
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec) {
  check_grid(spec.a_values, "a");
  check_grid(spec.b_values, "b");
  if (spec.modes.empty()) throw ValidationError("no synthesis modes selected");
  if (!spec.make_model) throw ValidationError("no model template provided");

  SweepResult result;
  result.a_values = spec.a_values;
  result.b_values = spec.b_values;
  result.modes = spec.modes;
  const std::size_t na = spec.a_values.size(), nb = spec.b_values.size(),
                    nm = spec.modes.size();
  const std::size_t total = na * nb * nm;
  result.cells.resize(total);

  auto run_cell = [&](std::size_t c) {
    SweepCell& cell = result.cells[c];
    const std::size_t im = c % nm, ib = (c / nm) % nb, ia = c / (nm * nb);
    cell.a = spec.a_values[ia];
    cell.b = spec.b_values[ib];
    cell.mode = spec.modes[im];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      TsModel mdl = spec.make_model(cell.a, cell.b);
      SynthesisConfig cfg = spec.config;
      cfg.mode = cell.mode;
      SynthesisOutcome out = synthesize_global(mdl, cfg, spec.solve_options);
      if (out.certificate) {
        CertificateCheck chk =
            verify_certificate(mdl, *out.certificate, spec.verify_samples, spec.seed);
        cell.verify_eigenvalue = chk.worst_stability;
        cell.feasible = chk.ok;
        if (!chk.ok)
          cell.error = chk.failures.empty() ? "re-verification failed" : chk.failures.front();
      } else {
        cell.error = out.message.empty() ? to_string(out.status) : out.message;
      }
    } catch (const std::exception& e) {
      cell.feasible = false;
      cell.error = e.what();
    }
    cell.solve_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
  };

  unsigned hw = std::thread::hardware_concurrency();
  std::size_t workers = spec.workers > 0 ? static_cast<std::size_t>(spec.workers)
                                         : std::max(1u, hw);
  workers = std::min(workers, total);
  if (workers <= 1) {
    for (std::size_t c = 0; c < total; ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t c; (c = next.fetch_add(1)) < total;) run_cell(c);
      });
    for (std::thread& t : pool) t.join();
  }
  return result;
}

SynthesisConfig comparison_baseline(const SynthesisConfig& proposed) {
  SynthesisConfig base = proposed;
  base.mode = SynthesisMode::kTraditionalPdc;
  base.alpha = 0.016;
  const int r = static_cast<int>(proposed.phi.size());
  base.phi = Vec::Constant(r > 0 ? r : 2, 12.0);
  base.mu = Vec::Ones(r > 0 ? r : 2);
  return base;
}

namespace {

// One branch of the comparison: synthesize, grid the estimate, then make
// sure boundary-start replays respect the certified rate and well-posedness
// bounds.
bool run_branch(const TsModel& model, const SynthesisConfig& cfg,
                const DoaComparisonSpec& spec, const char* label, LocalOutcome& outcome,
                DoaEstimate& doa, std::vector<std::string>& notes) {
  outcome = synthesize_local(model, cfg, spec.solve_options);
  if (!outcome.certificate) {
    notes.push_back(std::string(label) + ": synthesis failed (" +
                    (outcome.message.empty() ? to_string(outcome.status) : outcome.message) +
                    ")");
    return false;
  }
  const LocalCertificate& cert = *outcome.certificate;
  CertificateCheck chk = verify_certificate(model, cert);
  if (!chk.ok) {
    notes.push_back(std::string(label) + ": certificate failed re-verification (" +
                    chk.failures.front() + ")");
    return false;
  }
  doa = estimate_doa(model, cert, spec.resolution);
  if (spec.monitor_starts > 0) {
    std::vector<Vec> starts = boundary_starts(model, cert, doa, spec.monitor_starts);
    for (const Vec& x0 : starts) {
      Trajectory traj = integrate(model, cert, x0, spec.t_end, spec.dt);
      BoundsReport report = monitor_bounds(model, cert, traj);
      if (!report.ok) {
        notes.push_back(std::string(label) + ": " + report.violations.front());
        return false;
      }
      if (traj.left_region) {
        std::ostringstream msg;
        msg << label << ": boundary replay left the operating box at t=" << traj.stop_time;
        notes.push_back(msg.str());
        return false;
      }
    }
  }
  return true;
}

}  // namespace

DoaComparison run_doa_comparison(const TsModel& model, const DoaComparisonSpec& spec) {
  DoaComparison cmp;
  const bool ok_p = run_branch(model, spec.proposed, spec, "with rate feedback",
                               cmp.proposed, cmp.doa_proposed, cmp.notes);
  const bool ok_b = run_branch(model, spec.baseline, spec, "baseline", cmp.baseline,
                               cmp.doa_baseline, cmp.notes);
  if (ok_p && ok_b && cmp.doa_baseline.area > 0.0)
    cmp.ratio = cmp.doa_proposed.area / cmp.doa_baseline.area;
  cmp.ok = ok_p && ok_b;
  return cmp;
}

}  // namespace tsctl
