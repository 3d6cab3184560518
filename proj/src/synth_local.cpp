#include "tsctl/synth_local.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <sstream>

namespace tsctl {

namespace {

void check_local_inputs(const TsModel& model, const SynthesisConfig& cfg) {
  if (!model.has_sectors())
    throw ValidationError("region-constrained synthesis needs gradient sector data");
  if (static_cast<int>(model.sectors.size()) != model.r)
    throw DimensionError("gradient sector count does not match the rule count");
  for (const GradientSector& sec : model.sectors) {
    if (sec.vertices.empty()) throw ValidationError("a gradient sector has no vertices");
    for (const Vec& z : sec.vertices)
      if (z.size() != model.n) throw DimensionError("gradient sector vertex of wrong length");
  }
  if (!model.has_state_bounds())
    throw ValidationError("region-constrained synthesis needs state bounds");
  if (cfg.mu.size() != model.r)
    throw ValidationError("per-rule well-posedness margins mu are required");
  for (int i = 0; i < cfg.mu.size(); ++i)
    if (!(cfg.mu[i] > 0.0 && cfg.mu[i] <= 1.0))
      throw ValidationError("well-posedness margins must lie in (0, 1]");
  if (cfg.phi.size() != model.r)
    throw ValidationError("per-rule rate magnitude caps phi are required");
  for (int i = 0; i < cfg.phi.size(); ++i)
    if (!(cfg.phi[i] > 0.0)) throw ValidationError("rate magnitude caps must be positive");
}

// [[-T_i, row'], [row, corner]] with row a 1 x n affine expression.
AffineMatrixExpr bordered_block(const GlobalVars& vars, int i, const AffineMatrixExpr& row,
                                double corner) {
  const int n = vars.R.rows;
  AffineMatrixExpr block(n + 1, n + 1);
  AffineMatrixExpr negT(n, n);
  negT.add_term(-Mat::Identity(n, n), vars.t_slot(i), Mat::Identity(n, n));
  block.add_placed(negT, 0, 0);
  block.add_placed(row, n, 0);
  block.add_placed_transpose(row, 0, n);
  Mat C = Mat::Zero(n + 1, n + 1);
  C(n, n) = corner;
  block.add_constant(C);
  return block;
}

}  // namespace

AffineMatrixExpr assemble_region_block(const GlobalVars& vars, int i, int k, const Vec& x_bar) {
  const int n = vars.R.rows;
  if (i < 0 || i >= static_cast<int>(vars.S.size())) throw DimensionError("rule index out of range");
  if (k < 0 || k >= n) throw DimensionError("coordinate index out of range");
  if (x_bar.size() != n) throw DimensionError("state-bound vector of wrong length");
  if (!(x_bar[k] > 0.0)) throw ValidationError("state bounds must be positive");
  AffineMatrixExpr row(1, n);
  row.add_term(Mat::Identity(n, n).row(k), vars.R, Mat::Identity(n, n));
  return bordered_block(vars, i, row, -x_bar[k] * x_bar[k]);
}

AffineMatrixExpr assemble_rate_block(const TsModel& model, const GlobalVars& vars, int i, int j,
                                     int upsilon, int q, const Vec& vertex, double mu, double phi) {
  const int n = model.n;
  const int r = model.r;
  if (i < 0 || i >= r || j < 0 || j >= r || upsilon < 0 || upsilon >= r)
    throw DimensionError("rule index out of range");
  const GradientSector& sec = model.sectors[static_cast<std::size_t>(upsilon)];
  if (q < 0 || q >= static_cast<int>(sec.vertices.size()))
    throw DimensionError("sector vertex index out of range");
  if (vertex.size() != r) throw DimensionError("rate vertex length does not match the rule count");
  const Mat zeta = sec.vertices[static_cast<std::size_t>(q)].transpose();  // 1 x n
  const Mat& Ai = model.A[static_cast<std::size_t>(i)];
  const Mat& Bi = model.B[static_cast<std::size_t>(i)];
  const Mat In = Mat::Identity(n, n);

  AffineMatrixExpr row(1, n);
  row.add_term(zeta * Ai, vars.R, In);
  row.add_term(zeta * Bi, vars.S[static_cast<std::size_t>(j)], In);
  if (vars.has_rate_feedback())
    for (int w = 0; w < r; ++w) {
      if (w == upsilon || vertex[w] == 0.0) continue;
      row.add_term(vertex[w] * zeta * Bi, vars.U[static_cast<std::size_t>(w)], In);
    }
  return bordered_block(vars, i, row, -mu * mu * phi * phi);
}

AffineMatrixExpr assemble_wellposed_block(const TsModel& model, const GlobalVars& vars, int i,
                                          int upsilon, int q, double mu) {
  const int n = model.n;
  if (i < 0 || i >= model.r || upsilon < 0 || upsilon >= model.r)
    throw DimensionError("rule index out of range");
  const GradientSector& sec = model.sectors[static_cast<std::size_t>(upsilon)];
  if (q < 0 || q >= static_cast<int>(sec.vertices.size()))
    throw DimensionError("sector vertex index out of range");
  const Mat zeta = sec.vertices[static_cast<std::size_t>(q)].transpose();
  AffineMatrixExpr row(1, n);
  if (vars.has_rate_feedback())
    row.add_term(zeta * model.B[static_cast<std::size_t>(i)],
                 vars.U[static_cast<std::size_t>(upsilon)], Mat::Identity(n, n));
  return bordered_block(vars, i, row, -(1.0 - mu) * (1.0 - mu));
}

LocalProgram build_local_program(const TsModel& model, const SynthesisConfig& cfg) {
  if (!(cfg.alpha > 0.0)) throw ValidationError("coupling weight alpha must be positive");
  check_local_inputs(model, cfg);
  const int n = model.n;
  const int r = model.r;

  LocalProgram prog;
  // the embedded stability conditions use the same symmetric caps +-phi that
  // the rate-bound blocks certify
  SynthesisConfig rate_cfg = cfg;
  rate_cfg.phi_lower = -cfg.phi;
  rate_cfg.phi_upper = cfg.phi;
  prog.rates = make_rate_set(model, rate_cfg);
  prog.vars.base = declare_global_vars(prog.problem, model, cfg.mode);
  prog.vars.H = prog.problem.add_symmetric("H", n);
  const GlobalVars& vars = prog.vars.base;

  int count = add_stability_conditions(prog.problem, model, vars, cfg.alpha, prog.rates);

  // containment of the certified sublevel set in the state box; depends on
  // the rule only through its Lyapunov variable, so a shared variable needs
  // one copy
  const int lyap_slots = static_cast<int>(vars.T.size());
  for (int i = 0; i < lyap_slots; ++i)
    for (int k = 0; k < n; ++k) {
      std::ostringstream name;
      name << "box(" << i + 1 << "," << k + 1 << ")<=0";
      prog.problem.require_nsd(assemble_region_block(vars, i, k, model.state_bounds), name.str(),
                               /*strict=*/false);
      ++count;
    }

  // rate caps inside the sublevel set
  for (int u = 0; u < r; ++u) {
    const int s = static_cast<int>(model.sectors[static_cast<std::size_t>(u)].vertices.size());
    for (int q = 0; q < s; ++q)
      for (std::size_t l = 0; l < prog.rates.vertices.size(); ++l) {
        const Vec& v = prog.rates.vertices[l];
        const std::string tag = ";" + std::to_string(u + 1) + "," + std::to_string(q + 1) + ",v" +
                                std::to_string(l + 1) + ")<=0";
        for (int i = 0; i < r; ++i) {
          std::ostringstream name;
          name << "Q(" << i + 1 << "," << i + 1 << tag;
          prog.problem.require_nsd(
              assemble_rate_block(model, vars, i, i, u, q, v, cfg.mu[u], cfg.phi[u]), name.str(),
              /*strict=*/false);
          ++count;
        }
        for (int i = 0; i < r; ++i)
          for (int j = i + 1; j < r; ++j) {
            AffineMatrixExpr sum(n + 1, n + 1);
            sum.add_placed(assemble_rate_block(model, vars, i, j, u, q, v, cfg.mu[u], cfg.phi[u]),
                           0, 0);
            sum.add_placed(assemble_rate_block(model, vars, j, i, u, q, v, cfg.mu[u], cfg.phi[u]),
                           0, 0);
            std::ostringstream name;
            name << "Q(" << i + 1 << "," << j + 1 << tag << "+Q(" << j + 1 << "," << i + 1 << tag;
            prog.problem.require_nsd(sum, name.str(), /*strict=*/false);
            ++count;
          }
      }
  }

  // well-posedness of the implicit rate relation
  for (int i = 0; i < r; ++i)
    for (int u = 0; u < r; ++u) {
      const int s = static_cast<int>(model.sectors[static_cast<std::size_t>(u)].vertices.size());
      for (int q = 0; q < s; ++q) {
        std::ostringstream name;
        name << "X(" << i + 1 << ";" << u + 1 << "," << q + 1 << ")<=0";
        prog.problem.require_nsd(assemble_wellposed_block(model, vars, i, u, q, cfg.mu[u]),
                                 name.str(), /*strict=*/false);
        ++count;
      }
    }

  // enlargement ellipsoid below the Lyapunov function
  for (int i = 0; i < lyap_slots; ++i) {
    AffineMatrixExpr e(n, n);
    const Mat In = Mat::Identity(n, n);
    e.add_term(-In, vars.R, In);
    e.add_term(-In, vars.R, In, /*transpose=*/true);
    e.add_term(In, vars.T[static_cast<std::size_t>(i)], In);
    e.add_term(In, prog.vars.H, In);
    std::ostringstream name;
    name << "enl(" << i + 1 << ")<=0";
    prog.problem.require_nsd(e, name.str(), /*strict=*/false);
    ++count;
  }

  prog.problem.maximize_logdet(prog.vars.H, 1.0);
  prog.condition_count = count;
  return prog;
}

LocalCertificate recover_local(const TsModel& model, const SynthesisConfig& cfg,
                               const LocalProgram& prog, const LmiSolution& sol) {
  LocalCertificate cert;
  static_cast<GlobalCertificate&>(cert) =
      recover_gains(model, cfg, prog.vars.base, prog.rates, sol);
  cert.H_enl = sol.value(prog.vars.H);
  cert.H_enl = 0.5 * (cert.H_enl + cert.H_enl.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(cert.H_enl, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw ValidationError("enlargement matrix is not positive definite");
  cert.mu = cfg.mu;
  cert.x_bar = model.state_bounds;
  cert.phi = cfg.phi;

  const double level = enlargement_boundary_level(cert);
  if (!(level <= 1.0 + 1e-6)) {
    std::ostringstream msg;
    msg << "enlargement ellipsoid escapes the certified sublevel set (worst level " << level
        << ")";
    throw ValidationError(msg.str());
  }
  return cert;
}

LocalOutcome synthesize_local(const TsModel& model, const SynthesisConfig& cfg,
                              const LmiSolveOptions& opts) {
  LocalProgram prog = build_local_program(model, cfg);
  LmiSolution sol = prog.problem.solve(opts);
  LocalOutcome out;
  out.status = sol.status;
  out.message = sol.message;
  out.block_margins = sol.block_margins;
  out.condition_count = prog.condition_count;
  if (sol.feasible()) {
    out.certificate = recover_local(model, cfg, prog, sol);
    Eigen::SelfAdjointEigenSolver<Mat> es(out.certificate->H_enl, Eigen::EigenvaluesOnly);
    out.logdet_H = es.eigenvalues().array().log().sum();
  }
  return out;
}

double enlargement_boundary_level(const LocalCertificate& cert, int samples) {
  const int n = cert.H_enl.rows();
  Eigen::SelfAdjointEigenSolver<Mat> es(cert.H_enl);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw ValidationError("enlargement matrix is not positive definite");
  const Mat half = es.operatorSqrt();
  double worst = -std::numeric_limits<double>::infinity();
  int produced = 0;
  for (std::uint64_t idx = 1; produced < samples; ++idx) {
    Vec d = 2.0 * halton_point(idx, n) - Vec::Ones(n);
    const double norm = d.norm();
    if (norm < 1e-3) continue;
    d /= norm;
    ++produced;
    const Vec x = half * d;  // on the boundary x' H^-1 x = 1
    for (const Mat& P : cert.P) worst = std::max(worst, x.dot(P * x));
  }
  return worst;
}

}  // namespace tsctl
