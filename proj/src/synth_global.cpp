#include "tsctl/synth_global.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <sstream>

namespace tsctl {

namespace {

std::string idx(const std::string& base, int i) { return base + std::to_string(i + 1); }

void check_model(const TsModel& model) {
  if (model.r <= 0 || model.n <= 0 || model.m <= 0)
    throw ValidationError("synthesis needs a model with states, inputs and rules");
  if (static_cast<int>(model.A.size()) != model.r || static_cast<int>(model.B.size()) != model.r)
    throw DimensionError("vertex matrix count does not match the rule count");
}

}  // namespace

AffineMatrixExpr assemble_stability_block(const TsModel& model, const GlobalVars& vars,
                                          double alpha, int i, int j, const Vec& vertex) {
  check_model(model);
  const int n = model.n;
  const int r = model.r;
  if (i < 0 || i >= r || j < 0 || j >= r) throw DimensionError("rule index out of range");
  if (vertex.size() != r) throw DimensionError("rate vertex length does not match the rule count");
  if (!(alpha > 0.0)) throw ValidationError("coupling weight alpha must be positive");
  const Mat In = Mat::Identity(n, n);
  const Mat& Ai = model.A[static_cast<std::size_t>(i)];
  const Mat& Bi = model.B[static_cast<std::size_t>(i)];

  AffineMatrixExpr m11(n, n);
  for (int k = 0; k < r; ++k) {
    if (vertex[k] == 0.0) continue;
    m11.add_term(vertex[k] * In, vars.t_slot(k), In);
    if (vars.has_rate_feedback()) m11.add_sym_pair(vertex[k] * Bi, vars.U[static_cast<std::size_t>(k)], In);
  }
  m11.add_sym_pair(Ai, vars.R, In);
  m11.add_sym_pair(Bi, vars.S[static_cast<std::size_t>(j)], In);

  AffineMatrixExpr m21(n, n);
  m21.add_term(In, vars.t_slot(i), In);
  m21.add_term(-In, vars.R, In, /*transpose=*/true);
  m21.add_term(alpha * Ai, vars.R, In);
  m21.add_term(alpha * Bi, vars.S[static_cast<std::size_t>(j)], In);
  if (vars.has_rate_feedback())
    for (int k = 0; k < r; ++k)
      if (vertex[k] != 0.0) m21.add_term(alpha * vertex[k] * Bi, vars.U[static_cast<std::size_t>(k)], In);

  AffineMatrixExpr block(2 * n, 2 * n);
  block.add_placed(m11, 0, 0);
  block.add_placed(m21, n, 0);
  block.add_placed_transpose(m21, 0, n);
  AffineMatrixExpr m22(n, n);
  m22.add_term(-alpha * In, vars.R, In);
  m22.add_term(-alpha * In, vars.R, In, /*transpose=*/true);
  block.add_placed(m22, n, n);
  return block;
}

DerivativePolytope make_rate_set(const TsModel& model, const SynthesisConfig& cfg) {
  check_model(model);
  const int r = model.r;
  if (cfg.mode == SynthesisMode::kQuadratic) {
    // One shared Lyapunov matrix makes the rate-dependent terms vanish, so a
    // single zero rate vector covers the whole admissible set.
    DerivativePolytope rates;
    rates.r = r;
    rates.phi_lower = Vec::Zero(r);
    rates.phi_upper = Vec::Zero(r);
    rates.vertices = {Vec::Zero(r)};
    return rates;
  }
  if (cfg.phi_lower.size() != r || cfg.phi_upper.size() != r)
    throw ValidationError("membership-rate bounds are required outside the quadratic mode");
  return enumerate_vertices(cfg.phi_lower, cfg.phi_upper);
}

GlobalVars declare_global_vars(LmiProblem& problem, const TsModel& model, SynthesisMode mode) {
  check_model(model);
  GlobalVars vars;
  vars.R = problem.add_variable("R", model.n, model.n);
  if (mode == SynthesisMode::kQuadratic) {
    vars.T.push_back(problem.add_symmetric("T", model.n));
  } else {
    for (int i = 0; i < model.r; ++i) vars.T.push_back(problem.add_symmetric(idx("T", i), model.n));
  }
  for (int i = 0; i < model.r; ++i)
    vars.S.push_back(problem.add_variable(idx("S", i), model.m, model.n));
  if (mode == SynthesisMode::kProposed)
    for (int k = 0; k < model.r; ++k)
      vars.U.push_back(problem.add_variable(idx("U", k), model.m, model.n));
  return vars;
}

int add_stability_conditions(LmiProblem& problem, const TsModel& model, const GlobalVars& vars,
                             double alpha, const DerivativePolytope& rates) {
  check_model(model);
  const int n = model.n;
  const int r = model.r;
  int count = 0;
  const Mat In = Mat::Identity(n, n);
  for (std::size_t t = 0; t < vars.T.size(); ++t) {
    AffineMatrixExpr e(n, n);
    e.add_term(In, vars.T[t], In);
    const std::string name = vars.T.size() == 1 ? "T>0" : idx("T", static_cast<int>(t)) + ">0";
    problem.require_psd(e, name, /*strict=*/true);
    ++count;
  }
  for (std::size_t l = 0; l < rates.vertices.size(); ++l) {
    const Vec& v = rates.vertices[l];
    const std::string vtag = "v" + std::to_string(l + 1);
    for (int i = 0; i < r; ++i) {
      AffineMatrixExpr mii = assemble_stability_block(model, vars, alpha, i, i, v);
      std::ostringstream name;
      name << "M(" << i + 1 << "," << i + 1 << "," << vtag << ")<0";
      problem.require_nsd(mii, name.str(), /*strict=*/true);
      ++count;
    }
    for (int i = 0; i < r; ++i)
      for (int j = i + 1; j < r; ++j) {
        AffineMatrixExpr sum(2 * n, 2 * n);
        sum.add_placed(assemble_stability_block(model, vars, alpha, i, j, v), 0, 0);
        sum.add_placed(assemble_stability_block(model, vars, alpha, j, i, v), 0, 0);
        std::ostringstream name;
        name << "M(" << i + 1 << "," << j + 1 << "," << vtag << ")+M(" << j + 1 << "," << i + 1
             << "," << vtag << ")<0";
        problem.require_nsd(sum, name.str(), /*strict=*/true);
        ++count;
      }
  }
  return count;
}

GlobalProgram build_global_program(const TsModel& model, const SynthesisConfig& cfg) {
  check_model(model);
  if (!(cfg.alpha > 0.0)) throw ValidationError("coupling weight alpha must be positive");
  GlobalProgram prog;
  prog.rates = make_rate_set(model, cfg);
  prog.vars = declare_global_vars(prog.problem, model, cfg.mode);
  prog.condition_count =
      add_stability_conditions(prog.problem, model, prog.vars, cfg.alpha, prog.rates);
  for (const MatrixVar& t : prog.vars.T) prog.problem.add_trace_objective(t, 1.0);
  return prog;
}

GlobalCertificate recover_gains(const TsModel& model, const SynthesisConfig& cfg,
                                const GlobalVars& vars, const DerivativePolytope& rates,
                                const LmiSolution& sol) {
  check_model(model);
  if (sol.y.size() == 0) throw ValidationError("gain recovery needs a solution point");
  const int n = model.n;
  const int m = model.m;
  const int r = model.r;

  GlobalCertificate cert;
  cert.mode = cfg.mode;
  cert.alpha = cfg.alpha;
  cert.rates = rates;
  cert.R = sol.value(vars.R);

  Eigen::JacobiSVD<Mat> svd(cert.R);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  cert.cond_R = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(cert.cond_R < 1e12)) {
    std::ostringstream msg;
    msg << "slack variable R is numerically singular (condition number " << cert.cond_R << ")";
    throw IllPosedError(msg.str());
  }
  Eigen::FullPivLU<Mat> lu(cert.R);
  const Mat Rinv = lu.inverse();

  for (int i = 0; i < r; ++i) {
    Mat Ti = sol.value(vars.t_slot(i));
    Mat Si = sol.value(vars.S[static_cast<std::size_t>(i)]);
    cert.T.push_back(Ti);
    cert.S.push_back(Si);
    cert.K.push_back(Si * Rinv);
    Mat Pi = Rinv.transpose() * Ti * Rinv;
    Pi = 0.5 * (Pi + Pi.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(Pi, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0))
      throw ValidationError("recovered Lyapunov matrix " + idx("P", i) + " is not positive definite");
    cert.P.push_back(Pi);
  }
  if (vars.has_rate_feedback()) {
    for (int k = 0; k < r; ++k) {
      Mat Uk = sol.value(vars.U[static_cast<std::size_t>(k)]);
      cert.U.push_back(Uk);
      cert.L.push_back(Uk * Rinv);
    }
  } else {
    for (int k = 0; k < r; ++k) cert.L.push_back(Mat::Zero(m, n));
  }
  return cert;
}

SynthesisOutcome synthesize_global(const TsModel& model, const SynthesisConfig& cfg,
                                   const LmiSolveOptions& opts) {
  GlobalProgram prog = build_global_program(model, cfg);
  LmiSolution sol = prog.problem.solve(opts);
  SynthesisOutcome out;
  out.status = sol.status;
  out.message = sol.message;
  out.block_margins = sol.block_margins;
  out.condition_count = prog.condition_count;
  if (sol.feasible()) out.certificate = recover_gains(model, cfg, prog.vars, prog.rates, sol);
  return out;
}

Mat stability_matrix(const TsModel& model, const GlobalCertificate& cert, const Vec& h,
                     const Vec& v) {
  check_model(model);
  const int n = model.n;
  const int r = model.r;
  if (h.size() != r || v.size() != r) throw DimensionError("weight/rate vector length mismatch");
  Mat Ah, Bh;
  model.blend(h, Ah, Bh);
  Mat Th = Mat::Zero(n, n), Tv = Mat::Zero(n, n);
  Mat Sh = Mat::Zero(model.m, n), Uv = Mat::Zero(model.m, n);
  for (int k = 0; k < r; ++k) {
    Th += h[k] * cert.T[static_cast<std::size_t>(k)];
    Tv += v[k] * cert.T[static_cast<std::size_t>(k)];
    Sh += h[k] * cert.S[static_cast<std::size_t>(k)];
    if (!cert.U.empty()) Uv += v[k] * cert.U[static_cast<std::size_t>(k)];
  }
  const Mat loop = Ah * cert.R + Bh * Sh;
  const Mat m11 = Tv + Bh * Uv + (Bh * Uv).transpose() + loop + loop.transpose();
  const Mat m21 = Th - cert.R.transpose() + cert.alpha * (loop + Bh * Uv);
  const Mat m22 = -cert.alpha * (cert.R + cert.R.transpose());
  Mat M(2 * n, 2 * n);
  M.topLeftCorner(n, n) = m11;
  M.bottomLeftCorner(n, n) = m21;
  M.topRightCorner(n, n) = m21.transpose();
  M.bottomRightCorner(n, n) = m22;
  return M;
}

CertificateCheck verify_certificate(const TsModel& model, const GlobalCertificate& cert,
                                    int samples, std::uint64_t seed) {
  check_model(model);
  const int r = model.r;
  CertificateCheck check;
  check.worst_stability = -std::numeric_limits<double>::infinity();
  check.worst_lyapunov = std::numeric_limits<double>::infinity();

  std::vector<Vec> points;
  for (int i = 0; i < r; ++i) points.push_back(Vec::Unit(r, i));
  points.push_back(Vec::Constant(r, 1.0 / r));
  for (std::uint64_t idx = seed + 1; static_cast<int>(points.size()) < samples; ++idx) {
    Vec u = halton_point(idx, r);
    Vec h(r);
    for (int i = 0; i < r; ++i) h[i] = -std::log(1.0 - u[i]) + 1e-12;
    points.push_back(h / h.sum());
  }
  check.samples = static_cast<int>(points.size());

  for (std::size_t s = 0; s < points.size(); ++s) {
    const Vec& h = points[s];
    Mat Th = Mat::Zero(model.n, model.n);
    for (int k = 0; k < r; ++k) Th += h[k] * cert.T[static_cast<std::size_t>(k)];
    Eigen::SelfAdjointEigenSolver<Mat> est(Th, Eigen::EigenvaluesOnly);
    const double tmin = est.eigenvalues().minCoeff();
    check.worst_lyapunov = std::min(check.worst_lyapunov, tmin);
    if (!(tmin > 0.0)) {
      std::ostringstream msg;
      msg << "blended Lyapunov matrix loses definiteness at h=" << format_vector(h)
          << " (min eig " << tmin << ")";
      check.failures.push_back(msg.str());
    }
    for (std::size_t l = 0; l < cert.rates.vertices.size(); ++l) {
      Mat M = stability_matrix(model, cert, h, cert.rates.vertices[l]);
      M = 0.5 * (M + M.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Mat> esm(M, Eigen::EigenvaluesOnly);
      const double mmax = esm.eigenvalues().maxCoeff();
      check.worst_stability = std::max(check.worst_stability, mmax);
      if (!(mmax < 0.0)) {
        std::ostringstream msg;
        msg << "stability block not negative definite at h=" << format_vector(h) << ", vertex "
            << l + 1 << " (max eig " << mmax << ")";
        check.failures.push_back(msg.str());
      }
    }
  }
  check.ok = check.failures.empty();
  return check;
}

std::vector<std::pair<double, SynthesisOutcome>> alpha_grid_search(
    const TsModel& model, const SynthesisConfig& cfg, const std::vector<double>& alphas,
    const LmiSolveOptions& opts) {
  std::vector<std::pair<double, SynthesisOutcome>> out;
  for (double a : alphas) {
    SynthesisConfig local = cfg;
    local.alpha = a;
    out.push_back({a, synthesize_global(model, local, opts)});
  }
  return out;
}

}  // namespace tsctl
