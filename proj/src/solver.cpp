#include "tsctl/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <iostream>
#include <limits>

namespace tsctl {

Mat ConicBlock::eval(const Vec& y) const {
  Mat F = F0;
  for (std::size_t i = 0; i < vars.size(); ++i) F += y[vars[i]] * coeff[i];
  return F;
}

bool ConicProgram::has_objective() const {
  if (det_block.has_value()) return true;
  return c.size() > 0 && c.cwiseAbs().maxCoeff() > 0.0;
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kFeasible: return "feasible";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kInaccurate: return "inaccurate";
    case SolveStatus::kError: return "error";
  }
  return "error";
}

namespace {

// Shared barrier state for one phase. Phase one appends a uniform slack
// variable that enters every block with the identity; phase two works on the
// original variables with the optional log-det objective folded in.
class BarrierPhase {
 public:
  BarrierPhase(const ConicProgram& prog, bool phase_one)
      : prog_(prog), phase_one_(phase_one), nv_(prog.nvars + (phase_one ? 1 : 0)) {}

  int nv() const { return nv_; }

  double barrier_parameter() const {
    double m = 1.0;  // trust ball
    for (const auto& b : prog_.blocks) m += b.dim();
    return m;
  }

  // Potential t*f + phi at z; false when z leaves the strict domain.
  // grad/hess are filled only when non-null.
  bool eval(const Vec& z, double t, double* pot, Vec* grad, Mat* hess) const {
    const int n = prog_.nvars;
    const double ball2 = prog_.ball_radius * prog_.ball_radius - z.squaredNorm();
    if (ball2 <= 0.0) return false;

    double phi = -std::log(ball2);
    double f = 0.0;
    if (phase_one_) {
      f = z[n];
    } else if (prog_.c.size() > 0) {
      f = prog_.c.dot(z);
    }

    if (grad) {
      grad->setZero(nv_);
      *grad += (2.0 / ball2) * z;
      if (hess) {
        hess->setZero(nv_, nv_);
        *hess += (2.0 / ball2) * Mat::Identity(nv_, nv_);
        *hess += (4.0 / (ball2 * ball2)) * (z * z.transpose());
      }
      if (phase_one_) {
        (*grad)[n] += t;
      } else if (prog_.c.size() > 0) {
        *grad += t * prog_.c;
      }
    }

    for (std::size_t j = 0; j < prog_.blocks.size(); ++j) {
      const ConicBlock& blk = prog_.blocks[j];
      const int d = blk.dim();
      Mat F = blk.F0;
      for (std::size_t i = 0; i < blk.vars.size(); ++i) F += z[blk.vars[i]] * blk.coeff[i];
      if (phase_one_) F += z[n] * Mat::Identity(d, d);

      Eigen::LLT<Mat> llt(F);
      if (llt.info() != Eigen::Success) return false;
      double logdet = 0.0;
      for (int k = 0; k < d; ++k) logdet += std::log(llt.matrixLLT()(k, k));
      logdet *= 2.0;
      if (!std::isfinite(logdet)) return false;

      const bool is_det = !phase_one_ && prog_.det_block && *prog_.det_block == static_cast<int>(j);
      phi -= logdet;
      if (is_det) f -= prog_.det_weight * logdet;

      if (grad) {
        // variables touching this block, with the slack appended in phase one
        const double factor = 1.0 + (is_det ? t * prog_.det_weight : 0.0);
        const Mat L = llt.matrixL();
        const Mat Finv = llt.solve(Mat::Identity(d, d));
        const std::size_t nterms = blk.vars.size() + (phase_one_ ? 1 : 0);
        std::vector<Mat> whitened;
        if (hess) whitened.resize(nterms);
        const Mat eye = Mat::Identity(d, d);
        for (std::size_t i = 0; i < nterms; ++i) {
          const bool slack = i == blk.vars.size();
          const Mat& Fi = slack ? eye : blk.coeff[i];
          const int vi = slack ? n : blk.vars[i];
          (*grad)[vi] -= factor * (Finv * Fi).trace();
          if (hess) {
            Mat W = L.triangularView<Eigen::Lower>().solve(Fi);
            W = L.triangularView<Eigen::Lower>().solve(W.transpose()).transpose();  // L^-1 Fi L^-T
            whitened[i] = W;
          }
        }
        if (hess) {
          for (std::size_t i = 0; i < nterms; ++i) {
            const int vi = i == blk.vars.size() ? n : blk.vars[i];
            for (std::size_t k = i; k < nterms; ++k) {
              const int vk = k == blk.vars.size() ? n : blk.vars[k];
              const double hik = factor * whitened[i].cwiseProduct(whitened[k]).sum();
              (*hess)(vi, vk) += hik;
              if (vi != vk) (*hess)(vk, vi) += hik;
            }
          }
        }
      }
    }

    if (pot) *pot = t * f + phi;
    return true;
  }

  double objective_value(const Vec& z) const {
    double f = 0.0;
    if (phase_one_) return z[prog_.nvars];
    if (prog_.c.size() > 0) f = prog_.c.dot(z);
    if (prog_.det_block) {
      const Mat G = prog_.blocks[static_cast<std::size_t>(*prog_.det_block)].eval(z);
      Eigen::LLT<Mat> llt(G);
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      double logdet = 0.0;
      for (int k = 0; k < G.rows(); ++k) logdet += std::log(llt.matrixLLT()(k, k));
      f -= prog_.det_weight * 2.0 * logdet;
    }
    return f;
  }

 private:
  const ConicProgram& prog_;
  bool phase_one_;
  int nv_;
};

struct CenterOutcome {
  int iters = 0;
  bool stalled = false;
  bool stopped_early = false;
};

// Damped Newton descent on the barrier potential at fixed t. `stop_when`
// (optional) aborts centering as soon as the iterate satisfies it.
CenterOutcome center(const BarrierPhase& phase, double t, Vec& z, const SolverOptions& opts,
                     const std::function<bool(const Vec&)>& stop_when) {
  CenterOutcome out;
  Vec g(phase.nv());
  Mat H(phase.nv(), phase.nv());
  for (int it = 0; it < opts.max_newton_per_stage; ++it) {
    double pot = 0.0;
    if (!phase.eval(z, t, &pot, &g, &H))
      throw SolverError("barrier centering left the feasible domain");
    Vec dz;
    double gdz = 0.0;
    double tau = 0.0;
    const double diag_scale = std::max(1e-12, H.diagonal().cwiseAbs().mean());
    for (int attempt = 0; attempt < 8; ++attempt) {
      Mat Hreg = H;
      if (tau > 0.0) Hreg += tau * diag_scale * Mat::Identity(phase.nv(), phase.nv());
      Eigen::LDLT<Mat> ldlt(Hreg);
      if (ldlt.info() == Eigen::Success) {
        dz = ldlt.solve(-g);
        gdz = g.dot(dz);
        if (std::isfinite(gdz) && gdz < 0.0) break;
      }
      dz.setZero();
      tau = tau == 0.0 ? 1e-10 : tau * 100.0;
    }
    if (dz.size() == 0 || gdz >= 0.0) {
      out.stalled = true;
      return out;
    }

    const double decrement2 = -gdz;
    if (decrement2 * 0.5 < 1e-11) return out;

    double step = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      Vec trial = z + step * dz;
      double pot2 = 0.0;
      if (phase.eval(trial, t, &pot2, nullptr, nullptr) && pot2 <= pot + 1e-4 * step * gdz) {
        z = trial;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    ++out.iters;
    if (!moved) {
      out.stalled = true;
      return out;
    }
    if (stop_when && stop_when(z)) {
      out.stopped_early = true;
      return out;
    }
  }
  return out;
}

double min_block_eigenvalue(const ConicProgram& prog, const Vec& y) {
  double mn = std::numeric_limits<double>::infinity();
  for (const auto& blk : prog.blocks) {
    Eigen::SelfAdjointEigenSolver<Mat> es(blk.eval(y), Eigen::EigenvaluesOnly);
    mn = std::min(mn, es.eigenvalues().minCoeff());
  }
  return mn;
}

}  // namespace

SolveResult solve_sdp(const ConicProgram& prog, const SolverOptions& opts) {
  SolveResult result;
  if (prog.nvars <= 0) {
    result.status = SolveStatus::kError;
    result.message = "program has no variables";
    return result;
  }
  if (prog.c.size() > 0 && prog.c.size() != prog.nvars) {
    result.status = SolveStatus::kError;
    result.message = "objective size does not match the variable count";
    return result;
  }
  for (const auto& blk : prog.blocks) {
    if (blk.vars.size() != blk.coeff.size()) {
      result.status = SolveStatus::kError;
      result.message = "block with mismatched variable/coefficient lists";
      return result;
    }
  }
  if (prog.det_block &&
      (*prog.det_block < 0 || *prog.det_block >= static_cast<int>(prog.blocks.size()))) {
    result.status = SolveStatus::kError;
    result.message = "det_block index out of range";
    return result;
  }

  try {
    // ---- phase one: drive the uniform slack negative --------------------
    BarrierPhase p1(prog, true);
    const int n = prog.nvars;
    Vec z = Vec::Zero(n + 1);
    double worst = 0.0;
    for (const auto& blk : prog.blocks) {
      Eigen::SelfAdjointEigenSolver<Mat> es(blk.F0, Eigen::EigenvaluesOnly);
      worst = std::max(worst, -es.eigenvalues().minCoeff());
    }
    z[n] = worst + 1.0;

    const double m1 = p1.barrier_parameter();
    double t = opts.t_init;
    bool feasible_point = false;
    int stage = 0;
    auto deep_enough = [&](const Vec& zz) { return zz[n] < -opts.feas_exit_margin; };
    for (; stage < opts.max_stages; ++stage) {
      CenterOutcome oc = center(p1, t, z, opts, deep_enough);
      result.newton_iters += oc.iters;
      const double s = z[n];
      const double gap = m1 / t;
      if (opts.verbose)
        std::cerr << "phase1 stage " << stage << " t=" << t << " s=" << s << " gap=" << gap
                  << "\n";
      if (oc.stopped_early || s < -opts.feas_exit_margin) {
        feasible_point = true;
        break;
      }
      if (s - gap > 0.0) {
        result.status = SolveStatus::kInfeasible;
        result.infeas_bound = s - gap;
        result.y = z.head(n);
        result.message = "no point satisfies the constraints inside the trust ball";
        return result;
      }
      if (gap < opts.gap_tol * std::max(1.0, std::abs(s)) || oc.stalled) {
        if (s < -1e-10) {
          feasible_point = true;
        } else {
          result.status = SolveStatus::kInaccurate;
          result.infeas_bound = s - gap;
          result.y = z.head(n);
          result.min_margin = min_block_eigenvalue(prog, result.y);
          result.message = oc.stalled ? "centering stalled near the feasibility boundary"
                                      : "feasibility slack converged to zero within tolerance";
          return result;
        }
        break;
      }
      t *= opts.t_factor;
    }
    if (!feasible_point) {
      result.status = SolveStatus::kInaccurate;
      result.y = z.head(n);
      result.min_margin = min_block_eigenvalue(prog, result.y);
      result.message = "feasibility phase hit the stage limit";
      return result;
    }

    result.y = z.head(n);

    // ---- phase two: follow the central path of the objective ------------
    if (prog.has_objective()) {
      BarrierPhase p2(prog, false);
      Vec y = result.y;
      const double m2 = p2.barrier_parameter();
      t = opts.t_init;
      for (stage = 0; stage < opts.max_stages; ++stage) {
        CenterOutcome oc = center(p2, t, y, opts, nullptr);
        result.newton_iters += oc.iters;
        const double f = p2.objective_value(y);
        const double gap = m2 / t;
        if (opts.verbose)
          std::cerr << "phase2 stage " << stage << " t=" << t << " f=" << f << " gap=" << gap
                    << "\n";
        if (gap < opts.gap_tol * std::max(1.0, std::abs(f))) break;
        if (oc.stalled && gap < 1e-6 * std::max(1.0, std::abs(f))) break;
        if (oc.stalled) {
          result.message = "objective centering stalled before reaching the gap target";
          break;
        }
        t *= opts.t_factor;
      }
      result.y = y;
      result.objective = p2.objective_value(y);
    }

    result.min_margin = min_block_eigenvalue(prog, result.y);
    result.status = result.min_margin > 0.0 ? SolveStatus::kFeasible : SolveStatus::kInaccurate;
    if (result.status == SolveStatus::kInaccurate && result.message.empty())
      result.message = "returned point is not strictly inside the cone";
  } catch (const SolverError& err) {
    result.status = SolveStatus::kError;
    result.message = err.what();
  }
  return result;
}

}  // namespace tsctl
