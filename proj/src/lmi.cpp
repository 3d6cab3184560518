#include "tsctl/lmi.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <map>
#include <ostream>

namespace tsctl {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

int lower_index(int a, int b, int n) {
  // lower triangle, column major: (0,0),(1,0),..,(n-1,0),(1,1),..
  const int c = std::min(a, b);
  const int r = std::max(a, b);
  return c * n - c * (c - 1) / 2 + (r - c);
}

}  // namespace

Vec svec(const Mat& S) {
  const int n = static_cast<int>(S.rows());
  if (S.cols() != n) throw DimensionError("svec: matrix is not square");
  Vec v(n * (n + 1) / 2);
  int at = 0;
  for (int c = 0; c < n; ++c)
    for (int r = c; r < n; ++r) v[at++] = r == c ? S(r, c) : kSqrt2 * S(r, c);
  return v;
}

Mat unsvec(const Vec& v, int n) {
  if (v.size() != n * (n + 1) / 2) throw DimensionError("unsvec: length does not match n");
  Mat S(n, n);
  int at = 0;
  for (int c = 0; c < n; ++c)
    for (int r = c; r < n; ++r) {
      const double x = r == c ? v[at] : v[at] / kSqrt2;
      S(r, c) = x;
      S(c, r) = x;
      ++at;
    }
  return S;
}

AffineMatrixExpr::AffineMatrixExpr(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows <= 0 || cols <= 0) throw DimensionError("expression dimensions must be positive");
  constant_ = Mat::Zero(rows, cols);
}

void AffineMatrixExpr::add_constant(const Mat& C) {
  if (C.rows() != rows_ || C.cols() != cols_)
    throw DimensionError("add_constant: shape mismatch");
  constant_ += C;
}

void AffineMatrixExpr::add_term(const Mat& left, const MatrixVar& v, const Mat& right,
                                bool transpose) {
  if (v.id < 0) throw ValidationError("add_term: variable handle is empty");
  const int vr = transpose ? v.cols : v.rows;
  const int vc = transpose ? v.rows : v.cols;
  if (left.rows() != rows_ || left.cols() != vr || right.rows() != vc || right.cols() != cols_)
    throw DimensionError("add_term: left/right factors do not conform");
  Term t;
  t.left = left;
  t.var = v;
  t.right = right;
  t.transpose = transpose && !v.symmetric;
  terms_.push_back(std::move(t));
}

void AffineMatrixExpr::add_sym_pair(const Mat& left, const MatrixVar& v, const Mat& right,
                                    bool transpose) {
  if (rows_ != cols_) throw DimensionError("add_sym_pair: expression is not square");
  add_term(left, v, right, transpose);
  add_term(right.transpose(), v, left.transpose(), !transpose);
}

void AffineMatrixExpr::add_placed(const AffineMatrixExpr& sub, int r0, int c0, double scale) {
  if (r0 < 0 || c0 < 0 || r0 + sub.rows() > rows_ || c0 + sub.cols() > cols_)
    throw DimensionError("add_placed: sub-expression does not fit");
  constant_.block(r0, c0, sub.rows(), sub.cols()) += scale * sub.constant_;
  for (const Term& t : sub.terms_) {
    Mat L = Mat::Zero(rows_, t.left.cols());
    L.middleRows(r0, sub.rows()) = scale * t.left;
    Mat R = Mat::Zero(t.right.rows(), cols_);
    R.middleCols(c0, sub.cols()) = t.right;
    Term placed;
    placed.left = std::move(L);
    placed.var = t.var;
    placed.right = std::move(R);
    placed.transpose = t.transpose;
    terms_.push_back(std::move(placed));
  }
}

void AffineMatrixExpr::add_placed_transpose(const AffineMatrixExpr& sub, int r0, int c0,
                                            double scale) {
  if (r0 < 0 || c0 < 0 || r0 + sub.cols() > rows_ || c0 + sub.rows() > cols_)
    throw DimensionError("add_placed_transpose: sub-expression does not fit");
  constant_.block(r0, c0, sub.cols(), sub.rows()) += scale * sub.constant_.transpose();
  for (const Term& t : sub.terms_) {
    Mat L = Mat::Zero(rows_, t.right.rows());
    L.middleRows(r0, sub.cols()) = scale * t.right.transpose();
    Mat R = Mat::Zero(t.left.cols(), cols_);
    R.middleCols(c0, sub.rows()) = t.left.transpose();
    Term placed;
    placed.left = std::move(L);
    placed.var = t.var;
    placed.right = std::move(R);
    placed.transpose = t.var.symmetric ? false : !t.transpose;
    terms_.push_back(std::move(placed));
  }
}

Mat AffineMatrixExpr::eval(const std::function<Mat(const MatrixVar&)>& value) const {
  Mat F = constant_;
  for (const Term& t : terms_) {
    Mat V = value(t.var);
    if (t.transpose) V.transposeInPlace();
    F += t.left * V * t.right;
  }
  return F;
}

MatrixVar LmiProblem::add_variable(const std::string& name, int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw DimensionError("matrix variable needs positive dimensions");
  VarInfo info;
  info.name = name;
  info.rows = rows;
  info.cols = cols;
  info.symmetric = false;
  info.offset = nscalars_;
  vars_.push_back(info);
  nscalars_ += rows * cols;
  MatrixVar v;
  v.id = static_cast<int>(vars_.size()) - 1;
  v.rows = rows;
  v.cols = cols;
  v.symmetric = false;
  return v;
}

MatrixVar LmiProblem::add_symmetric(const std::string& name, int n) {
  if (n <= 0) throw DimensionError("matrix variable needs positive dimensions");
  VarInfo info;
  info.name = name;
  info.rows = n;
  info.cols = n;
  info.symmetric = true;
  info.offset = nscalars_;
  vars_.push_back(info);
  nscalars_ += n * (n + 1) / 2;
  MatrixVar v;
  v.id = static_cast<int>(vars_.size()) - 1;
  v.rows = n;
  v.cols = n;
  v.symmetric = true;
  return v;
}

void LmiProblem::require_psd(const AffineMatrixExpr& e, const std::string& name, bool strict) {
  if (e.rows() != e.cols()) throw DimensionError("constraint '" + name + "' is not square");
  blocks_.push_back(BlockSpec{e, name, strict});
}

void LmiProblem::require_nsd(const AffineMatrixExpr& e, const std::string& name, bool strict) {
  if (e.rows() != e.cols()) throw DimensionError("constraint '" + name + "' is not square");
  AffineMatrixExpr neg(e.rows(), e.cols());
  neg.add_placed(e, 0, 0, -1.0);
  blocks_.push_back(BlockSpec{std::move(neg), name, strict});
}

void LmiProblem::add_trace_objective(const MatrixVar& v, double weight) {
  if (v.id < 0 || v.id >= static_cast<int>(vars_.size()))
    throw ValidationError("trace objective on an unknown variable");
  if (v.rows != v.cols) throw DimensionError("trace objective needs a square variable");
  trace_terms_.push_back({v, weight});
}

void LmiProblem::maximize_logdet(const MatrixVar& v, double weight) {
  if (v.id < 0 || v.id >= static_cast<int>(vars_.size()))
    throw ValidationError("logdet objective on an unknown variable");
  if (!v.symmetric) throw ValidationError("logdet objective needs a symmetric variable");
  if (weight <= 0.0) throw ValidationError("logdet weight must be positive");
  det_var_ = v.id;
  det_weight_ = weight;
}

LmiProblem::Compiled LmiProblem::compile(const LmiSolveOptions& opts) const {
  if (nscalars_ == 0) throw ValidationError("problem declares no variables");
  if (det_var_ && !opts.native_logdet)
    throw SolverError(
        "the selected backend cannot maximize log-det objectives; "
        "re-run with a backend that supports determinant maximization");

  Compiled out;
  out.program.nvars = nscalars_;

  if (!trace_terms_.empty()) {
    Vec c = Vec::Zero(nscalars_);
    for (const auto& [v, w] : trace_terms_) {
      const VarInfo& info = vars_[static_cast<std::size_t>(v.id)];
      for (int a = 0; a < info.rows; ++a) {
        const int idx = info.symmetric ? info.offset + lower_index(a, a, info.rows)
                                       : info.offset + a + a * info.rows;
        c[idx] += w;
      }
    }
    out.program.c = c;
  }

  for (const BlockSpec& spec : blocks_) {
    const int d = spec.expr.rows();
    Mat C = spec.expr.constant();

    // accumulate per-scalar-variable coefficient matrices
    std::map<int, Mat> coeffs;
    for (const auto& term : spec.expr.terms()) {
      if (term.var.id < 0 || term.var.id >= static_cast<int>(vars_.size()))
        throw ValidationError("constraint '" + spec.name + "' uses an unknown variable");
      const VarInfo& info = vars_[static_cast<std::size_t>(term.var.id)];
      const Mat& L = term.left;
      const Mat& R = term.right;
      if (info.symmetric) {
        for (int b = 0; b < info.cols; ++b)
          for (int a = b; a < info.rows; ++a) {
            const int idx = info.offset + lower_index(a, b, info.rows);
            Mat add = L.col(a) * R.row(b);
            if (a != b) add += L.col(b) * R.row(a);
            auto [it, fresh] = coeffs.try_emplace(idx, Mat::Zero(d, d));
            it->second += add;
          }
      } else {
        for (int b = 0; b < info.cols; ++b)
          for (int a = 0; a < info.rows; ++a) {
            const int idx = info.offset + a + b * info.rows;
            auto [it, fresh] = coeffs.try_emplace(idx, Mat::Zero(d, d));
            if (term.transpose)
              it->second += L.col(b) * R.row(a);
            else
              it->second += L.col(a) * R.row(b);
          }
      }
    }

    // symmetry conformance, then canonical symmetrization
    const double ctol = 1e-9 * (1.0 + C.cwiseAbs().maxCoeff());
    if ((C - C.transpose()).cwiseAbs().maxCoeff() > ctol)
      throw ValidationError("constraint '" + spec.name + "' has a non-symmetric constant term");
    C = 0.5 * (C + C.transpose()).eval();
    for (auto& [idx, M] : coeffs) {
      const double mtol = 1e-9 * (1.0 + M.cwiseAbs().maxCoeff());
      if ((M - M.transpose()).cwiseAbs().maxCoeff() > mtol)
        throw ValidationError("constraint '" + spec.name +
                              "' is not symmetric in variable direction " + std::to_string(idx));
      M = 0.5 * (M + M.transpose()).eval();
    }

    // prune identically zero coefficient matrices
    for (auto it = coeffs.begin(); it != coeffs.end();) {
      if (it->second.cwiseAbs().maxCoeff() == 0.0)
        it = coeffs.erase(it);
      else
        ++it;
    }

    // detect identically zero rows (hence columns, by symmetry)
    double data_scale = C.cwiseAbs().maxCoeff();
    for (const auto& [idx, M] : coeffs) data_scale = std::max(data_scale, M.cwiseAbs().maxCoeff());
    const double ztol = 1e-14 * data_scale;
    std::vector<int> keep;
    for (int rr = 0; rr < d; ++rr) {
      double mx = C.row(rr).cwiseAbs().maxCoeff();
      for (const auto& [idx, M] : coeffs) mx = std::max(mx, M.row(rr).cwiseAbs().maxCoeff());
      if (mx > ztol) keep.push_back(rr);
    }
    if (static_cast<int>(keep.size()) < d) {
      if (spec.strict)
        throw IllPosedError("strict constraint '" + spec.name +
                            "' has an identically zero row and can never hold");
      out.notes.push_back("constraint '" + spec.name + "' reduced from dim " +
                          std::to_string(d) + " to " + std::to_string(keep.size()));
      if (keep.empty()) continue;  // vacuously true
    }
    const int dk = static_cast<int>(keep.size());
    auto shrink = [&](const Mat& M) {
      Mat S(dk, dk);
      for (int a = 0; a < dk; ++a)
        for (int b = 0; b < dk; ++b) S(a, b) = M(keep[a], keep[b]);
      return S;
    };

    ConicBlock blk;
    blk.F0 = shrink(C);
    double shift = 0.0;
    if (spec.strict) {
      shift = std::max(1e-9, opts.epsilon * std::max(1.0, C.norm()));
      blk.F0 -= shift * Mat::Identity(dk, dk);
    }
    for (const auto& [idx, M] : coeffs) {
      blk.vars.push_back(idx);
      blk.coeff.push_back(shrink(M));
    }

    double scale = blk.F0.cwiseAbs().maxCoeff();
    for (const Mat& M : blk.coeff) scale = std::max(scale, M.cwiseAbs().maxCoeff());
    if (scale <= 0.0) {
      out.notes.push_back("constraint '" + spec.name + "' is identically zero; dropped");
      continue;
    }
    blk.F0 /= scale;
    for (Mat& M : blk.coeff) M /= scale;

    out.program.blocks.push_back(std::move(blk));
    out.block_names.push_back(spec.name);
    out.block_shifts.push_back(shift);
    out.block_scales.push_back(scale);
  }

  if (det_var_) {
    const VarInfo& info = vars_[static_cast<std::size_t>(*det_var_)];
    ConicBlock blk;
    const int n = info.rows;
    blk.F0 = Mat::Zero(n, n);
    for (int b = 0; b < n; ++b)
      for (int a = b; a < n; ++a) {
        Mat E = Mat::Zero(n, n);
        E(a, b) = 1.0;
        E(b, a) = 1.0;
        blk.vars.push_back(info.offset + lower_index(a, b, n));
        blk.coeff.push_back(E);
      }
    out.program.det_block = static_cast<int>(out.program.blocks.size());
    out.program.det_weight = det_weight_;
    out.program.blocks.push_back(std::move(blk));
    out.block_names.push_back(info.name + " (logdet)");
    out.block_shifts.push_back(0.0);
    out.block_scales.push_back(1.0);
    out.used_native_logdet = true;
  }

  return out;
}

LmiSolution LmiProblem::solve(const LmiSolveOptions& opts) const {
  Compiled compiled = compile(opts);
  SolveResult res = solve_sdp(compiled.program, opts.solver);

  LmiSolution sol;
  sol.status = res.status;
  sol.y = res.y;
  sol.objective = res.objective;
  sol.message = res.message;
  sol.notes = compiled.notes;
  for (const VarInfo& info : vars_) {
    LmiSolution::Layout lay;
    lay.offset = info.offset;
    lay.rows = info.rows;
    lay.cols = info.cols;
    lay.symmetric = info.symmetric;
    sol.layout_.push_back(lay);
  }
  if (res.status == SolveStatus::kInfeasible || res.status == SolveStatus::kError) return sol;

  // dense re-verification of the original constraints
  auto value_of = [&](const MatrixVar& v) { return sol.value(v); };
  bool clean = true;
  double worst_strict = std::numeric_limits<double>::infinity();
  for (const BlockSpec& spec : blocks_) {
    const Mat F = spec.expr.eval(value_of);
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (F + F.transpose()), Eigen::EigenvaluesOnly);
    const double mineig = es.eigenvalues().minCoeff();
    sol.block_margins.emplace_back(spec.name, mineig);
    if (spec.strict) {
      const double shift =
          std::max(1e-9, opts.epsilon * std::max(1.0, spec.expr.constant().norm()));
      worst_strict = std::min(worst_strict, mineig);
      if (mineig < 0.5 * shift) {
        clean = false;
        sol.notes.push_back("strict constraint '" + spec.name + "' verified margin " +
                            std::to_string(mineig) + " below " + std::to_string(0.5 * shift));
      }
    } else if (mineig < -1e-7 * std::max(1.0, F.cwiseAbs().maxCoeff())) {
      clean = false;
      sol.notes.push_back("constraint '" + spec.name + "' verified margin " +
                          std::to_string(mineig));
    }
  }
  if (det_var_) {
    MatrixVar v;
    v.id = *det_var_;
    const VarInfo& info = vars_[static_cast<std::size_t>(*det_var_)];
    v.rows = info.rows;
    v.cols = info.cols;
    v.symmetric = true;
    Eigen::SelfAdjointEigenSolver<Mat> es(sol.value(v), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0) {
      clean = false;
      sol.notes.push_back("logdet variable is not positive definite at the returned point");
    }
  }
  sol.worst_strict_margin = std::isfinite(worst_strict) ? worst_strict : 0.0;
  if (!clean && sol.status == SolveStatus::kFeasible) {
    sol.status = SolveStatus::kInaccurate;
    if (sol.message.empty()) sol.message = "re-verification failed on at least one constraint";
  } else if (clean && sol.status == SolveStatus::kInaccurate) {
    // Trace-regularized solves ride the strictness shift, so the solver's
    // own exit test can see a hairline-negative shifted margin; the dense
    // raw-units check above is the authority on whether the point solves
    // the original problem.
    sol.status = SolveStatus::kFeasible;
    sol.notes.push_back("solver exit was inaccurate but the returned point verifies cleanly");
    sol.message.clear();
  }
  return sol;
}

Mat LmiSolution::value(const MatrixVar& v) const {
  if (v.id < 0 || v.id >= static_cast<int>(layout_.size()))
    throw ValidationError("value() for an unknown variable");
  const Layout& lay = layout_[static_cast<std::size_t>(v.id)];
  if (y.size() == 0) throw ValidationError("no solution point available");
  Mat V(lay.rows, lay.cols);
  if (lay.symmetric) {
    for (int b = 0; b < lay.cols; ++b)
      for (int a = b; a < lay.rows; ++a) {
        const double x = y[lay.offset + lower_index(a, b, lay.rows)];
        V(a, b) = x;
        V(b, a) = x;
      }
  } else {
    for (int b = 0; b < lay.cols; ++b)
      for (int a = 0; a < lay.rows; ++a) V(a, b) = y[lay.offset + a + b * lay.rows];
  }
  return V;
}

std::vector<std::pair<std::string, double>> LmiProblem::margins_at(
    const std::function<Mat(const MatrixVar&)>& value) const {
  std::vector<std::pair<std::string, double>> out;
  out.reserve(blocks_.size());
  for (const BlockSpec& blk : blocks_) {
    Mat F = blk.expr.eval(value);
    F = 0.5 * (F + F.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(F, Eigen::EigenvaluesOnly);
    out.push_back({blk.name, es.eigenvalues().minCoeff()});
  }
  return out;
}

void LmiProblem::dump(std::ostream& os, const LmiSolveOptions& opts) const {
  Compiled compiled = compile(opts);
  os << "# conic program: nvars=" << compiled.program.nvars
     << " blocks=" << compiled.program.blocks.size() << "\n";
  for (std::size_t k = 0; k < vars_.size(); ++k) {
    const VarInfo& v = vars_[k];
    os << "var " << k << " " << v.name << " " << v.rows << " " << v.cols << " "
       << (v.symmetric ? "sym" : "full") << " offset " << v.offset << "\n";
  }
  if (compiled.program.c.size() > 0)
    for (int i = 0; i < compiled.program.c.size(); ++i)
      if (compiled.program.c[i] != 0.0) os << "obj " << i << " " << compiled.program.c[i] << "\n";
  for (std::size_t k = 0; k < compiled.program.blocks.size(); ++k) {
    const ConicBlock& blk = compiled.program.blocks[k];
    os << "block " << k << " \"" << compiled.block_names[k] << "\" dim " << blk.dim() << " shift "
       << compiled.block_shifts[k] << " scale " << compiled.block_scales[k] << "\n";
    for (int a = 0; a < blk.dim(); ++a)
      for (int b = a; b < blk.dim(); ++b)
        if (blk.F0(a, b) != 0.0) os << "F0 " << k << " " << a << " " << b << " " << blk.F0(a, b)
                                    << "\n";
    for (std::size_t i = 0; i < blk.vars.size(); ++i)
      for (int a = 0; a < blk.dim(); ++a)
        for (int b = a; b < blk.dim(); ++b)
          if (blk.coeff[i](a, b) != 0.0)
            os << "A " << k << " " << blk.vars[i] << " " << a << " " << b << " "
               << blk.coeff[i](a, b) << "\n";
  }
  for (const std::string& note : compiled.notes) os << "# " << note << "\n";
  if (compiled.program.det_block)
    os << "# maximize logdet of block " << *compiled.program.det_block << " weight "
       << compiled.program.det_weight << "\n";
}

}  // namespace tsctl
