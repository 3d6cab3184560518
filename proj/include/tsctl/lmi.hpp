#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsctl/common.hpp"
#include "tsctl/solver.hpp"

namespace tsctl {

// Symmetric-matrix vectorization with sqrt(2)-scaled off-diagonals (lower
// triangle, column major), so that svec(A).dot(svec(B)) == trace(A*B).
Vec svec(const Mat& S);
Mat unsvec(const Vec& v, int n);

// Handle to a matrix decision variable of an LmiProblem.
struct MatrixVar {
  int id = -1;
  int rows = 0;
  int cols = 0;
  bool symmetric = false;
};

// Matrix-valued affine expression  C + sum_k  left_k * V_k^(T) * right_k.
class AffineMatrixExpr {
 public:
  AffineMatrixExpr(int rows, int cols);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  void add_constant(const Mat& C);
  void add_term(const Mat& left, const MatrixVar& v, const Mat& right, bool transpose = false);
  // adds  left*V*right + (left*V*right)'  in one call
  void add_sym_pair(const Mat& left, const MatrixVar& v, const Mat& right, bool transpose = false);
  // embeds `sub` (scaled) with its top-left corner at (r0, c0)
  void add_placed(const AffineMatrixExpr& sub, int r0, int c0, double scale = 1.0);
  // embeds transpose(sub) with its top-left corner at (r0, c0)
  void add_placed_transpose(const AffineMatrixExpr& sub, int r0, int c0, double scale = 1.0);

  // Value at a concrete assignment of the variables.
  Mat eval(const std::function<Mat(const MatrixVar&)>& value) const;

  struct Term {
    Mat left;
    MatrixVar var;
    Mat right;
    bool transpose = false;
  };
  const Mat& constant() const { return constant_; }
  const std::vector<Term>& terms() const { return terms_; }

 private:
  int rows_, cols_;
  Mat constant_;
  std::vector<Term> terms_;
};

struct LmiSolveOptions {
  double epsilon = 1e-7;      // strict-inequality shift, scaled per block
  SolverOptions solver;
  bool native_logdet = true;  // backend capability switch
};

struct LmiSolution {
  SolveStatus status = SolveStatus::kError;
  Vec y;                       // scalarized variable values
  double objective = 0.0;      // solver objective (linear part minus weighted logdet)
  double worst_strict_margin = 0.0;
  std::vector<std::pair<std::string, double>> block_margins;  // smallest eigenvalue per block
  std::vector<std::string> notes;
  std::string message;

  Mat value(const MatrixVar& v) const;
  bool feasible() const { return status == SolveStatus::kFeasible; }

 private:
  struct Layout {
    int offset = 0;
    int rows = 0, cols = 0;
    bool symmetric = false;
  };
  std::vector<Layout> layout_;
  friend class LmiProblem;
};

// Declarative semidefinite feasibility/optimization problem over matrix
// variables. Constraints compile into the conic form of solver.hpp:
// strict inequalities are shifted by epsilon scaled with the block's
// constant-term norm, identically zero rows are pruned from non-strict
// blocks, and every block is normalized before it reaches the solver.
class LmiProblem {
 public:
  MatrixVar add_variable(const std::string& name, int rows, int cols);
  MatrixVar add_symmetric(const std::string& name, int n);

  void require_psd(const AffineMatrixExpr& e, const std::string& name, bool strict = true);
  void require_nsd(const AffineMatrixExpr& e, const std::string& name, bool strict = true);

  // Adds weight*trace(V) to the minimized linear objective.
  void add_trace_objective(const MatrixVar& v, double weight);
  // Maximizes weight*logdet(V); implies V >= 0.
  void maximize_logdet(const MatrixVar& v, double weight = 1.0);

  int scalar_count() const { return nscalars_; }
  int block_count() const { return static_cast<int>(blocks_.size()); }

  struct Compiled {
    ConicProgram program;
    std::vector<std::string> block_names;   // after presolve, aligned with program.blocks
    std::vector<double> block_shifts;
    std::vector<double> block_scales;
    std::vector<std::string> notes;         // presolve/normalization record
    bool used_native_logdet = false;
  };
  Compiled compile(const LmiSolveOptions& opts = {}) const;

  // Compile, hand to the interior-point backend, map the point back to
  // matrices, and re-verify every *original* constraint with a dense
  // eigenvalue check (strict blocks must clear half their shift). A point
  // failing re-verification downgrades the status to `inaccurate`.
  LmiSolution solve(const LmiSolveOptions& opts = {}) const;

  // Sparse-triplet text dump of the compiled program (documented in
  // docs/model_schema.md) for offline inspection.
  void dump(std::ostream& os, const LmiSolveOptions& opts = {}) const;

  // Smallest eigenvalue of every constraint (in >= 0 sense) at a concrete
  // assignment of the variables; lets callers test whether a point produced
  // elsewhere satisfies this problem's constraints.
  std::vector<std::pair<std::string, double>> margins_at(
      const std::function<Mat(const MatrixVar&)>& value) const;

 private:
  struct VarInfo {
    std::string name;
    int rows = 0, cols = 0;
    bool symmetric = false;
    int offset = 0;
  };
  struct BlockSpec {
    AffineMatrixExpr expr;
    std::string name;
    bool strict = false;
  };

  int scalar_size(const VarInfo& v) const {
    return v.symmetric ? v.rows * (v.rows + 1) / 2 : v.rows * v.cols;
  }

  std::vector<VarInfo> vars_;
  std::vector<BlockSpec> blocks_;
  int nscalars_ = 0;
  std::vector<std::pair<MatrixVar, double>> trace_terms_;
  std::optional<int> det_var_;
  double det_weight_ = 1.0;
};

}  // namespace tsctl
