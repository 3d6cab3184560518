#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tsctl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Input could not be parsed (JSON, expressions, CLI values). `position` is a
// byte offset into the offending text when one is known, npos otherwise.
class ParseError : public std::runtime_error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  explicit ParseError(const std::string& msg, std::size_t position = npos)
      : std::runtime_error(msg), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Structurally valid input that violates a model/config invariant.
class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when the implicit membership-rate relation is numerically singular.
class IllPosedError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

// Radical-inverse (van der Corput) value of `index` in the given base.
double radical_inverse(std::uint64_t index, unsigned base);

// Halton point in [0,1)^dim, dim <= 8. Index should start at 1.
Vec halton_point(std::uint64_t index, int dim);

// Halton point mapped into the box [lo, hi] componentwise.
Vec halton_in_box(std::uint64_t index, const Vec& lo, const Vec& hi);

// Least squares over the probability simplex: minimize |C*w - target| with
// w >= 0, sum w = 1, where C holds one candidate per column. Solved exactly
// by active-set enumeration; intended for a handful of columns.
struct SimplexFit {
  Vec weights;
  double residual = 0.0;
};
SimplexFit simplex_least_squares(const Mat& columns, const Vec& target);

bool in_convex_hull(const Mat& columns, const Vec& target, double tol);

std::string format_vector(const Vec& v, int precision = 6);

}  // namespace tsctl
