#include "tsctl/common.hpp"

#include <array>
#include <cmath>
#include <sstream>

namespace tsctl {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = fnv1a64(bytes);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

double radical_inverse(std::uint64_t index, unsigned base) {
  double inv_base = 1.0 / static_cast<double>(base);
  double result = 0.0;
  double frac = inv_base;
  while (index > 0) {
    result += static_cast<double>(index % base) * frac;
    index /= base;
    frac *= inv_base;
  }
  return result;
}

Vec halton_point(std::uint64_t index, int dim) {
  static constexpr std::array<unsigned, 8> primes = {2, 3, 5, 7, 11, 13, 17, 19};
  if (dim < 1 || dim > static_cast<int>(primes.size()))
    throw DimensionError("halton_point: dim must be in [1,8], got " + std::to_string(dim));
  Vec p(dim);
  for (int k = 0; k < dim; ++k) p[k] = radical_inverse(index, primes[static_cast<std::size_t>(k)]);
  return p;
}

Vec halton_in_box(std::uint64_t index, const Vec& lo, const Vec& hi) {
  if (lo.size() != hi.size()) throw DimensionError("halton_in_box: bound size mismatch");
  Vec u = halton_point(index, static_cast<int>(lo.size()));
  return lo.array() + u.array() * (hi.array() - lo.array());
}

namespace {

// Equality-constrained least squares on a support set: minimize |C_A w - g|
// subject to sum(w) = 1, via the KKT system. Returns false if singular.
bool solve_support(const Mat& cols, const std::vector<int>& support, const Vec& target, Vec& w_out) {
  const int s = static_cast<int>(support.size());
  Mat gram(s + 1, s + 1);
  Vec rhs(s + 1);
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b) gram(a, b) = cols.col(support[a]).dot(cols.col(support[b]));
    gram(a, s) = 1.0;
    gram(s, a) = 1.0;
    rhs[a] = cols.col(support[a]).dot(target);
  }
  gram(s, s) = 0.0;
  rhs[s] = 1.0;
  Eigen::FullPivLU<Mat> lu(gram);
  if (!lu.isInvertible()) return false;
  Vec sol = lu.solve(rhs);
  w_out = sol.head(s);
  return true;
}

}  // namespace

SimplexFit simplex_least_squares(const Mat& columns, const Vec& target) {
  const int s = static_cast<int>(columns.cols());
  if (s < 1) throw DimensionError("simplex_least_squares: no columns");
  if (columns.rows() != target.size())
    throw DimensionError("simplex_least_squares: column/target size mismatch");
  if (s > 16) throw DimensionError("simplex_least_squares: too many columns for enumeration");

  SimplexFit best;
  best.residual = std::numeric_limits<double>::infinity();
  std::vector<int> support;
  for (unsigned mask = 1; mask < (1u << s); ++mask) {
    support.clear();
    for (int q = 0; q < s; ++q)
      if (mask & (1u << q)) support.push_back(q);
    Vec w;
    if (!solve_support(columns, support, target, w)) continue;
    if ((w.array() < -1e-12).any()) continue;
    Vec full = Vec::Zero(s);
    for (std::size_t a = 0; a < support.size(); ++a) full[support[a]] = std::max(0.0, w[static_cast<int>(a)]);
    full /= full.sum();
    double res = (columns * full - target).norm();
    if (res < best.residual) {
      best.residual = res;
      best.weights = full;
    }
  }
  if (!best.weights.size()) throw SolverError("simplex_least_squares: all supports singular");
  return best;
}

bool in_convex_hull(const Mat& columns, const Vec& target, double tol) {
  return simplex_least_squares(columns, target).residual <= tol;
}

std::string format_vector(const Vec& v, int precision) {
  std::ostringstream os;
  os.precision(precision);
  os << "(";
  for (int i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    os << v[i];
  }
  os << ")";
  return os.str();
}

}  // namespace tsctl
