#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace signbow {

inline constexpr int k_model_format_version = 1;

inline const double k_log_two_pi = std::log(2.0 * std::numbers::pi);
inline constexpr double k_neg_inf = -std::numeric_limits<double>::infinity();

/// Malformed input file (bad JSON, bad record shape). Message carries the
/// line number or byte offset where parsing stopped.
class ParseError : public std::runtime_error {
public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Well-formed input that violates a data invariant (probability sums,
/// unknown class ids, dimension mismatches).
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: singular covariance, decreasing EM trace, etc.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Head-relative 2D position in centimeters.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(Point2 a, double s) { return {a.x * s, a.y * s}; }
  friend Point2 operator*(double s, Point2 a) { return a * s; }
  friend bool operator==(const Point2& a, const Point2& b) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

inline bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

/// log(sum_i exp(x_i)); -inf for an empty or all -inf input.
inline double log_sum_exp(const std::vector<double>& xs) {
  double m = k_neg_inf;
  for (double x : xs) m = std::max(m, x);
  if (m == k_neg_inf) return k_neg_inf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_add(double a, double b) {
  if (a == k_neg_inf) return b;
  if (b == k_neg_inf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_of: empty input");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Population standard deviation (denominator n).
inline double population_stddev(const std::vector<double>& xs) {
  double mu = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

namespace detail {

/// Normalized categorical log-likelihood accumulated via per-bin counts, so
/// the result is bitwise identical for any permutation of the input multiset.
inline double counted_log_prob(const std::vector<std::size_t>& counts,
                               const std::vector<double>& probs, std::size_t total) {
  double s = 0.0;
  for (std::size_t b = 0; b < counts.size(); ++b)
    if (counts[b] > 0) s += static_cast<double>(counts[b]) * std::log(probs[b]);
  return s / static_cast<double>(total);
}

}  // namespace detail

}  // namespace signbow
