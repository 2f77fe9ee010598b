#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "signbow/common.hpp"

namespace signbow {

/// 2D Gaussian with a full symmetric covariance, stored as its three
/// distinct entries (cm^2).
struct Gaussian2D {
  Point2 mean;
  double cov_xx = 1.0;
  double cov_xy = 0.0;
  double cov_yy = 1.0;

  friend bool operator==(const Gaussian2D&, const Gaussian2D&) = default;

  double det() const { return cov_xx * cov_yy - cov_xy * cov_xy; }
};

/// Sample mean and population covariance (denominator n), with reg_epsilon
/// added to both diagonal entries so repeated points stay well-posed.
inline Gaussian2D fit_gaussian_2d(const std::vector<Point2>& points, double reg_epsilon) {
  if (points.empty()) throw std::invalid_argument("fit_gaussian_2d: empty input");
  const double n = static_cast<double>(points.size());
  Point2 mean{0.0, 0.0};
  for (const Point2& p : points) mean = mean + p;
  mean = mean * (1.0 / n);

  double xx = 0.0, xy = 0.0, yy = 0.0;
  for (const Point2& p : points) {
    const Point2 d = p - mean;
    xx += d.x * d.x;
    xy += d.x * d.y;
    yy += d.y * d.y;
  }
  Gaussian2D g;
  g.mean = mean;
  g.cov_xx = xx / n + reg_epsilon;
  g.cov_xy = xy / n;
  g.cov_yy = yy / n + reg_epsilon;
  return g;
}

/// log N(p; mu, Sigma) = -log(2*pi) - 1/2 log|Sigma| - 1/2 (p-mu)' Sigma^-1 (p-mu)
inline double log_gaussian_pdf(Point2 p, const Gaussian2D& g) {
  const double det = g.det();
  if (!(det > 1e-12))
    throw NumericError("log_gaussian_pdf: covariance determinant " + std::to_string(det) +
                       " below 1e-12");
  const Point2 d = p - g.mean;
  const double quad = (d.x * d.x * g.cov_yy - 2.0 * d.x * d.y * g.cov_xy + d.y * d.y * g.cov_xx) / det;
  return -k_log_two_pi - 0.5 * std::log(det) - 0.5 * quad;
}

/// 1D Gaussian log-density.
inline double log_gaussian1d_pdf(double x, double mu, double sigma) {
  if (!(sigma > 0.0)) throw NumericError("log_gaussian1d_pdf: sigma must be positive");
  const double z = (x - mu) / sigma;
  return -0.5 * k_log_two_pi - std::log(sigma) - 0.5 * z * z;
}

}  // namespace signbow
