#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "signbow/common.hpp"
#include "signbow/gaussian.hpp"
#include "signbow/random.hpp"

namespace signbow {

/// First-position and last-position Gaussians for one (class, hand).
struct PositionClassModel {
  Gaussian2D fp;
  Gaussian2D lp;

  friend bool operator==(const PositionClassModel&, const PositionClassModel&) = default;
};

inline PositionClassModel fit_position_model(const std::vector<Point2>& first_positions,
                                             const std::vector<Point2>& last_positions,
                                             double reg_epsilon) {
  if (first_positions.empty() || last_positions.empty())
    throw std::invalid_argument("fit_position_model: empty input");
  if (first_positions.size() != last_positions.size())
    throw std::invalid_argument("fit_position_model: first/last length mismatch");
  return {fit_gaussian_2d(first_positions, reg_epsilon),
          fit_gaussian_2d(last_positions, reg_epsilon)};
}

/// fp-density at the track's first position plus lp-density at its last,
/// in log space. A single-frame track evaluates both at the same point.
inline double position_log_prob(Point2 track_first, Point2 track_last,
                                const PositionClassModel& m) {
  return log_gaussian_pdf(track_first, m.fp) + log_gaussian_pdf(track_last, m.lp);
}

// ---------------------------------------------------------------------------
// GMM/BIC modality analysis: how many mixture components the position data
// supports. Analysis utility only; the classifier always uses one Gaussian.

struct Gmm2Component {
  double weight = 1.0;
  Gaussian2D g;
};

struct Gmm2FitResult {
  std::vector<Gmm2Component> components;
  double log_likelihood = k_neg_inf;
  std::vector<double> trace;  // log-likelihood after each EM iteration
  bool valid = false;
};

namespace detail {

// k-means++ style seeding: first mean uniform, then distance-weighted.
inline std::vector<Point2> seed_means(const std::vector<Point2>& pts, int k, Rng& rng) {
  std::vector<Point2> means;
  means.push_back(pts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pts.size()) - 1))]);
  std::vector<double> d2(pts.size());
  while (static_cast<int>(means.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double best = std::numeric_limits<double>::max();
      for (const Point2& m : means) {
        const Point2 d = pts[i] - m;
        best = std::min(best, dot(d, d));
      }
      d2[i] = best;
      total += best;
    }
    if (!(total > 0.0)) {
      means.push_back(pts[0]);  // all points identical
      continue;
    }
    means.push_back(pts[rng.categorical(d2)]);
  }
  return means;
}

inline Gmm2FitResult fit_gmm2_once(const std::vector<Point2>& pts, int k, Rng& rng,
                                   int max_iters, double rel_tol) {
  const std::size_t n = pts.size();
  const Gaussian2D pooled = fit_gaussian_2d(pts, 1e-6);

  Gmm2FitResult r;
  r.components.resize(static_cast<std::size_t>(k));
  auto means = seed_means(pts, k, rng);
  for (int j = 0; j < k; ++j) {
    r.components[static_cast<std::size_t>(j)].weight = 1.0 / k;
    r.components[static_cast<std::size_t>(j)].g = pooled;
    r.components[static_cast<std::size_t>(j)].g.mean = means[static_cast<std::size_t>(j)];
  }

  std::vector<std::vector<double>> resp(n, std::vector<double>(static_cast<std::size_t>(k)));
  double prev_ll = k_neg_inf;
  for (int iter = 0; iter < max_iters; ++iter) {
    // E step
    double ll = 0.0;
    std::vector<double> logp(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) {
        const auto& c = r.components[static_cast<std::size_t>(j)];
        logp[static_cast<std::size_t>(j)] =
            (c.weight > 0.0 ? std::log(c.weight) + log_gaussian_pdf(pts[i], c.g) : k_neg_inf);
      }
      const double lse = log_sum_exp(logp);
      ll += lse;
      for (int j = 0; j < k; ++j)
        resp[i][static_cast<std::size_t>(j)] = std::exp(logp[static_cast<std::size_t>(j)] - lse);
    }
    r.trace.push_back(ll);
    if (!r.trace.empty() && ll + 1e-8 * (1.0 + std::abs(prev_ll)) < prev_ll)
      throw NumericError("gmm em: log-likelihood decreased");

    // M step
    for (int j = 0; j < k; ++j) {
      double nk = 0.0;
      Point2 mean{0.0, 0.0};
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i][static_cast<std::size_t>(j)];
        mean = mean + pts[i] * resp[i][static_cast<std::size_t>(j)];
      }
      if (nk < 1e-8) return r;  // collapsed component: this run is invalid
      mean = mean * (1.0 / nk);
      double xx = 0.0, xy = 0.0, yy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const Point2 d = pts[i] - mean;
        const double w = resp[i][static_cast<std::size_t>(j)];
        xx += w * d.x * d.x;
        xy += w * d.x * d.y;
        yy += w * d.y * d.y;
      }
      auto& c = r.components[static_cast<std::size_t>(j)];
      c.weight = nk / static_cast<double>(n);
      c.g.mean = mean;
      // Floor the diagonal instead of always adding: keeps exact EM updates
      // on healthy data, guards degenerate clusters.
      c.g.cov_xx = std::max(xx / nk, 1e-6);
      c.g.cov_xy = xy / nk;
      c.g.cov_yy = std::max(yy / nk, 1e-6);
      if (c.g.det() <= 1e-9) {
        c.g.cov_xx += 1e-6;
        c.g.cov_yy += 1e-6;
      }
    }

    if (iter > 0 && ll - prev_ll < rel_tol * std::max(1.0, std::abs(prev_ll))) {
      r.log_likelihood = ll;
      r.valid = true;
      return r;
    }
    prev_ll = ll;
  }
  r.log_likelihood = prev_ll;
  r.valid = true;
  return r;
}

}  // namespace detail

/// Full-covariance 2D GMM fit by EM: best of `restarts` seeded runs.
inline Gmm2FitResult fit_gmm2(const std::vector<Point2>& points, int k, std::uint64_t seed,
                              int restarts = 5, int max_iters = 200, double rel_tol = 1e-6) {
  if (k < 1) throw std::invalid_argument("fit_gmm2: k must be >= 1");
  if (static_cast<int>(points.size()) < k)
    throw std::invalid_argument("fit_gmm2: fewer points than components");
  Gmm2FitResult best;
  for (int rep = 0; rep < restarts; ++rep) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(rep)));
    Gmm2FitResult r = detail::fit_gmm2_once(points, k, rng, max_iters, rel_tol);
    if (r.valid && r.log_likelihood > best.log_likelihood) best = std::move(r);
  }
  if (!best.valid) throw NumericError("fit_gmm2: every restart collapsed");
  return best;
}

struct ModalityEntry {
  int components = 0;
  double bic = 0.0;
  Gmm2FitResult fit;
};

struct ModalityAnalysis {
  std::vector<ModalityEntry> entries;  // one per k = 1..max_components
  int best_components = 0;             // lowest BIC
};

/// BIC = -2 logL + (6k - 1) log n for a k-component full-covariance 2D GMM
/// (k-1 weights, 2k means, 3k covariance entries).
inline ModalityAnalysis analyze_position_modality(const std::vector<Point2>& points,
                                                  int max_components, std::uint64_t seed) {
  if (static_cast<int>(points.size()) <= max_components * 3)
    throw std::invalid_argument("analyze_position_modality: need more than 3 points per component");
  ModalityAnalysis out;
  double best_bic = std::numeric_limits<double>::max();
  for (int k = 1; k <= max_components; ++k) {
    ModalityEntry e;
    e.components = k;
    e.fit = fit_gmm2(points, k, seed);
    e.bic = -2.0 * e.fit.log_likelihood +
            static_cast<double>(6 * k - 1) * std::log(static_cast<double>(points.size()));
    if (e.bic < best_bic) {
      best_bic = e.bic;
      out.best_components = k;
    }
    out.entries.push_back(std::move(e));
  }
  return out;
}

}  // namespace signbow
