#pragma once

#include <cmath>
#include <vector>

#include "signbow/common.hpp"
#include "signbow/gaussian.hpp"

namespace signbow {

/// 1D Gaussian over a class's amount of movement, sigma floored.
struct AmountModel {
  double mu = 0.0;
  double sigma = 1.0;

  friend bool operator==(const AmountModel&, const AmountModel&) = default;
};

/// Smoothed categorical over quantized direction bins.
struct TrajectoryClassModel {
  std::vector<double> theta;

  friend bool operator==(const TrajectoryClassModel&, const TrajectoryClassModel&) = default;
};

/// 0/1 exponent on the trajectory factor: inactive for classes whose mean
/// movement stays at or under the threshold.
struct MovementGate {
  bool active = true;

  friend bool operator==(const MovementGate&, const MovementGate&) = default;
};

/// Maximum distance between any two positions of the track; 0 for a single
/// point. O(n^2) scan over all pairs.
inline double amount_of_movement(const std::vector<Point2>& track) {
  if (track.empty()) throw std::invalid_argument("amount_of_movement: empty track");
  double best = 0.0;
  for (std::size_t i = 0; i + 1 < track.size(); ++i)
    for (std::size_t j = i + 1; j < track.size(); ++j)
      best = std::max(best, distance(track[i], track[j]));
  return best;
}

inline AmountModel fit_amount_model(const std::vector<double>& amounts, double sigma_floor) {
  if (amounts.empty()) throw std::invalid_argument("fit_amount_model: empty input");
  AmountModel m;
  m.mu = mean_of(amounts);
  m.sigma = std::max(population_stddev(amounts), sigma_floor);
  return m;
}

inline double amount_log_prob(double x_am, const AmountModel& m) {
  return log_gaussian1d_pdf(x_am, m.mu, m.sigma);
}

/// Normalized displacement between consecutive positions; pairs whose
/// displacement norm falls below min_displacement are skipped, so the result
/// may be empty.
inline std::vector<Point2> extract_directions(const std::vector<Point2>& track,
                                              double min_displacement) {
  std::vector<Point2> out;
  for (std::size_t i = 0; i + 1 < track.size(); ++i) {
    const Point2 d = track[i + 1] - track[i];
    const double len = norm(d);
    if (len < min_displacement || len <= 0.0) continue;
    out.push_back(d * (1.0 / len));
  }
  return out;
}

/// Bin whose center angle 2*pi*i/D is nearest to the vector's angle,
/// half-open boundaries [center - pi/D, center + pi/D).
inline int quantize_direction(Point2 v, int bins) {
  if (bins < 2) throw std::invalid_argument("quantize_direction: need at least 2 bins");
  if (std::abs(norm(v) - 1.0) > 1e-6)
    throw std::invalid_argument("quantize_direction: input is not a unit vector");
  const double angle = std::atan2(v.y, v.x);
  const double width = 2.0 * std::numbers::pi / bins;
  int idx = static_cast<int>(std::floor(angle / width + 0.5));
  idx %= bins;
  if (idx < 0) idx += bins;
  return idx;
}

/// Pooled bin counts over all training samples of a class, Laplace smoothed:
/// theta_i = (count_i + alpha) / (total + alpha*D). All-empty input gives the
/// uniform distribution.
inline TrajectoryClassModel fit_trajectory_model(
    const std::vector<std::vector<Point2>>& direction_lists, int bins, double alpha) {
  if (bins < 2) throw std::invalid_argument("fit_trajectory_model: need at least 2 bins");
  if (!(alpha > 0.0)) throw std::invalid_argument("fit_trajectory_model: alpha must be positive");
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  double total = 0.0;
  for (const auto& dirs : direction_lists)
    for (const Point2& v : dirs) {
      counts[static_cast<std::size_t>(quantize_direction(v, bins))] += 1.0;
      total += 1.0;
    }
  TrajectoryClassModel m;
  m.theta.resize(static_cast<std::size_t>(bins));
  for (int i = 0; i < bins; ++i)
    m.theta[static_cast<std::size_t>(i)] =
        (counts[static_cast<std::size_t>(i)] + alpha) / (total + alpha * bins);
  return m;
}

/// Per-direction-normalized log-likelihood (1/n) sum_i log theta[bin(d_i)];
/// 0 for an empty direction list. Length drops out, so samples of different
/// durations score on the same scale.
inline double trajectory_log_prob(const std::vector<Point2>& sample_directions,
                                  const TrajectoryClassModel& m, int bins) {
  if (static_cast<int>(m.theta.size()) != bins)
    throw std::invalid_argument("trajectory_log_prob: model/bins mismatch");
  if (sample_directions.empty()) return 0.0;
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (const Point2& v : sample_directions)
    ++counts[static_cast<std::size_t>(quantize_direction(v, bins))];
  return detail::counted_log_prob(counts, m.theta, sample_directions.size());
}

/// Same normalized likelihood over pre-quantized bin indices.
inline double trajectory_log_prob_bins(const std::vector<int>& bins_seq,
                                       const TrajectoryClassModel& m) {
  if (bins_seq.empty()) return 0.0;
  std::vector<std::size_t> counts(m.theta.size(), 0);
  for (int b : bins_seq) ++counts[static_cast<std::size_t>(b)];
  return detail::counted_log_prob(counts, m.theta, bins_seq.size());
}

inline MovementGate compute_movement_gate(const AmountModel& m, double threshold) {
  return MovementGate{m.mu > threshold};
}

/// Movement factor: the gate applies the trajectory term as a 0/1 multiplier
/// in log space; the amount term always contributes.
inline double movement_log_prob(const std::vector<Point2>& sample_directions, double x_am,
                                const TrajectoryClassModel& trajectory_model,
                                const AmountModel& amount_model, const MovementGate& gate,
                                int bins) {
  double s = amount_log_prob(x_am, amount_model);
  if (gate.active) s += trajectory_log_prob(sample_directions, trajectory_model, bins);
  return s;
}

}  // namespace signbow
