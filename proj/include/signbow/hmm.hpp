#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "signbow/classifier.hpp"
#include "signbow/common.hpp"
#include "signbow/kmeans.hpp"
#include "signbow/random.hpp"

namespace signbow {

/// Diagonal-covariance Gaussian mixture emission for one HMM state.
struct GmmEmission {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;      // [component][dim]
  std::vector<std::vector<double>> variances;  // [component][dim], >= floor

  friend bool operator==(const GmmEmission&, const GmmEmission&) = default;

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
};

inline double log_gmm_emission(const std::vector<double>& x, const GmmEmission& e) {
  if (static_cast<int>(x.size()) != e.dim())
    throw std::invalid_argument("log_gmm_emission: dimension mismatch");
  std::vector<double> terms(e.weights.size());
  for (std::size_t k = 0; k < e.weights.size(); ++k) {
    double lp = std::log(e.weights[k]);
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double var = e.variances[k][d];
      const double diff = x[d] - e.means[k][d];
      lp += -0.5 * (k_log_two_pi + std::log(var) + diff * diff / var);
    }
    terms[k] = lp;
  }
  return log_sum_exp(terms);
}

/// Left-to-right chain with skip transitions: from state i only i, i+1, i+2
/// are reachable. Start state is always 0.
struct LeftRightHMM {
  int num_states = 0;
  std::vector<double> log_initial;                 // [N], state 0 forced
  std::vector<std::vector<double>> log_transitions;  // [N][N], -inf off support
  std::vector<GmmEmission> emissions;              // [N]

  friend bool operator==(const LeftRightHMM&, const LeftRightHMM&) = default;

  int feature_dim() const { return emissions.empty() ? 0 : emissions.front().dim(); }
  static bool allowed(int i, int j, int n) { return j >= i && j <= i + 2 && j < n; }
};

/// Structural initialization: mass on state 0, uniform over the allowed
/// transition arcs, unit variances, small seeded jitter on the means so that
/// mixture components are distinguishable before data-driven init.
inline LeftRightHMM init_left_right(int num_states, int feature_dim, std::uint64_t seed,
                                    int components = 1) {
  if (num_states < 1) throw std::invalid_argument("init_left_right: num_states must be >= 1");
  if (feature_dim <= 0) throw std::invalid_argument("init_left_right: feature_dim must be > 0");
  if (components < 1) throw std::invalid_argument("init_left_right: components must be >= 1");
  LeftRightHMM h;
  h.num_states = num_states;
  h.log_initial.assign(num_states, k_neg_inf);
  h.log_initial[0] = 0.0;
  h.log_transitions.assign(num_states, std::vector<double>(num_states, k_neg_inf));
  for (int i = 0; i < num_states; ++i) {
    int arcs = 0;
    for (int j = 0; j < num_states; ++j)
      if (LeftRightHMM::allowed(i, j, num_states)) ++arcs;
    const double lp = -std::log(static_cast<double>(arcs));
    for (int j = 0; j < num_states; ++j)
      if (LeftRightHMM::allowed(i, j, num_states)) h.log_transitions[i][j] = lp;
  }
  Rng rng(derive_seed(seed, 0x1417));
  h.emissions.resize(num_states);
  for (auto& e : h.emissions) {
    e.weights.assign(components, 1.0 / components);
    e.means.assign(components, std::vector<double>(feature_dim, 0.0));
    e.variances.assign(components, std::vector<double>(feature_dim, 1.0));
    for (auto& mu : e.means)
      for (double& v : mu) v = 0.01 * rng.normal();
  }
  return h;
}

namespace detail {

inline void check_hmm_seq(const LeftRightHMM& h, const std::vector<std::vector<double>>& seq) {
  for (const auto& x : seq)
    if (static_cast<int>(x.size()) != h.feature_dim())
      throw std::invalid_argument("hmm: observation dimension mismatch");
}

/// alpha[t][j] = log P(x_0..x_t, state_t = j)
inline std::vector<std::vector<double>> forward_table(const LeftRightHMM& h,
                                                      const std::vector<std::vector<double>>& seq) {
  const int n = h.num_states;
  const std::size_t len = seq.size();
  std::vector<std::vector<double>> alpha(len, std::vector<double>(n, k_neg_inf));
  for (int j = 0; j < n; ++j)
    if (h.log_initial[j] > k_neg_inf)
      alpha[0][j] = h.log_initial[j] + log_gmm_emission(seq[0], h.emissions[j]);
  std::vector<double> terms;
  for (std::size_t t = 1; t < len; ++t)
    for (int j = 0; j < n; ++j) {
      terms.clear();
      for (int i = std::max(0, j - 2); i <= j; ++i)
        if (alpha[t - 1][i] > k_neg_inf && h.log_transitions[i][j] > k_neg_inf)
          terms.push_back(alpha[t - 1][i] + h.log_transitions[i][j]);
      if (!terms.empty())
        alpha[t][j] = log_sum_exp(terms) + log_gmm_emission(seq[t], h.emissions[j]);
    }
  return alpha;
}

/// beta[t][i] = log P(x_{t+1}..x_{T-1} | state_t = i)
inline std::vector<std::vector<double>> backward_table(const LeftRightHMM& h,
                                                       const std::vector<std::vector<double>>& seq) {
  const int n = h.num_states;
  const std::size_t len = seq.size();
  std::vector<std::vector<double>> beta(len, std::vector<double>(n, k_neg_inf));
  for (int i = 0; i < n; ++i) beta[len - 1][i] = 0.0;
  std::vector<double> terms;
  for (std::size_t t = len - 1; t-- > 0;)
    for (int i = 0; i < n; ++i) {
      terms.clear();
      for (int j = i; j <= std::min(n - 1, i + 2); ++j)
        if (h.log_transitions[i][j] > k_neg_inf && beta[t + 1][j] > k_neg_inf)
          terms.push_back(h.log_transitions[i][j] + log_gmm_emission(seq[t + 1], h.emissions[j]) +
                          beta[t + 1][j]);
      if (!terms.empty()) beta[t][i] = log_sum_exp(terms);
    }
  return beta;
}

}  // namespace detail

/// log P(seq | h) by the forward algorithm in log space.
inline double forward_log_likelihood(const std::vector<std::vector<double>>& seq,
                                     const LeftRightHMM& h) {
  if (seq.empty()) throw std::invalid_argument("forward_log_likelihood: empty sequence");
  detail::check_hmm_seq(h, seq);
  auto alpha = detail::forward_table(h, seq);
  return log_sum_exp(alpha.back());
}

/// Length-invariant variant used as a drop-in factor: log P(seq|h) / |seq|.
inline double forward_log_likelihood_per_frame(const std::vector<std::vector<double>>& seq,
                                               const LeftRightHMM& h) {
  return forward_log_likelihood(seq, h) / static_cast<double>(seq.size());
}

/// Segmental emission init: each sequence is cut into num_states contiguous
/// chunks; a state's emission is fit on its pooled chunk frames (k-means for
/// multi-component mixtures). States with too little data keep their current
/// emission parameters.
inline void segmental_emission_init(LeftRightHMM& h,
                                    const std::vector<std::vector<std::vector<double>>>& seqs,
                                    std::uint64_t seed, double variance_floor) {
  const int n = h.num_states;
  std::vector<std::vector<std::vector<double>>> pooled(n);
  for (const auto& seq : seqs) {
    const std::size_t len = seq.size();
    for (int s = 0; s < n; ++s) {
      const std::size_t lo = len * static_cast<std::size_t>(s) / static_cast<std::size_t>(n);
      const std::size_t hi = len * static_cast<std::size_t>(s + 1) / static_cast<std::size_t>(n);
      for (std::size_t t = lo; t < hi; ++t) pooled[s].push_back(seq[t]);
    }
  }
  const int dim = h.feature_dim();
  for (int s = 0; s < n; ++s) {
    GmmEmission& e = h.emissions[s];
    const auto& frames = pooled[s];
    const int comps = e.components();
    if (static_cast<int>(frames.size()) < comps || frames.empty()) continue;
    std::vector<int> assign(frames.size(), 0);
    if (comps == 1) {
      e.means[0].assign(dim, 0.0);
    } else {
      auto km = kmeans_fit(frames, comps, derive_seed(seed, 0x5E6, static_cast<std::uint64_t>(s)));
      e.means = km.centroids;
      assign = km.assignments;
    }
    std::vector<std::size_t> counts(comps, 0);
    std::vector<std::vector<double>> sums(comps, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < frames.size(); ++i) {
      ++counts[assign[i]];
      for (int d = 0; d < dim; ++d) sums[assign[i]][d] += frames[i][d];
    }
    for (int k = 0; k < comps; ++k) {
      if (counts[k] == 0) continue;  // keep jittered mean; weight handled below
      for (int d = 0; d < dim; ++d) e.means[k][d] = sums[k][d] / static_cast<double>(counts[k]);
    }
    for (int k = 0; k < comps; ++k) {
      e.variances[k].assign(dim, 0.0);
      for (std::size_t i = 0; i < frames.size(); ++i) {
        if (assign[i] != k) continue;
        for (int d = 0; d < dim; ++d) {
          const double diff = frames[i][d] - e.means[k][d];
          e.variances[k][d] += diff * diff;
        }
      }
      for (int d = 0; d < dim; ++d) {
        double v = counts[k] > 0 ? e.variances[k][d] / static_cast<double>(counts[k]) : 1.0;
        e.variances[k][d] = std::max(v, variance_floor);
      }
      e.weights[k] = std::max(static_cast<double>(counts[k]), 1e-3) /
                     static_cast<double>(frames.size());
    }
    double wsum = 0.0;
    for (double w : e.weights) wsum += w;
    for (double& w : e.weights) w /= wsum;
  }
}

/// Baum-Welch on the allowed transition support. Returns the updated model
/// and the per-iteration total log-likelihood trace (non-decreasing within
/// 1e-8, else NumericError). Stops when the relative improvement drops below
/// tol or after max_iters iterations.
inline std::pair<LeftRightHMM, std::vector<double>> baum_welch(
    const std::vector<std::vector<std::vector<double>>>& seqs_in, LeftRightHMM h,
    int max_iters = 50, double tol = 1e-4, double variance_floor = 1e-4) {
  std::vector<const std::vector<std::vector<double>>*> seqs;
  for (const auto& s : seqs_in)
    if (!s.empty()) seqs.push_back(&s);
  if (seqs.empty()) throw ValidationError("baum_welch: no nonempty sequences");
  for (const auto* s : seqs) detail::check_hmm_seq(h, *s);

  const int n = h.num_states;
  const int dim = h.feature_dim();
  std::vector<double> trace;

  for (int iter = 0; iter < max_iters; ++iter) {
    // Accumulators over all sequences.
    std::vector<std::vector<double>> trans_num(n, std::vector<double>(n, 0.0));
    std::vector<double> trans_den(n, 0.0);
    std::vector<std::vector<double>> comp_weight(n);             // [state][component]
    std::vector<std::vector<std::vector<double>>> comp_mean(n);  // [state][component][dim]
    std::vector<std::vector<std::vector<double>>> comp_var(n);
    for (int s = 0; s < n; ++s) {
      const int comps = h.emissions[s].components();
      comp_weight[s].assign(comps, 0.0);
      comp_mean[s].assign(comps, std::vector<double>(dim, 0.0));
      comp_var[s].assign(comps, std::vector<double>(dim, 0.0));
    }
    double total_ll = 0.0;

    for (const auto* seq_ptr : seqs) {
      const auto& seq = *seq_ptr;
      const std::size_t len = seq.size();
      auto alpha = detail::forward_table(h, seq);
      auto beta = detail::backward_table(h, seq);
      const double ll = log_sum_exp(alpha.back());
      if (!std::isfinite(ll))
        throw NumericError("baum_welch: sequence has zero likelihood under the current model");
      total_ll += ll;

      // State occupancy and per-component responsibilities.
      for (std::size_t t = 0; t < len; ++t)
        for (int s = 0; s < n; ++s) {
          const double lg = alpha[t][s] + beta[t][s] - ll;
          if (lg == k_neg_inf || !(lg > -700.0)) continue;
          const double gamma = std::exp(lg);
          const GmmEmission& e = h.emissions[s];
          const int comps = e.components();
          if (comps == 1) {
            comp_weight[s][0] += gamma;
            for (int d = 0; d < dim; ++d) {
              comp_mean[s][0][d] += gamma * seq[t][d];
              comp_var[s][0][d] += gamma * seq[t][d] * seq[t][d];
            }
          } else {
            std::vector<double> lk(comps);
            for (int k = 0; k < comps; ++k) {
              double lp = std::log(e.weights[k]);
              for (int d = 0; d < dim; ++d) {
                const double var = e.variances[k][d];
                const double diff = seq[t][d] - e.means[k][d];
                lp += -0.5 * (k_log_two_pi + std::log(var) + diff * diff / var);
              }
              lk[k] = lp;
            }
            const double lz = log_sum_exp(lk);
            for (int k = 0; k < comps; ++k) {
              const double r = gamma * std::exp(lk[k] - lz);
              comp_weight[s][k] += r;
              for (int d = 0; d < dim; ++d) {
                comp_mean[s][k][d] += r * seq[t][d];
                comp_var[s][k][d] += r * seq[t][d] * seq[t][d];
              }
            }
          }
        }

      // Transition expectations on the allowed support.
      for (std::size_t t = 0; t + 1 < len; ++t)
        for (int i = 0; i < n; ++i) {
          if (alpha[t][i] == k_neg_inf) continue;
          for (int j = i; j <= std::min(n - 1, i + 2); ++j) {
            if (h.log_transitions[i][j] == k_neg_inf || beta[t + 1][j] == k_neg_inf) continue;
            const double lxi = alpha[t][i] + h.log_transitions[i][j] +
                               log_gmm_emission(seq[t + 1], h.emissions[j]) + beta[t + 1][j] - ll;
            if (!(lxi > -700.0)) continue;
            const double xi = std::exp(lxi);
            trans_num[i][j] += xi;
            trans_den[i] += xi;
          }
        }
    }

    if (!trace.empty()) {
      const double prev = trace.back();
      if (total_ll < prev - 1e-8 * (1.0 + std::abs(prev)))
        throw NumericError("baum_welch: log-likelihood decreased");
      trace.push_back(total_ll);
      if ((total_ll - prev) / std::max(1.0, std::abs(prev)) < tol) break;
    } else {
      trace.push_back(total_ll);
    }

    // M-step. Rows or states with no occupancy keep their previous values.
    for (int i = 0; i < n; ++i) {
      if (trans_den[i] <= 0.0) continue;
      for (int j = 0; j < n; ++j) {
        if (!LeftRightHMM::allowed(i, j, n)) continue;
        h.log_transitions[i][j] =
            trans_num[i][j] > 0.0 ? std::log(trans_num[i][j] / trans_den[i]) : k_neg_inf;
      }
    }
    for (int s = 0; s < n; ++s) {
      GmmEmission& e = h.emissions[s];
      const int comps = e.components();
      double occ = 0.0;
      for (int k = 0; k < comps; ++k) occ += comp_weight[s][k];
      if (occ <= 0.0) continue;
      for (int k = 0; k < comps; ++k) {
        const double w = comp_weight[s][k];
        if (w <= 0.0) continue;
        for (int d = 0; d < dim; ++d) {
          const double mu = comp_mean[s][k][d] / w;
          e.means[k][d] = mu;
          // E[x^2] - mu^2; tiny negative rounding residue lands on the floor.
          e.variances[k][d] = std::max(comp_var[s][k][d] / w - mu * mu, variance_floor);
        }
        e.weights[k] = w / occ;
      }
      double wsum = 0.0;
      for (double w : e.weights) wsum += w;
      for (double& w : e.weights) w /= wsum;
    }
  }
  return {std::move(h), std::move(trace)};
}

// ---------------------------------------------------------------------------
// Backend: per-class HMM pairs on top of the shared structural model.

struct HMMClassModel {
  LeftRightHMM trajectory_hmm;  // over 2D direction vectors
  LeftRightHMM handshape_hmm;   // over K_hs probability vectors

  friend bool operator==(const HMMClassModel&, const HMMClassModel&) = default;
};

struct HmmClassEntry {
  int class_id = 0;
  std::optional<HMMClassModel> left;
  std::optional<HMMClassModel> right;

  friend bool operator==(const HmmClassEntry&, const HmmClassEntry&) = default;

  const std::optional<HMMClassModel>& hand_model(Hand h) const {
    return h == Hand::left ? left : right;
  }
};

/// The HMM backend reuses the BoW model for position, amount, gates, hand
/// usage and the presence rule; only trajectory/handshape scoring swaps out.
struct HmmBackend {
  SignModel base;
  std::vector<HmmClassEntry> hmms;  // ascending class_id, parallel to base.classes

  friend bool operator==(const HmmBackend&, const HmmBackend&) = default;

  const HmmClassEntry* find_class(int class_id) const {
    for (const auto& e : hmms)
      if (e.class_id == class_id) return &e;
    return nullptr;
  }
};

namespace detail {

inline LeftRightHMM fit_sequence_hmm(const std::vector<std::vector<std::vector<double>>>& seqs,
                                     int feature_dim, const TrainConfig& cfg,
                                     std::uint64_t seed) {
  LeftRightHMM h = init_left_right(cfg.hmm_states, feature_dim, seed, cfg.hmm_gmm_components);
  segmental_emission_init(h, seqs, derive_seed(seed, 1), cfg.hmm_variance_floor);
  bool any = false;
  for (const auto& s : seqs)
    if (!s.empty()) any = true;
  if (!any) return h;  // nothing to train on; structural init stands
  auto [trained, trace] = baum_welch(seqs, std::move(h), cfg.hmm_max_iters, cfg.hmm_tol,
                                     cfg.hmm_variance_floor);
  (void)trace;
  return trained;
}

inline std::vector<double> to_feature(const Point2& p) { return {p.x, p.y}; }

}  // namespace detail

/// Trains the shared BoW model plus, per class and used hand, one HMM over
/// direction sequences and one over raw handshape-vector sequences.
inline HmmBackend train_hmm_backend(const Dataset& d, const TrainConfig& cfg,
                                    unsigned threads = 1) {
  HmmBackend backend;
  backend.base = train(d, cfg, threads);

  auto by_class = detail::group_by_class(d);
  const auto class_ids = d.manifest.sorted_class_ids();
  backend.hmms.resize(class_ids.size());
  parallel_for(class_ids.size(), threads, [&](std::size_t i) {
    const int cid = class_ids[i];
    const ClassAnnotation* ann = d.manifest.find_class(cid);
    const auto& data = by_class.at(cid);
    HmmClassEntry entry;
    entry.class_id = cid;
    for (Hand h : {Hand::left, Hand::right}) {
      if (!ann->uses(h)) continue;
      std::vector<std::vector<std::vector<double>>> dir_seqs, hs_seqs;
      for (const SignSample* s : data.samples) {
        HandTrack track = extract_hand_track(*s, h);
        if (track.present_count == 0) continue;
        std::vector<std::vector<double>> dirs;
        for (const Point2& v : extract_directions(track.positions, cfg.min_displacement_cm))
          dirs.push_back(detail::to_feature(v));
        dir_seqs.push_back(std::move(dirs));
        hs_seqs.push_back(track.hs);
      }
      HMMClassModel hcm;
      const std::uint64_t base_seed =
          derive_seed(cfg.seed, 0x44AA, static_cast<std::uint64_t>(cid),
                      static_cast<std::uint64_t>(h == Hand::left ? 0 : 1));
      hcm.trajectory_hmm = detail::fit_sequence_hmm(dir_seqs, 2, cfg, derive_seed(base_seed, 2));
      hcm.handshape_hmm = detail::fit_sequence_hmm(hs_seqs, d.manifest.handshape_dim, cfg,
                                                   derive_seed(base_seed, 3));
      (h == Hand::left ? entry.left : entry.right) = std::move(hcm);
    }
    backend.hmms[i] = std::move(entry);
  });
  return backend;
}

/// Same combiner as classify(); the trajectory and handshape factors are the
/// per-frame-normalized forward log-likelihoods of the per-class HMMs.
inline std::vector<ClassScore> classify_hmm(const SignSample& s, const HmmBackend& backend,
                                            const FeatureMask& mask) {
  check_sample_dims(s, backend.base);
  SampleFeatures feats = extract_sample_features(s, backend.base);
  auto traj = [&backend](const SignClassEntry& entry, Hand hand, const HandFeatures& f,
                         const HandClassModel&) {
    if (f.directions.empty()) return 0.0;
    const HmmClassEntry* he = backend.find_class(entry.class_id);
    std::vector<std::vector<double>> seq;
    seq.reserve(f.directions.size());
    for (const Point2& v : f.directions) seq.push_back(detail::to_feature(v));
    return forward_log_likelihood_per_frame(seq, he->hand_model(hand)->trajectory_hmm);
  };
  auto hs = [&backend](const SignClassEntry& entry, Hand hand, const HandFeatures& f,
                       const HandClassModel&) {
    if (f.hs_vectors.empty()) return 0.0;
    const HmmClassEntry* he = backend.find_class(entry.class_id);
    return forward_log_likelihood_per_frame(f.hs_vectors, he->hand_model(hand)->handshape_hmm);
  };
  return detail::classify_features(feats, backend.base, mask, traj, hs);
}

inline int predict_hmm(const SignSample& s, const HmmBackend& backend, const FeatureMask& mask) {
  auto ranking = classify_hmm(s, backend, mask);
  if (ranking.empty()) throw std::invalid_argument("predict_hmm: model has no classes");
  return ranking.front().class_id;
}

}  // namespace signbow
