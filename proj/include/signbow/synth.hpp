#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "signbow/classifier.hpp"
#include "signbow/common.hpp"
#include "signbow/dataset.hpp"
#include "signbow/random.hpp"

namespace signbow {

/// Ground-truth generative parameters for one hand of one class.
struct HandPrototype {
  Point2 fp_mean{};
  Point2 lp_mean{};
  double pos_noise = 0.5;  // cm
  std::vector<double> direction_profile;  // over D bins, sums to 1
  double amount_mean = 0.0;  // cm
  double amount_noise = 0.5;  // cm
  std::vector<double> handshape_profile;  // over K_hs, sums to 1

  friend bool operator==(const HandPrototype&, const HandPrototype&) = default;
};

struct ClassPrototype {
  bool uses_left = false;
  bool uses_right = true;
  int frames_min = 10;
  int frames_max = 24;
  std::optional<HandPrototype> left;
  std::optional<HandPrototype> right;

  friend bool operator==(const ClassPrototype&, const ClassPrototype&) = default;

  bool uses(Hand h) const { return h == Hand::left ? uses_left : uses_right; }
  const std::optional<HandPrototype>& hand(Hand h) const {
    return h == Hand::left ? left : right;
  }
};

struct GeneratorConfig {
  int num_classes = 64;
  int num_subjects = 10;
  int reps_per_subject = 5;
  double subject_offset_scale = 1.5;  // cm
  std::uint64_t seed = 0;
  int direction_bins = 16;  // D
  int handshape_dim = 16;   // K_hs
  double fraction_one_handed = 42.0 / 64.0;
  double fraction_low_movement = 0.15;
  // Shape knobs for the sampled prototypes.
  double pos_noise_cm = 0.6;
  double amount_noise_cm = 0.8;
  double hs_noise = 0.2;
  int frames_min = 10;
  int frames_max = 24;
  double box_cm = 70.0;
  double min_separation_cm = 9.0;
  bool mismatch_curvature = false;  // adds arc-shaped trajectory distortion

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// Prototypes travel with the config that shaped them; the Bayes oracle needs
/// both (e.g. the subject offset scale it must marginalize over).
struct PrototypeSet {
  GeneratorConfig config;
  std::vector<ClassPrototype> prototypes;

  friend bool operator==(const PrototypeSet&, const PrototypeSet&) = default;
};

inline void validate_generator_config(const GeneratorConfig& cfg) {
  auto bad = [](const std::string& msg) { throw ValidationError("generator config: " + msg); };
  if (cfg.num_classes < 1) bad("num_classes must be >= 1");
  if (cfg.num_subjects < 1) bad("num_subjects must be >= 1");
  if (cfg.reps_per_subject < 1) bad("reps_per_subject must be >= 1");
  if (cfg.subject_offset_scale < 0) bad("subject_offset_scale must be >= 0");
  if (cfg.direction_bins < 4) bad("direction_bins must be >= 4");
  if (cfg.handshape_dim < 2) bad("handshape_dim must be >= 2");
  if (cfg.fraction_one_handed < 0 || cfg.fraction_one_handed > 1)
    bad("fraction_one_handed must be in [0,1]");
  if (cfg.fraction_low_movement < 0 || cfg.fraction_low_movement > 1)
    bad("fraction_low_movement must be in [0,1]");
  if (cfg.pos_noise_cm < 0) bad("pos_noise_cm must be >= 0");
  if (cfg.amount_noise_cm < 0) bad("amount_noise_cm must be >= 0");
  if (cfg.hs_noise < 0) bad("hs_noise must be >= 0");
  if (cfg.frames_min < 2) bad("frames_min must be >= 2");
  if (cfg.frames_max < cfg.frames_min) bad("frames_max must be >= frames_min");
  if (cfg.box_cm <= 0) bad("box_cm must be > 0");
  if (cfg.min_separation_cm < 0) bad("min_separation_cm must be >= 0");
}

inline void validate_prototypes(const PrototypeSet& ps) {
  validate_generator_config(ps.config);
  for (std::size_t k = 0; k < ps.prototypes.size(); ++k) {
    const ClassPrototype& p = ps.prototypes[k];
    auto bad = [&](const std::string& msg) {
      throw ValidationError("prototype " + std::to_string(k) + ": " + msg);
    };
    if (!p.uses_left && !p.uses_right) bad("uses no hand");
    if (p.frames_min < 2 || p.frames_max < p.frames_min) bad("bad frame range");
    for (Hand h : {Hand::left, Hand::right}) {
      if (p.uses(h) != p.hand(h).has_value()) bad("hand usage flag does not match payload");
      if (!p.hand(h)) continue;
      const HandPrototype& hp = *p.hand(h);
      if (static_cast<int>(hp.direction_profile.size()) != ps.config.direction_bins)
        bad("direction_profile size != D");
      if (static_cast<int>(hp.handshape_profile.size()) != ps.config.handshape_dim)
        bad("handshape_profile size != K_hs");
      double dsum = 0, hsum = 0;
      for (double v : hp.direction_profile) dsum += v;
      for (double v : hp.handshape_profile) hsum += v;
      if (std::abs(dsum - 1.0) > 1e-9) bad("direction_profile does not sum to 1");
      if (std::abs(hsum - 1.0) > 1e-9) bad("handshape_profile does not sum to 1");
      if (hp.amount_mean < 0) bad("amount_mean must be >= 0");
      if (hp.pos_noise < 0 || hp.amount_noise < 0) bad("negative noise scale");
      if (!is_finite(hp.fp_mean) || !is_finite(hp.lp_mean)) bad("non-finite position means");
    }
  }
}

namespace detail {

inline double bin_center_angle(int bin, int bins) {
  return 2.0 * M_PI * static_cast<double>(bin) / static_cast<double>(bins);
}

/// Circular mean direction of a profile; (1,0) fallback for balanced profiles.
inline Point2 profile_mean_direction(const std::vector<double>& profile) {
  Point2 sum{0.0, 0.0};
  const int bins = static_cast<int>(profile.size());
  for (int b = 0; b < bins; ++b) {
    const double a = bin_center_angle(b, bins);
    sum = sum + Point2{std::cos(a), std::sin(a)} * profile[b];
  }
  const double n = norm(sum);
  if (n < 1e-9) return {1.0, 0.0};
  return sum * (1.0 / n);
}

/// Three-bin bump centered on `center`: 0.6 there, 0.2 on each neighbor.
inline std::vector<double> bump_profile(int center, int bins) {
  std::vector<double> p(bins, 0.0);
  p[static_cast<std::size_t>(((center % bins) + bins) % bins)] = 0.6;
  p[static_cast<std::size_t>((((center - 1) % bins) + bins) % bins)] = 0.2;
  p[static_cast<std::size_t>((((center + 1) % bins) + bins) % bins)] = 0.2;
  return p;
}

/// Dominant codeword 0.6, a secondary 0.2, the rest uniform.
inline std::vector<double> handshape_bump(int dominant, int secondary, int dim) {
  std::vector<double> p(dim, 0.0);
  if (dim == 2) {
    p[dominant] = 0.7;
    p[secondary] = 0.3;
    return p;
  }
  const double rest = 0.2 / static_cast<double>(dim - 2);
  for (double& v : p) v = rest;
  p[dominant] = 0.6;
  p[secondary] = 0.2;
  return p;
}

inline double joint_separation(const HandPrototype& a, const HandPrototype& b) {
  const double dfp = distance(a.fp_mean, b.fp_mean);
  const double dlp = distance(a.lp_mean, b.lp_mean);
  return std::sqrt(dfp * dfp + dlp * dlp);
}

inline std::string pad_int(int v, int width) {
  std::ostringstream os;
  os << std::setw(width) << std::setfill('0') << v;
  return os.str();
}

/// Evenly spread membership flags with an exact total count.
inline bool spread_member(int index, int selected, int total) {
  const long long lo = static_cast<long long>(index) * selected / total;
  const long long hi = static_cast<long long>(index + 1) * selected / total;
  return hi > lo;
}

}  // namespace detail

/// Draws num_classes prototypes with a minimum pairwise separation in joint
/// (fp, lp) space, enforced per hand channel. One-handed classes use the
/// right hand. Deterministic for a given cfg.seed.
inline PrototypeSet sample_prototypes(const GeneratorConfig& cfg) {
  validate_generator_config(cfg);
  const int n = cfg.num_classes;
  const int n_one = static_cast<int>(round_half_up(cfg.fraction_one_handed * n));
  const int n_low = static_cast<int>(round_half_up(cfg.fraction_low_movement * n));

  Rng rng(derive_seed(cfg.seed, 0x9E17ULL));
  std::vector<HandPrototype> placed_left, placed_right;

  PrototypeSet ps;
  ps.config = cfg;
  for (int k = 0; k < n; ++k) {
    const bool one_handed = detail::spread_member(k, n_one, n);
    const bool low_movement = detail::spread_member(k, n_low, n);
    ClassPrototype proto;
    proto.uses_right = true;
    proto.uses_left = !one_handed;
    proto.frames_min = cfg.frames_min;
    proto.frames_max = cfg.frames_max;

    for (Hand h : {Hand::right, Hand::left}) {
      if (!proto.uses(h)) continue;
      auto& placed = h == Hand::left ? placed_left : placed_right;
      const double margin = 0.07 * cfg.box_cm;
      HandPrototype hp;
      double best_sep = -1.0;
      bool ok = false;
      for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
        hp.fp_mean = {rng.uniform(margin, cfg.box_cm - margin),
                      rng.uniform(margin, cfg.box_cm - margin)};
        hp.amount_mean = low_movement ? rng.uniform(1.0, 4.0) : rng.uniform(12.0, 30.0);
        const int bin = static_cast<int>(rng.uniform_int(0, cfg.direction_bins - 1));
        hp.direction_profile = detail::bump_profile(bin, cfg.direction_bins);
        const Point2 u = detail::profile_mean_direction(hp.direction_profile);
        hp.lp_mean = hp.fp_mean + u * hp.amount_mean;
        if (hp.lp_mean.x < 0 || hp.lp_mean.x > cfg.box_cm || hp.lp_mean.y < 0 ||
            hp.lp_mean.y > cfg.box_cm)
          continue;
        double sep = std::numeric_limits<double>::max();
        for (const auto& other : placed)
          sep = std::min(sep, detail::joint_separation(hp, other));
        best_sep = std::max(best_sep, placed.empty() ? cfg.min_separation_cm : sep);
        if (sep >= cfg.min_separation_cm) ok = true;
      }
      if (!ok) {
        std::ostringstream msg;
        msg << "cannot place class " << k << " (" << hand_name(h) << " hand) with separation "
            << cfg.min_separation_cm << " cm; best achieved " << best_sep << " cm";
        throw ValidationError(msg.str());
      }
      hp.pos_noise = cfg.pos_noise_cm;
      hp.amount_noise = cfg.amount_noise_cm;
      const int dom = static_cast<int>(rng.uniform_int(0, cfg.handshape_dim - 1));
      int sec = static_cast<int>(rng.uniform_int(0, cfg.handshape_dim - 2));
      if (sec >= dom) ++sec;
      hp.handshape_profile = detail::handshape_bump(dom, sec, cfg.handshape_dim);
      placed.push_back(hp);
      (h == Hand::left ? proto.left : proto.right) = std::move(hp);
    }
    ps.prototypes.push_back(std::move(proto));
  }
  return ps;
}

namespace detail {

/// One noisy draw from the handshape profile: a one-hot vector plus truncated
/// Gaussian noise, renormalized to a probability vector.
inline std::vector<double> draw_handshape(const std::vector<double>& profile, double noise,
                                          Rng& rng) {
  const std::size_t v = rng.categorical(profile);
  std::vector<double> x(profile.size(), 0.0);
  x[v] = 1.0;
  double sum = 0.0;
  for (double& e : x) {
    e = std::max(0.0, e + noise * rng.normal()) + 0.01;
    sum += e;
  }
  for (double& e : x) e /= sum;
  return x;
}

/// A directed random walk with exact endpoints: steps drawn from the
/// direction profile, scaled so the path length matches the drawn amount,
/// then linearly drift-corrected onto the target last position.
inline std::vector<Point2> draw_walk(const HandPrototype& hp, Point2 subject_offset, int frames,
                                     bool mismatch, Rng& rng) {
  const int bins = static_cast<int>(hp.direction_profile.size());
  const Point2 noise_fp{hp.pos_noise * rng.normal(), hp.pos_noise * rng.normal()};
  const Point2 noise_lp{hp.pos_noise * rng.normal(), hp.pos_noise * rng.normal()};
  const Point2 fp = hp.fp_mean + subject_offset + noise_fp;
  const Point2 anchor = hp.lp_mean + subject_offset + noise_lp;
  const double amount = std::max(hp.amount_mean + hp.amount_noise * rng.normal(), 0.2);
  Point2 dir = anchor - fp;
  const double dn = norm(dir);
  dir = dn > 1e-9 ? dir * (1.0 / dn) : profile_mean_direction(hp.direction_profile);
  const Point2 lp = fp + dir * amount;

  const int m = frames - 1;
  const double step_len = amount / static_cast<double>(m);
  const double width = 2.0 * M_PI / static_cast<double>(bins);
  std::vector<Point2> pos(static_cast<std::size_t>(frames));
  pos[0] = fp;
  for (int i = 1; i <= m; ++i) {
    const int bin = static_cast<int>(rng.categorical(hp.direction_profile));
    const double angle = bin_center_angle(bin, bins) + rng.uniform(-0.4, 0.4) * width;
    pos[i] = pos[i - 1] + Point2{std::cos(angle), std::sin(angle)} * step_len;
  }
  const Point2 endpoint_error = lp - pos[m];
  for (int i = 1; i < m; ++i)
    pos[i] = pos[i] + endpoint_error * (static_cast<double>(i) / static_cast<double>(m));
  pos[m] = lp;  // exact, independent of the walk's rounding

  if (mismatch) {
    const Point2 perp{-dir.y, dir.x};
    for (int i = 1; i < m; ++i)
      pos[i] = pos[i] + perp * (0.25 * amount * std::sin(M_PI * i / static_cast<double>(m)));
  }
  return pos;
}

/// Unused-hand clutter: a short aimless walk with random handshapes.
inline void fill_clutter(std::vector<Frame>& frames, Hand hand, const GeneratorConfig& cfg,
                         Rng& rng) {
  Point2 p{rng.uniform(0.0, cfg.box_cm), rng.uniform(0.0, cfg.box_cm)};
  std::vector<double> profile(cfg.handshape_dim, 1.0 / cfg.handshape_dim);
  for (auto& f : frames) {
    HandObservation obs;
    obs.present = true;
    obs.pos = p;
    obs.hs = draw_handshape(profile, cfg.hs_noise, rng);
    f.hand(hand) = std::move(obs);
    const double a = rng.uniform(0.0, 2.0 * M_PI);
    p = p + Point2{std::cos(a), std::sin(a)};
  }
}

}  // namespace detail

/// Expands prototypes into a fully validated dataset: per-subject positional
/// offsets, per-sample seeded walks, clutter or absence on unused hands.
inline Dataset generate_dataset(const PrototypeSet& ps) {
  validate_prototypes(ps);
  const GeneratorConfig& cfg = ps.config;

  Dataset d;
  d.manifest.num_classes = static_cast<int>(ps.prototypes.size());
  d.manifest.handshape_dim = cfg.handshape_dim;
  for (std::size_t k = 0; k < ps.prototypes.size(); ++k) {
    ClassAnnotation ann;
    ann.class_id = static_cast<int>(k);
    ann.name = "sign_" + detail::pad_int(static_cast<int>(k), 3);
    ann.uses_left = ps.prototypes[k].uses_left;
    ann.uses_right = ps.prototypes[k].uses_right;
    d.manifest.classes.push_back(std::move(ann));
  }

  std::vector<Point2> offsets(static_cast<std::size_t>(cfg.num_subjects) + 1);
  for (int s = 1; s <= cfg.num_subjects; ++s) {
    Rng rng(derive_seed(cfg.seed, 0x0FF5ULL, static_cast<std::uint64_t>(s)));
    offsets[static_cast<std::size_t>(s)] =
        Point2{rng.normal(), rng.normal()} * cfg.subject_offset_scale;
  }

  std::uint64_t index = 0;
  for (std::size_t k = 0; k < ps.prototypes.size(); ++k) {
    const ClassPrototype& proto = ps.prototypes[k];
    for (int subj = 1; subj <= cfg.num_subjects; ++subj) {
      for (int rep = 0; rep < cfg.reps_per_subject; ++rep, ++index) {
        Rng rng(derive_seed(cfg.seed, 0xDA7AULL, index));
        SignSample sample;
        sample.id = "c" + detail::pad_int(static_cast<int>(k), 3) + "_s" +
                    detail::pad_int(subj, 2) + "_r" + detail::pad_int(rep, 2);
        sample.subject = subj;
        sample.class_label = static_cast<int>(k);
        const int frames =
            static_cast<int>(rng.uniform_int(proto.frames_min, proto.frames_max));
        sample.frames.resize(static_cast<std::size_t>(frames));
        for (int t = 0; t < frames; ++t) sample.frames[static_cast<std::size_t>(t)].t = t;

        for (Hand h : {Hand::left, Hand::right}) {
          if (proto.uses(h)) {
            auto walk = detail::draw_walk(*proto.hand(h), offsets[static_cast<std::size_t>(subj)],
                                          frames, cfg.mismatch_curvature, rng);
            for (int t = 0; t < frames; ++t) {
              HandObservation obs;
              obs.present = true;
              obs.pos = walk[static_cast<std::size_t>(t)];
              obs.hs = detail::draw_handshape(proto.hand(h)->handshape_profile, cfg.hs_noise, rng);
              sample.frames[static_cast<std::size_t>(t)].hand(h) = std::move(obs);
            }
          } else if (rng.uniform() < 0.5) {
            detail::fill_clutter(sample.frames, h, cfg, rng);
          }  // else: hand absent in every frame
        }
        d.samples.push_back(std::move(sample));
      }
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Bayes-oracle scorer

namespace detail {

inline double log_normal1d(double x, double mean, double var) {
  const double diff = x - mean;
  return -0.5 * (k_log_two_pi + std::log(var) + diff * diff / var);
}

inline double log_isotropic2d(Point2 x, Point2 mean, double var) {
  return log_normal1d(x.x, mean.x, var) + log_normal1d(x.y, mean.y, var);
}

}  // namespace detail

/// Scores one sample under the true generative parameters of every class and
/// returns the best class id. Mirrors the classifier's structure: hand-usage
/// exponents, the presence rule, the movement gate, smoothed profiles.
inline int oracle_predict(const PrototypeSet& ps, const SignSample& s) {
  const GeneratorConfig& cfg = ps.config;
  const double off2 = cfg.subject_offset_scale * cfg.subject_offset_scale;

  struct OracleFeatures {
    bool presence = false;
    std::size_t present_count = 0;
    Point2 first{}, last{};
    double amount = 0;
    std::vector<int> direction_bins;
    std::vector<int> vocab;  // argmax decode per frame
  };
  auto extract = [&](Hand h) {
    OracleFeatures f;
    HandTrack track = extract_hand_track(s, h);
    f.present_count = track.present_count;
    f.presence = hand_presence(s, h);
    if (track.present_count == 0) return f;
    f.first = track.positions.front();
    f.last = track.positions.back();
    f.amount = amount_of_movement(track.positions);
    for (const Point2& v : extract_directions(track.positions, 0.2))
      f.direction_bins.push_back(quantize_direction(v, cfg.direction_bins));
    for (const auto& hs : track.hs) {
      if (static_cast<int>(hs.size()) != cfg.handshape_dim)
        throw ValidationError("oracle: sample '" + s.id + "' handshape dim mismatch");
      f.vocab.push_back(static_cast<int>(std::max_element(hs.begin(), hs.end()) - hs.begin()));
    }
    return f;
  };
  const OracleFeatures left = extract(Hand::left);
  const OracleFeatures right = extract(Hand::right);

  int best_class = -1;
  double best_score = k_neg_inf;
  bool best_impossible = true;
  for (std::size_t k = 0; k < ps.prototypes.size(); ++k) {
    const ClassPrototype& proto = ps.prototypes[k];
    bool impossible = false;
    double score = 0.0;
    for (Hand h : {Hand::left, Hand::right}) {
      if (!proto.uses(h)) continue;
      const OracleFeatures& f = h == Hand::left ? left : right;
      if (!f.presence) {
        impossible = true;
        break;
      }
      const HandPrototype& hp = *proto.hand(h);
      const double v_fp = hp.pos_noise * hp.pos_noise + off2;
      const double v_lp = v_fp + hp.amount_noise * hp.amount_noise;
      score += detail::log_isotropic2d(f.first, hp.fp_mean, v_fp);
      score += detail::log_isotropic2d(f.last, hp.lp_mean, v_lp);
      const double amount_sigma = std::max(hp.amount_noise, 0.3);
      score += detail::log_normal1d(f.amount, hp.amount_mean, amount_sigma * amount_sigma);
      if (hp.amount_mean > 5.0 && !f.direction_bins.empty()) {
        double t = 0.0;
        for (int b : f.direction_bins)
          t += std::log(0.98 * hp.direction_profile[static_cast<std::size_t>(b)] +
                        0.02 / cfg.direction_bins);
        score += t / static_cast<double>(f.direction_bins.size());
      }
      if (!f.vocab.empty()) {
        double t = 0.0;
        for (int v : f.vocab)
          t += std::log(0.98 * hp.handshape_profile[static_cast<std::size_t>(v)] +
                        0.02 / cfg.handshape_dim);
        score += t / static_cast<double>(f.vocab.size());
      }
    }
    const bool better = best_impossible != impossible
                            ? best_impossible
                            : (score > best_score && !impossible);
    if (best_class < 0 || better) {
      best_class = static_cast<int>(k);
      best_score = score;
      best_impossible = impossible;
    }
  }
  return best_class;
}

/// Accuracy of the Bayes-oracle classifier; the upper reference for learned
/// models on data generated from these prototypes.
inline double oracle_accuracy(const PrototypeSet& ps, const Dataset& d) {
  if (ps.prototypes.empty()) throw ValidationError("oracle: empty prototype set");
  if (d.samples.empty()) throw ValidationError("oracle: empty dataset");
  std::size_t correct = 0;
  for (const auto& s : d.samples) {
    if (!s.class_label) throw ValidationError("oracle: sample '" + s.id + "' is unlabeled");
    if (*s.class_label < 0 || *s.class_label >= static_cast<int>(ps.prototypes.size()))
      throw ValidationError("oracle: sample '" + s.id + "' labels class " +
                            std::to_string(*s.class_label) + " outside the prototype set");
    if (oracle_predict(ps, s) == *s.class_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(d.samples.size());
}

// ---------------------------------------------------------------------------
// Purpose-built sets for ablation-style experiments

/// 27 one-handed classes on a 3x3x3 grid: 3 position anchors x 3 direction
/// profiles x 3 handshape profiles. The three direction profiles share one
/// circular mean, so endpoints leak no trajectory information: each single
/// feature narrows 27 classes to 9, each pair to 3.
inline PrototypeSet ablation_prototypes(std::uint64_t seed = 0) {
  GeneratorConfig cfg;
  cfg.num_classes = 27;
  cfg.num_subjects = 6;
  cfg.reps_per_subject = 5;
  cfg.subject_offset_scale = 1.0;
  cfg.seed = seed;
  cfg.fraction_one_handed = 1.0;
  cfg.fraction_low_movement = 0.0;

  const int base_bin = 2;  // 45 degrees at D=16
  const std::vector<Point2> anchors = {{15, 15}, {35, 45}, {55, 15}};
  std::vector<std::vector<double>> move_profiles;
  {
    std::vector<double> p0(cfg.direction_bins, 0.0), p1 = p0, p2 = p0;
    p0[base_bin] = 1.0;
    p1[base_bin - 1] = 0.5;
    p1[base_bin + 1] = 0.5;
    p2[base_bin - 2] = 0.5;
    p2[base_bin + 2] = 0.5;
    move_profiles = {p0, p1, p2};
  }
  const std::vector<int> hs_dominant = {1, 6, 11};

  PrototypeSet ps;
  ps.config = cfg;
  for (int pos = 0; pos < 3; ++pos)
    for (int mov = 0; mov < 3; ++mov)
      for (int hs = 0; hs < 3; ++hs) {
        ClassPrototype proto;
        proto.uses_left = false;
        proto.uses_right = true;
        proto.frames_min = cfg.frames_min;
        proto.frames_max = cfg.frames_max;
        HandPrototype hp;
        hp.fp_mean = anchors[static_cast<std::size_t>(pos)];
        hp.pos_noise = cfg.pos_noise_cm;
        hp.direction_profile = move_profiles[static_cast<std::size_t>(mov)];
        hp.amount_mean = 18.0;
        hp.amount_noise = cfg.amount_noise_cm;
        const Point2 u = detail::profile_mean_direction(hp.direction_profile);
        hp.lp_mean = hp.fp_mean + u * hp.amount_mean;
        hp.handshape_profile = detail::handshape_bump(
            hs_dominant[static_cast<std::size_t>(hs)],
            (hs_dominant[static_cast<std::size_t>(hs)] + 3) % cfg.handshape_dim,
            cfg.handshape_dim);
        proto.right = std::move(hp);
        ps.prototypes.push_back(std::move(proto));
      }
  return ps;
}

/// Two classes identical except in handshape profile, for confusion-matrix
/// ablation experiments.
inline PrototypeSet handshape_twin_prototypes(std::uint64_t seed = 0) {
  GeneratorConfig cfg;
  cfg.num_classes = 2;
  cfg.num_subjects = 6;
  cfg.reps_per_subject = 5;
  cfg.subject_offset_scale = 1.0;
  cfg.seed = seed;
  cfg.fraction_one_handed = 1.0;
  cfg.fraction_low_movement = 0.0;

  PrototypeSet ps;
  ps.config = cfg;
  for (int k = 0; k < 2; ++k) {
    ClassPrototype proto;
    proto.uses_left = false;
    proto.uses_right = true;
    proto.frames_min = cfg.frames_min;
    proto.frames_max = cfg.frames_max;
    HandPrototype hp;
    hp.fp_mean = {30, 30};
    hp.pos_noise = cfg.pos_noise_cm;
    hp.direction_profile = detail::bump_profile(2, cfg.direction_bins);
    hp.amount_mean = 15.0;
    hp.amount_noise = cfg.amount_noise_cm;
    hp.lp_mean = hp.fp_mean + detail::profile_mean_direction(hp.direction_profile) * 15.0;
    hp.handshape_profile = detail::handshape_bump(k == 0 ? 2 : 9, k == 0 ? 5 : 12,
                                                  cfg.handshape_dim);
    proto.right = std::move(hp);
    ps.prototypes.push_back(std::move(proto));
  }
  return ps;
}

// ---------------------------------------------------------------------------
// Prototype JSON I/O

namespace detail {

inline nlohmann::json generator_config_to_json(const GeneratorConfig& c) {
  nlohmann::json j;
  j["num_classes"] = c.num_classes;
  j["num_subjects"] = c.num_subjects;
  j["reps_per_subject"] = c.reps_per_subject;
  j["subject_offset_scale"] = c.subject_offset_scale;
  j["seed"] = c.seed;
  j["direction_bins"] = c.direction_bins;
  j["handshape_dim"] = c.handshape_dim;
  j["fraction_one_handed"] = c.fraction_one_handed;
  j["fraction_low_movement"] = c.fraction_low_movement;
  j["pos_noise_cm"] = c.pos_noise_cm;
  j["amount_noise_cm"] = c.amount_noise_cm;
  j["hs_noise"] = c.hs_noise;
  j["frames_min"] = c.frames_min;
  j["frames_max"] = c.frames_max;
  j["box_cm"] = c.box_cm;
  j["min_separation_cm"] = c.min_separation_cm;
  j["mismatch_curvature"] = c.mismatch_curvature;
  return j;
}

inline GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.num_classes = j.at("num_classes").get<int>();
  c.num_subjects = j.at("num_subjects").get<int>();
  c.reps_per_subject = j.at("reps_per_subject").get<int>();
  c.subject_offset_scale = j.at("subject_offset_scale").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.direction_bins = j.at("direction_bins").get<int>();
  c.handshape_dim = j.at("handshape_dim").get<int>();
  c.fraction_one_handed = j.at("fraction_one_handed").get<double>();
  c.fraction_low_movement = j.at("fraction_low_movement").get<double>();
  c.pos_noise_cm = j.at("pos_noise_cm").get<double>();
  c.amount_noise_cm = j.at("amount_noise_cm").get<double>();
  c.hs_noise = j.at("hs_noise").get<double>();
  c.frames_min = j.at("frames_min").get<int>();
  c.frames_max = j.at("frames_max").get<int>();
  c.box_cm = j.at("box_cm").get<double>();
  c.min_separation_cm = j.at("min_separation_cm").get<double>();
  c.mismatch_curvature = j.at("mismatch_curvature").get<bool>();
  return c;
}

inline nlohmann::json hand_prototype_to_json(const HandPrototype& hp) {
  nlohmann::json j;
  j["fp_mean"] = {hp.fp_mean.x, hp.fp_mean.y};
  j["lp_mean"] = {hp.lp_mean.x, hp.lp_mean.y};
  j["pos_noise"] = hp.pos_noise;
  j["direction_profile"] = hp.direction_profile;
  j["amount_mean"] = hp.amount_mean;
  j["amount_noise"] = hp.amount_noise;
  j["handshape_profile"] = hp.handshape_profile;
  return j;
}

inline HandPrototype hand_prototype_from_json(const nlohmann::json& j) {
  HandPrototype hp;
  hp.fp_mean = {j.at("fp_mean").at(0).get<double>(), j.at("fp_mean").at(1).get<double>()};
  hp.lp_mean = {j.at("lp_mean").at(0).get<double>(), j.at("lp_mean").at(1).get<double>()};
  hp.pos_noise = j.at("pos_noise").get<double>();
  hp.direction_profile = j.at("direction_profile").get<std::vector<double>>();
  hp.amount_mean = j.at("amount_mean").get<double>();
  hp.amount_noise = j.at("amount_noise").get<double>();
  hp.handshape_profile = j.at("handshape_profile").get<std::vector<double>>();
  return hp;
}

}  // namespace detail

inline void save_prototypes(const PrototypeSet& ps, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = k_model_format_version;
  j["config"] = detail::generator_config_to_json(ps.config);
  nlohmann::json protos = nlohmann::json::array();
  for (const auto& p : ps.prototypes) {
    nlohmann::json pj;
    pj["uses_left"] = p.uses_left;
    pj["uses_right"] = p.uses_right;
    pj["frames_min"] = p.frames_min;
    pj["frames_max"] = p.frames_max;
    if (p.left) pj["left"] = detail::hand_prototype_to_json(*p.left);
    if (p.right) pj["right"] = detail::hand_prototype_to_json(*p.right);
    protos.push_back(std::move(pj));
  }
  j["prototypes"] = std::move(protos);
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write prototypes file: " + path);
  out << j.dump(2) << "\n";
}

inline PrototypeSet load_prototypes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open prototypes file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    PrototypeSet ps;
    ps.config = detail::generator_config_from_json(j.at("config"));
    for (const auto& pj : j.at("prototypes")) {
      ClassPrototype p;
      p.uses_left = pj.at("uses_left").get<bool>();
      p.uses_right = pj.at("uses_right").get<bool>();
      p.frames_min = pj.at("frames_min").get<int>();
      p.frames_max = pj.at("frames_max").get<int>();
      if (pj.contains("left")) p.left = detail::hand_prototype_from_json(pj.at("left"));
      if (pj.contains("right")) p.right = detail::hand_prototype_from_json(pj.at("right"));
      ps.prototypes.push_back(std::move(p));
    }
    validate_prototypes(ps);
    return ps;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": malformed prototypes file: " + e.what());
  }
}

}  // namespace signbow
