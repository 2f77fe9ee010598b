#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "signbow/common.hpp"
#include "signbow/dataset.hpp"
#include "signbow/handshape.hpp"
#include "signbow/movement.hpp"
#include "signbow/parallel.hpp"
#include "signbow/position.hpp"

namespace signbow {

enum class Backend { bow, hmm };

inline const char* backend_name(Backend b) { return b == Backend::bow ? "bow" : "hmm"; }

inline Backend backend_from_name(const std::string& name) {
  if (name == "bow") return Backend::bow;
  if (name == "hmm") return Backend::hmm;
  throw std::invalid_argument("unknown backend: " + name);
}

/// Everything a training run needs. Thread counts are deliberately not part
/// of the config: results must be identical at any parallelism level.
struct TrainConfig {
  std::uint64_t seed = 0;
  int direction_bins = 16;
  int codewords = 32;
  double alpha = 1.0;
  double reg_epsilon = 1e-4;        // cm^2
  double sigma_floor = 0.1;         // cm
  double gate_threshold_cm = 5.0;
  double presence_fraction = 0.5;
  double min_displacement_cm = 0.2;
  HsQuantizerKind hs_quantizer = HsQuantizerKind::codebook;
  // HMM backend
  int hmm_states = 4;
  int hmm_gmm_components = 1;
  double hmm_variance_floor = 1e-4;
  int hmm_max_iters = 50;
  double hmm_tol = 1e-4;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Which information sources the combiner may use. The structural one-hand /
/// two-hand handling (hand-usage exponents, absence penalties) is never
/// masked out.
struct FeatureMask {
  bool use_position = true;
  bool use_movement = true;
  bool use_handshape = true;

  friend bool operator==(const FeatureMask&, const FeatureMask&) = default;

  bool any() const { return use_position || use_movement || use_handshape; }
};

inline FeatureMask mask_from_name(const std::string& name) {
  if (name == "all") return {true, true, true};
  if (name == "hs") return {false, false, true};
  if (name == "mov") return {false, true, false};
  if (name == "pos") return {true, false, false};
  if (name == "hs-pos") return {true, false, true};
  if (name == "hs-mov") return {false, true, true};
  if (name == "pos-mov") return {true, true, false};
  throw std::invalid_argument("unknown feature mask: " + name);
}

inline std::string mask_name(const FeatureMask& m) {
  if (m.use_position && m.use_movement && m.use_handshape) return "all";
  if (m.use_position && m.use_movement) return "pos-mov";
  if (m.use_position && m.use_handshape) return "hs-pos";
  if (m.use_movement && m.use_handshape) return "hs-mov";
  if (m.use_position) return "pos";
  if (m.use_movement) return "mov";
  if (m.use_handshape) return "hs";
  throw std::invalid_argument("feature mask enables nothing");
}

/// All fitted factors for one (class, hand).
struct HandClassModel {
  PositionClassModel position;
  AmountModel amount;
  TrajectoryClassModel trajectory;
  HandshapeClassModel handshape;
  MovementGate gate;

  friend bool operator==(const HandClassModel&, const HandClassModel&) = default;
};

struct SignClassEntry {
  int class_id = 0;
  std::string name;
  bool uses_left = false;
  bool uses_right = false;
  std::optional<HandClassModel> left;   // present iff uses_left
  std::optional<HandClassModel> right;  // present iff uses_right

  friend bool operator==(const SignClassEntry&, const SignClassEntry&) = default;

  bool uses(Hand h) const { return h == Hand::left ? uses_left : uses_right; }
  const std::optional<HandClassModel>& hand_model(Hand h) const {
    return h == Hand::left ? left : right;
  }
};

struct SignModel {
  TrainConfig config;
  int handshape_dim = 0;
  HandshapeQuantizer quantizer;
  std::vector<SignClassEntry> classes;  // ascending class_id

  friend bool operator==(const SignModel&, const SignModel&) = default;

  const SignClassEntry* find_class(int class_id) const {
    for (const auto& e : classes)
      if (e.class_id == class_id) return &e;
    return nullptr;
  }
};

/// Extended-real class score; impossible classes carry -inf.
struct ClassScore {
  int class_id = 0;
  double log_score = 0.0;
  bool impossible = false;
};

// ---------------------------------------------------------------------------
// Feature extraction

/// A hand's present-frame observations, in frame order.
struct HandTrack {
  std::vector<Point2> positions;
  std::vector<std::vector<double>> hs;
  std::size_t present_count = 0;
  std::size_t total_frames = 0;
};

inline HandTrack extract_hand_track(const SignSample& s, Hand hand) {
  HandTrack t;
  t.total_frames = s.frames.size();
  for (const Frame& f : s.frames) {
    const HandObservation& obs = f.hand(hand);
    if (!obs.present) continue;
    if (!obs.pos || !obs.hs)
      throw ValidationError("sample '" + s.id + "': present hand without pos/hs");
    t.positions.push_back(*obs.pos);
    t.hs.push_back(*obs.hs);
    ++t.present_count;
  }
  return t;
}

/// x_a^h: true iff the hand is present in strictly more than
/// presence_fraction of the sample's frames.
inline bool hand_presence(const SignSample& s, Hand hand, double presence_fraction = 0.5) {
  std::size_t present = 0;
  for (const Frame& f : s.frames)
    if (f.hand(hand).present) ++present;
  return static_cast<double>(present) >
         presence_fraction * static_cast<double>(s.frames.size());
}

/// Everything the per-class scoring loop needs, computed once per sample.
struct HandFeatures {
  std::size_t present_count = 0;
  std::size_t total_frames = 0;
  bool presence = false;  // x_a^h
  Point2 first{};
  Point2 last{};
  double amount = 0.0;
  std::vector<Point2> directions;
  std::vector<int> direction_bins;
  std::vector<std::vector<double>> hs_vectors;
  std::vector<int> codewords;

  bool any_present() const { return present_count > 0; }
};

inline HandFeatures extract_hand_features(const SignSample& s, Hand hand, const SignModel& m) {
  HandTrack track = extract_hand_track(s, hand);
  HandFeatures f;
  f.present_count = track.present_count;
  f.total_frames = track.total_frames;
  f.presence = hand_presence(s, hand, m.config.presence_fraction);
  if (track.present_count > 0) {
    f.first = track.positions.front();
    f.last = track.positions.back();
    f.amount = amount_of_movement(track.positions);
    f.directions = extract_directions(track.positions, m.config.min_displacement_cm);
    f.direction_bins.reserve(f.directions.size());
    for (const Point2& v : f.directions)
      f.direction_bins.push_back(quantize_direction(v, m.config.direction_bins));
    f.codewords.reserve(track.hs.size());
    for (const auto& v : track.hs) f.codewords.push_back(m.quantizer.quantize(v));
    f.hs_vectors = std::move(track.hs);
  }
  return f;
}

struct SampleFeatures {
  HandFeatures left;
  HandFeatures right;

  const HandFeatures& hand(Hand h) const { return h == Hand::left ? left : right; }
};

inline SampleFeatures extract_sample_features(const SignSample& s, const SignModel& m) {
  return {extract_hand_features(s, Hand::left, m), extract_hand_features(s, Hand::right, m)};
}

// ---------------------------------------------------------------------------
// Scoring

namespace detail {

/// Shared combiner. The trajectory and handshape factors are pluggable so the
/// sequence-aware backend can swap in HMM forward scores; position, amount,
/// gates, hand-usage exponents and absence penalties stay identical.
template <typename TrajFn, typename HsFn>
double hand_score(const HandFeatures& f, const SignClassEntry& entry, Hand hand,
                  const HandClassModel& hcm, const FeatureMask& mask, TrajFn&& traj_score,
                  HsFn&& hs_score) {
  double s = 0.0;
  if (mask.use_position) {
    if (!f.any_present())
      throw std::invalid_argument("position factor requested for a hand with no present frames");
    s += position_log_prob(f.first, f.last, hcm.position);
  }
  if (mask.use_movement) {
    if (!f.any_present())
      throw std::invalid_argument("movement factor requested for a hand with no present frames");
    s += amount_log_prob(f.amount, hcm.amount);
    if (hcm.gate.active) s += traj_score(entry, hand, f, hcm);
  }
  if (mask.use_handshape) s += hs_score(entry, hand, f, hcm);
  return s;
}

template <typename TrajFn, typename HsFn>
std::vector<ClassScore> classify_features(const SampleFeatures& feats, const SignModel& m,
                                          const FeatureMask& mask, TrajFn&& traj_score,
                                          HsFn&& hs_score) {
  if (!mask.any()) throw std::invalid_argument("feature mask enables nothing");
  std::vector<ClassScore> out;
  out.reserve(m.classes.size());
  for (const auto& entry : m.classes) {
    ClassScore cs;
    cs.class_id = entry.class_id;
    for (Hand h : {Hand::left, Hand::right}) {
      if (!entry.uses(h)) continue;
      if (!feats.hand(h).presence) cs.impossible = true;  // a_c^h=1, x_a^h=0
    }
    if (cs.impossible) {
      cs.log_score = k_neg_inf;
    } else {
      for (Hand h : {Hand::left, Hand::right}) {
        if (!entry.uses(h)) continue;
        cs.log_score +=
            hand_score(feats.hand(h), entry, h, *entry.hand_model(h), mask, traj_score, hs_score);
      }
    }
    out.push_back(cs);
  }
  std::sort(out.begin(), out.end(), [](const ClassScore& a, const ClassScore& b) {
    if (a.impossible != b.impossible) return !a.impossible;
    if (a.log_score != b.log_score) return a.log_score > b.log_score;
    return a.class_id < b.class_id;
  });
  return out;
}

inline double bow_traj_score(const SignClassEntry&, Hand, const HandFeatures& f,
                             const HandClassModel& hcm) {
  return trajectory_log_prob_bins(f.direction_bins, hcm.trajectory);
}

inline double bow_hs_score(const SignClassEntry&, Hand, const HandFeatures& f,
                           const HandClassModel& hcm) {
  return handshape_log_prob_codewords(f.codewords, hcm.handshape);
}

}  // namespace detail

/// Log-probability of one hand's observations under one class's hand model,
/// restricted to the masked factors. Callers must gate by x_a^h before
/// requesting position or movement factors for an absent hand.
inline double hand_log_prob(const SignSample& s, Hand hand, const HandClassModel& hcm,
                            const SignModel& m, const FeatureMask& mask) {
  if (!mask.any()) throw std::invalid_argument("feature mask enables nothing");
  HandFeatures f = extract_hand_features(s, hand, m);
  SignClassEntry dummy;
  return detail::hand_score(f, dummy, hand, hcm, mask, detail::bow_traj_score,
                            detail::bow_hs_score);
}

inline void check_sample_dims(const SignSample& s, const SignModel& m) {
  for (const Frame& f : s.frames)
    for (Hand h : {Hand::left, Hand::right}) {
      const HandObservation& obs = f.hand(h);
      if (obs.present && obs.hs && static_cast<int>(obs.hs->size()) != m.handshape_dim)
        throw ValidationError("sample '" + s.id + "': handshape dim " +
                              std::to_string(obs.hs->size()) + " != model dim " +
                              std::to_string(m.handshape_dim));
    }
}

/// Full ranking, best first. Classes whose required hand fails the presence
/// rule are marked impossible and sort last; ties break toward the lower
/// class id.
inline std::vector<ClassScore> classify(const SignSample& s, const SignModel& m,
                                        const FeatureMask& mask) {
  check_sample_dims(s, m);
  SampleFeatures feats = extract_sample_features(s, m);
  return detail::classify_features(feats, m, mask, detail::bow_traj_score, detail::bow_hs_score);
}

inline int predict(const SignSample& s, const SignModel& m, const FeatureMask& mask) {
  auto ranking = classify(s, m, mask);
  if (ranking.empty()) throw std::invalid_argument("predict: model has no classes");
  return ranking.front().class_id;
}

// ---------------------------------------------------------------------------
// Training

namespace detail {

struct ClassTrainingData {
  std::vector<const SignSample*> samples;
};

inline std::map<int, ClassTrainingData> group_by_class(const Dataset& d) {
  std::map<int, ClassTrainingData> by_class;
  for (const auto& ann : d.manifest.classes) by_class[ann.class_id];
  for (const auto& s : d.samples) {
    if (!s.class_label)
      throw ValidationError("sample '" + s.id + "' is unlabeled; cannot train on it");
    auto it = by_class.find(*s.class_label);
    if (it == by_class.end())
      throw ValidationError("sample '" + s.id + "' has class " + std::to_string(*s.class_label) +
                            " not in manifest");
    it->second.samples.push_back(&s);
  }
  return by_class;
}

inline HandClassModel fit_hand_class_model(const std::vector<HandTrack>& tracks,
                                           const SignModel& model_globals,
                                           const TrainConfig& cfg) {
  std::vector<Point2> firsts, lasts;
  std::vector<double> amounts;
  std::vector<std::vector<Point2>> direction_lists;
  std::vector<std::vector<int>> codeword_lists;
  for (const HandTrack& t : tracks) {
    if (t.present_count == 0) continue;
    firsts.push_back(t.positions.front());
    lasts.push_back(t.positions.back());
    amounts.push_back(amount_of_movement(t.positions));
    direction_lists.push_back(extract_directions(t.positions, cfg.min_displacement_cm));
    std::vector<int> cw;
    cw.reserve(t.hs.size());
    for (const auto& v : t.hs) cw.push_back(model_globals.quantizer.quantize(v));
    codeword_lists.push_back(std::move(cw));
  }
  HandClassModel hcm;
  hcm.position = fit_position_model(firsts, lasts, cfg.reg_epsilon);
  hcm.amount = fit_amount_model(amounts, cfg.sigma_floor);
  hcm.trajectory = fit_trajectory_model(direction_lists, cfg.direction_bins, cfg.alpha);
  hcm.handshape =
      fit_handshape_model(codeword_lists, model_globals.quantizer.num_codewords(), cfg.alpha);
  hcm.gate = compute_movement_gate(hcm.amount, cfg.gate_threshold_cm);
  return hcm;
}

}  // namespace detail

/// Fits the full per-class, per-used-hand model set plus one global handshape
/// codebook over all present frames of used hands. Deterministic for a given
/// config.seed at any thread count.
inline SignModel train(const Dataset& d, const TrainConfig& cfg, unsigned threads = 1) {
  auto manifest_violations = validate_manifest(d.manifest);
  if (!manifest_violations.empty()) throw ValidationError(manifest_violations.front());

  auto by_class = detail::group_by_class(d);
  for (const auto& [cid, data] : by_class)
    if (data.samples.size() < 2)
      throw ValidationError("class " + std::to_string(cid) + " has " +
                            std::to_string(data.samples.size()) +
                            " training sample(s); need at least 2");

  SignModel m;
  m.config = cfg;
  m.handshape_dim = d.manifest.handshape_dim;

  // Global codebook over the present frames of used hands, all classes pooled.
  if (cfg.hs_quantizer == HsQuantizerKind::argmax) {
    m.quantizer.kind = HsQuantizerKind::argmax;
    m.quantizer.argmax_dim = d.manifest.handshape_dim;
  } else {
    std::vector<std::vector<double>> pooled;
    for (const auto& s : d.samples) {
      const ClassAnnotation* ann = d.manifest.find_class(*s.class_label);
      for (Hand h : {Hand::left, Hand::right}) {
        if (!ann->uses(h)) continue;
        for (const Frame& f : s.frames) {
          const HandObservation& obs = f.hand(h);
          if (obs.present && obs.hs) pooled.push_back(*obs.hs);
        }
      }
    }
    m.quantizer.kind = HsQuantizerKind::codebook;
    m.quantizer.codebook =
        fit_codebook(pooled, cfg.codewords, derive_seed(cfg.seed, 0xC0DEB00CULL), threads);
  }

  std::vector<int> class_ids = d.manifest.sorted_class_ids();
  m.classes.resize(class_ids.size());
  parallel_for(class_ids.size(), threads, [&](std::size_t i) {
    const int cid = class_ids[i];
    const ClassAnnotation* ann = d.manifest.find_class(cid);
    const auto& data = by_class.at(cid);
    SignClassEntry entry;
    entry.class_id = cid;
    entry.name = ann->name;
    entry.uses_left = ann->uses_left;
    entry.uses_right = ann->uses_right;
    for (Hand h : {Hand::left, Hand::right}) {
      if (!ann->uses(h)) continue;
      std::vector<HandTrack> tracks;
      tracks.reserve(data.samples.size());
      std::size_t with_presence = 0;
      for (const SignSample* s : data.samples) {
        tracks.push_back(extract_hand_track(*s, h));
        if (tracks.back().present_count > 0) ++with_presence;
      }
      if (with_presence == 0)
        throw ValidationError("class " + std::to_string(cid) + " is annotated as using the " +
                              hand_name(h) + " hand, but it is present in none of its samples");
      HandClassModel hcm = detail::fit_hand_class_model(tracks, m, cfg);
      (h == Hand::left ? entry.left : entry.right) = std::move(hcm);
    }
    m.classes[i] = std::move(entry);
  });
  return m;
}

}  // namespace signbow
