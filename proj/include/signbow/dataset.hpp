#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "signbow/common.hpp"
#include "signbow/random.hpp"

namespace signbow {

enum class Hand { left, right };

inline const char* hand_name(Hand h) { return h == Hand::left ? "left" : "right"; }

/// One hand in one frame. pos/hs carry a value iff the hand was tracked in
/// that frame; an absent hand carries no fields at all on disk.
struct HandObservation {
  bool present = false;
  std::optional<Point2> pos;
  std::optional<std::vector<double>> hs;

  friend bool operator==(const HandObservation&, const HandObservation&) = default;
};

struct Frame {
  std::int64_t t = 0;
  HandObservation left;
  HandObservation right;

  friend bool operator==(const Frame&, const Frame&) = default;

  const HandObservation& hand(Hand h) const { return h == Hand::left ? left : right; }
  HandObservation& hand(Hand h) { return h == Hand::left ? left : right; }
};

struct SignSample {
  std::string id;
  int subject = 1;
  std::optional<int> class_label;
  std::vector<Frame> frames;

  friend bool operator==(const SignSample&, const SignSample&) = default;
};

/// Per-class metadata: which hands the sign uses.
struct ClassAnnotation {
  int class_id = 0;
  std::string name;
  bool uses_left = false;
  bool uses_right = false;

  friend bool operator==(const ClassAnnotation&, const ClassAnnotation&) = default;

  bool uses(Hand h) const { return h == Hand::left ? uses_left : uses_right; }
};

struct DatasetManifest {
  int num_classes = 0;
  int handshape_dim = 0;
  std::vector<ClassAnnotation> classes;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;

  const ClassAnnotation* find_class(int class_id) const {
    for (const auto& c : classes)
      if (c.class_id == class_id) return &c;
    return nullptr;
  }

  /// Class ids in ascending order; the canonical iteration order everywhere.
  std::vector<int> sorted_class_ids() const {
    std::vector<int> ids;
    ids.reserve(classes.size());
    for (const auto& c : classes) ids.push_back(c.class_id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SignSample> samples;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---------------------------------------------------------------------------
// Validation

/// Violations are data, not failures: an empty list means the sample honors
/// every invariant for the given handshape dimension.
inline std::vector<std::string> validate_sample(const SignSample& s, int handshape_dim) {
  std::vector<std::string> out;
  auto fail = [&](const std::string& msg) { out.push_back("sample '" + s.id + "': " + msg); };

  if (s.id.empty()) fail("empty id");
  if (s.subject < 1) fail("subject must be >= 1");
  if (s.frames.empty()) fail("no frames");

  std::int64_t prev_t = -1;
  bool t_reported = false;
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    const Frame& f = s.frames[i];
    if (f.t < 0) fail("frame " + std::to_string(i) + ": negative frame index");
    if (f.t <= prev_t && !t_reported) {
      fail("frame indices not strictly increasing at frame " + std::to_string(i));
      t_reported = true;
    }
    prev_t = f.t;

    for (Hand h : {Hand::left, Hand::right}) {
      const HandObservation& obs = f.hand(h);
      std::string where = std::string(hand_name(h)) + " hand, frame " + std::to_string(i);
      if (obs.present) {
        if (!obs.pos) {
          fail(where + ": present but missing pos");
        } else if (!is_finite(*obs.pos)) {
          fail(where + ": non-finite position");
        }
        if (!obs.hs) {
          fail(where + ": present but missing hs");
        } else {
          const auto& hs = *obs.hs;
          if (static_cast<int>(hs.size()) != handshape_dim) {
            fail(where + ": hs length " + std::to_string(hs.size()) + " != handshape_dim " +
                 std::to_string(handshape_dim));
          } else {
            double sum = 0.0;
            bool bad_entry = false;
            for (double v : hs) {
              if (!std::isfinite(v) || v < 0.0 || v > 1.0) bad_entry = true;
              sum += v;
            }
            if (bad_entry) fail(where + ": hs entry outside [0,1]");
            if (std::abs(sum - 1.0) > 1e-6)
              fail(where + ": hs sums to " + std::to_string(sum) + ", expected 1");
          }
        }
      } else {
        if (obs.pos) fail(where + ": absent but carries pos");
        if (obs.hs) fail(where + ": absent but carries hs");
      }
    }
  }
  return out;
}

inline std::vector<std::string> validate_manifest(const DatasetManifest& m) {
  std::vector<std::string> out;
  if (m.num_classes != static_cast<int>(m.classes.size()))
    out.push_back("manifest: num_classes " + std::to_string(m.num_classes) + " != class list size " +
                  std::to_string(m.classes.size()));
  if (m.handshape_dim < 1) out.push_back("manifest: handshape_dim must be >= 1");
  std::set<int> ids;
  for (const auto& c : m.classes) {
    if (!ids.insert(c.class_id).second)
      out.push_back("manifest: duplicate class id " + std::to_string(c.class_id));
    if (!c.uses_left && !c.uses_right)
      out.push_back("manifest: class " + std::to_string(c.class_id) + " uses no hand");
  }
  return out;
}

inline std::vector<std::string> validate_dataset(const Dataset& d) {
  std::vector<std::string> out = validate_manifest(d.manifest);
  std::set<std::string> sample_ids;
  for (const auto& s : d.samples) {
    auto v = validate_sample(s, d.manifest.handshape_dim);
    out.insert(out.end(), v.begin(), v.end());
    if (s.class_label && !d.manifest.find_class(*s.class_label))
      out.push_back("sample '" + s.id + "': class " + std::to_string(*s.class_label) +
                    " not in manifest");
    if (!sample_ids.insert(s.id).second)
      out.push_back("duplicate sample id '" + s.id + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------
// File I/O
//
// Samples file: UTF-8, one JSON object per line,
//   {"id": str, "subject": int, "class": int|null,
//    "frames": [{"t": int, "l": {"present": bool, "pos": [x,y], "hs": [..]}
//                          | {"present": false}, "r": ...}]}
// Manifest file: one JSON object,
//   {"num_classes": int, "handshape_dim": int,
//    "classes": [{"id": int, "name": str, "uses_left": bool, "uses_right": bool}]}

namespace detail {

inline HandObservation hand_obs_from_json(const nlohmann::json& j) {
  HandObservation obs;
  obs.present = j.at("present").get<bool>();
  if (j.contains("pos")) {
    const auto& p = j.at("pos");
    obs.pos = Point2{p.at(0).get<double>(), p.at(1).get<double>()};
  }
  if (j.contains("hs")) obs.hs = j.at("hs").get<std::vector<double>>();
  return obs;
}

inline nlohmann::json hand_obs_to_json(const HandObservation& obs) {
  nlohmann::json j;
  j["present"] = obs.present;
  if (obs.pos) j["pos"] = {obs.pos->x, obs.pos->y};
  if (obs.hs) j["hs"] = *obs.hs;
  return j;
}

inline SignSample sample_from_json(const nlohmann::json& j) {
  SignSample s;
  s.id = j.at("id").get<std::string>();
  s.subject = j.at("subject").get<int>();
  if (j.contains("class") && !j.at("class").is_null()) s.class_label = j.at("class").get<int>();
  for (const auto& jf : j.at("frames")) {
    Frame f;
    f.t = jf.at("t").get<std::int64_t>();
    f.left = hand_obs_from_json(jf.at("l"));
    f.right = hand_obs_from_json(jf.at("r"));
    s.frames.push_back(std::move(f));
  }
  return s;
}

inline nlohmann::json sample_to_json(const SignSample& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["subject"] = s.subject;
  j["class"] = s.class_label ? nlohmann::json(*s.class_label) : nlohmann::json(nullptr);
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : s.frames) {
    nlohmann::json jf;
    jf["t"] = f.t;
    jf["l"] = hand_obs_to_json(f.left);
    jf["r"] = hand_obs_to_json(f.right);
    frames.push_back(std::move(jf));
  }
  j["frames"] = std::move(frames);
  return j;
}

}  // namespace detail

inline DatasetManifest load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ParseError("cannot open manifest file: " + manifest_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.num_classes = j.at("num_classes").get<int>();
    m.handshape_dim = j.at("handshape_dim").get<int>();
    for (const auto& jc : j.at("classes")) {
      ClassAnnotation c;
      c.class_id = jc.at("id").get<int>();
      c.name = jc.at("name").get<std::string>();
      c.uses_left = jc.at("uses_left").get<bool>();
      c.uses_right = jc.at("uses_right").get<bool>();
      m.classes.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path + ": " + e.what());
  }
  auto violations = validate_manifest(m);
  if (!violations.empty()) throw ValidationError(manifest_path + ": " + violations.front());
  return m;
}

/// Loads and fully validates a dataset. Parse problems report the offending
/// line; invariant violations report the offending sample id.
inline Dataset load_dataset(const std::string& samples_path, const std::string& manifest_path) {
  Dataset d;
  d.manifest = load_manifest(manifest_path);

  std::ifstream in(samples_path);
  if (!in) throw ParseError("cannot open samples file: " + samples_path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      d.samples.push_back(detail::sample_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(samples_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }

  auto violations = validate_dataset(d);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << samples_path << ": " << violations.size() << " violation(s); first: "
        << violations.front();
    throw ValidationError(msg.str());
  }
  return d;
}

/// Parses a samples file without a manifest (prediction inputs); per-sample
/// structural checks still run, with the handshape dimension taken from the
/// first present hand.
inline std::vector<SignSample> load_samples(const std::string& samples_path) {
  std::ifstream in(samples_path);
  if (!in) throw ParseError("cannot open samples file: " + samples_path);
  std::vector<SignSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      samples.push_back(detail::sample_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(samples_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return samples;
}

inline void save_manifest(const DatasetManifest& m, const std::string& manifest_path) {
  nlohmann::json j;
  j["num_classes"] = m.num_classes;
  j["handshape_dim"] = m.handshape_dim;
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : m.classes) {
    classes.push_back({{"id", c.class_id},
                       {"name", c.name},
                       {"uses_left", c.uses_left},
                       {"uses_right", c.uses_right}});
  }
  j["classes"] = std::move(classes);
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot write manifest file: " + manifest_path);
  out << j.dump(2) << "\n";
}

inline void save_dataset(const Dataset& d, const std::string& samples_path,
                         const std::string& manifest_path) {
  save_manifest(d.manifest, manifest_path);
  std::ofstream out(samples_path);
  if (!out) throw std::runtime_error("cannot write samples file: " + samples_path);
  for (const auto& s : d.samples) out << detail::sample_to_json(s).dump() << "\n";
}

// ---------------------------------------------------------------------------
// Splits

namespace detail {

inline std::map<int, std::vector<std::size_t>> indices_by_class(const Dataset& d) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    if (!d.samples[i].class_label)
      throw ValidationError("sample '" + d.samples[i].id + "' is unlabeled; cannot split");
    by_class[*d.samples[i].class_label].push_back(i);
  }
  return by_class;
}

}  // namespace detail

/// Round half up: the documented rounding for per-class train counts.
inline std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

/// Per class, round(train_fraction * n_c) samples go to train, the rest to
/// test. Deterministic for a given seed; train and test partition the input.
inline std::pair<Dataset, Dataset> split_stratified(const Dataset& d, double train_fraction,
                                                    std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("split_stratified: train_fraction must be in (0,1)");
  auto by_class = detail::indices_by_class(d);
  for (const auto& [cid, idx] : by_class)
    if (idx.size() < 2)
      throw ValidationError("class " + std::to_string(cid) + " has fewer than 2 samples");

  std::vector<std::size_t> train_idx, test_idx;
  for (auto& [cid, idx] : by_class) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cid)));
    rng.shuffle(idx);
    std::size_t n_train = round_half_up(train_fraction * static_cast<double>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k)
      (k < n_train ? train_idx : test_idx).push_back(idx[k]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  Dataset train{d.manifest, {}}, test{d.manifest, {}};
  for (std::size_t i : train_idx) train.samples.push_back(d.samples[i]);
  for (std::size_t i : test_idx) test.samples.push_back(d.samples[i]);
  return {std::move(train), std::move(test)};
}

/// Test set is exactly the held-out subject's samples.
inline std::pair<Dataset, Dataset> split_by_subject(const Dataset& d, int held_out_subject) {
  Dataset train{d.manifest, {}}, test{d.manifest, {}};
  for (const auto& s : d.samples)
    (s.subject == held_out_subject ? test : train).samples.push_back(s);
  if (test.samples.empty())
    throw ValidationError("subject " + std::to_string(held_out_subject) + " not in dataset");
  if (train.samples.empty())
    throw ValidationError("holding out subject " + std::to_string(held_out_subject) +
                          " leaves an empty training set");
  return {std::move(train), std::move(test)};
}

inline std::vector<int> subjects_of(const Dataset& d) {
  std::set<int> subjects;
  for (const auto& s : d.samples) subjects.insert(s.subject);
  return {subjects.begin(), subjects.end()};
}

}  // namespace signbow
