#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "signbow/classifier.hpp"
#include "signbow/hmm.hpp"

namespace signbow {

namespace detail {

using nlohmann::json;

inline json config_to_json(const TrainConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["direction_bins"] = c.direction_bins;
  j["codewords"] = c.codewords;
  j["alpha"] = c.alpha;
  j["reg_epsilon"] = c.reg_epsilon;
  j["sigma_floor"] = c.sigma_floor;
  j["gate_threshold_cm"] = c.gate_threshold_cm;
  j["presence_fraction"] = c.presence_fraction;
  j["min_displacement_cm"] = c.min_displacement_cm;
  j["hs_quantizer"] = hs_quantizer_name(c.hs_quantizer);
  j["hmm_states"] = c.hmm_states;
  j["hmm_gmm_components"] = c.hmm_gmm_components;
  j["hmm_variance_floor"] = c.hmm_variance_floor;
  j["hmm_max_iters"] = c.hmm_max_iters;
  j["hmm_tol"] = c.hmm_tol;
  return j;
}

inline TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.direction_bins = j.at("direction_bins").get<int>();
  c.codewords = j.at("codewords").get<int>();
  c.alpha = j.at("alpha").get<double>();
  c.reg_epsilon = j.at("reg_epsilon").get<double>();
  c.sigma_floor = j.at("sigma_floor").get<double>();
  c.gate_threshold_cm = j.at("gate_threshold_cm").get<double>();
  c.presence_fraction = j.at("presence_fraction").get<double>();
  c.min_displacement_cm = j.at("min_displacement_cm").get<double>();
  c.hs_quantizer = hs_quantizer_from_name(j.at("hs_quantizer").get<std::string>());
  c.hmm_states = j.at("hmm_states").get<int>();
  c.hmm_gmm_components = j.at("hmm_gmm_components").get<int>();
  c.hmm_variance_floor = j.at("hmm_variance_floor").get<double>();
  c.hmm_max_iters = j.at("hmm_max_iters").get<int>();
  c.hmm_tol = j.at("hmm_tol").get<double>();
  return c;
}

inline json gaussian_to_json(const Gaussian2D& g) {
  return json{{"mean", {g.mean.x, g.mean.y}}, {"cov", {g.cov_xx, g.cov_xy, g.cov_yy}}};
}

inline Gaussian2D gaussian_from_json(const json& j) {
  Gaussian2D g;
  g.mean = {j.at("mean").at(0).get<double>(), j.at("mean").at(1).get<double>()};
  g.cov_xx = j.at("cov").at(0).get<double>();
  g.cov_xy = j.at("cov").at(1).get<double>();
  g.cov_yy = j.at("cov").at(2).get<double>();
  return g;
}

inline json hand_model_to_json(const HandClassModel& h) {
  json j;
  j["position"] = {{"fp", gaussian_to_json(h.position.fp)}, {"lp", gaussian_to_json(h.position.lp)}};
  j["amount"] = {{"mu", h.amount.mu}, {"sigma", h.amount.sigma}};
  j["trajectory"] = {{"theta", h.trajectory.theta}};
  j["handshape"] = {{"phi", h.handshape.phi}};
  j["gate"] = {{"active", h.gate.active}};
  return j;
}

inline HandClassModel hand_model_from_json(const json& j) {
  HandClassModel h;
  h.position.fp = gaussian_from_json(j.at("position").at("fp"));
  h.position.lp = gaussian_from_json(j.at("position").at("lp"));
  h.amount.mu = j.at("amount").at("mu").get<double>();
  h.amount.sigma = j.at("amount").at("sigma").get<double>();
  h.trajectory.theta = j.at("trajectory").at("theta").get<std::vector<double>>();
  h.handshape.phi = j.at("handshape").at("phi").get<std::vector<double>>();
  h.gate.active = j.at("gate").at("active").get<bool>();
  return h;
}

inline json gmm_emission_to_json(const GmmEmission& e) {
  return json{{"weights", e.weights}, {"means", e.means}, {"variances", e.variances}};
}

inline GmmEmission gmm_emission_from_json(const json& j) {
  GmmEmission e;
  e.weights = j.at("weights").get<std::vector<double>>();
  e.means = j.at("means").get<std::vector<std::vector<double>>>();
  e.variances = j.at("variances").get<std::vector<std::vector<double>>>();
  return e;
}

inline json hmm_to_json(const LeftRightHMM& h) {
  // -inf cells are stored as probability 0 so the file stays valid JSON.
  std::vector<std::vector<double>> trans(h.num_states, std::vector<double>(h.num_states, 0.0));
  for (int i = 0; i < h.num_states; ++i)
    for (int j = 0; j < h.num_states; ++j)
      if (h.log_transitions[i][j] > k_neg_inf) trans[i][j] = std::exp(h.log_transitions[i][j]);
  json j;
  j["num_states"] = h.num_states;
  j["transitions"] = trans;
  json ems = json::array();
  for (const auto& e : h.emissions) ems.push_back(gmm_emission_to_json(e));
  j["emissions"] = ems;
  return j;
}

inline LeftRightHMM hmm_from_json(const json& j) {
  LeftRightHMM h;
  h.num_states = j.at("num_states").get<int>();
  h.log_initial.assign(h.num_states, k_neg_inf);
  h.log_initial[0] = 0.0;
  auto trans = j.at("transitions").get<std::vector<std::vector<double>>>();
  h.log_transitions.assign(h.num_states, std::vector<double>(h.num_states, k_neg_inf));
  for (int a = 0; a < h.num_states; ++a)
    for (int b = 0; b < h.num_states; ++b)
      if (trans[a][b] > 0.0) h.log_transitions[a][b] = std::log(trans[a][b]);
  for (const auto& ej : j.at("emissions")) h.emissions.push_back(gmm_emission_from_json(ej));
  return h;
}

}  // namespace detail

struct LoadedModel {
  Backend backend = Backend::bow;
  SignModel bow;
  std::vector<HmmClassEntry> hmms;  // populated iff backend == hmm

  HmmBackend as_hmm() const {
    if (backend != Backend::hmm)
      throw std::invalid_argument("model file does not contain an hmm backend");
    return {bow, hmms};
  }
};

namespace detail {

inline json model_to_json(const SignModel& m, Backend backend,
                          const std::vector<HmmClassEntry>* hmms) {
  json j;
  j["format_version"] = k_model_format_version;
  j["backend"] = backend_name(backend);
  j["handshape_dim"] = m.handshape_dim;
  j["config"] = config_to_json(m.config);
  if (m.quantizer.kind == HsQuantizerKind::codebook)
    j["codebook"] = m.quantizer.codebook.centroids;
  else
    j["codebook"] = json::array();
  json classes = json::array();
  for (const auto& e : m.classes) {
    json ej;
    ej["id"] = e.class_id;
    ej["name"] = e.name;
    ej["uses_left"] = e.uses_left;
    ej["uses_right"] = e.uses_right;
    if (e.left) ej["left"] = hand_model_to_json(*e.left);
    if (e.right) ej["right"] = hand_model_to_json(*e.right);
    classes.push_back(std::move(ej));
  }
  j["classes"] = std::move(classes);
  if (backend == Backend::hmm) {
    json hj = json::array();
    for (const auto& e : *hmms) {
      json ej;
      ej["id"] = e.class_id;
      for (Hand h : {Hand::left, Hand::right}) {
        const auto& hm = e.hand_model(h);
        if (!hm) continue;
        ej[hand_name(h)] = {{"trajectory_hmm", hmm_to_json(hm->trajectory_hmm)},
                            {"handshape_hmm", hmm_to_json(hm->handshape_hmm)}};
      }
      hj.push_back(std::move(ej));
    }
    j["hmm_classes"] = std::move(hj);
  }
  return j;
}

}  // namespace detail

inline void save_model(const SignModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open model file for writing: " + path);
  out << detail::model_to_json(m, Backend::bow, nullptr).dump(2) << "\n";
  if (!out) throw ValidationError("failed writing model file: " + path);
}

inline void save_model(const HmmBackend& b, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open model file for writing: " + path);
  out << detail::model_to_json(b.base, Backend::hmm, &b.hmms).dump(2) << "\n";
  if (!out) throw ValidationError("failed writing model file: " + path);
}

inline LoadedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != k_model_format_version)
      throw ValidationError("unsupported model format_version " + std::to_string(version) +
                            " (expected " + std::to_string(k_model_format_version) + ")");
    LoadedModel lm;
    lm.backend = backend_from_name(j.at("backend").get<std::string>());
    lm.bow.config = detail::config_from_json(j.at("config"));
    lm.bow.handshape_dim = j.at("handshape_dim").get<int>();
    if (lm.bow.config.hs_quantizer == HsQuantizerKind::codebook) {
      lm.bow.quantizer.kind = HsQuantizerKind::codebook;
      lm.bow.quantizer.codebook.centroids =
          j.at("codebook").get<std::vector<std::vector<double>>>();
    } else {
      lm.bow.quantizer.kind = HsQuantizerKind::argmax;
      lm.bow.quantizer.argmax_dim = lm.bow.handshape_dim;
    }
    for (const auto& ej : j.at("classes")) {
      SignClassEntry e;
      e.class_id = ej.at("id").get<int>();
      e.name = ej.at("name").get<std::string>();
      e.uses_left = ej.at("uses_left").get<bool>();
      e.uses_right = ej.at("uses_right").get<bool>();
      if (ej.contains("left")) e.left = detail::hand_model_from_json(ej.at("left"));
      if (ej.contains("right")) e.right = detail::hand_model_from_json(ej.at("right"));
      lm.bow.classes.push_back(std::move(e));
    }
    if (lm.backend == Backend::hmm) {
      for (const auto& ej : j.at("hmm_classes")) {
        HmmClassEntry e;
        e.class_id = ej.at("id").get<int>();
        for (Hand h : {Hand::left, Hand::right}) {
          if (!ej.contains(hand_name(h))) continue;
          HMMClassModel hm;
          hm.trajectory_hmm = detail::hmm_from_json(ej.at(hand_name(h)).at("trajectory_hmm"));
          hm.handshape_hmm = detail::hmm_from_json(ej.at(hand_name(h)).at("handshape_hmm"));
          (h == Hand::left ? e.left : e.right) = std::move(hm);
        }
        lm.hmms.push_back(std::move(e));
      }
    }
    return lm;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": malformed model file: " + e.what());
  }
}

}  // namespace signbow
