#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "signbow/common.hpp"
#include "signbow/kmeans.hpp"

namespace signbow {

/// Codeword centroids in the handshape-probability-vector space.
struct HandshapeCodebook {
  std::vector<std::vector<double>> centroids;

  friend bool operator==(const HandshapeCodebook&, const HandshapeCodebook&) = default;

  int size() const { return static_cast<int>(centroids.size()); }
  int dim() const { return centroids.empty() ? 0 : static_cast<int>(centroids.front().size()); }
};

/// Smoothed categorical over codewords for one (class, hand).
struct HandshapeClassModel {
  std::vector<double> phi;

  friend bool operator==(const HandshapeClassModel&, const HandshapeClassModel&) = default;
};

inline HandshapeCodebook fit_codebook(const std::vector<std::vector<double>>& frames,
                                      int codewords, std::uint64_t seed, unsigned threads = 1) {
  if (static_cast<int>(frames.size()) < codewords)
    throw ValidationError("fit_codebook: " + std::to_string(frames.size()) +
                          " frames is fewer than " + std::to_string(codewords) + " codewords");
  KMeansResult km = kmeans_fit(frames, codewords, seed, 100, 1e-6, threads);
  return HandshapeCodebook{std::move(km.centroids)};
}

/// Nearest centroid by Euclidean distance; ties break toward the lowest index.
inline int quantize_handshape(const std::vector<double>& v, const HandshapeCodebook& cb) {
  if (cb.centroids.empty()) throw std::invalid_argument("quantize_handshape: empty codebook");
  if (static_cast<int>(v.size()) != cb.dim())
    throw ValidationError("quantize_handshape: vector length " + std::to_string(v.size()) +
                          " != codebook dim " + std::to_string(cb.dim()));
  return detail::nearest_centroid(v, cb.centroids);
}

/// Quantization strategy: a fitted codebook, or the argmax of the handshape
/// probability vector (one codeword per handshape, C = K_hs).
enum class HsQuantizerKind { codebook, argmax };

inline const char* hs_quantizer_name(HsQuantizerKind k) {
  return k == HsQuantizerKind::codebook ? "codebook" : "argmax";
}

inline HsQuantizerKind hs_quantizer_from_name(const std::string& name) {
  if (name == "codebook") return HsQuantizerKind::codebook;
  if (name == "argmax") return HsQuantizerKind::argmax;
  throw std::invalid_argument("unknown handshape quantizer: " + name);
}

struct HandshapeQuantizer {
  HsQuantizerKind kind = HsQuantizerKind::codebook;
  HandshapeCodebook codebook;  // kind == codebook
  int argmax_dim = 0;          // kind == argmax

  friend bool operator==(const HandshapeQuantizer&, const HandshapeQuantizer&) = default;

  int num_codewords() const {
    return kind == HsQuantizerKind::codebook ? codebook.size() : argmax_dim;
  }

  int quantize(const std::vector<double>& v) const {
    if (kind == HsQuantizerKind::codebook) return quantize_handshape(v, codebook);
    if (static_cast<int>(v.size()) != argmax_dim)
      throw ValidationError("argmax quantizer: vector length " + std::to_string(v.size()) +
                            " != handshape dim " + std::to_string(argmax_dim));
    int best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
  }
};

/// Pooled codeword counts with Laplace smoothing, same scheme as the
/// trajectory model: phi_j = (count_j + alpha) / (total + alpha*C).
inline HandshapeClassModel fit_handshape_model(const std::vector<std::vector<int>>& samples,
                                               int codewords, double alpha) {
  if (codewords < 1) throw std::invalid_argument("fit_handshape_model: need at least 1 codeword");
  if (!(alpha > 0.0)) throw std::invalid_argument("fit_handshape_model: alpha must be positive");
  std::vector<double> counts(static_cast<std::size_t>(codewords), 0.0);
  double total = 0.0;
  for (const auto& sample : samples)
    for (int idx : sample) {
      if (idx < 0 || idx >= codewords)
        throw std::invalid_argument("fit_handshape_model: codeword index out of range");
      counts[static_cast<std::size_t>(idx)] += 1.0;
      total += 1.0;
    }
  HandshapeClassModel m;
  m.phi.resize(static_cast<std::size_t>(codewords));
  for (int j = 0; j < codewords; ++j)
    m.phi[static_cast<std::size_t>(j)] =
        (counts[static_cast<std::size_t>(j)] + alpha) / (total + alpha * codewords);
  return m;
}

/// Per-frame-normalized log-likelihood (1/n) sum_i log phi[quantize(v_i)];
/// 0 when the hand has no present frames. Count-first accumulation keeps the
/// result bitwise invariant under frame-order permutation.
inline double handshape_log_prob(const std::vector<std::vector<double>>& frame_vectors,
                                 const HandshapeClassModel& m, const HandshapeQuantizer& q) {
  if (frame_vectors.empty()) return 0.0;
  std::vector<std::size_t> counts(m.phi.size(), 0);
  for (const auto& v : frame_vectors) ++counts[static_cast<std::size_t>(q.quantize(v))];
  return detail::counted_log_prob(counts, m.phi, frame_vectors.size());
}

inline double handshape_log_prob(const std::vector<std::vector<double>>& frame_vectors,
                                 const HandshapeClassModel& m, const HandshapeCodebook& cb) {
  return handshape_log_prob(frame_vectors, m,
                            HandshapeQuantizer{HsQuantizerKind::codebook, cb, 0});
}

/// Same normalized likelihood over pre-quantized codeword indices.
inline double handshape_log_prob_codewords(const std::vector<int>& codewords,
                                           const HandshapeClassModel& m) {
  if (codewords.empty()) return 0.0;
  std::vector<std::size_t> counts(m.phi.size(), 0);
  for (int idx : codewords) ++counts[static_cast<std::size_t>(idx)];
  return detail::counted_log_prob(counts, m.phi, codewords.size());
}

}  // namespace signbow
