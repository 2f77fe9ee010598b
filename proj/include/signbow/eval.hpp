#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "signbow/classifier.hpp"
#include "signbow/common.hpp"
#include "signbow/dataset.hpp"
#include "signbow/hmm.hpp"
#include "signbow/model_io.hpp"

namespace signbow {

enum class SubsetKind { all, one_handed, two_handed };

inline const char* subset_name(SubsetKind s) {
  switch (s) {
    case SubsetKind::one_handed: return "1h";
    case SubsetKind::two_handed: return "2h";
    default: return "all";
  }
}

inline SubsetKind subset_from_name(const std::string& name) {
  if (name == "all") return SubsetKind::all;
  if (name == "1h" || name == "one_handed") return SubsetKind::one_handed;
  if (name == "2h" || name == "two_handed") return SubsetKind::two_handed;
  throw std::invalid_argument("unknown subset: " + name);
}

struct EvalConfig {
  int runs = 30;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::vector<FeatureMask> masks = {FeatureMask{}};
  Backend backend = Backend::bow;
  SubsetKind subset = SubsetKind::all;
  TrainConfig train;  // train.seed is re-derived per run

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

inline void validate_eval_config(const EvalConfig& cfg) {
  if (cfg.runs < 1) throw ValidationError("eval config: runs must be >= 1");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
    throw ValidationError("eval config: train_fraction must be in (0,1)");
  if (cfg.masks.empty()) throw ValidationError("eval config: masks must be non-empty");
  for (const auto& m : cfg.masks)
    if (!m.any()) throw ValidationError("eval config: a mask enables nothing");
}

// ---------------------------------------------------------------------------
// Confusion matrices

struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::vector<std::int64_t>> counts;  // [truth][prediction]

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

  std::int64_t total() const {
    std::int64_t t = 0;
    for (const auto& row : counts)
      for (std::int64_t c : row) t += c;
    return t;
  }
  std::int64_t diagonal() const {
    std::int64_t t = 0;
    for (int i = 0; i < num_classes; ++i) t += counts[i][i];
    return t;
  }
  void add(const ConfusionMatrix& other) {
    for (int i = 0; i < num_classes; ++i)
      for (int j = 0; j < num_classes; ++j) counts[i][j] += other.counts[i][j];
  }
};

inline ConfusionMatrix make_confusion(int num_classes) {
  ConfusionMatrix m;
  m.num_classes = num_classes;
  m.counts.assign(num_classes, std::vector<std::int64_t>(num_classes, 0));
  return m;
}

/// truths/predictions are dense indices in [0, num_classes).
inline ConfusionMatrix confusion_matrix(const std::vector<int>& truths,
                                        const std::vector<int>& predictions, int num_classes) {
  if (truths.size() != predictions.size())
    throw std::invalid_argument("confusion_matrix: length mismatch");
  ConfusionMatrix m = make_confusion(num_classes);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] < 0 || truths[i] >= num_classes || predictions[i] < 0 ||
        predictions[i] >= num_classes)
      throw std::invalid_argument("confusion_matrix: label out of range");
    ++m.counts[truths[i]][predictions[i]];
  }
  return m;
}

/// Header row carries the class ids; each data row starts with the truth id.
inline std::string confusion_to_csv(const ConfusionMatrix& m, const std::vector<int>& class_ids) {
  if (static_cast<int>(class_ids.size()) != m.num_classes)
    throw std::invalid_argument("confusion_to_csv: class id count mismatch");
  std::ostringstream out;
  out << "class_id";
  for (int id : class_ids) out << "," << id;
  out << "\n";
  for (int i = 0; i < m.num_classes; ++i) {
    out << class_ids[i];
    for (int j = 0; j < m.num_classes; ++j) out << "," << m.counts[i][j];
    out << "\n";
  }
  return out.str();
}

inline void save_confusion_csv(const ConfusionMatrix& m, const std::vector<int>& class_ids,
                               const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write confusion file: " + path);
  out << confusion_to_csv(m, class_ids);
}

// ---------------------------------------------------------------------------
// Reports

struct MaskResult {
  FeatureMask mask;
  std::vector<double> run_accuracies;
  double mean = 0.0;
  double stddev = 0.0;  // population, over runs
  ConfusionMatrix confusion;  // aggregated over runs

  friend bool operator==(const MaskResult&, const MaskResult&) = default;
};

struct EvalReport {
  std::string protocol;  // "dependent" or "independent"
  EvalConfig config;
  std::vector<int> class_ids;  // dense confusion order
  std::vector<MaskResult> masks;
  bool runs_identical = false;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;

  const MaskResult* find_mask(const FeatureMask& m) const {
    for (const auto& r : masks)
      if (r.mask == m) return &r;
    return nullptr;
  }
};

/// One held-out subject's column in the Table-4-shaped report.
struct SubjectColumn {
  int subject = 0;
  std::vector<double> mean;    // per mask
  std::vector<double> stddev;  // per mask, over runs

  friend bool operator==(const SubjectColumn&, const SubjectColumn&) = default;
};

struct IndependentReport {
  EvalConfig config;
  std::vector<int> class_ids;
  std::vector<int> subjects;
  std::vector<SubjectColumn> columns;      // parallel to subjects
  std::vector<double> pooled_mean;         // per mask, unweighted over subjects
  std::vector<MaskResult> aggregate;       // per mask, pooled over subjects+runs
  bool runs_identical = false;

  friend bool operator==(const IndependentReport&, const IndependentReport&) = default;
};

// ---------------------------------------------------------------------------
// Protocol internals

namespace detail {

struct DenseIndex {
  std::vector<int> class_ids;
  std::map<int, int> to_dense;
};

inline DenseIndex dense_index(const DatasetManifest& m) {
  DenseIndex d;
  d.class_ids = m.sorted_class_ids();
  for (std::size_t i = 0; i < d.class_ids.size(); ++i)
    d.to_dense[d.class_ids[i]] = static_cast<int>(i);
  return d;
}

/// Trains on `train_set` with the per-run seed and scores `test_set` under
/// every mask. Returns per-mask (accuracy, confusion).
struct SplitResult {
  std::vector<double> accuracy;
  std::vector<ConfusionMatrix> confusion;
};

inline SplitResult evaluate_split(const Dataset& train_set, const Dataset& test_set,
                                  const EvalConfig& cfg, std::uint64_t train_seed,
                                  const DenseIndex& dense, unsigned threads) {
  TrainConfig tc = cfg.train;
  tc.seed = train_seed;

  SignModel bow;
  HmmBackend hmm;
  if (cfg.backend == Backend::hmm)
    hmm = train_hmm_backend(train_set, tc, threads);
  else
    bow = train(train_set, tc, threads);

  const int n = static_cast<int>(dense.class_ids.size());
  SplitResult r;
  r.accuracy.assign(cfg.masks.size(), 0.0);
  r.confusion.assign(cfg.masks.size(), make_confusion(n));

  std::vector<std::vector<int>> predictions(cfg.masks.size(),
                                            std::vector<int>(test_set.samples.size(), 0));
  parallel_for(test_set.samples.size(), threads, [&](std::size_t i) {
    const SignSample& s = test_set.samples[i];
    for (std::size_t mi = 0; mi < cfg.masks.size(); ++mi) {
      const int pred = cfg.backend == Backend::hmm ? predict_hmm(s, hmm, cfg.masks[mi])
                                                   : predict(s, bow, cfg.masks[mi]);
      predictions[mi][i] = pred;
    }
  });

  for (std::size_t mi = 0; mi < cfg.masks.size(); ++mi) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_set.samples.size(); ++i) {
      const int truth = dense.to_dense.at(*test_set.samples[i].class_label);
      const int pred = dense.to_dense.at(predictions[mi][i]);
      ++r.confusion[mi].counts[truth][pred];
      if (truth == pred) ++correct;
    }
    r.accuracy[mi] =
        static_cast<double>(correct) / static_cast<double>(test_set.samples.size());
  }
  return r;
}

inline void finalize_mask_stats(MaskResult& m) {
  m.mean = mean_of(m.run_accuracies);
  m.stddev = population_stddev(m.run_accuracies);
}

}  // namespace detail

/// Repeated stratified 80/20 protocol: run i splits with seed f(seed, i, 0)
/// and trains with seed f(seed, i, 1); every mask is evaluated on the same
/// trained model and split.
inline EvalReport run_subject_dependent(const Dataset& d, const EvalConfig& cfg,
                                        unsigned threads = 1) {
  validate_eval_config(cfg);
  auto dense = detail::dense_index(d.manifest);

  EvalReport report;
  report.protocol = "dependent";
  report.config = cfg;
  report.class_ids = dense.class_ids;
  for (const auto& mask : cfg.masks) {
    MaskResult mr;
    mr.mask = mask;
    mr.confusion = make_confusion(static_cast<int>(dense.class_ids.size()));
    report.masks.push_back(std::move(mr));
  }

  for (int run = 0; run < cfg.runs; ++run) {
    auto [train_set, test_set] =
        split_stratified(d, cfg.train_fraction,
                         derive_seed(cfg.seed, static_cast<std::uint64_t>(run), 0));
    auto split = detail::evaluate_split(train_set, test_set, cfg,
                                        derive_seed(cfg.seed, static_cast<std::uint64_t>(run), 1),
                                        dense, threads);
    for (std::size_t mi = 0; mi < cfg.masks.size(); ++mi) {
      report.masks[mi].run_accuracies.push_back(split.accuracy[mi]);
      report.masks[mi].confusion.add(split.confusion[mi]);
    }
  }
  for (auto& mr : report.masks) detail::finalize_mask_stats(mr);

  report.runs_identical = cfg.runs > 1;
  for (const auto& mr : report.masks)
    for (double a : mr.run_accuracies)
      if (a != mr.run_accuracies.front()) report.runs_identical = false;
  if (cfg.runs <= 1) report.runs_identical = false;
  return report;
}

/// Leave-one-subject-out: per held-out subject, cfg.runs re-seeded trainings
/// on the remaining subjects, each evaluated on the held-out samples. The
/// pooled mean is the unweighted mean over subjects. With a fully
/// deterministic backend all runs coincide; runs_identical flags that.
inline IndependentReport run_subject_independent(const Dataset& d, const EvalConfig& cfg,
                                                 unsigned threads = 1) {
  validate_eval_config(cfg);
  const std::vector<int> subjects = subjects_of(d);
  if (subjects.size() < 2)
    throw ValidationError("subject-independent protocol needs >= 2 subjects, got " +
                          std::to_string(subjects.size()));
  auto dense = detail::dense_index(d.manifest);

  IndependentReport report;
  report.config = cfg;
  report.class_ids = dense.class_ids;
  report.subjects = subjects;
  for (const auto& mask : cfg.masks) {
    MaskResult mr;
    mr.mask = mask;
    mr.confusion = make_confusion(static_cast<int>(dense.class_ids.size()));
    report.aggregate.push_back(std::move(mr));
  }

  report.runs_identical = true;
  for (std::size_t si = 0; si < subjects.size(); ++si) {
    auto [train_set, test_set] = split_by_subject(d, subjects[si]);
    SubjectColumn col;
    col.subject = subjects[si];
    std::vector<std::vector<double>> per_mask_runs(cfg.masks.size());
    for (int run = 0; run < cfg.runs; ++run) {
      auto split = detail::evaluate_split(
          train_set, test_set, cfg,
          derive_seed(cfg.seed, static_cast<std::uint64_t>(si), static_cast<std::uint64_t>(run)),
          dense, threads);
      for (std::size_t mi = 0; mi < cfg.masks.size(); ++mi) {
        per_mask_runs[mi].push_back(split.accuracy[mi]);
        report.aggregate[mi].run_accuracies.push_back(split.accuracy[mi]);
        report.aggregate[mi].confusion.add(split.confusion[mi]);
      }
    }
    for (std::size_t mi = 0; mi < cfg.masks.size(); ++mi) {
      col.mean.push_back(mean_of(per_mask_runs[mi]));
      col.stddev.push_back(population_stddev(per_mask_runs[mi]));
      for (double a : per_mask_runs[mi])
        if (a != per_mask_runs[mi].front()) report.runs_identical = false;
    }
    report.columns.push_back(std::move(col));
  }
  if (cfg.runs <= 1) report.runs_identical = false;

  report.pooled_mean.assign(cfg.masks.size(), 0.0);
  for (const auto& col : report.columns)
    for (std::size_t mi = 0; mi < cfg.masks.size(); ++mi)
      report.pooled_mean[mi] += col.mean[mi];
  for (double& v : report.pooled_mean) v /= static_cast<double>(subjects.size());

  for (auto& mr : report.aggregate) detail::finalize_mask_stats(mr);
  return report;
}

/// Keeps only the classes matching the subset annotation (one-handed: exactly
/// one used hand) and their samples.
inline Dataset filter_subset(const Dataset& d, SubsetKind subset) {
  if (subset == SubsetKind::all) return d;
  Dataset out;
  out.manifest.handshape_dim = d.manifest.handshape_dim;
  for (const auto& c : d.manifest.classes) {
    const bool one = c.uses_left != c.uses_right;
    if ((subset == SubsetKind::one_handed) == one) out.manifest.classes.push_back(c);
  }
  out.manifest.num_classes = static_cast<int>(out.manifest.classes.size());
  if (out.manifest.classes.empty())
    throw ValidationError(std::string("subset '") + subset_name(subset) +
                          "' matches no classes");
  for (const auto& s : d.samples)
    if (s.class_label && out.manifest.find_class(*s.class_label)) out.samples.push_back(s);
  if (out.samples.empty())
    throw ValidationError(std::string("subset '") + subset_name(subset) +
                          "' matches no samples");
  return out;
}

/// Subject-dependent protocol on the subset named by cfg.subset.
inline EvalReport run_subset(const Dataset& d, const EvalConfig& cfg, unsigned threads = 1) {
  EvalReport report = run_subject_dependent(filter_subset(d, cfg.subset), cfg, threads);
  return report;
}

/// Mean of two subset accuracies weighted by their class counts (the paper's
/// Table 3 aggregation).
inline double weighted_subset_mean(double acc_1h, int classes_1h, double acc_2h, int classes_2h) {
  const double total = static_cast<double>(classes_1h + classes_2h);
  if (total <= 0) throw std::invalid_argument("weighted_subset_mean: no classes");
  return (acc_1h * classes_1h + acc_2h * classes_2h) / total;
}

// ---------------------------------------------------------------------------
// Report JSON

namespace detail {

inline nlohmann::json eval_config_to_json(const EvalConfig& cfg) {
  nlohmann::json j;
  j["runs"] = cfg.runs;
  j["train_fraction"] = cfg.train_fraction;
  j["seed"] = cfg.seed;
  nlohmann::json masks = nlohmann::json::array();
  for (const auto& m : cfg.masks) masks.push_back(mask_name(m));
  j["masks"] = std::move(masks);
  j["backend"] = backend_name(cfg.backend);
  j["subset"] = subset_name(cfg.subset);
  j["train"] = config_to_json(cfg.train);
  return j;
}

inline nlohmann::json mask_result_to_json(const MaskResult& mr) {
  nlohmann::json j;
  j["mask"] = mask_name(mr.mask);
  j["accuracies"] = mr.run_accuracies;
  j["mean"] = mr.mean;
  j["stddev"] = mr.stddev;
  j["confusion_total"] = mr.confusion.total();
  j["confusion_diagonal"] = mr.confusion.diagonal();
  return j;
}

}  // namespace detail

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["protocol"] = r.protocol;
  j["config"] = detail::eval_config_to_json(r.config);
  j["class_ids"] = r.class_ids;
  nlohmann::json masks = nlohmann::json::array();
  for (const auto& mr : r.masks) masks.push_back(detail::mask_result_to_json(mr));
  j["masks"] = std::move(masks);
  j["runs_identical"] = r.runs_identical;
  return j;
}

inline nlohmann::json report_to_json(const IndependentReport& r) {
  nlohmann::json j;
  j["protocol"] = "independent";
  j["config"] = detail::eval_config_to_json(r.config);
  j["class_ids"] = r.class_ids;
  j["subjects"] = r.subjects;
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : r.columns) {
    nlohmann::json cj;
    cj["subject"] = c.subject;
    cj["mean"] = c.mean;
    cj["stddev"] = c.stddev;
    cols.push_back(std::move(cj));
  }
  j["columns"] = std::move(cols);
  j["pooled_mean"] = r.pooled_mean;
  nlohmann::json agg = nlohmann::json::array();
  for (const auto& mr : r.aggregate) agg.push_back(detail::mask_result_to_json(mr));
  j["aggregate"] = std::move(agg);
  j["runs_identical"] = r.runs_identical;
  return j;
}

template <typename Report>
inline void save_report(const Report& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write report file: " + path);
  out << report_to_json(r).dump(2) << "\n";
  if (!out) throw ValidationError("failed writing report file: " + path);
}

}  // namespace signbow
