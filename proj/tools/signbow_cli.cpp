// signbow command-line tool: train/predict/evaluate/synth/validate workflows
// over the signbow library. Exit codes: 0 success, 1 usage, 2 data
// validation, 3 numeric failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "signbow/signbow.hpp"

namespace {

using namespace signbow;

std::string format_double(double v) {
  if (v == k_neg_inf) return "-inf";
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << v;
  return os.str();
}

struct TrainFlags {
  std::string data, manifest, model;
  std::string backend = "bow";
  std::string hs_quantizer = "codebook";
  TrainConfig cfg;
};

void add_train_config_flags(CLI::App* cmd, TrainFlags& f, bool include_seed = true) {
  // evaluate owns --seed for the protocol and derives per-run training seeds
  // from it, so the standalone training seed is omitted there.
  if (include_seed) cmd->add_option("--seed", f.cfg.seed, "RNG seed");
  cmd->add_option("--direction-bins", f.cfg.direction_bins, "Direction histogram bins (D)")
      ->check(CLI::Range(4, 360));
  cmd->add_option("--codewords", f.cfg.codewords, "Handshape codebook size (C)")
      ->check(CLI::Range(1, 4096));
  cmd->add_option("--alpha", f.cfg.alpha, "Laplace smoothing strength")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--reg-epsilon", f.cfg.reg_epsilon, "Position covariance regularizer (cm^2)");
  cmd->add_option("--sigma-floor", f.cfg.sigma_floor, "Amount-of-movement sigma floor (cm)");
  cmd->add_option("--gate-threshold-cm", f.cfg.gate_threshold_cm,
                  "Movement gate threshold (cm)");
  cmd->add_option("--presence-fraction", f.cfg.presence_fraction,
                  "Hand presence fraction threshold");
  cmd->add_option("--min-displacement", f.cfg.min_displacement_cm,
                  "Minimum displacement for a direction observation (cm)");
  cmd->add_option("--hs-quantizer", f.hs_quantizer, "Handshape quantizer: codebook|argmax")
      ->check(CLI::IsMember({"codebook", "argmax"}));
  cmd->add_option("--hmm-states", f.cfg.hmm_states, "HMM state count")->check(CLI::Range(1, 32));
  cmd->add_option("--hmm-components", f.cfg.hmm_gmm_components, "GMM components per HMM state")
      ->check(CLI::Range(1, 3));
  cmd->add_option("--hmm-variance-floor", f.cfg.hmm_variance_floor, "HMM emission variance floor");
  cmd->add_option("--hmm-max-iters", f.cfg.hmm_max_iters, "Baum-Welch iteration cap");
  cmd->add_option("--hmm-tol", f.cfg.hmm_tol, "Baum-Welch relative improvement tolerance");
}

int cmd_train(const TrainFlags& f, unsigned threads) {
  Dataset d = load_dataset(f.data, f.manifest);
  TrainConfig cfg = f.cfg;
  cfg.hs_quantizer = hs_quantizer_from_name(f.hs_quantizer);
  const Backend backend = backend_from_name(f.backend);

  SignModel bow;
  HmmBackend hmm;
  if (backend == Backend::hmm) {
    hmm = train_hmm_backend(d, cfg, threads);
    save_model(hmm, f.model);
    bow = hmm.base;
  } else {
    bow = train(d, cfg, threads);
    save_model(bow, f.model);
  }

  std::map<int, int> sample_counts;
  for (const auto& s : d.samples) ++sample_counts[*s.class_label];
  nlohmann::json summary;
  summary["backend"] = backend_name(backend);
  summary["model"] = f.model;
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& e : bow.classes) {
    nlohmann::json cj;
    cj["id"] = e.class_id;
    cj["name"] = e.name;
    cj["samples"] = sample_counts[e.class_id];
    nlohmann::json gates;
    if (e.left) gates["left"] = e.left->gate.active;
    if (e.right) gates["right"] = e.right->gate.active;
    cj["gates"] = std::move(gates);
    classes.push_back(std::move(cj));
  }
  summary["classes"] = std::move(classes);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

struct PredictFlags {
  std::string model, data, output;
  std::string mask = "all";
  int top = 3;
};

int cmd_predict(const PredictFlags& f, unsigned threads) {
  LoadedModel lm = load_model(f.model);
  const FeatureMask mask = mask_from_name(f.mask);
  std::vector<SignSample> samples = load_samples(f.data);
  for (const auto& s : samples) {
    auto violations = validate_sample(s, lm.bow.handshape_dim);
    if (!violations.empty()) throw ValidationError(violations.front());
  }

  HmmBackend hmm;
  if (lm.backend == Backend::hmm) hmm = lm.as_hmm();

  std::vector<std::vector<ClassScore>> rankings(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    rankings[i] = lm.backend == Backend::hmm ? classify_hmm(samples[i], hmm, mask)
                                             : classify(samples[i], lm.bow, mask);
  });

  std::ofstream out(f.output, std::ios::binary);
  if (!out) throw ValidationError("cannot write predictions file: " + f.output);
  out << "sample_id,predicted_class,log_score,impossible";
  for (int k = 1; k <= f.top; ++k) out << ",alt_class_" << k << ",alt_log_score_" << k;
  out << "\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& ranking = rankings[i];
    // Impossible classes never enter the listing unless every class is
    // impossible for this sample.
    std::vector<const ClassScore*> usable;
    for (const auto& cs : ranking)
      if (!cs.impossible) usable.push_back(&cs);
    const bool all_impossible = usable.empty();
    if (all_impossible)
      for (const auto& cs : ranking) usable.push_back(&cs);
    out << samples[i].id << "," << usable.front()->class_id << ","
        << format_double(usable.front()->log_score) << "," << (all_impossible ? 1 : 0);
    for (int k = 1; k <= f.top; ++k) {
      out << ",";
      if (static_cast<std::size_t>(k) < usable.size())
        out << usable[static_cast<std::size_t>(k)]->class_id << ","
            << format_double(usable[static_cast<std::size_t>(k)]->log_score);
      else
        out << ",";
    }
    out << "\n";
  }
  std::cout << samples.size() << " prediction(s) written to " << f.output << "\n";
  return 0;
}

struct EvaluateFlags {
  TrainFlags train;  // reuses data/manifest + train config flags
  std::string report;
  std::string confusion_prefix;
  std::string protocol = "dependent";
  std::string subset = "all";
  std::string masks = "all";
  int runs = 30;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

std::vector<FeatureMask> parse_masks(const std::string& csv) {
  std::vector<FeatureMask> masks;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) masks.push_back(mask_from_name(token));
  }
  if (masks.empty()) throw std::invalid_argument("--masks lists no masks");
  return masks;
}

std::string strip_json_suffix(const std::string& path) {
  const std::string suffix = ".json";
  if (path.size() > suffix.size() &&
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return path.substr(0, path.size() - suffix.size());
  return path;
}

void print_mask_rows(const EvalReport& report) {
  for (const auto& mr : report.masks) {
    std::printf("%-8s %6.2f +- %.2f\n", mask_name(mr.mask).c_str(), 100.0 * mr.mean,
                100.0 * mr.stddev);
  }
}

void write_confusions(const EvalReport& report, const std::string& prefix) {
  for (const auto& mr : report.masks)
    save_confusion_csv(mr.confusion, report.class_ids, prefix + mask_name(mr.mask) + ".csv");
}

int cmd_evaluate(const EvaluateFlags& f, unsigned threads) {
  Dataset d = load_dataset(f.train.data, f.train.manifest);
  EvalConfig cfg;
  cfg.runs = f.runs;
  cfg.train_fraction = f.train_fraction;
  cfg.seed = f.seed;
  cfg.masks = parse_masks(f.masks);
  cfg.backend = backend_from_name(f.train.backend);
  cfg.train = f.train.cfg;
  cfg.train.hs_quantizer = hs_quantizer_from_name(f.train.hs_quantizer);

  const std::string base = strip_json_suffix(f.report);
  const std::string prefix = f.confusion_prefix.empty() ? base + "_confusion_" : f.confusion_prefix;

  if (f.protocol == "independent") {
    if (f.subset != "all") {
      cfg.subset = subset_from_name(f.subset);
      d = filter_subset(d, cfg.subset);
    }
    IndependentReport report = run_subject_independent(d, cfg, threads);
    save_report(report, f.report);
    for (const auto& mr : report.aggregate)
      save_confusion_csv(mr.confusion, report.class_ids, prefix + mask_name(mr.mask) + ".csv");
    std::printf("%-8s", "subject");
    for (int s : report.subjects) std::printf(" %7d", s);
    std::printf(" %7s\n", "mean");
    for (std::size_t mi = 0; mi < cfg.masks.size(); ++mi) {
      std::printf("%-8s", mask_name(cfg.masks[mi]).c_str());
      for (const auto& col : report.columns) std::printf(" %7.2f", 100.0 * col.mean[mi]);
      std::printf(" %7.2f\n", 100.0 * report.pooled_mean[mi]);
    }
    if (report.runs_identical)
      std::printf("note: all %d runs produced identical accuracies (deterministic backend)\n",
                  cfg.runs);
    return 0;
  }

  if (f.subset == "both") {
    cfg.subset = SubsetKind::one_handed;
    EvalReport rep_1h = run_subset(d, cfg, threads);
    cfg.subset = SubsetKind::two_handed;
    EvalReport rep_2h = run_subset(d, cfg, threads);
    save_report(rep_1h, base + ".1h.json");
    save_report(rep_2h, base + ".2h.json");
    write_confusions(rep_1h, prefix + "1h_");
    write_confusions(rep_2h, prefix + "2h_");
    std::printf("subset 1h (%zu classes)\n", rep_1h.class_ids.size());
    print_mask_rows(rep_1h);
    std::printf("subset 2h (%zu classes)\n", rep_2h.class_ids.size());
    print_mask_rows(rep_2h);
    for (std::size_t mi = 0; mi < cfg.masks.size(); ++mi) {
      const double w = weighted_subset_mean(
          rep_1h.masks[mi].mean, static_cast<int>(rep_1h.class_ids.size()),
          rep_2h.masks[mi].mean, static_cast<int>(rep_2h.class_ids.size()));
      std::printf("weighted %-8s %6.2f\n", mask_name(cfg.masks[mi]).c_str(), 100.0 * w);
    }
    return 0;
  }

  cfg.subset = subset_from_name(f.subset);
  EvalReport report = cfg.subset == SubsetKind::all ? run_subject_dependent(d, cfg, threads)
                                                    : run_subset(d, cfg, threads);
  save_report(report, f.report);
  write_confusions(report, prefix);
  print_mask_rows(report);
  return 0;
}

struct SynthFlags {
  std::string data, manifest, prototypes;
  GeneratorConfig cfg;
};

int cmd_synth(const SynthFlags& f) {
  try {
    validate_generator_config(f.cfg);
    PrototypeSet ps = sample_prototypes(f.cfg);
    Dataset d = generate_dataset(ps);
    save_dataset(d, f.data, f.manifest);
    if (!f.prototypes.empty()) save_prototypes(ps, f.prototypes);
    std::cout << d.samples.size() << " samples across " << ps.prototypes.size()
              << " classes written to " << f.data << "\n";
    return 0;
  } catch (const ValidationError& e) {
    // Generator problems are config problems: everything here came from flags.
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

struct ValidateFlags {
  std::string data, manifest;
};

int cmd_validate(const ValidateFlags& f) {
  DatasetManifest manifest = load_manifest(f.manifest);
  Dataset d;
  d.manifest = manifest;
  d.samples = load_samples(f.data);
  auto violations = validate_dataset(d);
  if (violations.empty()) {
    std::cout << "OK: " << d.samples.size() << " sample(s), " << manifest.num_classes
              << " class(es), no violations\n";
    return 0;
  }
  for (const auto& v : violations) std::cout << v << "\n";
  std::cerr << "error: " << violations.size() << " validation violation(s)\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"signbow: bag-of-words sign classification over hand-feature tracks"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker thread cap (output is thread-count invariant)")
      ->check(CLI::Range(1, 256));

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Fit a model and write it to disk");
  train_cmd->add_option("--data", train_flags.data, "Samples JSONL file")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--manifest", train_flags.manifest, "Manifest JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--model", train_flags.model, "Output model path")->required();
  train_cmd->add_option("--backend", train_flags.backend, "Backend: bow|hmm")
      ->check(CLI::IsMember({"bow", "hmm"}));
  add_train_config_flags(train_cmd, train_flags);

  PredictFlags predict_flags;
  auto* predict_cmd = app.add_subcommand("predict", "Rank classes for unlabeled samples");
  predict_cmd->add_option("--model", predict_flags.model, "Trained model file")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--data", predict_flags.data, "Samples JSONL file")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--output", predict_flags.output, "Predictions CSV path")->required();
  predict_cmd->add_option("--mask", predict_flags.mask, "Feature mask")
      ->check(CLI::IsMember({"all", "hs", "mov", "pos", "hs-pos", "hs-mov", "pos-mov"}));
  predict_cmd->add_option("--top", predict_flags.top, "Alternatives per row")
      ->check(CLI::Range(0, 100));

  EvaluateFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("evaluate", "Run an evaluation protocol");
  eval_cmd->add_option("--data", eval_flags.train.data, "Samples JSONL file")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--manifest", eval_flags.train.manifest, "Manifest JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--report", eval_flags.report, "Output report JSON path")->required();
  eval_cmd->add_option("--confusion-prefix", eval_flags.confusion_prefix,
                       "Confusion CSV path prefix (default: derived from --report)");
  eval_cmd->add_option("--protocol", eval_flags.protocol, "dependent|independent")
      ->check(CLI::IsMember({"dependent", "independent"}));
  eval_cmd->add_option("--subset", eval_flags.subset, "all|1h|2h|both")
      ->check(CLI::IsMember({"all", "1h", "2h", "both"}));
  eval_cmd->add_option("--masks", eval_flags.masks, "Comma list of feature masks");
  eval_cmd->add_option("--runs", eval_flags.runs, "Evaluation runs")->check(CLI::Range(1, 10000));
  eval_cmd->add_option("--train-fraction", eval_flags.train_fraction,
                       "Train fraction for stratified splits");
  eval_cmd->add_option("--seed", eval_flags.seed, "Evaluation seed");
  eval_cmd->add_option("--backend", eval_flags.train.backend, "Backend: bow|hmm")
      ->check(CLI::IsMember({"bow", "hmm"}));
  add_train_config_flags(eval_cmd, eval_flags.train, /*include_seed=*/false);

  SynthFlags synth_flags;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--data", synth_flags.data, "Output samples JSONL path")->required();
  synth_cmd->add_option("--manifest", synth_flags.manifest, "Output manifest path")->required();
  synth_cmd->add_option("--prototypes", synth_flags.prototypes,
                        "Output prototypes JSON path (optional)");
  synth_cmd->add_option("--classes", synth_flags.cfg.num_classes, "Class count");
  synth_cmd->add_option("--subjects", synth_flags.cfg.num_subjects, "Subject count");
  synth_cmd->add_option("--reps", synth_flags.cfg.reps_per_subject, "Repetitions per subject");
  synth_cmd->add_option("--seed", synth_flags.cfg.seed, "Generator seed");
  synth_cmd->add_option("--subject-offset-scale", synth_flags.cfg.subject_offset_scale,
                        "Per-subject positional offset scale (cm)");
  synth_cmd->add_option("--direction-bins", synth_flags.cfg.direction_bins, "D");
  synth_cmd->add_option("--handshape-dim", synth_flags.cfg.handshape_dim, "K_hs");
  synth_cmd->add_option("--one-handed-fraction", synth_flags.cfg.fraction_one_handed,
                        "Fraction of one-handed classes");
  synth_cmd->add_option("--low-movement-fraction", synth_flags.cfg.fraction_low_movement,
                        "Fraction of classes below the movement gate");
  synth_cmd->add_option("--pos-noise", synth_flags.cfg.pos_noise_cm, "Position noise (cm)");
  synth_cmd->add_option("--amount-noise", synth_flags.cfg.amount_noise_cm, "Amount noise (cm)");
  synth_cmd->add_option("--hs-noise", synth_flags.cfg.hs_noise, "Handshape noise");
  synth_cmd->add_option("--frames-min", synth_flags.cfg.frames_min, "Minimum frames per sample");
  synth_cmd->add_option("--frames-max", synth_flags.cfg.frames_max, "Maximum frames per sample");
  synth_cmd->add_option("--box", synth_flags.cfg.box_cm, "Position domain size (cm)");
  synth_cmd->add_option("--min-separation", synth_flags.cfg.min_separation_cm,
                        "Minimum prototype separation (cm)");
  synth_cmd->add_flag("--mismatch", synth_flags.cfg.mismatch_curvature,
                      "Add arc-shaped trajectory distortion (model mismatch probe)");

  ValidateFlags validate_flags;
  auto* validate_cmd = app.add_subcommand("validate", "Check a dataset against its manifest");
  validate_cmd->add_option("--data", validate_flags.data, "Samples JSONL file")
      ->required()
      ->check(CLI::ExistingFile);
  validate_cmd->add_option("--manifest", validate_flags.manifest, "Manifest JSON file")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_flags, threads);
    if (predict_cmd->parsed()) return cmd_predict(predict_flags, threads);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_flags, threads);
    if (synth_cmd->parsed()) return cmd_synth(synth_flags);
    if (validate_cmd->parsed()) return cmd_validate(validate_flags);
    std::cerr << app.help();
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
