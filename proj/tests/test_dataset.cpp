#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "signbow/dataset.hpp"

using namespace signbow;

namespace {

std::vector<double> one_hot(int idx, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  v[static_cast<std::size_t>(idx)] = 1.0;
  return v;
}

HandObservation present_at(double x, double y, int hs_idx, int dim) {
  HandObservation obs;
  obs.present = true;
  obs.pos = Point2{x, y};
  obs.hs = one_hot(hs_idx, dim);
  return obs;
}

SignSample make_sample(const std::string& id, int subject, int label, int frames, int dim) {
  SignSample s;
  s.id = id;
  s.subject = subject;
  s.class_label = label;
  for (int t = 0; t < frames; ++t) {
    Frame f;
    f.t = t;
    f.right = present_at(10.0 + t, 20.0, label % dim, dim);
    s.frames.push_back(std::move(f));
  }
  return s;
}

Dataset make_dataset(int classes, int subjects, int reps, int dim = 4) {
  Dataset d;
  d.manifest.num_classes = classes;
  d.manifest.handshape_dim = dim;
  for (int c = 0; c < classes; ++c)
    d.manifest.classes.push_back({c, "class_" + std::to_string(c), false, true});
  for (int c = 0; c < classes; ++c)
    for (int subj = 1; subj <= subjects; ++subj)
      for (int r = 0; r < reps; ++r)
        d.samples.push_back(make_sample(
            "s" + std::to_string(c) + "_" + std::to_string(subj) + "_" + std::to_string(r), subj,
            c, 5, dim));
  return d;
}

struct TempPath {
  std::string path;
  explicit TempPath(const std::string& name) : path("/tmp/signbow_dataset_" + name) {}
  ~TempPath() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("validate_sample accepts a well-formed sample", "[dataset]") {
  CHECK(validate_sample(make_sample("ok", 1, 0, 5, 4), 4).empty());
}

TEST_CASE("validate_sample reports each invariant violation", "[dataset]") {
  const int dim = 4;

  SignSample bad_subject = make_sample("a", 0, 0, 3, dim);
  CHECK_FALSE(validate_sample(bad_subject, dim).empty());

  SignSample no_frames = make_sample("b", 1, 0, 3, dim);
  no_frames.frames.clear();
  CHECK_FALSE(validate_sample(no_frames, dim).empty());

  SignSample bad_t = make_sample("c", 1, 0, 3, dim);
  bad_t.frames[2].t = bad_t.frames[1].t;
  CHECK_FALSE(validate_sample(bad_t, dim).empty());

  SignSample missing_pos = make_sample("d", 1, 0, 3, dim);
  missing_pos.frames[1].right.pos.reset();
  CHECK_FALSE(validate_sample(missing_pos, dim).empty());

  SignSample absent_with_payload = make_sample("e", 1, 0, 3, dim);
  absent_with_payload.frames[1].left.pos = Point2{1, 1};
  CHECK_FALSE(validate_sample(absent_with_payload, dim).empty());

  SignSample wrong_dim = make_sample("f", 1, 0, 3, dim);
  wrong_dim.frames[0].right.hs = one_hot(0, dim + 1);
  CHECK_FALSE(validate_sample(wrong_dim, dim).empty());

  SignSample bad_sum = make_sample("g", 1, 0, 3, dim);
  (*bad_sum.frames[0].right.hs)[0] = 0.5;  // sums to 0.5
  CHECK_FALSE(validate_sample(bad_sum, dim).empty());

  SignSample bad_entry = make_sample("h", 1, 0, 3, dim);
  (*bad_entry.frames[0].right.hs)[0] = 1.5;
  (*bad_entry.frames[0].right.hs)[1] = -0.5;
  CHECK_FALSE(validate_sample(bad_entry, dim).empty());

  SignSample bad_pos = make_sample("i", 1, 0, 3, dim);
  bad_pos.frames[0].right.pos = Point2{std::nan(""), 0.0};
  CHECK_FALSE(validate_sample(bad_pos, dim).empty());
}

TEST_CASE("validate_manifest catches structural problems", "[dataset]") {
  DatasetManifest ok;
  ok.num_classes = 1;
  ok.handshape_dim = 4;
  ok.classes.push_back({0, "zero", true, false});
  CHECK(validate_manifest(ok).empty());

  DatasetManifest miscount = ok;
  miscount.num_classes = 2;
  CHECK_FALSE(validate_manifest(miscount).empty());

  DatasetManifest dup = ok;
  dup.num_classes = 2;
  dup.classes.push_back({0, "again", false, true});
  CHECK_FALSE(validate_manifest(dup).empty());

  DatasetManifest no_hand = ok;
  no_hand.classes[0].uses_left = false;
  CHECK_FALSE(validate_manifest(no_hand).empty());

  DatasetManifest bad_dim = ok;
  bad_dim.handshape_dim = 0;
  CHECK_FALSE(validate_manifest(bad_dim).empty());
}

TEST_CASE("validate_dataset cross-checks samples against the manifest", "[dataset]") {
  Dataset d = make_dataset(2, 2, 2);
  CHECK(validate_dataset(d).empty());

  Dataset unknown_class = d;
  unknown_class.samples[0].class_label = 9;
  CHECK_FALSE(validate_dataset(unknown_class).empty());

  Dataset dup_id = d;
  dup_id.samples[1].id = dup_id.samples[0].id;
  CHECK_FALSE(validate_dataset(dup_id).empty());
}

TEST_CASE("dataset JSONL round trip preserves every field", "[dataset]") {
  Dataset d = make_dataset(3, 2, 2);
  d.samples[0].frames[1].left = d.samples[0].frames[1].right;  // exercise both hands
  d.samples[2].frames[0].right.pos = Point2{0.1234567890123456, -7.5e-11};

  TempPath data("roundtrip.jsonl"), manifest("roundtrip_manifest.json");
  save_dataset(d, data.path, manifest.path);
  Dataset loaded = load_dataset(data.path, manifest.path);
  CHECK(loaded == d);
}

TEST_CASE("load_dataset reports parse failures with the line number", "[dataset]") {
  TempPath data("badline.jsonl"), manifest("badline_manifest.json");
  Dataset d = make_dataset(1, 1, 2);
  save_dataset(d, data.path, manifest.path);
  {
    std::ofstream out(data.path, std::ios::app);
    out << "{not json\n";
  }
  try {
    load_dataset(data.path, manifest.path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
}

TEST_CASE("load_dataset surfaces validation violations with a count", "[dataset]") {
  TempPath data("invalid.jsonl"), manifest("invalid_manifest.json");
  Dataset d = make_dataset(1, 1, 2);
  d.samples[0].subject = 0;  // invalid
  save_manifest(d.manifest, manifest.path);
  {
    std::ofstream out(data.path);
    for (const auto& s : d.samples) out << detail::sample_to_json(s).dump() << "\n";
  }
  CHECK_THROWS_AS(load_dataset(data.path, manifest.path), ValidationError);
}

TEST_CASE("load_dataset and load_manifest reject missing files", "[dataset]") {
  CHECK_THROWS_AS(load_manifest("/tmp/signbow_no_such_manifest.json"), ParseError);
  CHECK_THROWS_AS(load_dataset("/tmp/signbow_no_such.jsonl", "/tmp/signbow_no_such_manifest.json"),
                  ParseError);
}

TEST_CASE("load_samples parses unlabeled prediction inputs", "[dataset]") {
  TempPath data("unlabeled.jsonl");
  SignSample s = make_sample("query", 1, 0, 3, 4);
  s.class_label.reset();
  {
    std::ofstream out(data.path);
    out << detail::sample_to_json(s).dump() << "\n";
  }
  auto samples = load_samples(data.path);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0] == s);
  CHECK_FALSE(samples[0].class_label.has_value());
}

TEST_CASE("round_half_up rounds .5 upward", "[dataset]") {
  CHECK(round_half_up(0.5) == 1);
  CHECK(round_half_up(1.5) == 2);
  CHECK(round_half_up(2.4) == 2);
  CHECK(round_half_up(2.6) == 3);
  CHECK(round_half_up(0.8 * 5.0) == 4);
  CHECK(round_half_up(0.0) == 0);
}

TEST_CASE("split_stratified honors per-class train counts", "[dataset]") {
  Dataset d = make_dataset(3, 2, 5);  // 10 samples per class
  auto [train, test] = split_stratified(d, 0.8, 42);

  std::map<int, int> train_counts, test_counts;
  for (const auto& s : train.samples) ++train_counts[*s.class_label];
  for (const auto& s : test.samples) ++test_counts[*s.class_label];
  for (int c = 0; c < 3; ++c) {
    CHECK(train_counts[c] == 8);
    CHECK(test_counts[c] == 2);
  }

  // Partition: every sample lands in exactly one side.
  std::set<std::string> ids;
  for (const auto& s : train.samples) ids.insert(s.id);
  for (const auto& s : test.samples) ids.insert(s.id);
  CHECK(ids.size() == d.samples.size());
  CHECK(train.samples.size() + test.samples.size() == d.samples.size());
}

TEST_CASE("split_stratified is seed-deterministic", "[dataset]") {
  Dataset d = make_dataset(2, 3, 5);
  auto [tr1, te1] = split_stratified(d, 0.8, 7);
  auto [tr2, te2] = split_stratified(d, 0.8, 7);
  CHECK(tr1 == tr2);
  CHECK(te1 == te2);

  auto [tr3, te3] = split_stratified(d, 0.8, 8);
  CHECK(tr1 != tr3);  // 30 samples; identical splits across seeds would be a bug
}

TEST_CASE("split_stratified validates its inputs", "[dataset]") {
  Dataset d = make_dataset(2, 1, 5);
  CHECK_THROWS_AS(split_stratified(d, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_stratified(d, 1.0, 1), std::invalid_argument);

  Dataset tiny = make_dataset(1, 1, 1);
  CHECK_THROWS_AS(split_stratified(tiny, 0.8, 1), ValidationError);

  Dataset unlabeled = make_dataset(1, 1, 3);
  unlabeled.samples[0].class_label.reset();
  CHECK_THROWS_AS(split_stratified(unlabeled, 0.8, 1), ValidationError);
}

TEST_CASE("split_by_subject holds out exactly one subject", "[dataset]") {
  Dataset d = make_dataset(2, 3, 2);
  auto [train, test] = split_by_subject(d, 2);
  CHECK(test.samples.size() == 4);
  for (const auto& s : test.samples) CHECK(s.subject == 2);
  for (const auto& s : train.samples) CHECK(s.subject != 2);
  CHECK(train.samples.size() + test.samples.size() == d.samples.size());

  CHECK_THROWS_AS(split_by_subject(d, 99), ValidationError);
}

TEST_CASE("subjects_of lists each subject once, ascending", "[dataset]") {
  Dataset d = make_dataset(2, 4, 2);
  CHECK(subjects_of(d) == std::vector<int>{1, 2, 3, 4});
}
