#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "signbow/classifier.hpp"
#include "signbow/random.hpp"

using namespace signbow;

namespace {

std::vector<double> one_hot(int dim, int hot) {
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  v[static_cast<std::size_t>(hot)] = 1.0;
  return v;
}

HandObservation present_obs(Point2 p, int hot, int dim = 4) {
  return HandObservation{true, p, one_hot(dim, hot)};
}

SignSample right_sample(const std::string& id, int subject, int cls,
                        const std::vector<Point2>& pos, int hot) {
  SignSample s;
  s.id = id;
  s.subject = subject;
  s.class_label = cls;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    Frame f;
    f.t = static_cast<std::int64_t>(i);
    f.right = present_obs(pos[i], hot);
    s.frames.push_back(f);
  }
  return s;
}

SignSample two_hand_sample(const std::string& id, int subject, int cls,
                           const std::vector<Point2>& lpos, int lhot,
                           const std::vector<Point2>& rpos, int rhot) {
  SignSample s = right_sample(id, subject, cls, rpos, rhot);
  for (std::size_t i = 0; i < s.frames.size(); ++i) s.frames[i].left = present_obs(lpos[i], lhot);
  return s;
}

// Three classes: 1 = one-handed sweep (gate active), 2 = one-handed hold
// (gate inactive), 3 = two-handed rise.
Dataset training_set() {
  Dataset d;
  d.manifest.num_classes = 3;
  d.manifest.handshape_dim = 4;
  d.manifest.classes = {{1, "wave", false, true}, {2, "hold", false, true},
                        {3, "clap", true, true}};
  d.samples.push_back(right_sample("w1", 1, 1, {{0, 0}, {2.5, 0}, {5, 0}, {7.5, 0}, {10, 0}}, 0));
  d.samples.push_back(
      right_sample("w2", 2, 1, {{0.5, 0.4}, {3, 0.4}, {5.5, 0.4}, {8, 0.4}, {10.5, 0.4}}, 0));
  d.samples.push_back(right_sample("h1", 1, 2, {{20, 5}, {20.3, 5.2}, {20.1, 4.9}}, 1));
  d.samples.push_back(right_sample("h2", 2, 2, {{19.8, 5.1}, {20.2, 5.0}, {20.0, 5.3}}, 1));
  d.samples.push_back(two_hand_sample("c1", 1, 3, {{-5, 0}, {-5, 4}, {-5, 8}}, 2,
                                      {{5, 0}, {5, 4}, {5, 8}}, 3));
  d.samples.push_back(two_hand_sample("c2", 2, 3, {{-5.2, 0.1}, {-5.1, 4.2}, {-5.3, 8.1}}, 2,
                                      {{5.2, 0.1}, {5.1, 4.2}, {5.3, 8.1}}, 3));
  return d;
}

TrainConfig argmax_config() {
  TrainConfig cfg;
  cfg.seed = 7;
  cfg.hs_quantizer = HsQuantizerKind::argmax;
  return cfg;
}

SignSample wave_probe() {
  SignSample s = right_sample("probe", 1, 1, {{0.2, 0.1}, {5.0, 0.2}, {10.2, 0.1}}, 0);
  s.class_label.reset();
  return s;
}

double score_of(const std::vector<ClassScore>& ranking, int class_id) {
  for (const auto& cs : ranking)
    if (cs.class_id == class_id) return cs.log_score;
  throw std::logic_error("class not in ranking");
}

}  // namespace

TEST_CASE("train builds sorted per-class, per-used-hand models", "[classifier]") {
  SignModel m = train(training_set(), argmax_config());

  REQUIRE(m.classes.size() == 3);
  CHECK(m.classes[0].class_id == 1);
  CHECK(m.classes[1].class_id == 2);
  CHECK(m.classes[2].class_id == 3);
  CHECK(m.handshape_dim == 4);
  CHECK(m.quantizer.kind == HsQuantizerKind::argmax);
  CHECK(m.quantizer.num_codewords() == 4);

  const SignClassEntry& wave = m.classes[0];
  CHECK_FALSE(wave.uses_left);
  CHECK(wave.uses_right);
  CHECK_FALSE(wave.left.has_value());
  REQUIRE(wave.right.has_value());
  CHECK(wave.right->amount.mu == Catch::Approx(10.0).epsilon(1e-12));
  CHECK(wave.right->gate.active);

  const SignClassEntry& hold = m.classes[1];
  REQUIRE(hold.right.has_value());
  CHECK(hold.right->amount.mu < 1.0);
  CHECK_FALSE(hold.right->gate.active);

  const SignClassEntry& clap = m.classes[2];
  CHECK(clap.uses_left);
  CHECK(clap.uses_right);
  REQUIRE(clap.left.has_value());
  REQUIRE(clap.right.has_value());
  CHECK(clap.left->gate.active);
}

TEST_CASE("train input validation", "[classifier]") {
  TrainConfig cfg = argmax_config();

  SECTION("class with fewer than two samples is named") {
    Dataset d = training_set();
    d.samples.erase(d.samples.begin() + 3);  // drop h2, class 2 keeps one sample
    CHECK_THROWS_WITH(train(d, cfg), Catch::Matchers::ContainsSubstring("class 2"));
  }
  SECTION("unlabeled sample") {
    Dataset d = training_set();
    d.samples[0].class_label.reset();
    CHECK_THROWS_AS(train(d, cfg), ValidationError);
  }
  SECTION("label outside the manifest") {
    Dataset d = training_set();
    d.samples[0].class_label = 42;
    CHECK_THROWS_AS(train(d, cfg), ValidationError);
  }
  SECTION("invalid manifest") {
    Dataset d = training_set();
    d.manifest.num_classes = 5;
    CHECK_THROWS_AS(train(d, cfg), ValidationError);
  }
  SECTION("annotated hand never present") {
    Dataset d = training_set();
    for (auto& s : d.samples)
      if (s.class_label == 3)
        for (auto& f : s.frames) f.left = HandObservation{};
    CHECK_THROWS_WITH(train(d, cfg), Catch::Matchers::ContainsSubstring("left"));
  }
}

TEST_CASE("hand_presence needs strictly more than half the frames", "[classifier]") {
  auto with_right_presence = [](int present, int total) {
    SignSample s;
    s.id = "p";
    for (int i = 0; i < total; ++i) {
      Frame f;
      f.t = i;
      if (i < present) f.right = present_obs({0, 0}, 0);
      s.frames.push_back(f);
    }
    return s;
  };
  CHECK(hand_presence(with_right_presence(6, 10), Hand::right));
  CHECK_FALSE(hand_presence(with_right_presence(5, 10), Hand::right));
  CHECK_FALSE(hand_presence(with_right_presence(0, 10), Hand::right));
  CHECK(hand_presence(with_right_presence(10, 10), Hand::right));
  CHECK_FALSE(hand_presence(with_right_presence(6, 10), Hand::left));
}

TEST_CASE("classify ranks the matching class first and sorts the rest", "[classifier]") {
  SignModel m = train(training_set(), argmax_config());
  const FeatureMask all;

  auto ranking = classify(wave_probe(), m, all);
  REQUIRE(ranking.size() == 3);
  CHECK(ranking.front().class_id == 1);
  CHECK_FALSE(ranking.front().impossible);

  // Right-only sample: the two-handed class is impossible and sorts last.
  CHECK(ranking.back().class_id == 3);
  CHECK(ranking.back().impossible);
  CHECK(ranking.back().log_score == k_neg_inf);

  auto cmp = [](const ClassScore& a, const ClassScore& b) {
    if (a.impossible != b.impossible) return !a.impossible;
    if (a.log_score != b.log_score) return a.log_score > b.log_score;
    return a.class_id < b.class_id;
  };
  CHECK(std::is_sorted(ranking.begin(), ranking.end(), cmp));
  CHECK(predict(wave_probe(), m, all) == 1);
}

TEST_CASE("minority-present hand still counts as absent", "[classifier]") {
  SignModel m = train(training_set(), argmax_config());
  SignSample s = wave_probe();
  // Left hand present in 1 of 3 frames: below the strict-majority rule.
  s.frames[0].left = present_obs({-5, 4}, 2);
  auto ranking = classify(s, m, FeatureMask{});
  CHECK(score_of(ranking, 3) == k_neg_inf);
  for (const auto& cs : ranking)
    if (cs.class_id == 3) CHECK(cs.impossible);
}

TEST_CASE("all classes impossible still yields a full ranking", "[classifier]") {
  SignModel m = train(training_set(), argmax_config());
  // Left-only sample: classes 1 and 2 need the right hand, class 3 needs both.
  SignSample s;
  s.id = "leftonly";
  for (int i = 0; i < 4; ++i) {
    Frame f;
    f.t = i;
    f.left = present_obs({-5.0, 2.0 * i}, 2);
    s.frames.push_back(f);
  }
  auto ranking = classify(s, m, FeatureMask{});
  REQUIRE(ranking.size() == 3);
  for (const auto& cs : ranking) {
    CHECK(cs.impossible);
    CHECK(cs.log_score == k_neg_inf);
  }
  CHECK(ranking[0].class_id == 1);
  CHECK(ranking[1].class_id == 2);
  CHECK(ranking[2].class_id == 3);
  CHECK(predict(s, m, FeatureMask{}) == 1);
}

TEST_CASE("exact score ties break toward the lower class id", "[classifier]") {
  Dataset d;
  d.manifest.num_classes = 2;
  d.manifest.handshape_dim = 4;
  d.manifest.classes = {{7, "a", false, true}, {9, "b", false, true}};
  for (int cls : {7, 9}) {
    d.samples.push_back(
        right_sample("t" + std::to_string(cls) + "1", 1, cls, {{0, 0}, {4, 0}, {8, 0}}, 2));
    d.samples.push_back(
        right_sample("t" + std::to_string(cls) + "2", 2, cls, {{0, 1}, {4, 1}, {8, 1}}, 2));
  }
  SignModel m = train(d, argmax_config());
  REQUIRE(m.classes[0].right.has_value());
  REQUIRE(*m.classes[0].right == *m.classes[1].right);

  SignSample probe = right_sample("p", 1, 7, {{0, 0.5}, {4, 0.5}, {8, 0.5}}, 2);
  auto ranking = classify(probe, m, FeatureMask{});
  REQUIRE(ranking.size() == 2);
  CHECK(ranking[0].log_score == ranking[1].log_score);
  CHECK(ranking[0].class_id == 7);
  CHECK(ranking[1].class_id == 9);
}

TEST_CASE("position mask reduces to the position factor exactly", "[classifier]") {
  SignModel m = train(training_set(), argmax_config());
  const FeatureMask pos = mask_from_name("pos");
  SignSample probe = wave_probe();

  HandFeatures f = extract_hand_features(probe, Hand::right, m);
  for (const auto& entry : m.classes) {
    if (!entry.uses_right || entry.uses_left) continue;
    const double direct = position_log_prob(f.first, f.last, entry.right->position);
    CHECK(hand_log_prob(probe, Hand::right, *entry.right, m, pos) == direct);
    CHECK(score_of(classify(probe, m, pos), entry.class_id) == direct);
  }
}

TEST_CASE("unused-hand mutations never change a one-handed score", "[classifier]") {
  SignModel m = train(training_set(), argmax_config());
  const FeatureMask all;
  const SignSample base = wave_probe();
  const double expected = score_of(classify(base, m, all), 1);

  Rng rng(404);
  for (int rep = 0; rep < 30; ++rep) {
    SignSample s = base;
    for (auto& fr : s.frames) {
      if (rng.uniform() < 0.5) continue;
      fr.left = present_obs({rng.uniform(-30, 30), rng.uniform(-30, 30)},
                            static_cast<int>(rng.uniform_int(0, 3)));
    }
    REQUIRE(score_of(classify(s, m, all), 1) == expected);
  }
}

TEST_CASE("masked factors add up to the full score", "[classifier]") {
  SignModel m = train(training_set(), argmax_config());
  SignSample probe = two_hand_sample("p", 1, 3, {{-5.1, 0}, {-5.0, 4.1}, {-5.2, 8.0}}, 2,
                                     {{5.1, 0}, {5.0, 4.1}, {5.2, 8.0}}, 3);
  probe.class_label.reset();

  auto full = classify(probe, m, mask_from_name("all"));
  auto p = classify(probe, m, mask_from_name("pos"));
  auto mv = classify(probe, m, mask_from_name("mov"));
  auto hs = classify(probe, m, mask_from_name("hs"));
  for (const auto& entry : m.classes) {
    const int cid = entry.class_id;
    const double sum = score_of(p, cid) + score_of(mv, cid) + score_of(hs, cid);
    CHECK(score_of(full, cid) == Catch::Approx(sum).epsilon(1e-9));
  }
}

TEST_CASE("classify rejects samples with the wrong handshape dim", "[classifier]") {
  SignModel m = train(training_set(), argmax_config());
  SignSample s = wave_probe();
  s.frames[1].right.hs = std::vector<double>{0.2, 0.2, 0.2, 0.2, 0.2};
  CHECK_THROWS_AS(classify(s, m, FeatureMask{}), ValidationError);
}

TEST_CASE("extract_hand_track validates present-frame payloads", "[classifier]") {
  SignSample s = wave_probe();
  s.frames[1].right.pos.reset();
  CHECK_THROWS_AS(extract_hand_track(s, Hand::right), ValidationError);

  HandTrack t = extract_hand_track(wave_probe(), Hand::right);
  CHECK(t.present_count == 3);
  CHECK(t.total_frames == 3);
  CHECK(extract_hand_track(wave_probe(), Hand::left).present_count == 0);
}

TEST_CASE("scoring an absent hand's position factor is a caller bug", "[classifier]") {
  SignModel m = train(training_set(), argmax_config());
  SignSample s;
  s.id = "empty";
  for (int i = 0; i < 3; ++i) {
    Frame f;
    f.t = i;
    f.left = present_obs({0, 0}, 0);
    s.frames.push_back(f);
  }
  const HandClassModel& hcm = *m.classes[0].right;
  CHECK_THROWS_AS(hand_log_prob(s, Hand::right, hcm, m, mask_from_name("pos")),
                  std::invalid_argument);
  CHECK_THROWS_AS(hand_log_prob(s, Hand::right, hcm, m, mask_from_name("mov")),
                  std::invalid_argument);
  // Handshape-only is fine: it scores 0 over zero frames.
  CHECK(hand_log_prob(s, Hand::right, hcm, m, mask_from_name("hs")) == 0.0);
  CHECK_THROWS_AS(classify(s, m, FeatureMask{false, false, false}),
                  std::invalid_argument);
}

TEST_CASE("training is deterministic and thread-count invariant", "[classifier]") {
  TrainConfig cfg;  // codebook quantizer: exercises the k-means path
  cfg.seed = 11;
  cfg.codewords = 4;
  Dataset d = training_set();

  SignModel a = train(d, cfg, 1);
  SignModel b = train(d, cfg, 1);
  SignModel c = train(d, cfg, 3);
  CHECK(a == b);
  CHECK(a == c);

  SignModel e = train(d, argmax_config(), 1);
  SignModel f = train(d, argmax_config(), 2);
  CHECK(e == f);
}

TEST_CASE("mask and backend names round trip", "[classifier]") {
  for (const char* name : {"all", "hs", "mov", "pos", "hs-pos", "hs-mov", "pos-mov"})
    CHECK(mask_name(mask_from_name(name)) == name);
  CHECK_THROWS_AS(mask_from_name("everything"), std::invalid_argument);
  CHECK_THROWS_AS(mask_name(FeatureMask{false, false, false}), std::invalid_argument);

  CHECK(backend_from_name("bow") == Backend::bow);
  CHECK(backend_from_name("hmm") == Backend::hmm);
  CHECK(std::string(backend_name(Backend::hmm)) == "hmm");
  CHECK_THROWS_AS(backend_from_name("gru"), std::invalid_argument);
}
