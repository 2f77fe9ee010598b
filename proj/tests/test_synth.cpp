#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "signbow/synth.hpp"

using namespace signbow;
using Catch::Matchers::ContainsSubstring;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/signbow_synth_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

GeneratorConfig tiny_config() {
  GeneratorConfig cfg;
  cfg.num_classes = 8;
  cfg.num_subjects = 2;
  cfg.reps_per_subject = 2;
  cfg.seed = 3;
  return cfg;
}

double joint_sep(const HandPrototype& a, const HandPrototype& b) {
  const double dfp = distance(a.fp_mean, b.fp_mean);
  const double dlp = distance(a.lp_mean, b.lp_mean);
  return std::sqrt(dfp * dfp + dlp * dlp);
}

}  // namespace

TEST_CASE("generator config validation", "[synth]") {
  CHECK_NOTHROW(validate_generator_config(GeneratorConfig{}));

  GeneratorConfig cfg;
  cfg.num_classes = 0;
  CHECK_THROWS_AS(validate_generator_config(cfg), ValidationError);
  cfg = GeneratorConfig{};
  cfg.direction_bins = 3;
  CHECK_THROWS_AS(validate_generator_config(cfg), ValidationError);
  cfg = GeneratorConfig{};
  cfg.handshape_dim = 1;
  CHECK_THROWS_AS(validate_generator_config(cfg), ValidationError);
  cfg = GeneratorConfig{};
  cfg.fraction_one_handed = 1.5;
  CHECK_THROWS_AS(validate_generator_config(cfg), ValidationError);
  cfg = GeneratorConfig{};
  cfg.frames_min = 1;
  CHECK_THROWS_AS(validate_generator_config(cfg), ValidationError);
  cfg = GeneratorConfig{};
  cfg.frames_max = cfg.frames_min - 1;
  CHECK_THROWS_AS(validate_generator_config(cfg), ValidationError);
  cfg = GeneratorConfig{};
  cfg.box_cm = 0.0;
  CHECK_THROWS_AS(validate_generator_config(cfg), ValidationError);
}

TEST_CASE("prototype validation catches structural damage", "[synth]") {
  PrototypeSet ps = sample_prototypes(tiny_config());
  CHECK_NOTHROW(validate_prototypes(ps));

  PrototypeSet broken = ps;
  broken.prototypes[0].right->direction_profile.pop_back();
  CHECK_THROWS_AS(validate_prototypes(broken), ValidationError);

  broken = ps;
  broken.prototypes[0].uses_left = true;  // flag without payload
  broken.prototypes[0].left.reset();
  CHECK_THROWS_AS(validate_prototypes(broken), ValidationError);

  broken = ps;
  broken.prototypes[0].uses_left = false;
  broken.prototypes[0].left.reset();
  broken.prototypes[0].uses_right = false;
  broken.prototypes[0].right.reset();
  CHECK_THROWS_AS(validate_prototypes(broken), ValidationError);

  broken = ps;
  broken.prototypes[0].right->handshape_profile[0] += 0.5;  // no longer sums to 1
  CHECK_THROWS_AS(validate_prototypes(broken), ValidationError);
}

TEST_CASE("sampled prototypes honor the configured fractions", "[synth]") {
  GeneratorConfig cfg = tiny_config();
  PrototypeSet ps = sample_prototypes(cfg);
  REQUIRE(ps.prototypes.size() == 8);
  CHECK(ps.config == cfg);

  // round_half_up(8 * 42/64) = 5 one-handed, round_half_up(8 * 0.15) = 1 low.
  int one_handed = 0, low_movement = 0;
  for (const auto& p : ps.prototypes) {
    CHECK(p.uses_right);
    if (!p.uses_left) ++one_handed;
    REQUIRE(p.right.has_value());
    if (p.right->amount_mean < 5.0) {
      ++low_movement;
      CHECK(p.right->amount_mean >= 1.0);
      CHECK(p.right->amount_mean <= 4.0);
    } else {
      CHECK(p.right->amount_mean >= 12.0);
      CHECK(p.right->amount_mean <= 30.0);
    }
  }
  CHECK(one_handed == 5);
  CHECK(low_movement == 1);
}

TEST_CASE("sampled prototypes keep the joint separation per hand channel", "[synth]") {
  GeneratorConfig cfg = tiny_config();
  PrototypeSet ps = sample_prototypes(cfg);

  std::vector<HandPrototype> lefts, rights;
  for (const auto& p : ps.prototypes) {
    if (p.left) lefts.push_back(*p.left);
    if (p.right) rights.push_back(*p.right);
  }
  for (const auto* channel : {&lefts, &rights})
    for (std::size_t i = 0; i < channel->size(); ++i)
      for (std::size_t j = i + 1; j < channel->size(); ++j)
        CHECK(joint_sep((*channel)[i], (*channel)[j]) >= cfg.min_separation_cm - 1e-12);

  // Profiles are normalized bumps.
  for (const auto& p : ps.prototypes)
    for (const auto* hp : {&p.left, &p.right}) {
      if (!*hp) continue;
      double dsum = 0, hsum = 0;
      for (double v : (*hp)->direction_profile) dsum += v;
      for (double v : (*hp)->handshape_profile) hsum += v;
      CHECK(dsum == Catch::Approx(1.0).epsilon(1e-12));
      CHECK(hsum == Catch::Approx(1.0).epsilon(1e-12));
    }

  CHECK(sample_prototypes(cfg) == ps);
}

TEST_CASE("impossible separation requests fail with the best effort reported", "[synth]") {
  GeneratorConfig cfg = tiny_config();
  cfg.box_cm = 10.0;
  cfg.min_separation_cm = 500.0;
  CHECK_THROWS_WITH(sample_prototypes(cfg),
                    ContainsSubstring("cannot place class") && ContainsSubstring("best achieved"));
}

TEST_CASE("generated dataset has the full grid of samples", "[synth]") {
  GeneratorConfig cfg = tiny_config();
  cfg.num_classes = 3;
  PrototypeSet ps = sample_prototypes(cfg);
  Dataset d = generate_dataset(ps);

  CHECK(d.samples.size() == 3u * 2u * 2u);
  CHECK(validate_dataset(d).empty());
  CHECK(d.manifest.num_classes == 3);
  CHECK(d.manifest.handshape_dim == 16);
  CHECK(d.manifest.classes[2].name == "sign_002");
  CHECK(d.manifest.sorted_class_ids() == std::vector<int>{0, 1, 2});
  CHECK(subjects_of(d) == std::vector<int>{1, 2});

  std::set<std::string> ids;
  for (const auto& s : d.samples) ids.insert(s.id);
  CHECK(ids.size() == d.samples.size());
  CHECK(ids.count("c000_s01_r00") == 1);
  CHECK(ids.count("c002_s02_r01") == 1);

  for (const auto& s : d.samples) {
    CHECK(s.frames.size() >= 10);
    CHECK(s.frames.size() <= 24);
    const ClassAnnotation* ann = d.manifest.find_class(*s.class_label);
    REQUIRE(ann != nullptr);
    for (Hand h : {Hand::left, Hand::right}) {
      std::size_t present = 0;
      for (const auto& f : s.frames)
        if (f.hand(h).present) ++present;
      if (ann->uses(h)) {
        CHECK(present == s.frames.size());
        for (const auto& f : s.frames) {
          REQUIRE(f.hand(h).pos.has_value());
          REQUIRE(f.hand(h).hs.has_value());
          CHECK(f.hand(h).hs->size() == 16);
        }
      } else {
        // Clutter fills every frame; otherwise the hand is fully absent.
        CHECK((present == 0 || present == s.frames.size()));
      }
    }
  }

  CHECK(generate_dataset(ps) == d);
}

TEST_CASE("noise-free generation pins endpoints to the prototype means", "[synth]") {
  GeneratorConfig cfg;
  cfg.num_classes = 2;
  cfg.num_subjects = 2;
  cfg.reps_per_subject = 2;
  cfg.seed = 11;
  cfg.subject_offset_scale = 0.0;
  cfg.pos_noise_cm = 0.0;
  cfg.amount_noise_cm = 0.0;
  PrototypeSet ps = sample_prototypes(cfg);
  Dataset d = generate_dataset(ps);

  for (const auto& s : d.samples) {
    const HandPrototype& hp = *ps.prototypes[static_cast<std::size_t>(*s.class_label)].right;
    const Point2 first = *s.frames.front().right.pos;
    const Point2 last = *s.frames.back().right.pos;
    CHECK(first.x == hp.fp_mean.x);
    CHECK(first.y == hp.fp_mean.y);
    CHECK(last.x == Catch::Approx(hp.lp_mean.x).margin(1e-9));
    CHECK(last.y == Catch::Approx(hp.lp_mean.y).margin(1e-9));
  }
}

TEST_CASE("curvature mismatch bends interiors but not endpoints", "[synth]") {
  GeneratorConfig cfg = tiny_config();
  cfg.num_classes = 2;
  PrototypeSet straight = sample_prototypes(cfg);
  PrototypeSet bent = straight;
  bent.config.mismatch_curvature = true;

  Dataset a = generate_dataset(straight);
  Dataset b = generate_dataset(bent);
  REQUIRE(a.samples.size() == b.samples.size());
  CHECK(a != b);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const Point2 fa = *a.samples[i].frames.front().right.pos;
    const Point2 fb = *b.samples[i].frames.front().right.pos;
    const Point2 la = *a.samples[i].frames.back().right.pos;
    const Point2 lb = *b.samples[i].frames.back().right.pos;
    CHECK(fa.x == fb.x);
    CHECK(fa.y == fb.y);
    CHECK(la.x == lb.x);
    CHECK(la.y == lb.y);
  }
}

TEST_CASE("oracle recovers labels on well-separated data", "[synth]") {
  GeneratorConfig cfg;
  cfg.num_classes = 4;
  cfg.num_subjects = 3;
  cfg.reps_per_subject = 3;
  cfg.seed = 5;
  PrototypeSet ps = sample_prototypes(cfg);
  Dataset d = generate_dataset(ps);
  CHECK(oracle_accuracy(ps, d) >= 0.9);
}

TEST_CASE("oracle breaks exact ties toward the lower class id", "[synth]") {
  PrototypeSet twins = handshape_twin_prototypes(0);
  twins.prototypes[1] = twins.prototypes[0];  // byte-identical classes
  Dataset d = generate_dataset(twins);
  for (std::size_t i = 0; i < 6; ++i) CHECK(oracle_predict(twins, d.samples[i]) == 0);
  CHECK(oracle_accuracy(twins, d) == 0.5);
}

TEST_CASE("oracle input validation", "[synth]") {
  GeneratorConfig cfg = tiny_config();
  cfg.num_classes = 2;
  PrototypeSet ps = sample_prototypes(cfg);
  Dataset d = generate_dataset(ps);

  PrototypeSet empty;
  empty.config = cfg;
  CHECK_THROWS_AS(oracle_accuracy(empty, d), ValidationError);

  Dataset none;
  none.manifest = d.manifest;
  CHECK_THROWS_AS(oracle_accuracy(ps, none), ValidationError);

  Dataset unlabeled = d;
  unlabeled.samples[0].class_label.reset();
  CHECK_THROWS_AS(oracle_accuracy(ps, unlabeled), ValidationError);

  Dataset wild = d;
  wild.samples[0].class_label = 99;
  CHECK_THROWS_AS(oracle_accuracy(ps, wild), ValidationError);
}

TEST_CASE("ablation grid factorizes position, movement, handshape", "[synth]") {
  PrototypeSet ps = ablation_prototypes();
  REQUIRE(ps.prototypes.size() == 27);
  CHECK_NOTHROW(validate_prototypes(ps));
  CHECK(ps.config.fraction_one_handed == 1.0);
  CHECK(ps.config.num_subjects == 6);

  for (int pos = 0; pos < 3; ++pos) {
    const std::size_t base = static_cast<std::size_t>(pos * 9);
    const HandPrototype& ref = *ps.prototypes[base].right;
    for (int mov = 0; mov < 3; ++mov)
      for (int hs = 0; hs < 3; ++hs) {
        const HandPrototype& hp =
            *ps.prototypes[base + static_cast<std::size_t>(mov * 3 + hs)].right;
        CHECK(hp.fp_mean.x == ref.fp_mean.x);
        CHECK(hp.fp_mean.y == ref.fp_mean.y);
        // All three movement profiles share a circular mean, so the endpoint
        // alone cannot tell them apart.
        CHECK(hp.lp_mean.x == Catch::Approx(ref.lp_mean.x).margin(1e-9));
        CHECK(hp.lp_mean.y == Catch::Approx(ref.lp_mean.y).margin(1e-9));
        CHECK(hp.amount_mean == 18.0);
      }
  }

  // Movement rows differ in profile; handshape columns differ in profile.
  CHECK(ps.prototypes[0].right->direction_profile != ps.prototypes[3].right->direction_profile);
  CHECK(ps.prototypes[0].right->handshape_profile != ps.prototypes[1].right->handshape_profile);
  for (const auto& p : ps.prototypes) {
    CHECK_FALSE(p.uses_left);
    CHECK(p.uses_right);
  }
}

TEST_CASE("handshape twins differ only in handshape", "[synth]") {
  PrototypeSet ps = handshape_twin_prototypes();
  REQUIRE(ps.prototypes.size() == 2);
  CHECK_NOTHROW(validate_prototypes(ps));
  const HandPrototype& a = *ps.prototypes[0].right;
  const HandPrototype& b = *ps.prototypes[1].right;
  CHECK(a.fp_mean.x == b.fp_mean.x);
  CHECK(a.fp_mean.y == b.fp_mean.y);
  CHECK(a.lp_mean.x == b.lp_mean.x);
  CHECK(a.lp_mean.y == b.lp_mean.y);
  CHECK(a.direction_profile == b.direction_profile);
  CHECK(a.amount_mean == b.amount_mean);
  CHECK(a.handshape_profile != b.handshape_profile);
}

TEST_CASE("prototype files round trip exactly", "[synth]") {
  PrototypeSet ps = sample_prototypes(tiny_config());
  TempFile f("protos.json");
  save_prototypes(ps, f.path);
  PrototypeSet back = load_prototypes(f.path);
  CHECK(back == ps);
}

TEST_CASE("prototype loading failure modes", "[synth]") {
  CHECK_THROWS_AS(load_prototypes("/nonexistent/protos.json"), ParseError);

  TempFile corrupt("corrupt.json");
  {
    std::ofstream out(corrupt.path);
    out << "{ this is not json";
  }
  CHECK_THROWS_AS(load_prototypes(corrupt.path), ParseError);

  TempFile hollow("hollow.json");
  {
    std::ofstream out(hollow.path);
    out << "{\"format_version\": 1}";
  }
  CHECK_THROWS_AS(load_prototypes(hollow.path), ValidationError);
}
