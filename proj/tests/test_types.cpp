#include <doctest.h>

#include <random>

#include "emseg/types.hpp"
#include "oracle_utils.hpp"

using namespace emseg;

TEST_CASE("segments_from_framewise run-length encodes") {
  const std::vector<int> labels = {0, 0, 1, 1, 1};
  const SegmentList segs = segments_from_framewise(labels);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0] == Segment{0, 2, 0});
  CHECK(segs[1] == Segment{2, 5, 1});

  const std::vector<int> one = {3};
  CHECK(segments_from_framewise(one) == SegmentList{{0, 1, 3}});

  const std::vector<int> alt = {0, 1, 0};
  CHECK(segments_from_framewise(alt).size() == 3);

  CHECK_THROWS(segments_from_framewise(std::vector<int>{}));
}

TEST_CASE("framewise_from_segments inverts and validates tiling") {
  CHECK(framewise_from_segments({{0, 2, 0}, {2, 5, 1}}, 5) ==
        std::vector<int>{0, 0, 1, 1, 1});
  CHECK(framewise_from_segments({{0, 1, 0}}, 1) == std::vector<int>{0});
  CHECK_THROWS(framewise_from_segments({{0, 2, 0}, {3, 5, 1}}, 5));  // gap
  CHECK_THROWS(framewise_from_segments({{0, 3, 0}, {2, 5, 1}}, 5));  // overlap
  CHECK_THROWS(framewise_from_segments({{0, 2, 0}}, 5));             // short
}

TEST_CASE("segment round-trip property") {
  std::mt19937_64 rng(7);
  for (int it = 0; it < 200; ++it) {
    std::uniform_int_distribution<int> len(1, 40), classes(2, 5);
    const int T = len(rng);
    const std::vector<int> labels = oracle::random_labels(rng, T, classes(rng));
    const SegmentList segs = segments_from_framewise(labels);
    for (size_t k = 1; k < segs.size(); ++k) {
      CHECK(segs[k].start == segs[k - 1].end_exclusive);
      CHECK(segs[k].class_id != segs[k - 1].class_id);
    }
    CHECK(framewise_from_segments(segs, T) == labels);
  }
}

TEST_CASE("FrameProbs rows normalize and floor") {
  Matrix logits(2, 3);
  logits(0, 0) = 5.0;
  logits(0, 1) = -80.0;  // forces the floor
  logits(0, 2) = 1.0;
  const FrameProbs p = FrameProbs::from_logits(logits);
  for (int t = 0; t < 2; ++t) {
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) {
      CHECK(std::isfinite(p.at(t, c)));
      CHECK(p.at(t, c) >= std::log(kProbFloor));
      sum += std::exp(p.at(t, c));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }

  Matrix bad(1, 2);
  bad(0, 0) = std::log(0.5);
  bad(0, 1) = std::log(0.3);
  CHECK_THROWS(FrameProbs::from_log_probs(bad));
}

TEST_CASE("annotation invariants") {
  AnnotationSet ann{SupervisionMode::kTss, {{2, 0}, {5, 1}}};
  CHECK_NOTHROW(validate_annotation(ann, 10, 2));

  AnnotationSet repeat{SupervisionMode::kTss, {{2, 0}, {5, 0}}};
  CHECK_THROWS(validate_annotation(repeat, 10, 2));
  repeat.mode = SupervisionMode::kTssMissing;  // allowed after drops
  CHECK_NOTHROW(validate_annotation(repeat, 10, 2));

  AnnotationSet unsorted{SupervisionMode::kTss, {{5, 0}, {2, 1}}};
  CHECK_THROWS(validate_annotation(unsorted, 10, 2));
  AnnotationSet range{SupervisionMode::kTss, {{12, 0}}};
  CHECK_THROWS(validate_annotation(range, 10, 2));
}

TEST_CASE("one-hot weights validate") {
  const std::vector<int> labels = {0, 2, 1};
  const WeightMatrix w = WeightMatrix::one_hot(labels, 3);
  CHECK_NOTHROW(w.validate());
  CHECK(w.w(1, 2) == 1.0);
  CHECK_THROWS(WeightMatrix::one_hot(std::vector<int>{4}, 3));
}
