#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emseg/matrix.hpp"

namespace emseg {

// Frames are 0-indexed and segments are half-open [start, end_exclusive).
// Probability floor applied to every log-probability on construction so
// likelihood sums stay finite.
inline constexpr double kProbFloor = 1e-12;

// Shared problem description: class count, feature dimension, optional
// class names. Referenced by all modules; immutable after construction.
struct ProblemConfig {
  int num_classes = 0;
  int feature_dim = 0;
  std::vector<std::string> class_names;  // optional, size 0 or num_classes
};

struct Segment {
  int start = 0;
  int end_exclusive = 0;
  int class_id = 0;

  int length() const { return end_exclusive - start; }
  bool operator==(const Segment&) const = default;
};

using SegmentList = std::vector<Segment>;

struct VideoSample {
  std::string id;
  Matrix features;             // T x d
  std::vector<int> gt_labels;  // length T, entries in [0, C)

  int frames() const { return static_cast<int>(gt_labels.size()); }
  int feature_dim() const { return features.cols(); }
};

enum class SupervisionMode { kTss, kTssMissing, kSkipTag };

struct Stamp {
  int frame = 0;
  int class_id = 0;
  bool operator==(const Stamp&) const = default;
};

struct AnnotationSet {
  SupervisionMode mode = SupervisionMode::kTss;
  std::vector<Stamp> stamps;  // strictly increasing frames
};

// Throws if stamps are out of range, not strictly increasing, or (under
// TSS) consecutive stamps share a class.
void validate_annotation(const AnnotationSet& ann, int total_frames, int num_classes);

// T x C per-frame class log-probabilities. Every row exponentiates to a
// distribution within 1e-9; entries are floored at log(kProbFloor).
class FrameProbs {
 public:
  FrameProbs() = default;

  // Row-wise log-softmax of raw scores.
  static FrameProbs from_logits(const Matrix& logits);
  // Accepts log-probabilities; floors and validates row sums.
  static FrameProbs from_log_probs(Matrix log_p);
  // Accepts probabilities; takes logs, floors and validates row sums.
  static FrameProbs from_probs(const Matrix& p);

  const Matrix& log_p() const { return log_p_; }
  int frames() const { return log_p_.rows(); }
  int classes() const { return log_p_.cols(); }
  double at(int t, int c) const { return log_p_(t, c); }

 private:
  explicit FrameProbs(Matrix m) : log_p_(std::move(m)) {}
  Matrix log_p_;
};

// T x C nonnegative soft class weights; rows sum to 1 within 1e-9.
struct WeightMatrix {
  Matrix w;

  int frames() const { return w.rows(); }
  int classes() const { return w.cols(); }

  static WeightMatrix one_hot(std::span<const int> labels, int num_classes);
  // Throws if a row is negative or does not sum to 1 within tol.
  void validate(double tol = 1e-9) const;
};

// Run-length encoding of a frame-wise labeling. Adjacent segments differ
// in class by construction; concatenating them reproduces the input.
SegmentList segments_from_framewise(std::span<const int> labels);

// Inverse of segments_from_framewise; segments must tile [0, total_frames)
// exactly (gap or overlap -> error).
std::vector<int> framewise_from_segments(const SegmentList& segs, int total_frames);

// Interior ground-truth boundaries (starts of segments 2..K).
std::vector<int> interior_boundaries(std::span<const int> labels);

}  // namespace emseg
