#include "emseg/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "emseg/logspace.hpp"

namespace emseg {

namespace {

const double kLogFloor = std::log(kProbFloor);

void check_rows_normalized(const Matrix& log_p) {
  for (int t = 0; t < log_p.rows(); ++t) {
    double sum = 0.0;
    for (int c = 0; c < log_p.cols(); ++c) sum += std::exp(log_p(t, c));
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("FrameProbs: row " + std::to_string(t) +
                                  " exponentiates to " + std::to_string(sum));
  }
}

Matrix floored(Matrix m) {
  for (double& v : m.data())
    if (!(v >= kLogFloor)) v = kLogFloor;  // also catches NaN/-inf
  return m;
}

}  // namespace

void validate_annotation(const AnnotationSet& ann, int total_frames, int num_classes) {
  for (size_t i = 0; i < ann.stamps.size(); ++i) {
    const Stamp& s = ann.stamps[i];
    if (s.frame < 0 || s.frame >= total_frames)
      throw std::invalid_argument("annotation: stamp frame " + std::to_string(s.frame) +
                                  " outside [0, " + std::to_string(total_frames) + ")");
    if (s.class_id < 0 || s.class_id >= num_classes)
      throw std::invalid_argument("annotation: stamp class " + std::to_string(s.class_id) +
                                  " outside [0, " + std::to_string(num_classes) + ")");
    if (i > 0 && ann.stamps[i - 1].frame >= s.frame)
      throw std::invalid_argument("annotation: stamp frames not strictly increasing");
    if (i > 0 && ann.mode == SupervisionMode::kTss &&
        ann.stamps[i - 1].class_id == s.class_id)
      throw std::invalid_argument("annotation: consecutive TSS stamps share class " +
                                  std::to_string(s.class_id));
  }
}

FrameProbs FrameProbs::from_logits(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (int t = 0; t < logits.rows(); ++t) {
    const double lse = log_sum_exp(logits.row(t));
    for (int c = 0; c < logits.cols(); ++c) out(t, c) = logits(t, c) - lse;
  }
  return FrameProbs(floored(std::move(out)));
}

FrameProbs FrameProbs::from_log_probs(Matrix log_p) {
  Matrix m = floored(std::move(log_p));
  check_rows_normalized(m);
  return FrameProbs(std::move(m));
}

FrameProbs FrameProbs::from_probs(const Matrix& p) {
  Matrix out(p.rows(), p.cols());
  for (int t = 0; t < p.rows(); ++t)
    for (int c = 0; c < p.cols(); ++c) out(t, c) = std::log(p(t, c));
  return from_log_probs(std::move(out));
}

WeightMatrix WeightMatrix::one_hot(std::span<const int> labels, int num_classes) {
  Matrix w(static_cast<int>(labels.size()), num_classes);
  for (size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] < 0 || labels[t] >= num_classes)
      throw std::invalid_argument("one_hot: label out of range");
    w(static_cast<int>(t), labels[t]) = 1.0;
  }
  return WeightMatrix{std::move(w)};
}

void WeightMatrix::validate(double tol) const {
  for (int t = 0; t < w.rows(); ++t) {
    double sum = 0.0;
    for (int c = 0; c < w.cols(); ++c) {
      if (w(t, c) < 0.0)
        throw std::invalid_argument("WeightMatrix: negative weight at frame " + std::to_string(t));
      sum += w(t, c);
    }
    if (std::abs(sum - 1.0) > tol)
      throw std::invalid_argument("WeightMatrix: row " + std::to_string(t) + " sums to " +
                                  std::to_string(sum));
  }
}

SegmentList segments_from_framewise(std::span<const int> labels) {
  if (labels.empty()) throw std::invalid_argument("segments_from_framewise: empty labels");
  SegmentList segs;
  int start = 0;
  for (size_t t = 1; t <= labels.size(); ++t) {
    if (t == labels.size() || labels[t] != labels[start]) {
      segs.push_back({start, static_cast<int>(t), labels[start]});
      start = static_cast<int>(t);
    }
  }
  return segs;
}

std::vector<int> framewise_from_segments(const SegmentList& segs, int total_frames) {
  if (segs.empty()) throw std::invalid_argument("framewise_from_segments: empty segment list");
  int cursor = 0;
  std::vector<int> labels(total_frames, -1);
  for (const Segment& s : segs) {
    if (s.start != cursor)
      throw std::invalid_argument("framewise_from_segments: gap or overlap at frame " +
                                  std::to_string(s.start));
    if (s.end_exclusive <= s.start || s.end_exclusive > total_frames)
      throw std::invalid_argument("framewise_from_segments: bad segment [" +
                                  std::to_string(s.start) + ", " +
                                  std::to_string(s.end_exclusive) + ")");
    for (int t = s.start; t < s.end_exclusive; ++t) labels[t] = s.class_id;
    cursor = s.end_exclusive;
  }
  if (cursor != total_frames)
    throw std::invalid_argument("framewise_from_segments: segments end at " +
                                std::to_string(cursor) + ", expected " +
                                std::to_string(total_frames));
  return labels;
}

std::vector<int> interior_boundaries(std::span<const int> labels) {
  SegmentList segs = segments_from_framewise(labels);
  std::vector<int> b;
  for (size_t k = 1; k < segs.size(); ++k) b.push_back(segs[k].start);
  return b;
}

}  // namespace emseg
