#pragma once

#include <vector>

#include "emseg/matrix.hpp"
#include "emseg/types.hpp"

namespace emseg {

// Candidate set for a single boundary between stamps t_prev < t_next.
// kExcludeLeftStamp uses {t_prev+1, ..., t_next}: the boundary cannot sit
// on the annotated left frame, which makes the weight at t_prev exactly 1
// on the left class. kIncludeLeftStamp uses {t_prev, ..., t_next-1} and is
// kept for ablation only.
enum class CandidateRange { kExcludeLeftStamp, kIncludeLeftStamp };

// A timestamp segment [left_stamp, right_stamp) with its per-class
// cumulative log-probabilities, so any contiguous log-product over the
// segment is a difference of two prefix entries.
class SegmentContext {
 public:
  SegmentContext(const FrameProbs& probs, int left_stamp, int right_stamp,
                 int left_class, int right_class,
                 CandidateRange range = CandidateRange::kExcludeLeftStamp);

  int left_stamp() const { return left_stamp_; }
  int right_stamp() const { return right_stamp_; }
  int left_class() const { return left_class_; }
  int right_class() const { return right_class_; }
  int length() const { return right_stamp_ - left_stamp_; }
  int num_classes() const { return prefix_.cols(); }
  CandidateRange range() const { return range_; }

  // Single-boundary candidates, ascending. Size equals length().
  int first_candidate() const {
    return range_ == CandidateRange::kExcludeLeftStamp ? left_stamp_ + 1 : left_stamp_;
  }
  int last_candidate() const {
    return range_ == CandidateRange::kExcludeLeftStamp ? right_stamp_ : right_stamp_ - 1;
  }
  int num_candidates() const { return length(); }
  std::vector<int> candidates() const;

  // Sum of log p over frames [left_stamp + from, left_stamp + to) for class c.
  double run_log_prob(int from, int to, int c) const {
    return prefix_(to, c) - prefix_(from, c);
  }

 private:
  int left_stamp_;
  int right_stamp_;
  int left_class_;
  int right_class_;
  CandidateRange range_;
  Matrix prefix_;  // (length+1) x C
};

// Log-likelihood of the segment given a single boundary at frame j:
// frames [left_stamp, j) take the left class, [j, right_stamp) the right.
// O(1) from prefixes. j must be in the candidate set.
double one_boundary_log_likelihood(const SegmentContext& ctx, int boundary_frame);

// Log-likelihood given two boundaries left_stamp < s1 < s2 <= right_stamp
// and a middle class c distinct from both endpoint classes.
double two_boundary_log_likelihood(const SegmentContext& ctx, int s1, int s2,
                                   int middle_class);

// Log-likelihood of the whole segment carrying one class.
double constant_class_log_likelihood(const SegmentContext& ctx, int class_id);

}  // namespace emseg
