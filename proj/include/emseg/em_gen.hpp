#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "emseg/likelihood.hpp"
#include "emseg/logspace.hpp"
#include "emseg/priors.hpp"
#include "emseg/types.hpp"

namespace emseg {

// Flat storage for Case-2 triplets (s1, s2) of one segment, expressed as
// offsets a1 = s1 - left_stamp in [1, len-1] and a2 = s2 - left_stamp in
// [a1+1, min(len, a1+window)]. window == 0 means unrestricted.
struct TriLayout {
  int len = 0;
  int window = 0;
  std::vector<int> row_offset;  // indexed by a1, size len (entry 0 unused)
  int total = 0;

  TriLayout() = default;
  TriLayout(int segment_len, int win);

  int a2_max(int a1) const {
    return window > 0 ? std::min(len, a1 + window) : len;
  }
  int row_size(int a1) const { return std::max(0, a2_max(a1) - a1); }
  int index(int a1, int a2) const { return row_offset[a1] + (a2 - a1 - 1); }
};

// Per-configuration log priors for one timestamp segment: the Poisson gap
// factors, conditioned per case (and per middle class for C2), are
// renormalized over the segment's admissible configurations, then scaled
// by the case masses; the overall prior sums to 1 over everything present.
struct GenSegmentPriors {
  std::vector<double> log_c1;               // per candidate; empty if C1 absent
  std::vector<std::vector<double>> log_c2;  // [middle class idx][tri index]
  double log_c3 = kNegInf;
  std::vector<int> middle_classes;
  TriLayout tri;
  int num_candidates = 0;

  bool has_c1() const { return !log_c1.empty(); }
  bool has_c2() const { return !log_c2.empty() && tri.total > 0; }
  bool has_c3() const { return log_c3 != kNegInf; }
};

GenSegmentPriors build_gen_priors(const SegmentContext& ctx, const LengthPrior& prior,
                                  const CasePriorConfig& cases, double beta_prev,
                                  bool allow_c3, int window = 0);

// Uniform mass over every admissible configuration; used for ablations and
// prior-free tests.
GenSegmentPriors uniform_gen_priors(const SegmentContext& ctx, const CasePriorConfig& cases,
                                    bool allow_c3, int window = 0);

// Joint posterior over cases and their configurations for one segment.
struct CasePosterior {
  int segment_ordinal = 0;
  int first_frame = 0;
  int end_frame = 0;
  int left_class = 0;
  int right_class = 0;
  int num_classes = 0;
  CandidateRange range = CandidateRange::kExcludeLeftStamp;
  std::vector<int> candidates;
  std::vector<double> log_post_c1;               // per candidate
  std::vector<std::vector<double>> log_post_c2;  // [middle class idx][tri index]
  double log_post_c3 = kNegInf;
  std::vector<int> middle_classes;
  TriLayout tri;
  double beta_prev = 0.0;
  double log_z = 0.0;  // unnormalized marginal, for diagnostics

  double prob_c1() const;
  double prob_c2() const;
  double prob_c3() const;
};

// Normalizes likelihood x prior over all admissible configurations.
// Throws when the segment admits none (e.g. l == r with C3 disallowed and
// a segment too short for a middle action).
CasePosterior case_posteriors(const SegmentContext& ctx, const GenSegmentPriors& priors,
                              double beta_prev, int segment_ordinal = 0);
CasePosterior case_posteriors(const SegmentContext& ctx, const LengthPrior& prior,
                              const CasePriorConfig& cases, double beta_prev, bool allow_c3,
                              int window = 0, int segment_ordinal = 0);

// Per-frame weight rows (segment length x num_classes):
// omega_left collects C1 boundaries above j, C2 first-boundaries above j
// and (when l == r) all of C3; middle classes collect straddling C2 mass;
// the right class takes the remainder. Built from suffix-sum ratios so the
// row at the left stamp is exactly one-hot on the left class.
Matrix gen_weights(const CasePosterior& cp);

// beta_k = beta_{k-1} * P[C3] + sum_s s * P[C1, s]
//        + sum_{s2} s2 * sum_{s1, c} P[C2, s1, s2, c].
double update_last_boundary(const CasePosterior& cp, double beta_prev);

struct GenOptions {
  CandidateRange range = CandidateRange::kExcludeLeftStamp;
  int window = 0;  // cap on middle-segment length; 0 = exact
};

struct GenEStepResult {
  WeightMatrix weights;
  std::vector<CasePosterior> posteriors;
  std::vector<double> betas;  // expected last boundary after each segment
  double marginal_log_lik = 0.0;
};

// Sequential left-to-right pass threading the expected last boundary
// through the segment priors (beta_0 = 0, the video start). Flanking
// partial segments are hard-labeled as in e_step_tss. C3 is admitted only
// under SkipTag; TSS annotations are processed as TSS-missing.
GenEStepResult e_step_gen(const FrameProbs& probs, const AnnotationSet& ann,
                          const LengthPrior& prior, const GenOptions& opts = {});

}  // namespace emseg
