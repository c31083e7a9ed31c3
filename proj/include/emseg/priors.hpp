#pragma once

#include <span>
#include <vector>

#include "emseg/likelihood.hpp"
#include "emseg/types.hpp"

namespace emseg {

enum class LengthPriorMode { kNonInformative, kFromSample };

// Per-class mean action lengths, in frames. Under kNonInformative all
// entries share one value; only ratios reach the binomial boundary prior,
// while the EM-Gen Poisson gap priors do use the absolute value.
struct LengthPrior {
  std::vector<double> mu;
  LengthPriorMode mode = LengthPriorMode::kFromSample;

  static LengthPrior non_informative(int num_classes, double value = 50.0);
};

// mu_c = mean observed length of class-c segments over the sample; classes
// absent from the sample fall back to the global mean segment length.
LengthPrior estimate_mu(std::span<const VideoSample> sample, int num_classes);

// log Bin(total_frames, p_k) pmf at frame j, via log-gamma, where
// p_k = sum_{n<=k-1} mu_{c_n} / sum_{n<=K} mu_{c_n}. boundary_ordinal is
// the 1-based segment ordinal k in [2, K] (boundary between segments k-1
// and k);
// segment_classes is c_1..c_K. j may range over the full pmf support
// [0, total_frames]; the boundary-meaningful region is [1, total_frames].
double binomial_boundary_log_prior(int total_frames, int boundary_ordinal,
                                   std::span<const int> segment_classes,
                                   const LengthPrior& prior, int j);

// log Pois(mu) pmf at gap, via log-gamma. gap may be fractional (the
// EM-Gen recursion measures gaps from a real-valued expected boundary).
double poisson_gap_log_prior(double gap, double mu);

// Case prior masses for one timestamp segment, renormalized over the
// admissible case set: C1 only if l != r, C3 only if l == r, C2 only if a
// middle class exists. Inadmissible entries carry mass 0 (log -inf).
struct CasePriorConfig {
  double log_c1 = 0.0;
  double log_c2_per_class = 0.0;  // mass per admissible middle class
  double log_c3 = 0.0;
  bool c1_admissible = false;
  bool c3_admissible = false;
  int num_middle_classes = 0;

  bool is_middle_class(int c, int left_class, int right_class) const {
    return num_middle_classes > 0 && c != left_class && c != right_class;
  }
};

CasePriorConfig case_log_priors(int left_class, int right_class, int num_classes);

// Binomial prior clipped to the segment's candidate set and renormalized
// within it, one log value per candidate. This is the per-candidate prior
// feeding the boundary posterior.
std::vector<double> tss_candidate_log_prior(const SegmentContext& ctx, int total_frames,
                                            int boundary_ordinal,
                                            std::span<const int> segment_classes,
                                            const LengthPrior& prior);

}  // namespace emseg
