#pragma once

#include <span>
#include <vector>

#include "emseg/likelihood.hpp"
#include "emseg/priors.hpp"
#include "emseg/types.hpp"

namespace emseg {

// Posterior over single-boundary placements for one timestamp segment.
struct BoundaryPosterior {
  int segment_ordinal = 0;      // 0-based index of the interior segment
  int first_frame = 0;          // left stamp
  int end_frame = 0;            // right stamp (exclusive frame span end)
  std::vector<int> candidates;  // ascending boundary candidates
  std::vector<double> log_post;
};

// log_post[j] = log-likelihood(j) + log prior(j) - logsumexp over the
// candidate set. The prior must be defined over exactly the candidates.
BoundaryPosterior boundary_posterior(const SegmentContext& ctx,
                                     std::span<const double> candidate_log_prior,
                                     int segment_ordinal = 0);

// Per-frame (omega_left, omega_right) pairs over the segment's frames.
// omega_left at frame j is the posterior tail mass of boundaries strictly
// above j, computed as a ratio of suffix sums so that the left weight at
// the left stamp is exactly 1 under the default candidate range.
std::vector<std::pair<double, double>> weights_from_posterior(const BoundaryPosterior& post);

struct EStepOptions {
  CandidateRange range = CandidateRange::kExcludeLeftStamp;
};

struct TssEStepResult {
  WeightMatrix weights;
  std::vector<BoundaryPosterior> posteriors;  // one per interior segment
  // Observed-data joint log-likelihood: hard-labeled flank frames plus,
  // per interior segment, log sum_j P_j(S_k) pi_k(j).
  double marginal_log_lik = 0.0;
};

// Full-video E-step. Interior segments get soft weights from the boundary
// posterior; frames before the first stamp and from the last stamp on are
// hard-labeled with the flanking stamp classes. With a single stamp the
// whole video is weighted to that class; zero stamps is an error.
// annotations in kTssMissing mode are accepted (the robustness protocol
// runs EM-TSS on decimated stamps, where adjacent classes may collide and
// the segment weights degenerate to the shared class).
TssEStepResult e_step_tss(const FrameProbs& probs, const AnnotationSet& ann,
                          const LengthPrior& prior, const EStepOptions& opts = {});

// Real-valued expected boundary per posterior: s_hat = sum_j j * P[s = j].
std::vector<double> expected_boundaries(std::span<const BoundaryPosterior> posts);

}  // namespace emseg
