#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emseg/em_gen.hpp"
#include "emseg/em_tss.hpp"
#include "emseg/priors.hpp"
#include "emseg/types.hpp"

namespace emseg {

// Linear-softmax frame scorer: logits = W f[t] + b. The scorer seam is the
// pair (scorer_forward, scorer_param_grad); a richer scorer supplies the
// same two operations over its own parameter type.
struct ScorerParams {
  Matrix weight;             // C x d
  std::vector<double> bias;  // C

  int classes() const { return weight.rows(); }
  int feature_dim() const { return weight.cols(); }
  static ScorerParams zeros(int num_classes, int feature_dim);
};

FrameProbs scorer_forward(const ScorerParams& params, const Matrix& features);

// Loss value plus gradient with respect to the per-frame logits.
struct LossGrad {
  double value = 0.0;
  Matrix dlogits;  // T x C
};

// -(1/T) sum_t sum_c w[t,c] log p[t,c]; dlogits = (p - w)/T.
LossGrad weighted_ce_loss(const FrameProbs& probs, const WeightMatrix& weights);

// (1/(T C)) sum_{t>=1, c} min(|log p[t,c] - log p[t-1,c]|, epsilon).
// Subgradient 0 at the truncation plateau and at zero difference.
LossGrad transition_loss(const FrameProbs& probs, double epsilon);

// (1/T) sum over interior timestamp segments and t in (t_{k-1}, t_k) of
// hinge penalties on rising left-class and falling right-class log-probs.
LossGrad confidence_loss(const FrameProbs& probs, const AnnotationSet& ann);

enum class Optimizer { kGd, kAdam };

struct TrainConfig {
  int n_init = 30;   // initialization epochs
  int n_max = 5;     // epochs per M-step
  int m_iters = 10;  // E-M iterations
  double lr = 5e-4;
  double lambda_tr = 0.15;
  double lambda_conf = 0.075;
  double epsilon = 4.0;
  std::uint64_t seed = 0;
  // When > 0 the M-step runs until the max-abs gradient entry falls below
  // this tolerance (capped at tol_epoch_cap), using backtracking
  // full-batch GD so every step decreases the loss.
  double m_step_grad_tol = 0.0;
  int tol_epoch_cap = 200000;
  bool line_search = false;
  Optimizer init_optimizer = Optimizer::kGd;
  LengthPriorMode prior_mode = LengthPriorMode::kFromSample;
  std::string prior_sample_id;  // empty = first video
  double noninformative_mu = 50.0;
  CandidateRange candidate_range = CandidateRange::kExcludeLeftStamp;
  int window = 0;
  int jobs = 1;
};

// Cross-entropy on annotated frames only, for n_init epochs, starting
// from `init`. Zero epochs returns `init` unchanged.
ScorerParams naive_init(std::span<const VideoSample> videos,
                        std::span<const AnnotationSet> annotations, const TrainConfig& cfg,
                        ScorerParams init);

// Hard labels with boundaries at the stamp mid-points:
// s_k = floor((t_{k-1} + t_k + 1) / 2); end classes extend to the edges.
std::vector<int> uniform_baseline_labels(const AnnotationSet& ann, int total_frames);

enum class EmMode { kEmTss, kEmGen, kSkipTag };

struct IterationDiag {
  int iteration = 0;
  double l_em = 0.0;
  double l_tr = 0.0;
  double l_conf = 0.0;
  double total = 0.0;
  double marginal_log_lik = 0.0;
  std::optional<double> weight_mof;
  std::optional<double> boundary_error_pct;
};

struct EmResult {
  ScorerParams params;
  std::vector<IterationDiag> diags;  // m_iters + 1 rows; last is the final E-step
};

// Algorithm-1 driver: naive initialization, then M iterations of E-step
// (em_tss or em_gen by mode) followed by N^max epochs minimizing
// L_EM + lambda_TR L_TR + lambda_Conf L_Conf. Corpus losses are
// frame-count-weighted means, so the M-step maximizes the summed
// Q-function and the marginal log-likelihood is nondecreasing when the
// auxiliary losses are off.
EmResult run_em(std::span<const VideoSample> videos,
                std::span<const AnnotationSet> annotations, const TrainConfig& cfg,
                EmMode mode);

// One M-step: `epochs` epochs of full-batch GD on the combined loss with
// the given fixed weights (or, in tolerance mode, backtracking GD until
// the gradient tolerance). Exposed for baselines and benchmarks.
void run_m_step(ScorerParams& params, std::span<const VideoSample> videos,
                std::span<const WeightMatrix> weights,
                std::span<const AnnotationSet> annotations, const TrainConfig& cfg,
                int epochs);

// Supervised training on per-video hard labels (fully-supervised and
// Uniform baselines); same loss surface with one-hot weights.
ScorerParams train_on_labels(std::span<const VideoSample> videos,
                             std::span<const std::vector<int>> labels, const TrainConfig& cfg,
                             int epochs, ScorerParams init);

std::vector<int> predict_labels(const ScorerParams& params, const Matrix& features);

LengthPrior make_length_prior(std::span<const VideoSample> videos, const TrainConfig& cfg,
                              int num_classes);

}  // namespace emseg
