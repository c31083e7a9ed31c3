#include "emseg/em_tss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "emseg/logspace.hpp"

namespace emseg {

BoundaryPosterior boundary_posterior(const SegmentContext& ctx,
                                     std::span<const double> candidate_log_prior,
                                     int segment_ordinal) {
  if (static_cast<int>(candidate_log_prior.size()) != ctx.num_candidates())
    throw std::invalid_argument("boundary_posterior: prior size " +
                                std::to_string(candidate_log_prior.size()) +
                                " != candidate count " + std::to_string(ctx.num_candidates()));
  BoundaryPosterior post;
  post.segment_ordinal = segment_ordinal;
  post.first_frame = ctx.left_stamp();
  post.end_frame = ctx.right_stamp();
  post.candidates = ctx.candidates();
  post.log_post.resize(post.candidates.size());
  for (size_t m = 0; m < post.candidates.size(); ++m)
    post.log_post[m] =
        one_boundary_log_likelihood(ctx, post.candidates[m]) + candidate_log_prior[m];
  const double z = log_sum_exp(post.log_post);
  if (z == kNegInf)
    throw std::invalid_argument("boundary_posterior: all placements have zero mass");
  for (double& v : post.log_post) v -= z;
  return post;
}

std::vector<std::pair<double, double>> weights_from_posterior(const BoundaryPosterior& post) {
  const int len = post.end_frame - post.first_frame;
  const int n = static_cast<int>(post.candidates.size());
  // Unnormalized masses and their suffix sums; dividing by the full suffix
  // keeps omega_left(first frame) == 1 bit-exactly and monotone in j.
  std::vector<double> suffix(n + 1, 0.0);
  for (int m = n - 1; m >= 0; --m) suffix[m] = suffix[m + 1] + exp_or_zero(post.log_post[m]);
  const double total = suffix[0];

  std::vector<std::pair<double, double>> rows(len);
  for (int o = 0; o < len; ++o) {
    const int frame = post.first_frame + o;
    // First candidate index strictly above this frame.
    int m = 0;
    while (m < n && post.candidates[m] <= frame) ++m;
    const double wl = suffix[m] / total;
    rows[o] = {wl, 1.0 - wl};
  }
  return rows;
}

TssEStepResult e_step_tss(const FrameProbs& probs, const AnnotationSet& ann,
                          const LengthPrior& prior, const EStepOptions& opts) {
  if (ann.mode == SupervisionMode::kSkipTag)
    throw std::invalid_argument("e_step_tss: SkipTag annotations need e_step_gen");
  const int total_frames = probs.frames();
  const int num_classes = probs.classes();
  validate_annotation(ann, total_frames, num_classes);
  if (ann.stamps.empty()) throw std::invalid_argument("e_step_tss: no stamps");

  TssEStepResult res;
  res.weights.w = Matrix(total_frames, num_classes);
  auto hard_label = [&](int from, int to, int c) {
    for (int t = from; t < to; ++t) {
      res.weights.w(t, c) = 1.0;
      res.marginal_log_lik += probs.at(t, c);
    }
  };

  const int K = static_cast<int>(ann.stamps.size());
  if (K == 1) {
    hard_label(0, total_frames, ann.stamps[0].class_id);
    return res;
  }

  std::vector<int> stamp_classes;
  stamp_classes.reserve(K);
  for (const Stamp& s : ann.stamps) stamp_classes.push_back(s.class_id);

  hard_label(0, ann.stamps.front().frame, ann.stamps.front().class_id);
  hard_label(ann.stamps.back().frame, total_frames, ann.stamps.back().class_id);

  for (int k = 0; k + 1 < K; ++k) {
    const Stamp& left = ann.stamps[k];
    const Stamp& right = ann.stamps[k + 1];
    SegmentContext ctx(probs, left.frame, right.frame, left.class_id, right.class_id,
                       opts.range);
    // Boundary ordinal k+2 in the 1-based segment numbering.
    std::vector<double> log_prior =
        tss_candidate_log_prior(ctx, total_frames, k + 2, stamp_classes, prior);
    BoundaryPosterior post = boundary_posterior(ctx, log_prior, k);

    // Marginal over this segment before normalization.
    std::vector<double> joint(post.candidates.size());
    for (size_t m = 0; m < joint.size(); ++m)
      joint[m] = one_boundary_log_likelihood(ctx, post.candidates[m]) + log_prior[m];
    res.marginal_log_lik += log_sum_exp(joint);

    const auto rows = weights_from_posterior(post);
    for (int o = 0; o < ctx.length(); ++o) {
      const int t = left.frame + o;
      res.weights.w(t, left.class_id) += rows[o].first;
      res.weights.w(t, right.class_id) += rows[o].second;
    }
    res.posteriors.push_back(std::move(post));
  }
  return res;
}

std::vector<double> expected_boundaries(std::span<const BoundaryPosterior> posts) {
  std::vector<double> out;
  out.reserve(posts.size());
  for (const BoundaryPosterior& p : posts) {
    double s = 0.0;
    for (size_t m = 0; m < p.candidates.size(); ++m)
      s += p.candidates[m] * exp_or_zero(p.log_post[m]);
    out.push_back(s);
  }
  return out;
}

}  // namespace emseg
