#include "emseg/em_gen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "emseg/logspace.hpp"

namespace emseg {

namespace {

std::vector<int> middle_classes_of(int left_class, int right_class, int num_classes) {
  std::vector<int> mids;
  for (int c = 0; c < num_classes; ++c)
    if (c != left_class && c != right_class) mids.push_back(c);
  return mids;
}

// Renormalizes all present components so the prior sums to 1.
void renormalize(GenSegmentPriors& p) {
  std::vector<double> parts;
  for (double v : p.log_c1) parts.push_back(v);
  for (const auto& cls : p.log_c2)
    for (double v : cls) parts.push_back(v);
  if (p.has_c3()) parts.push_back(p.log_c3);
  if (parts.empty())
    throw std::invalid_argument("gen priors: no admissible configuration for this segment");
  const double z = log_sum_exp(parts);
  if (z == kNegInf)
    throw std::invalid_argument("gen priors: zero total prior mass");
  for (double& v : p.log_c1) v -= z;
  for (auto& cls : p.log_c2)
    for (double& v : cls) v -= z;
  if (p.has_c3()) p.log_c3 -= z;
}

}  // namespace

TriLayout::TriLayout(int segment_len, int win) : len(segment_len), window(win) {
  row_offset.assign(std::max(len, 1), 0);
  int cursor = 0;
  for (int a1 = 1; a1 < len; ++a1) {
    row_offset[a1] = cursor;
    cursor += row_size(a1);
  }
  total = cursor;
}

GenSegmentPriors build_gen_priors(const SegmentContext& ctx, const LengthPrior& prior,
                                  const CasePriorConfig& cases, double beta_prev,
                                  bool allow_c3, int window) {
  const int len = ctx.length();
  const int l = ctx.left_class();
  const int r = ctx.right_class();
  if (static_cast<int>(prior.mu.size()) < ctx.num_classes())
    throw std::invalid_argument("build_gen_priors: length prior smaller than class count");

  GenSegmentPriors out;
  out.tri = TriLayout(len, window);
  out.num_candidates = ctx.num_candidates();
  out.middle_classes = middle_classes_of(l, r, ctx.num_classes());

  if (cases.c1_admissible) {
    out.log_c1.reserve(out.num_candidates);
    for (int j = ctx.first_candidate(); j <= ctx.last_candidate(); ++j)
      out.log_c1.push_back(poisson_gap_log_prior(j - beta_prev, prior.mu[l]));
    const double z = log_sum_exp(out.log_c1);
    for (double& v : out.log_c1) v += cases.log_c1 - z;
  }

  if (cases.num_middle_classes > 0 && out.tri.total > 0) {
    // Left-gap factor shared by every middle class.
    std::vector<double> left_gap(len, kNegInf);
    for (int a1 = 1; a1 < len; ++a1)
      left_gap[a1] = poisson_gap_log_prior(ctx.left_stamp() + a1 - beta_prev, prior.mu[l]);
    out.log_c2.resize(out.middle_classes.size());
    for (size_t mi = 0; mi < out.middle_classes.size(); ++mi) {
      const int c = out.middle_classes[mi];
      std::vector<double> mid_gap(len + 1, kNegInf);
      for (int g = 1; g <= len; ++g) mid_gap[g] = poisson_gap_log_prior(g, prior.mu[c]);
      auto& tri = out.log_c2[mi];
      tri.resize(out.tri.total);
      for (int a1 = 1; a1 < len; ++a1)
        for (int a2 = a1 + 1; a2 <= out.tri.a2_max(a1); ++a2)
          tri[out.tri.index(a1, a2)] = left_gap[a1] + mid_gap[a2 - a1];
      const double z = log_sum_exp(tri);
      for (double& v : tri) v += cases.log_c2_per_class - z;
    }
  }

  if (cases.c3_admissible && allow_c3) out.log_c3 = cases.log_c3;

  renormalize(out);
  return out;
}

GenSegmentPriors uniform_gen_priors(const SegmentContext& ctx, const CasePriorConfig& cases,
                                    bool allow_c3, int window) {
  GenSegmentPriors out;
  out.tri = TriLayout(ctx.length(), window);
  out.num_candidates = ctx.num_candidates();
  out.middle_classes = middle_classes_of(ctx.left_class(), ctx.right_class(), ctx.num_classes());
  int configs = 0;
  if (cases.c1_admissible) configs += out.num_candidates;
  if (cases.num_middle_classes > 0)
    configs += out.tri.total * static_cast<int>(out.middle_classes.size());
  if (cases.c3_admissible && allow_c3) configs += 1;
  if (configs == 0)
    throw std::invalid_argument("gen priors: no admissible configuration for this segment");
  const double lp = -std::log(static_cast<double>(configs));
  if (cases.c1_admissible) out.log_c1.assign(out.num_candidates, lp);
  if (cases.num_middle_classes > 0 && out.tri.total > 0)
    out.log_c2.assign(out.middle_classes.size(), std::vector<double>(out.tri.total, lp));
  if (cases.c3_admissible && allow_c3) out.log_c3 = lp;
  return out;
}

double CasePosterior::prob_c1() const {
  double s = 0.0;
  for (double v : log_post_c1) s += exp_or_zero(v);
  return s;
}

double CasePosterior::prob_c2() const {
  double s = 0.0;
  for (const auto& cls : log_post_c2)
    for (double v : cls) s += exp_or_zero(v);
  return s;
}

double CasePosterior::prob_c3() const {
  return log_post_c3 == kNegInf ? 0.0 : exp_or_zero(log_post_c3);
}

CasePosterior case_posteriors(const SegmentContext& ctx, const GenSegmentPriors& priors,
                              double beta_prev, int segment_ordinal) {
  const int len = ctx.length();
  CasePosterior cp;
  cp.segment_ordinal = segment_ordinal;
  cp.first_frame = ctx.left_stamp();
  cp.end_frame = ctx.right_stamp();
  cp.left_class = ctx.left_class();
  cp.right_class = ctx.right_class();
  cp.num_classes = ctx.num_classes();
  cp.range = ctx.range();
  cp.candidates = ctx.candidates();
  cp.middle_classes = priors.middle_classes;
  cp.tri = priors.tri;
  cp.beta_prev = beta_prev;

  // Joint log-probabilities per configuration, normalized with a streaming
  // max shift to avoid materializing one flat array over all of them.
  double max_joint = kNegInf;
  bool any = false;
  if (priors.has_c1()) {
    if (static_cast<int>(priors.log_c1.size()) != ctx.num_candidates())
      throw std::invalid_argument("case_posteriors: C1 prior size mismatch");
    cp.log_post_c1.resize(priors.log_c1.size());
    for (size_t m = 0; m < priors.log_c1.size(); ++m) {
      cp.log_post_c1[m] =
          one_boundary_log_likelihood(ctx, cp.candidates[m]) + priors.log_c1[m];
      max_joint = std::max(max_joint, cp.log_post_c1[m]);
      any = true;
    }
  }
  if (priors.has_c2()) {
    cp.log_post_c2.resize(priors.log_c2.size());
    for (size_t mi = 0; mi < priors.log_c2.size(); ++mi) {
      const int c = cp.middle_classes[mi];
      auto& tri = cp.log_post_c2[mi];
      tri.resize(cp.tri.total);
      for (int a1 = 1; a1 < len; ++a1) {
        const double left_run = ctx.run_log_prob(0, a1, cp.left_class);
        for (int a2 = a1 + 1; a2 <= cp.tri.a2_max(a1); ++a2) {
          const double ll = left_run + ctx.run_log_prob(a1, a2, c) +
                            ctx.run_log_prob(a2, len, cp.right_class);
          const int idx = cp.tri.index(a1, a2);
          tri[idx] = ll + priors.log_c2[mi][idx];
          max_joint = std::max(max_joint, tri[idx]);
          any = true;
        }
      }
    }
  }
  if (priors.has_c3()) {
    cp.log_post_c3 = constant_class_log_likelihood(ctx, cp.left_class) + priors.log_c3;
    max_joint = std::max(max_joint, cp.log_post_c3);
    any = true;
  }
  if (!any || max_joint == kNegInf)
    throw std::invalid_argument("case_posteriors: no admissible configuration (segment " +
                                std::to_string(segment_ordinal) + ")");
  double sum = 0.0;
  for (double v : cp.log_post_c1) sum += exp_or_zero(v - max_joint);
  for (const auto& cls : cp.log_post_c2)
    for (double v : cls) sum += exp_or_zero(v - max_joint);
  if (cp.log_post_c3 != kNegInf) sum += exp_or_zero(cp.log_post_c3 - max_joint);
  cp.log_z = max_joint + std::log(sum);
  for (double& v : cp.log_post_c1) v -= cp.log_z;
  for (auto& cls : cp.log_post_c2)
    for (double& v : cls) v -= cp.log_z;
  if (cp.log_post_c3 != kNegInf) cp.log_post_c3 -= cp.log_z;
  return cp;
}

CasePosterior case_posteriors(const SegmentContext& ctx, const LengthPrior& prior,
                              const CasePriorConfig& cases, double beta_prev, bool allow_c3,
                              int window, int segment_ordinal) {
  return case_posteriors(ctx, build_gen_priors(ctx, prior, cases, beta_prev, allow_c3, window),
                         beta_prev, segment_ordinal);
}

Matrix gen_weights(const CasePosterior& cp) {
  const int len = cp.end_frame - cp.first_frame;
  const int n1 = static_cast<int>(cp.candidates.size());
  const bool same_ends = cp.left_class == cp.right_class;

  // Unnormalized posterior masses. All weights are ratios of sums of
  // these, with the grand total accumulated from the very terms the
  // left-stamp row uses, so the left weight there is exactly 1.
  std::vector<double> s1_suffix(n1 + 1, 0.0);
  for (int m = n1 - 1; m >= 0; --m)
    s1_suffix[m] = s1_suffix[m + 1] + exp_or_zero(cp.log_post_c1.empty() ? kNegInf
                                                                       : cp.log_post_c1[m]);

  // One pass over each C2 triangle: per-class row totals (over s2) and
  // column totals (over s1). The straddling mass at frame offset o then
  // follows the recurrence mid(o) = mid(o-1) + rowTotal[o] - colTotal[o].
  const int n_mid = static_cast<int>(cp.log_post_c2.size());
  std::vector<std::vector<double>> row_total(n_mid), col_total(n_mid);
  std::vector<double> row_all(len, 0.0);  // per a1, summed over classes
  for (int mi = 0; mi < n_mid; ++mi) {
    row_total[mi].assign(len, 0.0);
    col_total[mi].assign(len + 1, 0.0);
    for (int a1 = 1; a1 < len; ++a1) {
      double acc = 0.0;
      for (int a2 = a1 + 1; a2 <= cp.tri.a2_max(a1); ++a2) {
        const double q = exp_or_zero(cp.log_post_c2[mi][cp.tri.index(a1, a2)]);
        acc += q;
        col_total[mi][a2] += q;
      }
      row_total[mi][a1] = acc;
      row_all[a1] += acc;
    }
  }
  std::vector<double> s2_suffix(len + 1, 0.0);
  for (int a1 = len - 1; a1 >= 1; --a1) s2_suffix[a1] = s2_suffix[a1 + 1] + row_all[a1];

  const double q3 = cp.log_post_c3 == kNegInf ? 0.0 : exp_or_zero(cp.log_post_c3);
  const double total = s1_suffix[0] + s2_suffix[1] + q3;

  const int first_cand = cp.candidates.empty() ? cp.first_frame + 1 : cp.candidates.front();
  Matrix w(len, cp.num_classes);
  std::vector<double> mid(n_mid, 0.0);
  for (int o = 0; o < len; ++o) {
    const int frame = cp.first_frame + o;
    const int m1 = std::clamp(frame - first_cand + 1, 0, n1);
    const double wl =
        (s1_suffix[m1] + s2_suffix[std::min(o + 1, len)] + (same_ends ? q3 : 0.0)) / total;
    double mid_sum = 0.0;
    for (int mi = 0; mi < n_mid; ++mi) {
      if (o >= 1) mid[mi] += row_total[mi][o] - col_total[mi][o];
      const double v = std::max(0.0, mid[mi] / total);  // guard cancellation dust
      w(o, cp.middle_classes[mi]) += v;
      mid_sum += v;
    }
    const double wr = std::max(0.0, 1.0 - wl - mid_sum);
    w(o, cp.left_class) += wl;
    w(o, cp.right_class) += wr;
  }
  return w;
}

double update_last_boundary(const CasePosterior& cp, double beta_prev) {
  double beta = beta_prev * cp.prob_c3();
  for (size_t m = 0; m < cp.log_post_c1.size(); ++m)
    beta += cp.candidates[m] * exp_or_zero(cp.log_post_c1[m]);
  const int len = cp.end_frame - cp.first_frame;
  for (size_t mi = 0; mi < cp.log_post_c2.size(); ++mi)
    for (int a1 = 1; a1 < len; ++a1)
      for (int a2 = a1 + 1; a2 <= cp.tri.a2_max(a1); ++a2)
        beta += (cp.first_frame + a2) * exp_or_zero(cp.log_post_c2[mi][cp.tri.index(a1, a2)]);
  return beta;
}

GenEStepResult e_step_gen(const FrameProbs& probs, const AnnotationSet& ann,
                          const LengthPrior& prior, const GenOptions& opts) {
  const int total_frames = probs.frames();
  const int num_classes = probs.classes();
  validate_annotation(ann, total_frames, num_classes);
  if (ann.stamps.empty()) throw std::invalid_argument("e_step_gen: no stamps");
  const bool allow_c3 = ann.mode == SupervisionMode::kSkipTag;

  GenEStepResult res;
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
  hard_label(0, ann.stamps.front().frame, ann.stamps.front().class_id);
  hard_label(ann.stamps.back().frame, total_frames, ann.stamps.back().class_id);

  double beta = 0.0;  // expected last boundary; starts at the video start
  for (int k = 0; k + 1 < K; ++k) {
    const Stamp& left = ann.stamps[k];
    const Stamp& right = ann.stamps[k + 1];
    try {
      SegmentContext ctx(probs, left.frame, right.frame, left.class_id, right.class_id,
                         opts.range);
      const CasePriorConfig cases =
          case_log_priors(left.class_id, right.class_id, num_classes);
      CasePosterior cp =
          case_posteriors(ctx, prior, cases, beta, allow_c3, opts.window, k);
      res.marginal_log_lik += cp.log_z;
      const Matrix seg_w = gen_weights(cp);
      for (int o = 0; o < ctx.length(); ++o)
        for (int c = 0; c < num_classes; ++c)
          res.weights.w(left.frame + o, c) += seg_w(o, c);
      beta = update_last_boundary(cp, beta);
      res.betas.push_back(beta);
      res.posteriors.push_back(std::move(cp));
    } catch (const std::exception& e) {
      throw std::runtime_error("e_step_gen: segment " + std::to_string(k) + " [" +
                               std::to_string(left.frame) + ", " +
                               std::to_string(right.frame) + "): " + e.what());
    }
  }
  return res;
}

}  // namespace emseg
