#include "emseg/priors.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "emseg/logspace.hpp"

namespace emseg {

LengthPrior LengthPrior::non_informative(int num_classes, double value) {
  if (num_classes < 1 || value <= 0.0)
    throw std::invalid_argument("LengthPrior::non_informative: bad arguments");
  return {std::vector<double>(num_classes, value), LengthPriorMode::kNonInformative};
}

LengthPrior estimate_mu(std::span<const VideoSample> sample, int num_classes) {
  if (sample.empty()) throw std::invalid_argument("estimate_mu: empty sample");
  std::vector<double> length_sum(num_classes, 0.0);
  std::vector<int> count(num_classes, 0);
  double total_len = 0.0;
  int total_count = 0;
  for (const VideoSample& v : sample) {
    for (const Segment& s : segments_from_framewise(v.gt_labels)) {
      if (s.class_id >= num_classes)
        throw std::invalid_argument("estimate_mu: label outside [0, C)");
      length_sum[s.class_id] += s.length();
      count[s.class_id] += 1;
      total_len += s.length();
      total_count += 1;
    }
  }
  if (total_count == 0) throw std::invalid_argument("estimate_mu: sample has no segments");
  const double global_mean = total_len / total_count;
  LengthPrior prior;
  prior.mode = LengthPriorMode::kFromSample;
  prior.mu.resize(num_classes);
  for (int c = 0; c < num_classes; ++c)
    prior.mu[c] = count[c] > 0 ? length_sum[c] / count[c] : global_mean;
  return prior;
}

double binomial_boundary_log_prior(int total_frames, int boundary_ordinal,
                                   std::span<const int> segment_classes,
                                   const LengthPrior& prior, int j) {
  const int k = boundary_ordinal;
  const int K = static_cast<int>(segment_classes.size());
  if (K < 2 || k < 2 || k > K)
    throw std::invalid_argument("binomial_boundary_log_prior: ordinal " + std::to_string(k) +
                                " outside [2, " + std::to_string(K) + "]");
  if (j < 0 || j > total_frames)
    throw std::invalid_argument("binomial_boundary_log_prior: frame " + std::to_string(j) +
                                " outside [0, " + std::to_string(total_frames) + "]");
  double p;
  if (prior.mode == LengthPriorMode::kNonInformative) {
    // Equal mu: the ratio reduces to (k-1)/K exactly, independent of the
    // common value.
    p = static_cast<double>(k - 1) / K;
  } else {
    double num = 0.0, den = 0.0;
    for (int n = 0; n < K; ++n) {
      const int c = segment_classes[n];
      if (c < 0 || c >= static_cast<int>(prior.mu.size()))
        throw std::invalid_argument("binomial_boundary_log_prior: class out of range");
      den += prior.mu[c];
      if (n < k - 1) num += prior.mu[c];
    }
    p = num / den;
  }
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("binomial_boundary_log_prior: degenerate p_k = " +
                                std::to_string(p));
  const double n = total_frames;
  return std::lgamma(n + 1) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) +
         j * std::log(p) + (n - j) * std::log1p(-p);
}

double poisson_gap_log_prior(double gap, double mu) {
  if (gap < 0.0) throw std::invalid_argument("poisson_gap_log_prior: negative gap");
  if (!(mu > 0.0)) throw std::invalid_argument("poisson_gap_log_prior: mu must be positive");
  return -mu + gap * std::log(mu) - std::lgamma(gap + 1.0);
}

CasePriorConfig case_log_priors(int left_class, int right_class, int num_classes) {
  if (left_class < 0 || left_class >= num_classes || right_class < 0 ||
      right_class >= num_classes)
    throw std::invalid_argument("case_log_priors: class out of range");
  CasePriorConfig cfg;
  cfg.c1_admissible = left_class != right_class;
  cfg.c3_admissible = left_class == right_class;
  cfg.num_middle_classes = num_classes - (left_class == right_class ? 1 : 2);
  if (cfg.num_middle_classes < 0) cfg.num_middle_classes = 0;

  const double raw_case = 1.0 / 3.0;
  const double raw_per_class =
      cfg.num_middle_classes > 0
          ? raw_case / (left_class != right_class ? num_classes - 2 : num_classes - 1)
          : 0.0;
  double total = 0.0;
  if (cfg.c1_admissible) total += raw_case;
  if (cfg.c3_admissible) total += raw_case;
  total += raw_per_class * cfg.num_middle_classes;
  if (total <= 0.0)
    throw std::invalid_argument("case_log_priors: no admissible case for l=" +
                                std::to_string(left_class) + " r=" +
                                std::to_string(right_class) + " C=" +
                                std::to_string(num_classes));
  cfg.log_c1 = cfg.c1_admissible ? std::log(raw_case / total) : kNegInf;
  cfg.log_c3 = cfg.c3_admissible ? std::log(raw_case / total) : kNegInf;
  cfg.log_c2_per_class =
      cfg.num_middle_classes > 0 ? std::log(raw_per_class / total) : kNegInf;
  return cfg;
}

std::vector<double> tss_candidate_log_prior(const SegmentContext& ctx, int total_frames,
                                            int boundary_ordinal,
                                            std::span<const int> segment_classes,
                                            const LengthPrior& prior) {
  std::vector<double> out;
  out.reserve(ctx.num_candidates());
  for (int j = ctx.first_candidate(); j <= ctx.last_candidate(); ++j)
    out.push_back(
        binomial_boundary_log_prior(total_frames, boundary_ordinal, segment_classes, prior, j));
  const double z = log_sum_exp(out);
  for (double& v : out) v -= z;
  return out;
}

}  // namespace emseg
