#include "emseg/likelihood.hpp"

#include <stdexcept>
#include <string>

namespace emseg {

SegmentContext::SegmentContext(const FrameProbs& probs, int left_stamp, int right_stamp,
                               int left_class, int right_class, CandidateRange range)
    : left_stamp_(left_stamp),
      right_stamp_(right_stamp),
      left_class_(left_class),
      right_class_(right_class),
      range_(range) {
  if (left_stamp < 0 || right_stamp > probs.frames() || left_stamp >= right_stamp)
    throw std::invalid_argument("SegmentContext: bad stamp pair [" +
                                std::to_string(left_stamp) + ", " +
                                std::to_string(right_stamp) + ")");
  const int c_count = probs.classes();
  if (left_class < 0 || left_class >= c_count || right_class < 0 || right_class >= c_count)
    throw std::invalid_argument("SegmentContext: class out of range");
  const int len = right_stamp - left_stamp;
  prefix_ = Matrix(len + 1, c_count);
  for (int i = 0; i < len; ++i)
    for (int c = 0; c < c_count; ++c)
      prefix_(i + 1, c) = prefix_(i, c) + probs.at(left_stamp + i, c);
}

std::vector<int> SegmentContext::candidates() const {
  std::vector<int> out;
  out.reserve(num_candidates());
  for (int j = first_candidate(); j <= last_candidate(); ++j) out.push_back(j);
  return out;
}

double one_boundary_log_likelihood(const SegmentContext& ctx, int boundary_frame) {
  if (boundary_frame < ctx.first_candidate() || boundary_frame > ctx.last_candidate())
    throw std::invalid_argument("one_boundary_log_likelihood: boundary " +
                                std::to_string(boundary_frame) + " outside candidates [" +
                                std::to_string(ctx.first_candidate()) + ", " +
                                std::to_string(ctx.last_candidate()) + "]");
  const int a = boundary_frame - ctx.left_stamp();
  return ctx.run_log_prob(0, a, ctx.left_class()) +
         ctx.run_log_prob(a, ctx.length(), ctx.right_class());
}

double two_boundary_log_likelihood(const SegmentContext& ctx, int s1, int s2,
                                   int middle_class) {
  if (!(ctx.left_stamp() < s1 && s1 < s2 && s2 <= ctx.right_stamp()))
    throw std::invalid_argument("two_boundary_log_likelihood: need left < s1 < s2 <= right, got (" +
                                std::to_string(s1) + ", " + std::to_string(s2) + ")");
  if (middle_class < 0 || middle_class >= ctx.num_classes() ||
      middle_class == ctx.left_class() || middle_class == ctx.right_class())
    throw std::invalid_argument("two_boundary_log_likelihood: invalid middle class " +
                                std::to_string(middle_class));
  const int a1 = s1 - ctx.left_stamp();
  const int a2 = s2 - ctx.left_stamp();
  return ctx.run_log_prob(0, a1, ctx.left_class()) +
         ctx.run_log_prob(a1, a2, middle_class) +
         ctx.run_log_prob(a2, ctx.length(), ctx.right_class());
}

double constant_class_log_likelihood(const SegmentContext& ctx, int class_id) {
  if (class_id < 0 || class_id >= ctx.num_classes())
    throw std::invalid_argument("constant_class_log_likelihood: class out of range");
  return ctx.run_log_prob(0, ctx.length(), class_id);
}

}  // namespace emseg
