#include "emseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace emseg {

namespace {

int levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 0; i < a.size(); ++i) {
    cur[0] = static_cast<int>(i) + 1;
    for (size_t j = 0; j < b.size(); ++j)
      cur[j + 1] = std::min({cur[j] + 1, prev[j + 1] + 1, prev[j] + (a[i] == b[j] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<int> class_sequence(const SegmentList& segs) {
  std::vector<int> out;
  out.reserve(segs.size());
  for (const Segment& s : segs) out.push_back(s.class_id);
  return out;
}

double interval_iou(const Segment& a, const Segment& b) {
  const int inter = std::max(0, std::min(a.end_exclusive, b.end_exclusive) -
                                    std::max(a.start, b.start));
  const int uni = a.length() + b.length() - inter;
  return static_cast<double>(inter) / uni;
}

}  // namespace

double mof(std::span<const int> pred, std::span<const int> gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("mof: length mismatch (" + std::to_string(pred.size()) +
                                " vs " + std::to_string(gt.size()) + ")");
  if (pred.empty()) throw std::invalid_argument("mof: empty input");
  size_t correct = 0;
  for (size_t t = 0; t < pred.size(); ++t)
    if (pred[t] == gt[t]) ++correct;
  return 100.0 * static_cast<double>(correct) / pred.size();
}

double edit_score(const SegmentList& pred, const SegmentList& gt) {
  if (pred.empty() && gt.empty()) return 100.0;
  const size_t denom = std::max(pred.size(), gt.size());
  if (pred.empty() || gt.empty()) return 0.0;
  const int dist = levenshtein(class_sequence(pred), class_sequence(gt));
  return std::max(0.0, 100.0 * (1.0 - static_cast<double>(dist) / denom));
}

F1Counts f1_counts(const SegmentList& pred, const SegmentList& gt, double tau) {
  F1Counts counts;
  std::vector<bool> matched(gt.size(), false);
  for (const Segment& p : pred) {
    int best = -1;
    double best_iou = -1.0;
    for (size_t g = 0; g < gt.size(); ++g) {
      if (matched[g] || gt[g].class_id != p.class_id) continue;
      const double iou = interval_iou(p, gt[g]);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= tau) {
      matched[best] = true;
      counts.tp += 1;
    } else {
      counts.fp += 1;
    }
  }
  for (bool m : matched)
    if (!m) counts.fn += 1;
  return counts;
}

double f1_at_iou(const SegmentList& pred, const SegmentList& gt, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("f1_at_iou: tau outside (0, 1)");
  const F1Counts c = f1_counts(pred, gt, tau);
  const long denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 0.0;
  return 100.0 * 2.0 * c.tp / denom;
}

double boundary_error_pct(std::span<const double> pred_boundaries,
                          std::span<const int> gt_boundaries, int total_frames) {
  if (pred_boundaries.size() != gt_boundaries.size())
    throw std::invalid_argument("boundary_error_pct: count mismatch (" +
                                std::to_string(pred_boundaries.size()) + " vs " +
                                std::to_string(gt_boundaries.size()) + ")");
  if (pred_boundaries.empty()) return 0.0;
  double sum = 0.0;
  for (size_t k = 0; k < pred_boundaries.size(); ++k)
    sum += std::abs(pred_boundaries[k] - gt_boundaries[k]) / total_frames;
  return 100.0 * sum / pred_boundaries.size();
}

double weight_mof(const WeightMatrix& weights, std::span<const int> gt) {
  if (static_cast<size_t>(weights.frames()) != gt.size())
    throw std::invalid_argument("weight_mof: length mismatch");
  size_t correct = 0;
  for (int t = 0; t < weights.frames(); ++t) {
    int best = 0;
    for (int c = 1; c < weights.classes(); ++c)
      if (weights.w(t, c) > weights.w(t, best)) best = c;
    if (best == gt[t]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / gt.size();
}

CorpusMetrics corpus_metrics(std::span<const std::vector<int>> pred,
                             std::span<const std::vector<int>> gt) {
  if (pred.size() != gt.size() || pred.empty())
    throw std::invalid_argument("corpus_metrics: corpus size mismatch or empty");
  size_t frames = 0, correct = 0;
  double edit_sum = 0.0;
  F1Counts c10, c25, c50;
  for (size_t v = 0; v < pred.size(); ++v) {
    if (pred[v].size() != gt[v].size())
      throw std::invalid_argument("corpus_metrics: video " + std::to_string(v) +
                                  " length mismatch");
    frames += gt[v].size();
    for (size_t t = 0; t < gt[v].size(); ++t)
      if (pred[v][t] == gt[v][t]) ++correct;
    const SegmentList ps = segments_from_framewise(pred[v]);
    const SegmentList gs = segments_from_framewise(gt[v]);
    edit_sum += edit_score(ps, gs);
    for (auto [tau, counts] : {std::pair{0.10, &c10}, {0.25, &c25}, {0.50, &c50}}) {
      const F1Counts f = f1_counts(ps, gs, tau);
      counts->tp += f.tp;
      counts->fp += f.fp;
      counts->fn += f.fn;
    }
  }
  auto f1_of = [](const F1Counts& c) {
    const long denom = 2 * c.tp + c.fp + c.fn;
    return denom == 0 ? 0.0 : 100.0 * 2.0 * c.tp / denom;
  };
  CorpusMetrics m;
  m.mof = 100.0 * static_cast<double>(correct) / frames;
  m.edit = edit_sum / pred.size();
  m.f1_10 = f1_of(c10);
  m.f1_25 = f1_of(c25);
  m.f1_50 = f1_of(c50);
  return m;
}

}  // namespace emseg
