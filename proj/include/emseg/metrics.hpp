#pragma once

#include <optional>
#include <span>
#include <vector>

#include "emseg/types.hpp"

namespace emseg {

// All metrics are percentages in [0, 100] and pure functions.

// Fraction of frames where pred == gt.
double mof(std::span<const int> pred, std::span<const int> gt);

// 100 * (1 - Levenshtein(pred classes, gt classes) / max(|pred|, |gt|)).
double edit_score(const SegmentList& pred, const SegmentList& gt);

// Segment F1 at IoU threshold tau: predicted segments in temporal order
// match the highest-IoU same-class unmatched GT segment (earliest wins
// ties); TP if IoU >= tau, else FP; unmatched GT are FN.
double f1_at_iou(const SegmentList& pred, const SegmentList& gt, double tau);

// Mean over boundaries of 100 * |pred - gt| / total_frames.
double boundary_error_pct(std::span<const double> pred_boundaries,
                          std::span<const int> gt_boundaries, int total_frames);

// MoF of the per-frame argmax of the weights (ties to the lower class id).
double weight_mof(const WeightMatrix& weights, std::span<const int> gt);

// Corpus aggregation: MoF pooled over frames, edit averaged per video,
// F1 from pooled TP/FP/FN counts (the standard protocol).
struct CorpusMetrics {
  double mof = 0.0;
  double edit = 0.0;
  double f1_10 = 0.0;
  double f1_25 = 0.0;
  double f1_50 = 0.0;
  std::optional<double> boundary_error_pct;
};

struct F1Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

F1Counts f1_counts(const SegmentList& pred, const SegmentList& gt, double tau);

CorpusMetrics corpus_metrics(std::span<const std::vector<int>> pred,
                             std::span<const std::vector<int>> gt);

}  // namespace emseg
