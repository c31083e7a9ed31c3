#pragma once

// Test-only reference implementations, deliberately written as naive
// per-frame / per-configuration enumerations so they share no code path
// with the library internals they check.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "emseg/matrix.hpp"
#include "emseg/types.hpp"

namespace oracle {

using emseg::Matrix;

// ---- naive log-likelihoods (direct per-frame accumulation) ----

inline double naive_one_boundary(const Matrix& log_p, int left, int right, int l, int r,
                                 int j) {
  double acc = 0.0;
  for (int t = left; t < j; ++t) acc += log_p(t, l);
  for (int t = j; t < right; ++t) acc += log_p(t, r);
  return acc;
}

inline double naive_two_boundary(const Matrix& log_p, int left, int right, int l, int r,
                                 int s1, int s2, int c) {
  double acc = 0.0;
  for (int t = left; t < s1; ++t) acc += log_p(t, l);
  for (int t = s1; t < s2; ++t) acc += log_p(t, c);
  for (int t = s2; t < right; ++t) acc += log_p(t, r);
  return acc;
}

inline double naive_constant(const Matrix& log_p, int left, int right, int c) {
  double acc = 0.0;
  for (int t = left; t < right; ++t) acc += log_p(t, c);
  return acc;
}

// ---- brute-force TSS posterior and weights ----

struct BruteTss {
  std::vector<double> posterior;  // over candidates, normalized
  std::vector<std::vector<double>> weights;  // per frame: {w_left, w_right}
  double expected_boundary = 0.0;
};

inline BruteTss brute_tss(const Matrix& log_p, int left, int right, int l, int r,
                          const std::vector<int>& candidates,
                          const std::vector<double>& log_prior) {
  BruteTss out;
  std::vector<double> joint(candidates.size());
  double max_j = -1e300;
  for (size_t m = 0; m < candidates.size(); ++m) {
    joint[m] = naive_one_boundary(log_p, left, right, l, r, candidates[m]) + log_prior[m];
    max_j = std::max(max_j, joint[m]);
  }
  double z = 0.0;
  for (double v : joint) z += std::exp(v - max_j);
  out.posterior.resize(candidates.size());
  for (size_t m = 0; m < candidates.size(); ++m) {
    out.posterior[m] = std::exp(joint[m] - max_j) / z;
    out.expected_boundary += candidates[m] * out.posterior[m];
  }
  out.weights.assign(right - left, {0.0, 0.0});
  for (int t = left; t < right; ++t) {
    double wl = 0.0;
    for (size_t m = 0; m < candidates.size(); ++m)
      if (candidates[m] > t) wl += out.posterior[m];
    out.weights[t - left] = {wl, 1.0 - wl};
  }
  return out;
}

// ---- exhaustive EM-Gen configuration enumeration ----

struct GenConfigItem {
  int kind = 1;  // 1, 2 or 3
  int s1 = 0;    // boundary (C1) or first boundary (C2)
  int s2 = 0;
  int middle = -1;
  double log_prior = 0.0;
};

struct BruteGen {
  std::vector<GenConfigItem> configs;
  std::vector<double> posterior;  // aligned with configs
  Matrix weights;                 // (right-left) x C
  double beta = 0.0;
  double p1 = 0.0, p2 = 0.0, p3 = 0.0;
};

inline BruteGen brute_gen(const Matrix& log_p, int left, int right, int l, int r,
                          const std::vector<GenConfigItem>& configs, double beta_prev) {
  BruteGen out;
  out.configs = configs;
  std::vector<double> joint(configs.size());
  double max_j = -1e300;
  for (size_t i = 0; i < configs.size(); ++i) {
    const GenConfigItem& cf = configs[i];
    double ll = 0.0;
    if (cf.kind == 1)
      ll = naive_one_boundary(log_p, left, right, l, r, cf.s1);
    else if (cf.kind == 2)
      ll = naive_two_boundary(log_p, left, right, l, r, cf.s1, cf.s2, cf.middle);
    else
      ll = naive_constant(log_p, left, right, l);
    joint[i] = ll + cf.log_prior;
    max_j = std::max(max_j, joint[i]);
  }
  double z = 0.0;
  for (double v : joint) z += std::exp(v - max_j);
  out.posterior.resize(configs.size());
  for (size_t i = 0; i < configs.size(); ++i) out.posterior[i] = std::exp(joint[i] - max_j) / z;

  out.weights = Matrix(right - left, log_p.cols());
  for (int t = left; t < right; ++t) {
    for (size_t i = 0; i < configs.size(); ++i) {
      const GenConfigItem& cf = configs[i];
      int cls;
      if (cf.kind == 1)
        cls = t < cf.s1 ? l : r;
      else if (cf.kind == 2)
        cls = t < cf.s1 ? l : (t < cf.s2 ? cf.middle : r);
      else
        cls = l;
      out.weights(t - left, cls) += out.posterior[i];
    }
  }
  for (size_t i = 0; i < configs.size(); ++i) {
    const GenConfigItem& cf = configs[i];
    if (cf.kind == 1) {
      out.beta += cf.s1 * out.posterior[i];
      out.p1 += out.posterior[i];
    } else if (cf.kind == 2) {
      out.beta += cf.s2 * out.posterior[i];
      out.p2 += out.posterior[i];
    } else {
      out.beta += beta_prev * out.posterior[i];
      out.p3 += out.posterior[i];
    }
  }
  return out;
}

// ---- reference pmfs in long double ----

inline double ref_binomial_logpmf(int n, int k, double p) {
  long double acc = 0.0L;
  for (int i = 1; i <= k; ++i)
    acc += std::log(static_cast<long double>(n - k + i)) - std::log(static_cast<long double>(i));
  acc += k * std::log(static_cast<long double>(p));
  acc += (n - k) * std::log(1.0L - static_cast<long double>(p));
  return static_cast<double>(acc);
}

inline double ref_poisson_logpmf(long long k, double mu) {
  long double acc = -static_cast<long double>(mu) + k * std::log(static_cast<long double>(mu));
  for (long long i = 2; i <= k; ++i) acc -= std::log(static_cast<long double>(i));
  return static_cast<double>(acc);
}

// ---- central finite differences over logits ----

inline Matrix fd_gradient(const std::function<double(const Matrix&)>& loss, Matrix logits,
                          double h = 1e-5) {
  Matrix grad(logits.rows(), logits.cols());
  for (int t = 0; t < logits.rows(); ++t)
    for (int c = 0; c < logits.cols(); ++c) {
      const double keep = logits(t, c);
      logits(t, c) = keep + h;
      const double up = loss(logits);
      logits(t, c) = keep - h;
      const double down = loss(logits);
      logits(t, c) = keep;
      grad(t, c) = (up - down) / (2 * h);
    }
  return grad;
}

// ---- reference Levenshtein (full matrix) ----

inline int ref_levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::vector<int>> d(a.size() + 1, std::vector<int>(b.size() + 1, 0));
  for (size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i)
    for (size_t j = 1; j <= b.size(); ++j) {
      const int sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
    }
  return d[a.size()][b.size()];
}

// ---- reference segment F1 via per-frame set counting ----

inline double ref_frame_iou(const emseg::Segment& a, const emseg::Segment& b, int frames) {
  int inter = 0, uni = 0;
  for (int t = 0; t < frames; ++t) {
    const bool ina = t >= a.start && t < a.end_exclusive;
    const bool inb = t >= b.start && t < b.end_exclusive;
    if (ina && inb) ++inter;
    if (ina || inb) ++uni;
  }
  return static_cast<double>(inter) / uni;
}

// Same matching rule as the library (temporal order, best unmatched
// same-class IoU, earliest wins ties) computed from frame sets.
inline double ref_f1(const emseg::SegmentList& pred, const emseg::SegmentList& gt, double tau,
                     int frames) {
  std::vector<bool> used(gt.size(), false);
  long tp = 0, fp = 0, fn = 0;
  for (const emseg::Segment& p : pred) {
    int best = -1;
    double best_iou = -1.0;
    for (size_t g = 0; g < gt.size(); ++g) {
      if (used[g] || gt[g].class_id != p.class_id) continue;
      const double iou = ref_frame_iou(p, gt[g], frames);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= tau) {
      used[best] = true;
      ++tp;
    } else {
      ++fp;
    }
  }
  for (bool u : used)
    if (!u) ++fn;
  const long denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 100.0 * 2.0 * tp / denom;
}

// ---- random instance helpers ----

inline Matrix random_logits(std::mt19937_64& rng, int rows, int cols, double scale = 2.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (int t = 0; t < rows; ++t)
    for (int c = 0; c < cols; ++c) m(t, c) = n(rng);
  return m;
}

inline std::vector<int> random_labels(std::mt19937_64& rng, int frames, int classes) {
  std::uniform_int_distribution<int> d(0, classes - 1);
  std::vector<int> out(frames);
  for (int t = 0; t < frames; ++t) out[t] = d(rng);
  return out;
}

}  // namespace oracle
