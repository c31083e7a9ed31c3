#include "emseg/synthdata.hpp"

#include <cmath>
#include <stdexcept>

namespace emseg {

Matrix make_class_means(const GenConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix means(cfg.num_classes, cfg.feature_dim);
  for (int c = 0; c < cfg.num_classes; ++c) {
    for (int k = 0; k < cfg.feature_dim; ++k) means(c, k) = normal(rng);
    // Project out earlier directions while dimensionality allows.
    for (int prev = 0; prev < c && prev < cfg.feature_dim; ++prev) {
      double dot = 0.0;
      for (int k = 0; k < cfg.feature_dim; ++k) dot += means(c, k) * means(prev, k);
      double prev_norm2 = 0.0;
      for (int k = 0; k < cfg.feature_dim; ++k) prev_norm2 += means(prev, k) * means(prev, k);
      for (int k = 0; k < cfg.feature_dim; ++k)
        means(c, k) -= dot / prev_norm2 * means(prev, k);
    }
    double norm = 0.0;
    for (int k = 0; k < cfg.feature_dim; ++k) norm += means(c, k) * means(c, k);
    norm = std::sqrt(norm);
    if (norm < 1e-9) {  // degenerate draw; retry with a fresh vector
      --c;
      continue;
    }
    for (int k = 0; k < cfg.feature_dim; ++k) means(c, k) *= cfg.sep / norm;
  }
  return means;
}

VideoSample generate_video(const GenConfig& cfg, std::mt19937_64& rng, const std::string& id) {
  if (cfg.num_classes < 2 || cfg.feature_dim < 1 || cfg.k_min < 1 || cfg.k_max < cfg.k_min)
    throw std::invalid_argument("generate_video: bad config");
  if (cfg.mu.empty()) throw std::invalid_argument("generate_video: empty mu");
  for (double m : cfg.mu)
    if (!(m > 0.0)) throw std::invalid_argument("generate_video: mu must be positive");
  if (cfg.sigma < 0.0) throw std::invalid_argument("generate_video: negative sigma");
  const Matrix& means = cfg.class_means;
  if (means.rows() != cfg.num_classes || means.cols() != cfg.feature_dim)
    throw std::invalid_argument("generate_video: class_means shape mismatch");

  std::uniform_int_distribution<int> k_dist(cfg.k_min, cfg.k_max);
  std::uniform_int_distribution<int> class_dist(0, cfg.num_classes - 1);
  std::normal_distribution<double> noise(0.0, 1.0);

  const int segments = k_dist(rng);
  std::vector<int> labels;
  int prev_class = -1;
  for (int s = 0; s < segments; ++s) {
    int c = class_dist(rng);
    while (c == prev_class) c = class_dist(rng);
    prev_class = c;
    std::poisson_distribution<int> len_dist(cfg.mu_of(c));
    int len = len_dist(rng);
    while (len < 1) len = len_dist(rng);  // truncated at >= 1
    labels.insert(labels.end(), len, c);
  }

  VideoSample v;
  v.id = id;
  v.gt_labels = std::move(labels);
  v.features = Matrix(v.frames(), cfg.feature_dim);
  for (int t = 0; t < v.frames(); ++t)
    for (int k = 0; k < cfg.feature_dim; ++k)
      v.features(t, k) = means(v.gt_labels[t], k) + cfg.sigma * noise(rng);
  return v;
}

AnnotationSet annotate_tss(const VideoSample& video, StampPosition position,
                           std::mt19937_64& rng) {
  const SegmentList segs = segments_from_framewise(video.gt_labels);
  AnnotationSet ann;
  ann.mode = SupervisionMode::kTss;
  for (const Segment& s : segs) {
    int frame;
    switch (position) {
      case StampPosition::kStart:
        frame = s.start;
        break;
      case StampPosition::kCentre:
        frame = (s.start + s.end_exclusive - 1) / 2;
        break;
      default: {
        std::uniform_int_distribution<int> pick(s.start, s.end_exclusive - 1);
        frame = pick(rng);
      }
    }
    ann.stamps.push_back({frame, s.class_id});
  }
  return ann;
}

AnnotationSet drop_segments(const AnnotationSet& ann, double miss_rate, std::mt19937_64& rng) {
  if (ann.mode != SupervisionMode::kTss)
    throw std::invalid_argument("drop_segments: expects a TSS annotation");
  if (!(miss_rate >= 0.0 && miss_rate < 1.0))
    throw std::invalid_argument("drop_segments: miss_rate outside [0, 1)");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  AnnotationSet out;
  out.mode = SupervisionMode::kTssMissing;
  for (size_t k = 0; k < ann.stamps.size(); ++k) {
    const bool interior = k > 0 && k + 1 < ann.stamps.size();
    if (interior && coin(rng) < miss_rate) continue;
    out.stamps.push_back(ann.stamps[k]);
  }
  return out;
}

AnnotationSet annotate_skiptag(const VideoSample& video, int num_stamps, std::mt19937_64& rng) {
  const int frames = video.frames();
  if (num_stamps < 2) throw std::invalid_argument("annotate_skiptag: need at least 2 stamps");
  if (num_stamps > frames)
    throw std::invalid_argument("annotate_skiptag: more stamps than frames");
  AnnotationSet ann;
  ann.mode = SupervisionMode::kSkipTag;
  for (int s = 0; s < num_stamps; ++s) {
    const int lo = static_cast<int>(static_cast<long>(s) * frames / num_stamps);
    const int hi = static_cast<int>(static_cast<long>(s + 1) * frames / num_stamps) - 1;
    std::uniform_int_distribution<int> pick(lo, hi);
    const int frame = pick(rng);
    ann.stamps.push_back({frame, video.gt_labels[frame]});
  }
  return ann;
}

CorpusStats corpus_stats(std::span<const VideoSample> videos,
                         std::span<const AnnotationSet> annotations) {
  CorpusStats st;
  st.videos = static_cast<int>(videos.size());
  for (size_t i = 0; i < videos.size(); ++i) {
    const SegmentList segs = segments_from_framewise(videos[i].gt_labels);
    st.total_frames += videos[i].frames();
    st.total_segments += static_cast<long>(segs.size());
    if (i < annotations.size()) {
      const AnnotationSet& ann = annotations[i];
      st.total_stamps += static_cast<long>(ann.stamps.size());
      const std::vector<int> bounds = interior_boundaries(videos[i].gt_labels);
      for (size_t k = 0; k + 1 < ann.stamps.size(); ++k) {
        int inside = 0;
        for (int b : bounds)
          if (b > ann.stamps[k].frame && b <= ann.stamps[k + 1].frame) ++inside;
        if (inside == 0)
          ++st.gaps_with_0;
        else if (inside == 1)
          ++st.gaps_with_1;
        else if (inside == 2)
          ++st.gaps_with_2;
        else
          ++st.gaps_over_2;
      }
    }
  }
  if (st.total_segments > 0)
    st.mean_segment_length = static_cast<double>(st.total_frames) / st.total_segments;
  return st;
}

}  // namespace emseg
