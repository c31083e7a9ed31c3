#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "emseg/types.hpp"

namespace emseg {

// Desk-scale synthetic corpus: Poisson segment lengths, Gaussian class
// features around orthogonal-ish class means at scale `sep`.
struct GenConfig {
  int num_classes = 6;
  int feature_dim = 10;
  std::vector<double> mu;  // per-class mean lengths; size 1 broadcasts
  int k_min = 4;
  int k_max = 8;
  double sigma = 1.0;
  double sep = 1.0;
  std::uint64_t seed = 0;
  Matrix class_means;  // C x d; generated from the seed when empty

  double mu_of(int c) const { return mu.size() == 1 ? mu[0] : mu.at(c); }
};

// Random unit directions, Gram-Schmidt orthonormalized while possible,
// scaled by cfg.sep.
Matrix make_class_means(const GenConfig& cfg, std::mt19937_64& rng);

// Class sequence uniform without immediate repeats; lengths Pois(mu_c)
// truncated at >= 1; features = class mean + sigma * N(0, I).
VideoSample generate_video(const GenConfig& cfg, std::mt19937_64& rng, const std::string& id);

enum class StampPosition { kRandom, kStart, kCentre };

// One stamp per ground-truth segment at the requested position.
AnnotationSet annotate_tss(const VideoSample& video, StampPosition position,
                           std::mt19937_64& rng);

// Removes each interior stamp independently with probability miss_rate;
// the first and last stamps are always retained. Output mode is
// kTssMissing, where adjacent equal classes are permitted.
AnnotationSet drop_segments(const AnnotationSet& ann, double miss_rate, std::mt19937_64& rng);

// Splits the video into num_stamps equal spans and samples one frame
// uniformly per span; labels come from the ground truth.
AnnotationSet annotate_skiptag(const VideoSample& video, int num_stamps, std::mt19937_64& rng);

// Corpus summary, including how often a stamp gap holds more boundaries
// than the two the generalized E-step models.
struct CorpusStats {
  int videos = 0;
  long total_frames = 0;
  long total_segments = 0;
  long total_stamps = 0;
  double mean_segment_length = 0.0;
  // Ground-truth boundaries strictly inside each consecutive-stamp gap:
  // histogram over 0, 1, 2 and >2 boundaries.
  long gaps_with_0 = 0;
  long gaps_with_1 = 0;
  long gaps_with_2 = 0;
  long gaps_over_2 = 0;
};

CorpusStats corpus_stats(std::span<const VideoSample> videos,
                         std::span<const AnnotationSet> annotations);

}  // namespace emseg
