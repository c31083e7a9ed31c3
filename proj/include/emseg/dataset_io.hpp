#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emseg/trainer.hpp"
#include "emseg/types.hpp"

namespace emseg {

// JSONL corpus: one object per line with fields `id`, `features`
// (T arrays of d floats), `labels` (T ints) and optional `stamps`
// ([[frame, class], ...]) plus `mode`. Doubles are serialized with
// shortest round-trip formatting, so save/load is bit-exact.
struct Corpus {
  std::vector<VideoSample> videos;
  std::vector<std::optional<AnnotationSet>> annotations;

  bool fully_annotated() const {
    for (const auto& a : annotations)
      if (!a) return false;
    return !videos.empty();
  }
  std::vector<AnnotationSet> require_annotations() const;

  // Shared problem description: class count inferred from labels and
  // stamps (overridable), feature dimension from the first video.
  ProblemConfig problem(int class_count_override = 0) const;
};

Corpus load_corpus_jsonl(const std::string& path);
void save_corpus_jsonl(const std::string& path, std::span<const VideoSample> videos,
                       std::span<const std::optional<AnnotationSet>> annotations);

struct Prediction {
  std::string id;
  std::vector<int> labels;
  std::vector<double> boundaries;  // optional real-valued boundary estimates
};

std::vector<Prediction> load_predictions_jsonl(const std::string& path);
void save_predictions_jsonl(const std::string& path, std::span<const Prediction> preds);

ScorerParams load_params_json(const std::string& path);
void save_params_json(const std::string& path, const ScorerParams& params);

// Writes via a temp file in the same directory followed by a rename.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// FNV-1a 64-bit, hex encoded. Not cryptographic; manifests only need a
// stable fingerprint.
std::string fnv1a_hex(std::string_view bytes);
std::string hash_file(const std::string& path);

struct Manifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string git_describe;
  std::string version;
  std::map<std::string, std::string> input_hashes;
};

void write_manifest(const std::string& path, const Manifest& m);

std::string supervision_mode_name(SupervisionMode mode);
SupervisionMode supervision_mode_from_name(const std::string& name);

}  // namespace emseg
