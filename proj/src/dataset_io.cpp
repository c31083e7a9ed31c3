#include "emseg/dataset_io.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace emseg {

using nlohmann::json;

namespace {

[[noreturn]] void line_error(const std::string& path, size_t line, const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

std::vector<AnnotationSet> Corpus::require_annotations() const {
  std::vector<AnnotationSet> out;
  out.reserve(annotations.size());
  for (size_t i = 0; i < annotations.size(); ++i) {
    if (!annotations[i])
      throw std::runtime_error("video '" + videos[i].id + "' carries no annotation");
    out.push_back(*annotations[i]);
  }
  return out;
}

ProblemConfig Corpus::problem(int class_count_override) const {
  ProblemConfig cfg;
  cfg.feature_dim = videos.empty() ? 0 : videos.front().feature_dim();
  if (class_count_override > 0) {
    cfg.num_classes = class_count_override;
    return cfg;
  }
  for (const VideoSample& v : videos)
    for (int y : v.gt_labels) cfg.num_classes = std::max(cfg.num_classes, y + 1);
  for (const auto& a : annotations)
    if (a)
      for (const Stamp& s : a->stamps) cfg.num_classes = std::max(cfg.num_classes, s.class_id + 1);
  return cfg;
}

std::string supervision_mode_name(SupervisionMode mode) {
  switch (mode) {
    case SupervisionMode::kTss:
      return "tss";
    case SupervisionMode::kTssMissing:
      return "tss_missing";
    case SupervisionMode::kSkipTag:
      return "skiptag";
  }
  return "tss";
}

SupervisionMode supervision_mode_from_name(const std::string& name) {
  if (name == "tss") return SupervisionMode::kTss;
  if (name == "tss_missing") return SupervisionMode::kTssMissing;
  if (name == "skiptag") return SupervisionMode::kSkipTag;
  throw std::runtime_error("unknown supervision mode '" + name + "'");
}

Corpus load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Corpus corpus;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      line_error(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    try {
      VideoSample v;
      v.id = obj.at("id").get<std::string>();
      const auto& feats = obj.at("features");
      const auto& labels = obj.at("labels");
      if (!feats.is_array() || feats.empty()) line_error(path, line_no, "features must be a nonempty array");
      if (!labels.is_array() || labels.size() != feats.size())
        line_error(path, line_no, "labels must match feature rows");
      const size_t dim = feats[0].size();
      if (dim == 0) line_error(path, line_no, "zero feature dimension");
      v.features = Matrix(static_cast<int>(feats.size()), static_cast<int>(dim));
      for (size_t t = 0; t < feats.size(); ++t) {
        if (feats[t].size() != dim) line_error(path, line_no, "ragged feature rows");
        for (size_t k = 0; k < dim; ++k)
          v.features(static_cast<int>(t), static_cast<int>(k)) = feats[t][k].get<double>();
      }
      v.gt_labels.reserve(labels.size());
      for (const auto& y : labels) v.gt_labels.push_back(y.get<int>());

      std::optional<AnnotationSet> ann;
      if (obj.contains("stamps")) {
        AnnotationSet a;
        a.mode = obj.contains("mode")
                     ? supervision_mode_from_name(obj.at("mode").get<std::string>())
                     : SupervisionMode::kTss;
        for (const auto& s : obj.at("stamps")) {
          if (!s.is_array() || s.size() != 2) line_error(path, line_no, "stamps must be [frame, class] pairs");
          a.stamps.push_back({s[0].get<int>(), s[1].get<int>()});
        }
        ann = std::move(a);
      }
      corpus.videos.push_back(std::move(v));
      corpus.annotations.push_back(std::move(ann));
    } catch (const json::exception& e) {
      line_error(path, line_no, std::string("bad record: ") + e.what());
    }
  }
  if (corpus.videos.empty()) throw std::runtime_error(path + ": empty corpus");
  return corpus;
}

void save_corpus_jsonl(const std::string& path, std::span<const VideoSample> videos,
                       std::span<const std::optional<AnnotationSet>> annotations) {
  std::ostringstream out;
  for (size_t i = 0; i < videos.size(); ++i) {
    const VideoSample& v = videos[i];
    json obj;
    obj["id"] = v.id;
    json feats = json::array();
    for (int t = 0; t < v.frames(); ++t) {
      json row = json::array();
      for (int k = 0; k < v.feature_dim(); ++k) row.push_back(v.features(t, k));
      feats.push_back(std::move(row));
    }
    obj["features"] = std::move(feats);
    obj["labels"] = v.gt_labels;
    if (i < annotations.size() && annotations[i]) {
      json stamps = json::array();
      for (const Stamp& s : annotations[i]->stamps)
        stamps.push_back(json::array({s.frame, s.class_id}));
      obj["stamps"] = std::move(stamps);
      obj["mode"] = supervision_mode_name(annotations[i]->mode);
    }
    out << obj.dump() << "\n";
  }
  atomic_write(path, out.str());
}

std::vector<Prediction> load_predictions_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Prediction> preds;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json obj = json::parse(line);
      Prediction p;
      p.id = obj.at("id").get<std::string>();
      for (const auto& y : obj.at("labels")) p.labels.push_back(y.get<int>());
      if (obj.contains("boundaries"))
        for (const auto& b : obj.at("boundaries")) p.boundaries.push_back(b.get<double>());
      preds.push_back(std::move(p));
    } catch (const json::exception& e) {
      line_error(path, line_no, std::string("bad prediction record: ") + e.what());
    }
  }
  if (preds.empty()) throw std::runtime_error(path + ": empty predictions");
  return preds;
}

void save_predictions_jsonl(const std::string& path, std::span<const Prediction> preds) {
  std::ostringstream out;
  for (const Prediction& p : preds) {
    json obj;
    obj["id"] = p.id;
    obj["labels"] = p.labels;
    if (!p.boundaries.empty()) obj["boundaries"] = p.boundaries;
    out << obj.dump() << "\n";
  }
  atomic_write(path, out.str());
}

ScorerParams load_params_json(const std::string& path) {
  json obj;
  try {
    obj = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }
  const int classes = obj.at("classes").get<int>();
  const int dim = obj.at("feature_dim").get<int>();
  ScorerParams p = ScorerParams::zeros(classes, dim);
  const auto& w = obj.at("weight");
  for (int c = 0; c < classes; ++c)
    for (int k = 0; k < dim; ++k) p.weight(c, k) = w.at(c).at(k).get<double>();
  const auto& b = obj.at("bias");
  for (int c = 0; c < classes; ++c) p.bias[c] = b.at(c).get<double>();
  return p;
}

void save_params_json(const std::string& path, const ScorerParams& params) {
  json obj;
  obj["classes"] = params.classes();
  obj["feature_dim"] = params.feature_dim();
  json w = json::array();
  for (int c = 0; c < params.classes(); ++c) {
    json row = json::array();
    for (int k = 0; k < params.feature_dim(); ++k) row.push_back(params.weight(c, k));
    w.push_back(std::move(row));
  }
  obj["weight"] = std::move(w);
  obj["bias"] = params.bias;
  atomic_write(path, obj.dump(2) + "\n");
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string hash_file(const std::string& path) { return fnv1a_hex(read_file(path)); }

void write_manifest(const std::string& path, const Manifest& m) {
  json obj;
  obj["command"] = m.command;
  obj["config_hash"] = m.config_hash;
  obj["seed"] = m.seed;
  obj["git_describe"] = m.git_describe;
  obj["version"] = m.version;
  json inputs = json::object();
  for (const auto& [name, hash] : m.input_hashes) inputs[name] = hash;
  obj["inputs"] = std::move(inputs);
  atomic_write(path, obj.dump(2) + "\n");
}

}  // namespace emseg
