// emseg: synthetic corpus generation, EM training, evaluation and
// posterior inspection for timestamp-supervised temporal segmentation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "emseg/config_file.hpp"
#include "emseg/dataset_io.hpp"
#include "emseg/em_gen.hpp"
#include "emseg/em_tss.hpp"
#include "emseg/metrics.hpp"
#include "emseg/synthdata.hpp"
#include "emseg/trainer.hpp"
#include "emseg/version.hpp"

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace emseg;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string args_line;  // full command line, recorded in the manifest
};

Manifest base_manifest(const std::string& command, const CommonArgs& common,
                       std::uint64_t seed) {
  Manifest m;
  m.command = command;
  m.git_describe = kGitDescribe;
  m.version = kVersion;
  m.seed = seed;
  std::string payload = common.args_line;
  if (!common.config_path.empty()) payload += "\n" + read_file(common.config_path);
  m.config_hash = fnv1a_hex(payload);
  return m;
}

// ---------------- generate ----------------

int cmd_generate(const CommonArgs& common, int count, const std::string& out_path) {
  const ConfigMap cfg = load_config(common.config_path);
  cfg.ensure_known({"classes", "feature_dim", "mu", "k_min", "k_max", "sigma", "sep", "seed",
                    "annotate", "position", "miss_rate", "skiptag_k", "first_index"});
  GenConfig gen;
  gen.num_classes = static_cast<int>(cfg.get_int("classes", 6));
  gen.feature_dim = static_cast<int>(cfg.get_int("feature_dim", 10));
  gen.mu = cfg.get_double_array("mu", {40.0});
  gen.k_min = static_cast<int>(cfg.get_int("k_min", 4));
  gen.k_max = static_cast<int>(cfg.get_int("k_max", 8));
  gen.sigma = cfg.get_double("sigma", 1.0);
  gen.sep = cfg.get_double("sep", 1.0);
  gen.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  const std::string annotate = cfg.get_string("annotate", "tss");
  const std::string position = cfg.get_string("position", "random");
  const double miss_rate = cfg.get_double("miss_rate", 0.0);
  const int skiptag_k = static_cast<int>(cfg.get_int("skiptag_k", 8));
  // Held-out splits: same seed (same class means and video stream) with a
  // disjoint index range.
  const int first_index = static_cast<int>(cfg.get_int("first_index", 0));

  std::mt19937_64 seed_rng(gen.seed);
  gen.class_means = make_class_means(gen, seed_rng);

  StampPosition pos = StampPosition::kRandom;
  if (position == "start") pos = StampPosition::kStart;
  else if (position == "centre" || position == "center") pos = StampPosition::kCentre;
  else if (position != "random") throw std::runtime_error("unknown position '" + position + "'");

  std::vector<VideoSample> videos;
  std::vector<std::optional<AnnotationSet>> annotations;
  std::vector<AnnotationSet> flat_anns;
  for (int n = 0; n < count; ++n) {
    const int i = first_index + n;
    // Per-video derived seeds keep generation parallelizable and stable.
    std::mt19937_64 rng(gen.seed * 1000003ull + static_cast<std::uint64_t>(i));
    videos.push_back(generate_video(gen, rng, "video_" + std::to_string(i)));
    if (annotate == "tss") {
      AnnotationSet ann = annotate_tss(videos.back(), pos, rng);
      if (miss_rate > 0.0) ann = drop_segments(ann, miss_rate, rng);
      flat_anns.push_back(ann);
      annotations.push_back(std::move(ann));
    } else if (annotate == "skiptag") {
      AnnotationSet ann = annotate_skiptag(videos.back(), skiptag_k, rng);
      flat_anns.push_back(ann);
      annotations.push_back(std::move(ann));
    } else if (annotate == "none") {
      annotations.push_back(std::nullopt);
    } else {
      throw std::runtime_error("unknown annotate mode '" + annotate + "'");
    }
  }
  save_corpus_jsonl(out_path, videos, annotations);

  const CorpusStats st = corpus_stats(videos, flat_anns);
  json stats;
  stats["videos"] = st.videos;
  stats["total_frames"] = st.total_frames;
  stats["total_segments"] = st.total_segments;
  stats["total_stamps"] = st.total_stamps;
  stats["mean_segment_length"] = st.mean_segment_length;
  stats["stamp_gap_boundaries"] = {{"zero", st.gaps_with_0},
                                   {"one", st.gaps_with_1},
                                   {"two", st.gaps_with_2},
                                   {"over_two", st.gaps_over_2}};
  const fs::path out_dir = fs::path(out_path).parent_path();
  atomic_write((out_dir / "stats.json").string(), stats.dump(2) + "\n");

  Manifest m = base_manifest("generate", common, gen.seed);
  m.input_hashes["config"] = hash_file(common.config_path);
  write_manifest((out_dir / "manifest.json").string(), m);
  std::printf("wrote %d videos to %s\n", count, out_path.c_str());
  return 0;
}

// ---------------- train ----------------

TrainConfig train_config_from(const ConfigMap& cfg) {
  cfg.ensure_known({"n_init", "n_max", "m_iters", "lr", "lambda_tr", "lambda_conf", "epsilon",
                    "seed", "prior", "prior_sample_id", "noninformative_mu", "candidate_range",
                    "window", "m_step_grad_tol", "tol_epoch_cap", "line_search",
                    "init_optimizer", "classes"});
  TrainConfig out;
  out.n_init = static_cast<int>(cfg.get_int("n_init", out.n_init));
  out.n_max = static_cast<int>(cfg.get_int("n_max", out.n_max));
  out.m_iters = static_cast<int>(cfg.get_int("m_iters", out.m_iters));
  out.lr = cfg.get_double("lr", out.lr);
  out.lambda_tr = cfg.get_double("lambda_tr", out.lambda_tr);
  out.lambda_conf = cfg.get_double("lambda_conf", out.lambda_conf);
  out.epsilon = cfg.get_double("epsilon", out.epsilon);
  out.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  out.m_step_grad_tol = cfg.get_double("m_step_grad_tol", 0.0);
  out.tol_epoch_cap = static_cast<int>(cfg.get_int("tol_epoch_cap", out.tol_epoch_cap));
  out.line_search = cfg.get_bool("line_search", false);
  out.window = static_cast<int>(cfg.get_int("window", 0));
  out.noninformative_mu = cfg.get_double("noninformative_mu", out.noninformative_mu);

  const std::string prior = cfg.get_string("prior", "sample");
  if (prior == "noninf") out.prior_mode = LengthPriorMode::kNonInformative;
  else if (prior == "sample") out.prior_mode = LengthPriorMode::kFromSample;
  else throw std::runtime_error("unknown prior '" + prior + "' (want noninf|sample)");
  out.prior_sample_id = cfg.get_string("prior_sample_id", "");

  const std::string range = cfg.get_string("candidate_range", "exclude-left");
  if (range == "exclude-left") out.candidate_range = CandidateRange::kExcludeLeftStamp;
  else if (range == "include-left") out.candidate_range = CandidateRange::kIncludeLeftStamp;
  else throw std::runtime_error("unknown candidate_range '" + range + "'");

  const std::string opt = cfg.get_string("init_optimizer", "gd");
  if (opt == "adam") out.init_optimizer = Optimizer::kAdam;
  else if (opt == "gd") out.init_optimizer = Optimizer::kGd;
  else throw std::runtime_error("unknown init_optimizer '" + opt + "'");
  return out;
}

void write_diagnostics_csv(const std::string& path, const std::vector<IterationDiag>& diags) {
  std::ostringstream out;
  out << "iteration,l_em,l_tr,l_conf,loss_total,marginal_loglik,weight_mof,boundary_error_pct\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const IterationDiag& d : diags) {
    out << d.iteration << ',' << fmt(d.l_em) << ',' << fmt(d.l_tr) << ',' << fmt(d.l_conf)
        << ',' << fmt(d.total) << ',' << fmt(d.marginal_log_lik) << ',';
    if (d.weight_mof) out << fmt(*d.weight_mof);
    out << ',';
    if (d.boundary_error_pct) out << fmt(*d.boundary_error_pct);
    out << '\n';
  }
  atomic_write(path, out.str());
}

json metrics_to_json(const CorpusMetrics& m) {
  json obj;
  obj["mof"] = m.mof;
  obj["edit"] = m.edit;
  obj["f1_10"] = m.f1_10;
  obj["f1_25"] = m.f1_25;
  obj["f1_50"] = m.f1_50;
  if (m.boundary_error_pct) obj["boundary_error_pct"] = *m.boundary_error_pct;
  else obj["boundary_error_pct"] = nullptr;
  return obj;
}

// Boundary error from hard labelings, usable only where the predicted
// segment count matches the ground truth.
std::optional<double> labeling_boundary_error(std::span<const std::vector<int>> pred,
                                              std::span<const std::vector<int>> gt) {
  double sum = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const std::vector<int> pb = interior_boundaries(pred[i]);
    const std::vector<int> gb = interior_boundaries(gt[i]);
    if (pb.size() != gb.size()) continue;
    std::vector<double> pbd(pb.begin(), pb.end());
    sum += boundary_error_pct(pbd, gb, static_cast<int>(gt[i].size()));
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

int cmd_train(const CommonArgs& common, const std::string& mode, const std::string& data_path,
              const std::string& test_path, const std::string& out_dir, int jobs,
              const std::string& prior_flag, const std::string& prior_sample_flag,
              int window_flag) {
  const ConfigMap cfg_map =
      common.config_path.empty() ? ConfigMap("<defaults>") : load_config(common.config_path);
  TrainConfig cfg = train_config_from(cfg_map);
  cfg.jobs = jobs;
  if (!prior_flag.empty()) {
    if (prior_flag == "noninf") cfg.prior_mode = LengthPriorMode::kNonInformative;
    else if (prior_flag == "sample") cfg.prior_mode = LengthPriorMode::kFromSample;
    else throw std::runtime_error("unknown --prior '" + prior_flag + "'");
  }
  if (!prior_sample_flag.empty()) cfg.prior_sample_id = prior_sample_flag;
  if (window_flag > 0) cfg.window = window_flag;

  const Corpus corpus = load_corpus_jsonl(data_path);
  const ProblemConfig problem =
      corpus.problem(static_cast<int>(cfg_map.get_int("classes", 0)));
  const int classes = problem.num_classes;
  if (classes < 2) throw std::runtime_error("need at least 2 classes");
  const int dim = problem.feature_dim;
  const int total_epochs = cfg.n_init + cfg.m_iters * cfg.n_max;

  ScorerParams params = ScorerParams::zeros(classes, dim);
  std::vector<IterationDiag> diags;

  if (mode == "full") {
    std::vector<std::vector<int>> labels;
    for (const VideoSample& v : corpus.videos) labels.push_back(v.gt_labels);
    params = train_on_labels(corpus.videos, labels, cfg, total_epochs, std::move(params));
  } else if (mode == "naive") {
    params = naive_init(corpus.videos, corpus.require_annotations(), cfg, std::move(params));
  } else if (mode == "uniform") {
    std::vector<std::vector<int>> labels;
    const auto anns = corpus.require_annotations();
    for (size_t i = 0; i < corpus.videos.size(); ++i)
      labels.push_back(uniform_baseline_labels(anns[i], corpus.videos[i].frames()));
    params = train_on_labels(corpus.videos, labels, cfg, total_epochs, std::move(params));
  } else {
    EmMode em_mode;
    if (mode == "em-tss") em_mode = EmMode::kEmTss;
    else if (mode == "em-gen") em_mode = EmMode::kEmGen;
    else if (mode == "skiptag") em_mode = EmMode::kSkipTag;
    else throw std::runtime_error("unknown --mode '" + mode + "'");
    EmResult res = run_em(corpus.videos, corpus.require_annotations(), cfg, em_mode);
    params = std::move(res.params);
    diags = std::move(res.diags);
  }

  fs::create_directories(out_dir);
  save_params_json((fs::path(out_dir) / "params.json").string(), params);
  write_diagnostics_csv((fs::path(out_dir) / "diagnostics.csv").string(), diags);

  // Metrics and predictions on the held-out split when provided.
  const Corpus* eval = &corpus;
  std::optional<Corpus> test;
  if (!test_path.empty()) {
    test = load_corpus_jsonl(test_path);
    eval = &*test;
  }
  std::vector<std::vector<int>> pred, gt;
  std::vector<Prediction> pred_records;
  for (const VideoSample& v : eval->videos) {
    pred.push_back(predict_labels(params, v.features));
    gt.push_back(v.gt_labels);
    pred_records.push_back({v.id, pred.back(), {}});
  }
  CorpusMetrics metrics = corpus_metrics(pred, gt);
  metrics.boundary_error_pct = labeling_boundary_error(pred, gt);
  json mj = metrics_to_json(metrics);
  mj["split"] = test_path.empty() ? "train" : "test";
  atomic_write((fs::path(out_dir) / "metrics.json").string(), mj.dump(2) + "\n");
  save_predictions_jsonl((fs::path(out_dir) / "predictions.jsonl").string(), pred_records);

  Manifest m = base_manifest("train", common, cfg.seed);
  if (!common.config_path.empty()) m.input_hashes["config"] = hash_file(common.config_path);
  m.input_hashes["data"] = hash_file(data_path);
  if (!test_path.empty()) m.input_hashes["test"] = hash_file(test_path);
  write_manifest((fs::path(out_dir) / "manifest.json").string(), m);
  std::printf("trained mode=%s on %zu videos; metrics.json MoF %.2f\n", mode.c_str(),
              corpus.videos.size(), metrics.mof);
  return 0;
}

// ---------------- evaluate ----------------

int cmd_evaluate(const CommonArgs& common, const std::string& pred_path,
                 const std::string& data_path, const std::string& out_path) {
  const Corpus corpus = load_corpus_jsonl(data_path);
  const std::vector<Prediction> preds = load_predictions_jsonl(pred_path);

  std::vector<std::vector<int>> pred_labels, gt_labels;
  double boundary_sum = 0.0;
  size_t boundary_n = 0;
  for (const VideoSample& v : corpus.videos) {
    const Prediction* match = nullptr;
    for (const Prediction& p : preds)
      if (p.id == v.id) {
        match = &p;
        break;
      }
    if (!match) throw std::runtime_error("no prediction for video '" + v.id + "'");
    if (match->labels.size() != v.gt_labels.size())
      throw std::runtime_error("prediction length mismatch for video '" + v.id + "'");
    pred_labels.push_back(match->labels);
    gt_labels.push_back(v.gt_labels);

    const std::vector<int> gb = interior_boundaries(v.gt_labels);
    if (!match->boundaries.empty() && match->boundaries.size() == gb.size()) {
      boundary_sum += boundary_error_pct(match->boundaries, gb, v.frames());
      ++boundary_n;
    } else if (match->boundaries.empty()) {
      const std::vector<int> pb = interior_boundaries(match->labels);
      if (pb.size() == gb.size()) {
        const std::vector<double> pbd(pb.begin(), pb.end());
        boundary_sum += boundary_error_pct(pbd, gb, v.frames());
        ++boundary_n;
      }
    }
  }
  CorpusMetrics metrics = corpus_metrics(pred_labels, gt_labels);
  if (boundary_n > 0) metrics.boundary_error_pct = boundary_sum / boundary_n;
  atomic_write(out_path, metrics_to_json(metrics).dump(2) + "\n");

  Manifest m = base_manifest("evaluate", common, 0);
  m.input_hashes["pred"] = hash_file(pred_path);
  m.input_hashes["data"] = hash_file(data_path);
  const fs::path out_dir = fs::path(out_path).parent_path();
  write_manifest((out_dir / "manifest.json").string(), m);
  std::printf("evaluate: MoF %.2f edit %.2f f1@50 %.2f\n", metrics.mof, metrics.edit,
              metrics.f1_50);
  return 0;
}

// ---------------- inspect-posterior ----------------

int cmd_inspect(const CommonArgs& common, const std::string& data_path,
                const std::string& params_path, const std::string& mode,
                const std::string& video_id, const std::string& out_dir,
                const std::string& prior_flag, const std::string& prior_sample_flag,
                int window) {
  const Corpus corpus = load_corpus_jsonl(data_path);
  const ScorerParams params = load_params_json(params_path);

  size_t idx = 0;
  if (!video_id.empty()) {
    bool found = false;
    for (size_t i = 0; i < corpus.videos.size(); ++i)
      if (corpus.videos[i].id == video_id) {
        idx = i;
        found = true;
        break;
      }
    if (!found) throw std::runtime_error("video '" + video_id + "' not found");
  }
  const VideoSample& video = corpus.videos[idx];
  if (!corpus.annotations[idx])
    throw std::runtime_error("video '" + video.id + "' carries no annotation");
  const AnnotationSet& ann = *corpus.annotations[idx];

  TrainConfig prior_cfg;
  if (prior_flag == "noninf") prior_cfg.prior_mode = LengthPriorMode::kNonInformative;
  if (!prior_sample_flag.empty()) prior_cfg.prior_sample_id = prior_sample_flag;
  const LengthPrior prior = make_length_prior(corpus.videos, prior_cfg, params.classes());

  const FrameProbs probs = scorer_forward(params, video.features);
  fs::create_directories(out_dir);

  std::ostringstream wcsv, pcsv, ccsv;
  wcsv << "frame,class,weight\n";
  pcsv << "k,candidate,prob\n";
  ccsv << "k,p_c1,p_c2,p_c3\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::string(buf);
  };

  bool gen_mode = mode == "em-gen" || mode == "skiptag";
  if (mode == "em-tss") {
    const TssEStepResult res = e_step_tss(probs, ann, prior);
    for (int t = 0; t < res.weights.frames(); ++t)
      for (int c = 0; c < res.weights.classes(); ++c)
        wcsv << t << ',' << c << ',' << fmt(res.weights.w(t, c)) << '\n';
    for (const BoundaryPosterior& post : res.posteriors)
      for (size_t m = 0; m < post.candidates.size(); ++m)
        pcsv << post.segment_ordinal << ',' << post.candidates[m] << ','
             << fmt(std::exp(post.log_post[m])) << '\n';
  } else if (gen_mode) {
    const GenEStepResult res = e_step_gen(probs, ann, prior, {.window = window});
    for (int t = 0; t < res.weights.frames(); ++t)
      for (int c = 0; c < res.weights.classes(); ++c)
        wcsv << t << ',' << c << ',' << fmt(res.weights.w(t, c)) << '\n';
    for (const CasePosterior& cp : res.posteriors) {
      for (size_t m = 0; m < cp.candidates.size(); ++m) {
        const double p =
            cp.log_post_c1.empty() ? 0.0 : std::exp(cp.log_post_c1[m]);
        pcsv << cp.segment_ordinal << ',' << cp.candidates[m] << ',' << fmt(p) << '\n';
      }
      ccsv << cp.segment_ordinal << ',' << fmt(cp.prob_c1()) << ',' << fmt(cp.prob_c2())
           << ',' << fmt(cp.prob_c3()) << '\n';
    }
  } else {
    throw std::runtime_error("unknown --mode '" + mode + "'");
  }

  atomic_write((fs::path(out_dir) / "weights.csv").string(), wcsv.str());
  atomic_write((fs::path(out_dir) / "posterior.csv").string(), pcsv.str());
  if (gen_mode) atomic_write((fs::path(out_dir) / "case_mass.csv").string(), ccsv.str());

  Manifest m = base_manifest("inspect-posterior", common, 0);
  m.input_hashes["data"] = hash_file(data_path);
  m.input_hashes["params"] = hash_file(params_path);
  write_manifest((fs::path(out_dir) / "manifest.json").string(), m);
  std::printf("inspected video '%s' (%s)\n", video.id.c_str(), mode.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EM framework for timestamp-supervised temporal action segmentation"};
  app.set_version_flag("--version", std::string("emseg ") + kVersion + " (" + kGitDescribe + ")");
  app.require_subcommand(1);

  CommonArgs common;
  for (int i = 0; i < argc; ++i) {
    if (i) common.args_line += ' ';
    common.args_line += argv[i];
  }

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a synthetic corpus");
  int gen_n = 10;
  std::string gen_out;
  gen->add_option("--config", common.config_path, "Generator config (TOML or JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  gen->add_option("--n", gen_n, "Number of videos")->required();
  gen->add_option("--out", gen_out, "Output JSONL path")->required();

  // train
  auto* train = app.add_subcommand("train", "Train a scorer");
  std::string train_mode, train_data, train_test, train_out, train_prior, train_prior_sample;
  int train_jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (train_jobs < 1) train_jobs = 1;
  int train_window = 0;
  train->add_option("--mode", train_mode, "full|naive|uniform|em-tss|em-gen|skiptag")
      ->required();
  train->add_option("--config", common.config_path, "Training config (TOML or JSON)")
      ->check(CLI::ExistingFile);
  train->add_option("--data", train_data, "Training corpus JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--test", train_test, "Held-out corpus JSONL for metrics.json")
      ->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--jobs", train_jobs, "Worker count (default: available parallelism)");
  train->add_option("--prior", train_prior, "noninf|sample (overrides config)");
  train->add_option("--prior-sample-id", train_prior_sample, "Video id for mu estimation");
  train->add_option("--window", train_window, "Cap on middle-segment length in EM-Gen");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score predictions against a corpus");
  std::string eval_pred, eval_data, eval_out = "metrics.json";
  eval->add_option("--pred", eval_pred, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "Corpus JSONL with ground truth")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "Output metrics.json path");

  // inspect-posterior
  auto* inspect = app.add_subcommand("inspect-posterior", "Dump E-step weights and posteriors");
  std::string ins_data, ins_params, ins_mode = "em-tss", ins_video, ins_out, ins_prior,
              ins_prior_sample;
  int ins_window = 0;
  inspect->add_option("--data", ins_data, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  inspect->add_option("--params", ins_params, "Scorer params.json")
      ->required()
      ->check(CLI::ExistingFile);
  inspect->add_option("--mode", ins_mode, "em-tss|em-gen|skiptag");
  inspect->add_option("--video", ins_video, "Video id (default: first)");
  inspect->add_option("--out", ins_out, "Output directory")->required();
  inspect->add_option("--prior", ins_prior, "noninf|sample");
  inspect->add_option("--prior-sample-id", ins_prior_sample, "Video id for mu estimation");
  inspect->add_option("--window", ins_window, "Cap on middle-segment length");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(common, gen_n, gen_out);
    if (train->parsed())
      return cmd_train(common, train_mode, train_data, train_test, train_out, train_jobs,
                       train_prior, train_prior_sample, train_window);
    if (eval->parsed()) return cmd_evaluate(common, eval_pred, eval_data, eval_out);
    if (inspect->parsed())
      return cmd_inspect(common, ins_data, ins_params, ins_mode, ins_video, ins_out, ins_prior,
                         ins_prior_sample, ins_window);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "emseg: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
