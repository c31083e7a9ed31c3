#include <doctest.h>

#include <cmath>
#include <random>

#include "emseg/metrics.hpp"
#include "emseg/synthdata.hpp"
#include "emseg/trainer.hpp"
#include "oracle_utils.hpp"

using namespace emseg;

namespace {

double rel_grad_error(const Matrix& a, const Matrix& b) {
  double num = 0.0, da = 0.0, db = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    num += d * d;
    da += a.data()[i] * a.data()[i];
    db += b.data()[i] * b.data()[i];
  }
  const double denom = std::max({std::sqrt(da), std::sqrt(db), 1e-12});
  return std::sqrt(num) / denom;
}

WeightMatrix random_weights(std::mt19937_64& rng, int frames, int classes) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix w(frames, classes);
  for (int t = 0; t < frames; ++t) {
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      w(t, c) = u(rng);
      sum += w(t, c);
    }
    for (int c = 0; c < classes; ++c) w(t, c) /= sum;
  }
  return WeightMatrix{std::move(w)};
}

GenConfig small_gen_config(std::uint64_t seed) {
  GenConfig cfg;
  cfg.num_classes = 4;
  cfg.feature_dim = 6;
  cfg.mu = {18.0};
  cfg.k_min = 4;
  cfg.k_max = 6;
  cfg.sigma = 0.8;
  cfg.sep = 2.2;
  cfg.seed = seed;
  std::mt19937_64 rng(seed);
  cfg.class_means = make_class_means(cfg, rng);
  return cfg;
}

struct SmallCorpus {
  std::vector<VideoSample> videos;
  std::vector<AnnotationSet> anns;
};

SmallCorpus make_corpus(int n, std::uint64_t seed) {
  const GenConfig cfg = small_gen_config(seed);
  SmallCorpus out;
  std::mt19937_64 rng(seed + 1);
  for (int i = 0; i < n; ++i) {
    out.videos.push_back(generate_video(cfg, rng, "v" + std::to_string(i)));
    out.anns.push_back(annotate_tss(out.videos.back(), StampPosition::kRandom, rng));
  }
  return out;
}

}  // namespace

TEST_CASE("scorer_forward basics") {
  ScorerParams p = ScorerParams::zeros(3, 2);
  Matrix f(4, 2);
  f(0, 0) = 1.0;
  const FrameProbs probs = scorer_forward(p, f);
  for (int t = 0; t < 4; ++t)
    for (int c = 0; c < 3; ++c)
      CHECK(std::exp(probs.at(t, c)) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // shift invariance: adding a constant to every logit of a frame
  p.bias = {2.5, 2.5, 2.5};
  const FrameProbs shifted = scorer_forward(p, f);
  for (int t = 0; t < 4; ++t)
    for (int c = 0; c < 3; ++c)
      CHECK(shifted.at(t, c) == doctest::Approx(probs.at(t, c)).epsilon(1e-12));

  Matrix bad(4, 3);
  CHECK_THROWS(scorer_forward(p, bad));
}

TEST_CASE("weighted CE: hand values and fixed point") {
  // Single frame, p = 0.9 on the argmax class, one-hot weight there.
  Matrix p(1, 2);
  p(0, 0) = 0.9;
  p(0, 1) = 0.1;
  const FrameProbs probs = FrameProbs::from_probs(p);
  const WeightMatrix w = WeightMatrix::one_hot(std::vector<int>{0}, 2);
  const LossGrad lg = weighted_ce_loss(probs, w);
  CHECK(lg.value == doctest::Approx(-std::log(0.9)).epsilon(1e-12));

  // w == p: zero gradient.
  WeightMatrix wp{p};
  const LossGrad fixed = weighted_ce_loss(probs, wp);
  for (double v : fixed.dlogits.data()) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("transition loss: hand values") {
  Matrix p(2, 2);
  p(0, 0) = 0.9; p(0, 1) = 0.1;
  p(1, 0) = 0.1; p(1, 1) = 0.9;
  const FrameProbs probs = FrameProbs::from_probs(p);
  // (1/4) * 2*|ln(1/9)|
  CHECK(transition_loss(probs, 4.0).value ==
        doctest::Approx(std::log(9.0) / 2.0).epsilon(1e-12));

  // constant probabilities -> 0
  Matrix c(3, 2);
  c(0, 0) = c(1, 0) = c(2, 0) = 0.7;
  c(0, 1) = c(1, 1) = c(2, 1) = 0.3;
  CHECK(transition_loss(FrameProbs::from_probs(c), 4.0).value == 0.0);

  // full truncation: loss = eps*(T-1)*C/(T*C), gradient zero
  const LossGrad trunc = transition_loss(probs, 1.0);
  CHECK(trunc.value == doctest::Approx(1.0 * 1 * 2 / (2.0 * 2)).epsilon(1e-12));
  for (double v : trunc.dlogits.data()) CHECK(v == 0.0);
}

TEST_CASE("confidence loss: hand values") {
  // Left class log-prob rises by 0.3 at one interior frame.
  Matrix logp(4, 2);
  logp(0, 0) = std::log(0.6); logp(0, 1) = std::log(0.4);
  logp(1, 0) = std::log(0.6); logp(1, 1) = std::log(0.4);
  logp(2, 0) = logp(1, 0) + 0.3;
  logp(2, 1) = std::log(1.0 - std::exp(logp(2, 0)));
  logp(3, 0) = logp(2, 0); logp(3, 1) = logp(2, 1);
  const FrameProbs probs = FrameProbs::from_log_probs(logp);
  AnnotationSet ann{SupervisionMode::kTss, {{0, 0}, {3, 1}}};
  const LossGrad lg = confidence_loss(probs, ann);
  // The left class rises by 0.3 at frame 2; the right class falls by |d1|
  // at the same step. Both hinges contribute, normalized by T.
  const double d1 = logp(2, 1) - logp(1, 1);
  CHECK(lg.value == doctest::Approx((0.3 - d1) / 4.0).epsilon(1e-9));

  // Monotone probabilities in the right directions -> 0.
  Matrix mono(4, 2);
  mono(0, 0) = 0.9; mono(1, 0) = 0.7; mono(2, 0) = 0.4; mono(3, 0) = 0.2;
  for (int t = 0; t < 4; ++t) mono(t, 1) = 1.0 - mono(t, 0);
  CHECK(confidence_loss(FrameProbs::from_probs(mono), ann).value == 0.0);

  AnnotationSet single{SupervisionMode::kTss, {{1, 0}}};
  CHECK(confidence_loss(probs, single).value == 0.0);
}

TEST_CASE("loss gradients match central finite differences") {
  std::mt19937_64 rng(41);
  AnnotationSet ann{SupervisionMode::kTss, {{1, 0}, {5, 2}, {9, 1}}};
  for (int it = 0; it < 30; ++it) {
    const int frames = 12, classes = 3;
    const Matrix logits = oracle::random_logits(rng, frames, classes, 1.5);
    const WeightMatrix w = random_weights(rng, frames, classes);

    const FrameProbs probs = FrameProbs::from_logits(logits);
    {
      const LossGrad lg = weighted_ce_loss(probs, w);
      const Matrix fd = oracle::fd_gradient(
          [&](const Matrix& x) { return weighted_ce_loss(FrameProbs::from_logits(x), w).value; },
          logits);
      CHECK(rel_grad_error(lg.dlogits, fd) < 1e-5);
    }
    {
      const LossGrad lg = transition_loss(probs, 4.0);
      const Matrix fd = oracle::fd_gradient(
          [&](const Matrix& x) { return transition_loss(FrameProbs::from_logits(x), 4.0).value; },
          logits);
      CHECK(rel_grad_error(lg.dlogits, fd) < 1e-5);
    }
    {
      const LossGrad lg = confidence_loss(probs, ann);
      const Matrix fd = oracle::fd_gradient(
          [&](const Matrix& x) { return confidence_loss(FrameProbs::from_logits(x), ann).value; },
          logits);
      CHECK(rel_grad_error(lg.dlogits, fd) < 1e-5);
    }
  }
}

TEST_CASE("uniform baseline labels") {
  AnnotationSet ann{SupervisionMode::kTss, {{0, 0}, {10, 1}}};
  const std::vector<int> labels = uniform_baseline_labels(ann, 11);
  for (int t = 0; t <= 4; ++t) CHECK(labels[t] == 0);
  for (int t = 5; t <= 10; ++t) CHECK(labels[t] == 1);

  AnnotationSet tight{SupervisionMode::kTss, {{3, 0}, {4, 1}}};
  const std::vector<int> l2 = uniform_baseline_labels(tight, 6);
  CHECK(l2 == std::vector<int>{0, 0, 0, 0, 1, 1});
}

TEST_CASE("naive_init converges on separable data and is monotone under small lr") {
  SmallCorpus corpus = make_corpus(4, 51);
  TrainConfig cfg;
  cfg.n_init = 400;
  cfg.lr = 0.8;
  cfg.init_optimizer = Optimizer::kAdam;
  const ScorerParams params = naive_init(corpus.videos, corpus.anns, cfg,
                                         ScorerParams::zeros(4, 6));
  // Annotated-frame accuracy approaches 1 on separable clusters.
  int hit = 0, total = 0;
  for (size_t i = 0; i < corpus.videos.size(); ++i) {
    const std::vector<int> pred = predict_labels(params, corpus.videos[i].features);
    for (const Stamp& s : corpus.anns[i].stamps) {
      hit += pred[s.frame] == s.class_id;
      ++total;
    }
  }
  CHECK(static_cast<double>(hit) / total > 0.95);

  // zero epochs: unchanged
  TrainConfig zero;
  zero.n_init = 0;
  const ScorerParams same =
      naive_init(corpus.videos, corpus.anns, zero, ScorerParams::zeros(4, 6));
  CHECK(same.weight == Matrix(4, 6));

  // full-batch GD with small lr: loss nonincreasing across epochs
  auto stamp_loss = [&](const ScorerParams& p) {
    double loss = 0.0;
    int n = 0;
    for (size_t i = 0; i < corpus.videos.size(); ++i) {
      const FrameProbs probs = scorer_forward(p, corpus.videos[i].features);
      for (const Stamp& s : corpus.anns[i].stamps) {
        loss -= probs.at(s.frame, s.class_id);
        ++n;
      }
    }
    return loss / n;
  };
  TrainConfig gd;
  gd.lr = 1e-3;
  gd.init_optimizer = Optimizer::kGd;
  ScorerParams cur = ScorerParams::zeros(4, 6);
  double prev_loss = stamp_loss(cur);
  for (int epoch = 0; epoch < 20; ++epoch) {
    gd.n_init = 1;
    cur = naive_init(corpus.videos, corpus.anns, gd, cur);
    const double now = stamp_loss(cur);
    CHECK(now <= prev_loss + 1e-12);
    prev_loss = now;
  }
}

TEST_CASE("run_em with zero iterations returns the naive initialization") {
  SmallCorpus corpus = make_corpus(3, 77);
  TrainConfig cfg;
  cfg.n_init = 25;
  cfg.m_iters = 0;
  const EmResult em = run_em(corpus.videos, corpus.anns, cfg, EmMode::kEmTss);
  const ScorerParams naive = naive_init(corpus.videos, corpus.anns, cfg,
                                        ScorerParams::zeros(4, 6));
  CHECK(em.params.weight == naive.weight);
  CHECK(em.params.bias == naive.bias);
  CHECK(em.diags.size() == 1);
}

TEST_CASE("E-M ascent with auxiliary losses off") {
  SmallCorpus corpus = make_corpus(5, 91);
  TrainConfig cfg;
  cfg.n_init = 60;
  cfg.init_optimizer = Optimizer::kAdam;
  cfg.lr = 0.25;
  cfg.m_iters = 6;
  cfg.lambda_tr = 0.0;
  cfg.lambda_conf = 0.0;
  cfg.m_step_grad_tol = 1e-8;
  cfg.tol_epoch_cap = 20000;
  const EmResult em = run_em(corpus.videos, corpus.anns, cfg, EmMode::kEmTss);
  REQUIRE(em.diags.size() == 7);
  for (size_t m = 1; m < em.diags.size(); ++m)
    CHECK(em.diags[m].marginal_log_lik >= em.diags[m - 1].marginal_log_lik - 1e-8);
}

TEST_CASE("run_em diagnostics are bit-identical across runs and job counts") {
  SmallCorpus corpus = make_corpus(4, 13);
  TrainConfig cfg;
  cfg.n_init = 30;
  cfg.m_iters = 3;
  cfg.lr = 0.1;
  auto run = [&](int jobs) {
    TrainConfig c = cfg;
    c.jobs = jobs;
    return run_em(corpus.videos, corpus.anns, c, EmMode::kEmTss);
  };
  const EmResult a = run(1), b = run(1), c = run(3);
  REQUIRE(a.diags.size() == b.diags.size());
  for (size_t m = 0; m < a.diags.size(); ++m) {
    CHECK(a.diags[m].marginal_log_lik == b.diags[m].marginal_log_lik);
    CHECK(a.diags[m].total == b.diags[m].total);
    CHECK(a.diags[m].marginal_log_lik == c.diags[m].marginal_log_lik);
    CHECK(a.diags[m].total == c.diags[m].total);
  }
  CHECK(a.params.weight == c.params.weight);
}

TEST_CASE("em modes validate annotation consistency") {
  SmallCorpus corpus = make_corpus(2, 19);
  TrainConfig cfg;
  cfg.n_init = 1;
  cfg.m_iters = 1;
  CHECK_THROWS(run_em(corpus.videos, corpus.anns, cfg, EmMode::kSkipTag));
}

TEST_CASE("E-step failures carry the video id") {
  // Two classes only; the second video has a same-class length-1 stamp
  // gap, which admits no configuration under EM-Gen without C3.
  VideoSample ok;
  ok.id = "good";
  ok.gt_labels = {0, 0, 1, 1};
  ok.features = Matrix(4, 2);
  VideoSample bad;
  bad.id = "broken";
  bad.gt_labels = {0, 0, 1, 0};
  bad.features = Matrix(4, 2);
  std::vector<VideoSample> videos = {ok, bad};
  std::vector<AnnotationSet> anns = {
      {SupervisionMode::kTssMissing, {{0, 0}, {2, 1}}},
      {SupervisionMode::kTssMissing, {{1, 0}, {2, 0}, {3, 0}}},
  };
  TrainConfig cfg;
  cfg.n_init = 1;
  cfg.m_iters = 1;
  try {
    run_em(videos, anns, cfg, EmMode::kEmGen);
    FAIL("expected an E-step error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("broken") != std::string::npos);
    CHECK(msg.find("segment") != std::string::npos);
  }
}

TEST_CASE("gen weights on intact stamps agree with tss weights on separable data") {
  const GenConfig gcfg = small_gen_config(57);
  std::mt19937_64 rng(58);
  const VideoSample video = generate_video(gcfg, rng, "v");
  const AnnotationSet tss = annotate_tss(video, StampPosition::kRandom, rng);
  AnnotationSet missing = tss;
  missing.mode = SupervisionMode::kTssMissing;

  // A scorer trained on the ground truth gives separable probabilities.
  TrainConfig cfg;
  cfg.lr = 0.5;
  cfg.line_search = true;
  std::vector<std::vector<int>> gt = {video.gt_labels};
  const ScorerParams params = train_on_labels(
      std::span<const VideoSample>(&video, 1), gt, cfg, 200, ScorerParams::zeros(4, 6));
  const FrameProbs probs = scorer_forward(params, video.features);
  const LengthPrior prior = estimate_mu(std::span<const VideoSample>(&video, 1), 4);

  const TssEStepResult t = e_step_tss(probs, tss, prior);
  const GenEStepResult g = e_step_gen(probs, missing, prior);
  int agree = 0;
  for (int fr = 0; fr < video.frames(); ++fr) {
    int bt = 0, bg = 0;
    for (int c = 1; c < 4; ++c) {
      if (t.weights.w(fr, c) > t.weights.w(fr, bt)) bt = c;
      if (g.weights.w(fr, c) > g.weights.w(fr, bg)) bg = c;
    }
    agree += bt == bg;
  }
  CHECK(static_cast<double>(agree) / video.frames() >= 0.99);
}
