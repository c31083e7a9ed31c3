#include "emseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "emseg/metrics.hpp"
#include "emseg/parallel.hpp"

namespace emseg {

namespace {

// Compact parameter-space vector ops for the optimizers.
struct ParamGrad {
  Matrix dw;
  std::vector<double> db;

  ParamGrad() = default;
  ParamGrad(int classes, int dim) : dw(classes, dim), db(classes, 0.0) {}

  void add_scaled(const ParamGrad& other, double scale) {
    for (size_t i = 0; i < dw.data().size(); ++i) dw.data()[i] += scale * other.dw.data()[i];
    for (size_t i = 0; i < db.size(); ++i) db[i] += scale * other.db[i];
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : dw.data()) m = std::max(m, std::abs(v));
    for (double v : db) m = std::max(m, std::abs(v));
    return m;
  }
  double squared_norm() const {
    double s = 0.0;
    for (double v : dw.data()) s += v * v;
    for (double v : db) s += v * v;
    return s;
  }
};

void apply_step(ScorerParams& p, const ParamGrad& g, double step) {
  for (size_t i = 0; i < p.weight.data().size(); ++i)
    p.weight.data()[i] -= step * g.dw.data()[i];
  for (size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= step * g.db[i];
}

// Chains per-frame logit gradients to parameter space.
void logits_to_params(const Matrix& features, const Matrix& dlogits, ParamGrad& out,
                      double scale) {
  const int frames = features.rows();
  const int dim = features.cols();
  const int classes = dlogits.cols();
  for (int t = 0; t < frames; ++t)
    for (int c = 0; c < classes; ++c) {
      const double g = scale * dlogits(t, c);
      if (g == 0.0) continue;
      for (int k = 0; k < dim; ++k) out.dw(c, k) += g * features(t, k);
      out.db[c] += g;
    }
}

struct CorpusLoss {
  double l_em = 0.0;
  double l_tr = 0.0;
  double l_conf = 0.0;
  double total = 0.0;
  ParamGrad grad;
};

// Frame-count-weighted mean of the per-video losses; the gradient matches.
CorpusLoss corpus_loss_and_grad(std::span<const VideoSample> videos,
                                std::span<const WeightMatrix> weights,
                                std::span<const AnnotationSet> annotations,
                                const ScorerParams& params, const TrainConfig& cfg) {
  const int classes = params.classes();
  const int dim = params.feature_dim();
  double total_frames = 0.0;
  for (const VideoSample& v : videos) total_frames += v.frames();

  struct PerVideo {
    double l_em = 0.0, l_tr = 0.0, l_conf = 0.0;
    ParamGrad grad;
  };
  std::vector<PerVideo> parts(videos.size());
  parallel_for(videos.size(), cfg.jobs, [&](size_t i) {
    const VideoSample& v = videos[i];
    PerVideo out;
    out.grad = ParamGrad(classes, dim);
    const FrameProbs probs = scorer_forward(params, v.features);
    const LossGrad ce = weighted_ce_loss(probs, weights[i]);
    Matrix dlogits = ce.dlogits;
    out.l_em = ce.value;
    if (cfg.lambda_tr > 0.0) {
      const LossGrad tr = transition_loss(probs, cfg.epsilon);
      out.l_tr = tr.value;
      for (size_t j = 0; j < dlogits.data().size(); ++j)
        dlogits.data()[j] += cfg.lambda_tr * tr.dlogits.data()[j];
    }
    if (cfg.lambda_conf > 0.0 && !annotations.empty()) {
      const LossGrad cl = confidence_loss(probs, annotations[i]);
      out.l_conf = cl.value;
      for (size_t j = 0; j < dlogits.data().size(); ++j)
        dlogits.data()[j] += cfg.lambda_conf * cl.dlogits.data()[j];
    }
    logits_to_params(v.features, dlogits, out.grad, 1.0);
    parts[i] = std::move(out);
  });

  CorpusLoss loss;
  loss.grad = ParamGrad(classes, dim);
  for (size_t i = 0; i < videos.size(); ++i) {
    const double share = videos[i].frames() / total_frames;
    loss.l_em += share * parts[i].l_em;
    loss.l_tr += share * parts[i].l_tr;
    loss.l_conf += share * parts[i].l_conf;
    loss.grad.add_scaled(parts[i].grad, share);
  }
  loss.total = loss.l_em + cfg.lambda_tr * loss.l_tr + cfg.lambda_conf * loss.l_conf;
  return loss;
}

// Fixed-step full-batch gradient descent for `epochs` epochs; when
// cfg.m_step_grad_tol > 0, backtracking line search until the max-abs
// gradient entry reaches the tolerance (or the epoch cap).
void m_step(ScorerParams& params, std::span<const VideoSample> videos,
            std::span<const WeightMatrix> weights, std::span<const AnnotationSet> annotations,
            const TrainConfig& cfg, int epochs) {
  const bool tol_mode = cfg.m_step_grad_tol > 0.0;
  const int cap = tol_mode ? cfg.tol_epoch_cap : epochs;
  double step = cfg.lr;
  CorpusLoss cur = corpus_loss_and_grad(videos, weights, annotations, params, cfg);
  for (int epoch = 0; epoch < cap; ++epoch) {
    if (tol_mode && cur.grad.max_abs() <= cfg.m_step_grad_tol) break;
    if (cfg.line_search || tol_mode) {
      // Armijo backtracking; accepted steps never increase the loss, so
      // the M-step never decreases the Q-function.
      const double g2 = cur.grad.squared_norm();
      bool accepted = false;
      for (int tries = 0; tries < 60; ++tries) {
        ScorerParams cand = params;
        apply_step(cand, cur.grad, step);
        const CorpusLoss next = corpus_loss_and_grad(videos, weights, annotations, cand, cfg);
        if (next.total <= cur.total - 1e-4 * step * g2) {
          params = std::move(cand);
          cur = next;
          step *= 2.0;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;  // step underflowed; gradient is numerically flat
    } else {
      apply_step(params, cur.grad, step);
      if (epoch + 1 < cap) cur = corpus_loss_and_grad(videos, weights, annotations, params, cfg);
    }
  }
}

void adam_epochs(ScorerParams& params, int epochs, double lr,
                 const std::function<ParamGrad()>& grad_fn) {
  const int classes = params.classes();
  const int dim = params.feature_dim();
  ParamGrad m(classes, dim), v(classes, dim);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= epochs; ++t) {
    const ParamGrad g = grad_fn();
    auto update = [&](double& mi, double& vi, double gi, double& pi) {
      mi = b1 * mi + (1 - b1) * gi;
      vi = b2 * vi + (1 - b2) * gi * gi;
      const double mhat = mi / (1 - std::pow(b1, t));
      const double vhat = vi / (1 - std::pow(b2, t));
      pi -= lr * mhat / (std::sqrt(vhat) + eps);
    };
    for (size_t i = 0; i < params.weight.data().size(); ++i)
      update(m.dw.data()[i], v.dw.data()[i], g.dw.data()[i], params.weight.data()[i]);
    for (size_t i = 0; i < params.bias.size(); ++i)
      update(m.db[i], v.db[i], g.db[i], params.bias[i]);
  }
}

LengthPrior length_prior_for(std::span<const VideoSample> videos, const TrainConfig& cfg,
                             int num_classes) {
  if (cfg.prior_mode == LengthPriorMode::kNonInformative)
    return LengthPrior::non_informative(num_classes, cfg.noninformative_mu);
  size_t idx = 0;
  if (!cfg.prior_sample_id.empty()) {
    bool found = false;
    for (size_t i = 0; i < videos.size(); ++i)
      if (videos[i].id == cfg.prior_sample_id) {
        idx = i;
        found = true;
        break;
      }
    if (!found)
      throw std::invalid_argument("prior sample video '" + cfg.prior_sample_id + "' not found");
  }
  return estimate_mu(std::span<const VideoSample>(&videos[idx], 1), num_classes);
}

}  // namespace

ScorerParams ScorerParams::zeros(int num_classes, int feature_dim) {
  if (num_classes < 1 || feature_dim < 1)
    throw std::invalid_argument("ScorerParams::zeros: bad shape");
  return {Matrix(num_classes, feature_dim), std::vector<double>(num_classes, 0.0)};
}

FrameProbs scorer_forward(const ScorerParams& params, const Matrix& features) {
  if (features.cols() != params.feature_dim())
    throw std::invalid_argument("scorer_forward: feature dim " +
                                std::to_string(features.cols()) + " != scorer dim " +
                                std::to_string(params.feature_dim()));
  const int frames = features.rows();
  const int classes = params.classes();
  Matrix logits(frames, classes);
  for (int t = 0; t < frames; ++t)
    for (int c = 0; c < classes; ++c) {
      double z = params.bias[c];
      for (int k = 0; k < features.cols(); ++k) z += params.weight(c, k) * features(t, k);
      logits(t, c) = z;
    }
  return FrameProbs::from_logits(logits);
}

LossGrad weighted_ce_loss(const FrameProbs& probs, const WeightMatrix& weights) {
  if (probs.frames() != weights.frames() || probs.classes() != weights.classes())
    throw std::invalid_argument("weighted_ce_loss: shape mismatch");
  const int frames = probs.frames();
  const int classes = probs.classes();
  LossGrad out;
  out.dlogits = Matrix(frames, classes);
  for (int t = 0; t < frames; ++t)
    for (int c = 0; c < classes; ++c) {
      out.value -= weights.w(t, c) * probs.at(t, c);
      out.dlogits(t, c) = (std::exp(probs.at(t, c)) - weights.w(t, c)) / frames;
    }
  out.value /= frames;
  return out;
}

LossGrad transition_loss(const FrameProbs& probs, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("transition_loss: epsilon must be positive");
  const int frames = probs.frames();
  const int classes = probs.classes();
  LossGrad out;
  out.dlogits = Matrix(frames, classes);
  if (frames < 2) return out;

  Matrix dlogp(frames, classes);
  const double norm = 1.0 / (static_cast<double>(frames) * classes);
  for (int t = 1; t < frames; ++t)
    for (int c = 0; c < classes; ++c) {
      const double delta = probs.at(t, c) - probs.at(t - 1, c);
      out.value += std::min(std::abs(delta), epsilon) * norm;
      if (delta != 0.0 && std::abs(delta) < epsilon) {
        const double s = (delta > 0 ? 1.0 : -1.0) * norm;
        dlogp(t, c) += s;
        dlogp(t - 1, c) -= s;
      }
    }
  // Chain through the row-wise log-softmax.
  for (int t = 0; t < frames; ++t) {
    double row_sum = 0.0;
    for (int c = 0; c < classes; ++c) row_sum += dlogp(t, c);
    for (int c = 0; c < classes; ++c)
      out.dlogits(t, c) = dlogp(t, c) - std::exp(probs.at(t, c)) * row_sum;
  }
  return out;
}

LossGrad confidence_loss(const FrameProbs& probs, const AnnotationSet& ann) {
  const int frames = probs.frames();
  const int classes = probs.classes();
  LossGrad out;
  out.dlogits = Matrix(frames, classes);
  if (ann.stamps.size() < 2) return out;

  Matrix dlogp(frames, classes);
  const double norm = 1.0 / frames;
  for (size_t k = 0; k + 1 < ann.stamps.size(); ++k) {
    const int left_c = ann.stamps[k].class_id;
    const int right_c = ann.stamps[k + 1].class_id;
    // Differences need a predecessor, so t starts one past the left stamp.
    for (int t = ann.stamps[k].frame + 1; t < ann.stamps[k + 1].frame; ++t) {
      const double dl = probs.at(t, left_c) - probs.at(t - 1, left_c);
      if (dl > 0.0) {
        out.value += dl * norm;
        dlogp(t, left_c) += norm;
        dlogp(t - 1, left_c) -= norm;
      }
      const double dr = probs.at(t, right_c) - probs.at(t - 1, right_c);
      if (dr < 0.0) {
        out.value += -dr * norm;
        dlogp(t, right_c) -= norm;
        dlogp(t - 1, right_c) += norm;
      }
    }
  }
  for (int t = 0; t < frames; ++t) {
    double row_sum = 0.0;
    for (int c = 0; c < classes; ++c) row_sum += dlogp(t, c);
    for (int c = 0; c < classes; ++c)
      out.dlogits(t, c) = dlogp(t, c) - std::exp(probs.at(t, c)) * row_sum;
  }
  return out;
}

ScorerParams naive_init(std::span<const VideoSample> videos,
                        std::span<const AnnotationSet> annotations, const TrainConfig& cfg,
                        ScorerParams init) {
  if (videos.size() != annotations.size())
    throw std::invalid_argument("naive_init: corpus/annotation size mismatch");
  size_t total_stamps = 0;
  for (const AnnotationSet& a : annotations) total_stamps += a.stamps.size();
  if (total_stamps == 0) throw std::invalid_argument("naive_init: no annotated frames");

  // Gather the annotated frames once; epochs touch only these rows.
  Matrix stamped(static_cast<int>(total_stamps), init.feature_dim());
  std::vector<int> stamp_labels;
  stamp_labels.reserve(total_stamps);
  int row = 0;
  for (size_t i = 0; i < videos.size(); ++i)
    for (const Stamp& s : annotations[i].stamps) {
      for (int k = 0; k < init.feature_dim(); ++k) stamped(row, k) = videos[i].features(s.frame, k);
      stamp_labels.push_back(s.class_id);
      ++row;
    }

  auto grad_fn = [&]() {
    ParamGrad g(init.classes(), init.feature_dim());
    const FrameProbs probs = scorer_forward(init, stamped);
    // Mean CE over annotated frames: dlogits = (p - onehot) / N.
    for (int t = 0; t < probs.frames(); ++t)
      for (int c = 0; c < init.classes(); ++c) {
        const double d =
            (std::exp(probs.at(t, c)) - (c == stamp_labels[t] ? 1.0 : 0.0)) / total_stamps;
        for (int k = 0; k < init.feature_dim(); ++k) g.dw(c, k) += d * stamped(t, k);
        g.db[c] += d;
      }
    return g;
  };

  if (cfg.init_optimizer == Optimizer::kAdam) {
    adam_epochs(init, cfg.n_init, cfg.lr, grad_fn);
  } else {
    for (int epoch = 0; epoch < cfg.n_init; ++epoch) {
      const ParamGrad g = grad_fn();
      apply_step(init, g, cfg.lr);
    }
  }
  return init;
}

std::vector<int> uniform_baseline_labels(const AnnotationSet& ann, int total_frames) {
  if (ann.stamps.empty()) throw std::invalid_argument("uniform_baseline_labels: no stamps");
  std::vector<int> labels(total_frames, ann.stamps.front().class_id);
  for (size_t k = 0; k + 1 < ann.stamps.size(); ++k) {
    const int boundary = (ann.stamps[k].frame + ann.stamps[k + 1].frame + 1) / 2;
    for (int t = boundary; t < total_frames; ++t) labels[t] = ann.stamps[k + 1].class_id;
  }
  return labels;
}

std::vector<int> predict_labels(const ScorerParams& params, const Matrix& features) {
  const FrameProbs probs = scorer_forward(params, features);
  std::vector<int> out(probs.frames());
  for (int t = 0; t < probs.frames(); ++t) {
    int best = 0;
    for (int c = 1; c < probs.classes(); ++c)
      if (probs.at(t, c) > probs.at(t, best)) best = c;
    out[t] = best;
  }
  return out;
}

LengthPrior make_length_prior(std::span<const VideoSample> videos, const TrainConfig& cfg,
                              int num_classes) {
  return length_prior_for(videos, cfg, num_classes);
}

void run_m_step(ScorerParams& params, std::span<const VideoSample> videos,
                std::span<const WeightMatrix> weights,
                std::span<const AnnotationSet> annotations, const TrainConfig& cfg,
                int epochs) {
  m_step(params, videos, weights, annotations, cfg, epochs);
}

ScorerParams train_on_labels(std::span<const VideoSample> videos,
                             std::span<const std::vector<int>> labels, const TrainConfig& cfg,
                             int epochs, ScorerParams init) {
  if (videos.size() != labels.size())
    throw std::invalid_argument("train_on_labels: corpus/label size mismatch");
  std::vector<WeightMatrix> weights(videos.size());
  for (size_t i = 0; i < videos.size(); ++i)
    weights[i] = WeightMatrix::one_hot(labels[i], init.classes());
  TrainConfig plain = cfg;
  plain.lambda_tr = 0.0;
  plain.lambda_conf = 0.0;
  m_step(init, videos, weights, {}, plain, epochs);
  return init;
}

EmResult run_em(std::span<const VideoSample> videos,
                std::span<const AnnotationSet> annotations, const TrainConfig& cfg,
                EmMode mode) {
  if (videos.empty() || videos.size() != annotations.size())
    throw std::invalid_argument("run_em: empty corpus or size mismatch");
  for (const AnnotationSet& a : annotations) {
    const bool skiptag = a.mode == SupervisionMode::kSkipTag;
    if (skiptag != (mode == EmMode::kSkipTag))
      throw std::invalid_argument("run_em: annotation mode inconsistent with EM mode");
  }
  const int dim = videos.front().feature_dim();
  int num_classes = 0;
  for (const VideoSample& v : videos)
    for (int y : v.gt_labels) num_classes = std::max(num_classes, y + 1);
  for (const AnnotationSet& a : annotations)
    for (const Stamp& s : a.stamps) num_classes = std::max(num_classes, s.class_id + 1);

  EmResult result;
  result.params = naive_init(videos, annotations, cfg, ScorerParams::zeros(num_classes, dim));
  const LengthPrior prior = make_length_prior(videos, cfg, num_classes);

  auto e_step_all = [&](const ScorerParams& params, std::vector<WeightMatrix>& weights,
                        IterationDiag& diag) {
    weights.assign(videos.size(), {});
    std::vector<double> marginals(videos.size(), 0.0);
    std::vector<std::vector<BoundaryPosterior>> posts(videos.size());
    parallel_for(videos.size(), cfg.jobs, [&](size_t i) {
      try {
        const FrameProbs probs = scorer_forward(params, videos[i].features);
        if (mode == EmMode::kEmTss) {
          TssEStepResult r = e_step_tss(probs, annotations[i], prior, {cfg.candidate_range});
          weights[i] = std::move(r.weights);
          marginals[i] = r.marginal_log_lik;
          posts[i] = std::move(r.posteriors);
        } else {
          GenEStepResult r =
              e_step_gen(probs, annotations[i], prior, {cfg.candidate_range, cfg.window});
          weights[i] = std::move(r.weights);
          marginals[i] = r.marginal_log_lik;
        }
      } catch (const std::exception& e) {
        throw std::runtime_error("E-step failed on video '" + videos[i].id + "': " + e.what());
      }
    });
    diag.marginal_log_lik = 0.0;
    for (double m : marginals) diag.marginal_log_lik += m;

    // Weight quality against ground truth, pooled over frames.
    size_t frames = 0, correct = 0;
    bool have_gt = true;
    for (size_t i = 0; i < videos.size(); ++i) {
      if (videos[i].gt_labels.empty()) {
        have_gt = false;
        break;
      }
      frames += videos[i].gt_labels.size();
      for (int t = 0; t < weights[i].frames(); ++t) {
        int best = 0;
        for (int c = 1; c < weights[i].classes(); ++c)
          if (weights[i].w(t, c) > weights[i].w(t, best)) best = c;
        if (best == videos[i].gt_labels[t]) ++correct;
      }
    }
    if (have_gt) diag.weight_mof = 100.0 * static_cast<double>(correct) / frames;

    if (mode == EmMode::kEmTss && have_gt) {
      double err_sum = 0.0;
      size_t err_count = 0;
      for (size_t i = 0; i < videos.size(); ++i) {
        const std::vector<int> gt_b = interior_boundaries(videos[i].gt_labels);
        if (posts[i].size() != gt_b.size()) continue;  // decimated stamps
        const std::vector<double> pred_b = expected_boundaries(posts[i]);
        err_sum += boundary_error_pct(pred_b, gt_b, videos[i].frames());
        err_count += 1;
      }
      if (err_count > 0) diag.boundary_error_pct = err_sum / err_count;
    }
  };

  std::vector<WeightMatrix> weights;
  for (int m = 0; m <= cfg.m_iters; ++m) {
    IterationDiag diag;
    diag.iteration = m;
    e_step_all(result.params, weights, diag);
    const CorpusLoss loss = corpus_loss_and_grad(videos, weights, annotations, result.params, cfg);
    diag.l_em = loss.l_em;
    diag.l_tr = loss.l_tr;
    diag.l_conf = loss.l_conf;
    diag.total = loss.total;
    result.diags.push_back(diag);
    if (m == cfg.m_iters) break;
    m_step(result.params, videos, weights, annotations, cfg, cfg.n_max);
  }
  return result;
}

}  // namespace emseg
