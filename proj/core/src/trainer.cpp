#include "tloss/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "tloss/special_functions.hpp"

namespace tloss {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, std::string_view group) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step(" + std::string(group) + "): " + std::to_string(params.size()) +
                     " parameters but " + std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericalError("adam_step: non-finite gradient in group '" + std::string(group) +
                           "' at index " + std::to_string(i));
    }
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  } else if (state.m.size() != params.size()) {
    throw ShapeError("adam_step(" + std::string(group) + "): state holds " +
                     std::to_string(state.m.size()) + " entries, parameters " +
                     std::to_string(params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * grads[i];
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
  }
}

std::string_view to_string(StopCriterion c) {
  return c == StopCriterion::kTDist ? "tdist" : "own";
}

StopCriterion parse_stop_criterion(std::string_view name) {
  if (name == "tdist") return StopCriterion::kTDist;
  if (name == "own") return StopCriterion::kOwnLoss;
  throw UsageError("unknown stopping criterion '" + std::string(name) + "' (expected tdist or own)");
}

void TrainConfig::validate() const {
  if (!(lr_theta > 0.0) || !(lr_r > 0.0) || !(lr_sigma > 0.0)) {
    throw UsageError("TrainConfig: learning rates must be > 0");
  }
  if (max_epochs < 1) throw UsageError("TrainConfig: max_epochs must be >= 1");
  if (patience < 1) throw UsageError("TrainConfig: patience must be >= 1");
  if (!(min_delta >= 0.0)) throw UsageError("TrainConfig: min_delta must be >= 0");
  if (!(tau > 0.0 && tau < 1.0)) throw UsageError("TrainConfig: tau must be in (0,1)");
  if (hidden < 1) throw UsageError("TrainConfig: hidden must be >= 1");
  loss.validate();
  features.validate();
}

std::vector<TrainingSample> prepare_samples(std::span<const SyntheticSample> samples,
                                            const FeatureConfig& cfg, bool use_gt) {
  std::vector<TrainingSample> out;
  out.reserve(samples.size());
  for (const SyntheticSample& s : samples) {
    out.push_back({extract_features(s.intensity, cfg), use_gt ? s.gt : s.weak});
  }
  return out;
}

ScaleSummary summarize(const StudentTParams& p) {
  const EffectiveParams e = effective_params(p);
  ScaleSummary s;
  s.r = e.r;
  s.sigma2_min = *std::min_element(e.sigma2.begin(), e.sigma2.end());
  s.sigma2_max = *std::max_element(e.sigma2.begin(), e.sigma2.end());
  s.sigma2_mean = std::accumulate(e.sigma2.begin(), e.sigma2.end(), 0.0) /
                  static_cast<double>(e.sigma2.size());
  return s;
}

StudentTParams validation_tparams(const TrainConfig& cfg, const StudentTParams& learned) {
  if (cfg.loss.type == LossKind::Type::kTDist) return learned;
  return StudentTParams::identity_init(ScaleScope::kShared, Dims{});
}

std::vector<std::size_t> draw_augmentation(Rng& rng, const Dims& dims) {
  std::array<bool, 3> flip{};
  for (bool& f : flip) f = rng.bernoulli(0.5);
  std::array<int, 3> perm = {0, 1, 2};
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      if (dims[a] == dims[b]) pairs.emplace_back(a, b);
  if (!pairs.empty() && rng.bernoulli(0.5)) {
    const auto& [a, b] =
        pairs[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pairs.size()) - 1))];
    std::swap(perm[a], perm[b]);
  }
  std::vector<std::size_t> src(static_cast<std::size_t>(dims.count()));
  std::size_t idx = 0;
  for (std::int64_t i = 0; i < dims.d; ++i) {
    for (std::int64_t j = 0; j < dims.h; ++j) {
      for (std::int64_t k = 0; k < dims.w; ++k, ++idx) {
        std::array<std::int64_t, 3> out = {i, j, k};
        for (int a = 0; a < 3; ++a) {
          if (flip[a]) out[a] = dims[a] - 1 - out[a];
        }
        std::array<std::int64_t, 3> in{};
        for (int a = 0; a < 3; ++a) in[perm[a]] = out[a];
        src[idx] = static_cast<std::size_t>((in[0] * dims.h + in[1]) * dims.w + in[2]);
      }
    }
  }
  return src;
}

TrainingSample apply_augmentation(const TrainingSample& s, std::span<const std::size_t> src,
                                  std::size_t intensity_channels) {
  const std::size_t nv = s.features.voxels();
  if (src.size() != nv || s.label.size() != nv) {
    throw ShapeError("apply_augmentation: index map does not match the sample");
  }
  TrainingSample out = s;
  const std::size_t C = s.features.channels;
  for (std::size_t v = 0; v < nv; ++v) {
    const double* from = s.features.data.data() + src[v] * C;
    std::copy(from, from + intensity_channels, out.features.data.begin() + static_cast<std::ptrdiff_t>(v * C));
    out.label[v] = s.label[src[v]];
  }
  return out;
}

BinaryMask predict_mask(const PredictorParams& p, const FeatureField& f, double tau) {
  return binarize(forward(p, f), tau);
}

namespace {

struct StepResult {
  double loss = 0.0;
  std::vector<double> d_mu;
  double d_rho_raw = 0.0;
  std::vector<double> d_scale_raw;
};

StepResult loss_and_grad(const LossKind& kind, const BinaryMask& k, const ProbabilityMask& mu,
                         const StudentTParams& tparams) {
  StepResult r;
  if (kind.type == LossKind::Type::kTDist) {
    TLossResult t = t_loss_grad(k, mu, tparams, kind.mode);
    r.loss = t.loss;
    r.d_mu = std::move(t.grad.d_mu);
    r.d_rho_raw = t.grad.d_rho_raw;
    r.d_scale_raw = std::move(t.grad.d_scale_raw);
  } else {
    LossValueGrad g = loss_value_grad(kind, k, mu);
    r.loss = g.loss;
    r.d_mu = std::move(g.d_mu);
  }
  return r;
}

double own_loss(const LossKind& kind, const BinaryMask& k, const ProbabilityMask& mu,
                const StudentTParams& tparams) {
  if (kind.type == LossKind::Type::kTDist) return t_loss(k, mu, tparams, kind.mode);
  return loss_value_grad(kind, k, mu).loss;
}

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericalError(what);
}

}  // namespace

TrainReport train(std::span<const TrainingSample> train_set, std::span<const TrainingSample> val_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) {
    throw UsageError("train: training and validation sets must be non-empty");
  }
  const Dims dims = train_set.front().label.dims();
  const std::size_t channels = train_set.front().features.channels;
  for (const auto* set : {&train_set, &val_set}) {
    for (const TrainingSample& s : *set) {
      require_same_dims(s.label, train_set.front().label, "train");
      if (s.features.channels != channels || !(s.features.dims == dims)) {
        throw ShapeError("train: samples disagree on feature layout");
      }
    }
  }
  if (channels != cfg.features.channels()) {
    throw ShapeError("train: samples carry " + std::to_string(channels) +
                     " feature channels but the config describes " +
                     std::to_string(cfg.features.channels()));
  }

  const bool learn_t = cfg.loss.type == LossKind::Type::kTDist;
  Rng init_rng(derive_seed(cfg.seed, 0));
  Rng epoch_rng(derive_seed(cfg.seed, 1));
  PredictorParams params = init_params(init_rng, channels, cfg.hidden);
  StudentTParams tparams = StudentTParams::identity_init(cfg.scale_scope, dims);
  OptimState opt;

  TrainReport report;
  report.config = cfg;
  report.best_params = params;
  report.best_tparams = tparams;
  int since_best = 0;
  std::vector<std::size_t> order(train_set.size());
  ForwardCache cache;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    epoch_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const TrainingSample* s = &train_set[order[step]];
      TrainingSample augmented;
      if (cfg.augment) {
        const std::vector<std::size_t> src = draw_augmentation(epoch_rng, dims);
        augmented = apply_augmentation(*s, src, cfg.features.intensity_channels());
        s = &augmented;
      }
      const ProbabilityMask mu = forward(params, s->features, &cache);
      StepResult r = loss_and_grad(cfg.loss, s->label, mu, tparams);
      require_finite(r.loss, "train: non-finite " + std::string(name(cfg.loss)) + " loss at epoch " +
                                 std::to_string(epoch) + ", sample " + std::to_string(order[step]));
      epoch_loss += r.loss;

      const PredictorParams g = backward(params, s->features, r.d_mu, &cache);
      std::vector<double> flat = params.flatten();
      adam_step(opt.theta, flat, g.flatten(), cfg.lr_theta, "theta");
      params.unflatten(flat);
      if (learn_t) {
        adam_step(opt.rho, std::span<double>(&tparams.rho_raw, 1),
                  std::span<const double>(&r.d_rho_raw, 1), cfg.lr_r, "r");
        adam_step(opt.scale, tparams.scale_raw, r.d_scale_raw, cfg.lr_sigma, "sigma2");
      }
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));

    const StudentTParams vparams = validation_tparams(cfg, tparams);
    double ltd = 0.0;
    double own = 0.0;
    for (const TrainingSample& s : val_set) {
      const ProbabilityMask mu = forward(params, s.features);
      ltd += t_loss(s.label, mu, vparams, cfg.loss.mode);
      if (cfg.criterion == StopCriterion::kOwnLoss) own += own_loss(cfg.loss, s.label, mu, tparams);
    }
    ltd /= static_cast<double>(val_set.size());
    own /= static_cast<double>(val_set.size());
    require_finite(ltd, "train: non-finite validation loss at epoch " + std::to_string(epoch));
    report.val_ltd.push_back(ltd);
    const double crit = cfg.criterion == StopCriterion::kTDist ? ltd : own;
    require_finite(crit, "train: non-finite validation criterion at epoch " + std::to_string(epoch));
    report.val_criterion.push_back(crit);
    report.stopped_epoch = epoch;

    if (epoch == 1 || crit < report.best_val - cfg.min_delta) {
      report.best_val = crit;
      report.best_epoch = epoch;
      report.best_params = params;
      report.best_tparams = tparams;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  report.scale = summarize(report.best_tparams);
  return report;
}

ProbabilityMask field_estimate(std::span<const BinaryMask> labels, const LossKind& loss, int steps,
                               double lr, const FieldEstimateOptions& opts) {
  loss.validate();
  if (labels.empty()) throw UsageError("field_estimate: need at least one label volume");
  if (steps < 0) throw UsageError("field_estimate: steps must be >= 0");
  if (!(lr > 0.0)) throw UsageError("field_estimate: lr must be > 0");
  for (const BinaryMask& k : labels) require_same_dims(k, labels.front(), "field_estimate");

  const Dims dims = labels.front().dims();
  const std::size_t nv = labels.front().size();
  const double inv_j = 1.0 / static_cast<double>(labels.size());
  const bool learn_t = loss.type == LossKind::Type::kTDist;
  std::vector<double> logits(nv, 0.0);
  std::vector<double> mu_values(nv);
  StudentTParams tparams = StudentTParams::identity_init(opts.scale_scope, dims);
  OptimState opt;

  auto field = [&]() {
    for (std::size_t v = 0; v < nv; ++v) {
      mu_values[v] = sigmoid(std::clamp(logits[v], -kLogitClamp, kLogitClamp));
    }
    return ProbabilityMask(dims, mu_values);
  };

  for (int step = 0; step < steps; ++step) {
    const ProbabilityMask mu = field();
    std::vector<double> d_logit(nv, 0.0);
    double d_rho = 0.0;
    std::vector<double> d_scale(tparams.scale_raw.size(), 0.0);
    double total = 0.0;
    for (const BinaryMask& k : labels) {
      const StepResult r = loss_and_grad(loss, k, mu, tparams);
      total += r.loss;
      for (std::size_t v = 0; v < nv; ++v) d_logit[v] += inv_j * r.d_mu[v];
      if (learn_t) {
        d_rho += inv_j * r.d_rho_raw;
        for (std::size_t i = 0; i < d_scale.size(); ++i) d_scale[i] += inv_j * r.d_scale_raw[i];
      }
    }
    require_finite(total, "field_estimate: non-finite " + std::string(name(loss)) +
                              " loss at step " + std::to_string(step));
    for (std::size_t v = 0; v < nv; ++v) {
      const bool clamped = std::abs(logits[v]) > kLogitClamp;
      d_logit[v] = clamped ? 0.0 : d_logit[v] * mu[v] * (1.0 - mu[v]);
    }
    adam_step(opt.theta, logits, d_logit, lr, "logits");
    if (learn_t) {
      const double lr_t = lr * opts.tparam_lr_scale;
      adam_step(opt.rho, std::span<double>(&tparams.rho_raw, 1), std::span<const double>(&d_rho, 1),
                lr_t, "r");
      adam_step(opt.scale, tparams.scale_raw, d_scale, lr_t, "sigma2");
    }
  }
  return field();
}

}  // namespace tloss
