#include "tloss_cli/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "tloss/metrics.hpp"
#include "tloss/special_functions.hpp"

namespace tloss::cli {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// ---------------------------------------------------------------------------
// gradient check

bool GradcheckReport::passed() const {
  return std::all_of(components.begin(), components.end(), [](const auto& c) { return c.passed; });
}

std::string GradcheckReport::first_failure() const {
  for (const auto& c : components)
    if (!c.passed) return c.name;
  return {};
}

std::vector<std::string> gradcheck_components() {
  return {"tdist_mu", "tdist_sigma2", "tdist_r", "mse", "mae", "bce", "ce", "focal", "predictor"};
}

namespace {

using Objective = std::function<double(const std::vector<double>&)>;

double compare(const std::vector<double>& analytic, const Objective& f, std::vector<double> x) {
  double worst = 0.0;
  std::vector<double> numeric(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + kFdStep;
    const double up = f(x);
    x[i] = keep - kFdStep;
    const double down = f(x);
    x[i] = keep;
    numeric[i] = (up - down) / (2.0 * kFdStep);
  }
  for (std::size_t i = 0; i < x.size(); ++i)
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / std::max(1.0, std::abs(analytic[i])));
  return worst;
}

Dims random_small_dims(Rng& rng) {
  return {rng.uniform_int(1, 3), rng.uniform_int(1, 3), rng.uniform_int(1, 4)};
}

BinaryMask random_mask(Rng& rng, const Dims& dims) {
  BinaryMask k(dims, 0);
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = rng.bernoulli(0.5) ? 1 : 0;
  return k;
}

std::vector<double> random_mu(Rng& rng, std::size_t n) {
  std::vector<double> mu(n);
  for (double& m : mu) m = rng.uniform(0.02, 0.98);
  return mu;
}

StudentTParams random_tparams(Rng& rng, ScaleScope scope, const Dims& dims) {
  StudentTParams p = StudentTParams::identity_init(scope, dims);
  p.rho_raw = softplus_inv(std::exp(rng.uniform(std::log(0.5), std::log(100.0))));
  for (double& s : p.scale_raw) s = softplus_inv(std::exp(rng.uniform(std::log(0.01), std::log(10.0))));
  return p;
}

double tdist_trial(Rng& rng, const std::string& which, bool fault) {
  const Dims dims = random_small_dims(rng);
  const TLossMode mode = rng.bernoulli(0.5) ? TLossMode::kMultivariate : TLossMode::kPerVoxel;
  const ScaleScope scope = rng.bernoulli(0.5) ? ScaleScope::kShared : ScaleScope::kPerVoxel;
  const BinaryMask k = random_mask(rng, dims);
  const std::vector<double> mu0 = random_mu(rng, k.size());
  const StudentTParams p0 = random_tparams(rng, scope, dims);
  const TLossResult res = t_loss_grad(k, ProbabilityMask(dims, mu0), p0, mode);
  const double sign = fault ? -1.0 : 1.0;

  if (which == "tdist_mu") {
    std::vector<double> a = res.grad.d_mu;
    for (double& v : a) v *= sign;
    return compare(a, [&](const std::vector<double>& x) { return t_loss(k, ProbabilityMask(dims, x), p0, mode); },
                   mu0);
  }
  if (which == "tdist_sigma2") {
    std::vector<double> a = res.grad.d_scale_raw;
    for (double& v : a) v *= sign;
    return compare(a,
                   [&](const std::vector<double>& x) {
                     StudentTParams p = p0;
                     p.scale_raw = x;
                     return t_loss(k, ProbabilityMask(dims, mu0), p, mode);
                   },
                   p0.scale_raw);
  }
  std::vector<double> a = {sign * res.grad.d_rho_raw};
  return compare(a,
                 [&](const std::vector<double>& x) {
                   StudentTParams p = p0;
                   p.rho_raw = x[0];
                   return t_loss(k, ProbabilityMask(dims, mu0), p, mode);
                 },
                 {p0.rho_raw});
}

double baseline_trial(Rng& rng, const std::string& which, bool fault) {
  const Dims dims = random_small_dims(rng);
  LossKind kind = parse_loss_kind(which);
  if (kind.type == LossKind::Type::kFocal) {
    kind.focal_alpha = rng.uniform(0.1, 0.9);
    kind.focal_gamma = rng.uniform(0.0, 4.0);
  }
  const BinaryMask k = random_mask(rng, dims);
  const std::vector<double> mu0 = random_mu(rng, k.size());
  std::vector<double> a = loss_value_grad(kind, k, ProbabilityMask(dims, mu0)).d_mu;
  if (fault)
    for (double& v : a) v = -v;
  return compare(a,
                 [&](const std::vector<double>& x) {
                   return loss_value_grad(kind, k, ProbabilityMask(dims, x)).loss;
                 },
                 mu0);
}

double predictor_trial(Rng& rng, bool fault) {
  const Dims dims = random_small_dims(rng);
  const auto in = static_cast<std::size_t>(rng.uniform_int(1, 6));
  const auto hidden = static_cast<std::size_t>(rng.uniform_int(1, 8));
  FeatureField f;
  f.dims = dims;
  f.channels = in;
  f.data.resize(f.voxels() * in);
  for (double& v : f.data) v = rng.normal();
  PredictorParams p = init_params(rng, in, hidden);
  for (double& b : p.b1) b = 0.5 * rng.normal();
  p.b2 = 0.5 * rng.normal();
  std::vector<double> weights(f.voxels());
  for (double& w : weights) w = rng.normal();
  PredictorParams g = backward(p, f, weights);
  std::vector<double> a = g.flatten();
  if (fault)
    for (double& v : a) v = -v;
  return compare(a,
                 [&](const std::vector<double>& x) {
                   PredictorParams q = p;
                   q.unflatten(x);
                   const ProbabilityMask mu = forward(q, f);
                   double s = 0.0;
                   for (std::size_t v = 0; v < mu.size(); ++v) s += weights[v] * mu[v];
                   return s;
                 },
                 p.flatten());
}

}  // namespace

GradcheckReport run_gradcheck(int trials, std::uint64_t seed, std::string_view inject_fault) {
  if (trials < 1) throw UsageError("gradcheck: --trials must be >= 1");
  const auto names = gradcheck_components();
  if (!inject_fault.empty() && std::find(names.begin(), names.end(), inject_fault) == names.end()) {
    throw UsageError("gradcheck: unknown component '" + std::string(inject_fault) + "'");
  }
  GradcheckReport report;
  for (std::size_t c = 0; c < names.size(); ++c) {
    const std::string& n = names[c];
    const bool fault = n == inject_fault;
    Rng rng(derive_seed(seed, c));
    GradcheckComponent comp{n, trials, 0.0, true};
    for (int t = 0; t < trials; ++t) {
      double err;
      if (n.rfind("tdist_", 0) == 0) {
        err = tdist_trial(rng, n, fault);
      } else if (n == "predictor") {
        err = predictor_trial(rng, fault);
      } else {
        err = baseline_trial(rng, n, fault);
      }
      if (!(err <= kGradTolerance)) comp.passed = false;
      comp.max_rel_error = std::max(comp.max_rel_error, std::isnan(err) ? INFINITY : err);
    }
    report.components.push_back(comp);
  }
  return report;
}

// ---------------------------------------------------------------------------
// ablation

const AblationRow* AblationReport::find(std::string_view loss) const {
  for (const auto& r : rows)
    if (r.loss == loss) return &r;
  return nullptr;
}

std::vector<SampleMetrics> evaluate_params(const Dataset& data, const std::vector<TrainingSample>& prepared,
                                           const std::vector<std::size_t>& indices,
                                           const PredictorParams& params, double tau,
                                           const std::optional<Spacing>& spacing) {
  std::vector<SampleMetrics> out;
  for (std::size_t i : indices) {
    BinaryMask pred = predict_mask(params, prepared[i].features, tau);
    BinaryMask gt = data.samples[i].gt;
    const Spacing sp = spacing.value_or(data.spacing);
    pred.set_spacing(sp);
    gt.set_spacing(sp);
    out.push_back({i, evaluate_masks(pred, gt)});
  }
  return out;
}

namespace {

struct Paired {
  std::vector<double> x, y;
};

std::optional<double> signed_rank_p(const Paired& p) {
  try {
    return wilcoxon_signed_rank(p.x, p.y).p_two_sided;
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

Paired pair_up(const std::vector<SampleMetrics>& a, const std::vector<SampleMetrics>& b,
               std::optional<double> MetricRow::*field) {
  Paired p;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    const auto& va = a[i].row.*field;
    const auto& vb = b[i].row.*field;
    if (va && vb) {
      p.x.push_back(*va);
      p.y.push_back(*vb);
    }
  }
  return p;
}

std::vector<double> collect(const std::vector<SampleMetrics>& rows, std::optional<double> MetricRow::*field) {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.row.*field) out.push_back(*(r.row.*field));
  return out;
}

}  // namespace

AblationReport run_ablation(const Dataset& data, const Split& split, const std::vector<LossKind>& kinds,
                            const TrainConfig& base, std::ostream* progress) {
  if (kinds.empty()) throw UsageError("ablate: no loss kinds selected");
  const std::size_t n = data.samples.size();
  if (split.train + split.val + split.test > n || split.test < 1) {
    throw UsageError("ablate: split does not fit the dataset or has no test samples");
  }
  const std::vector<TrainingSample> prepared = prepare_samples(data.samples, base.features);
  const auto tr = part_indices(split, Part::kTrain, n);
  const auto va = part_indices(split, Part::kVal, n);
  const auto te = part_indices(split, Part::kTest, n);
  std::vector<TrainingSample> train_set, val_set;
  for (std::size_t i : tr) train_set.push_back(prepared[i]);
  for (std::size_t i : va) val_set.push_back(prepared[i]);

  AblationReport report;
  for (const LossKind& kind : kinds) {
    TrainConfig cfg = base;
    cfg.loss = kind;
    cfg.loss.mode = base.loss.mode;
    const TrainReport tr_report = train(train_set, val_set, cfg);
    AblationRow row;
    row.loss = std::string(name(kind));
    row.stopped_epoch = tr_report.stopped_epoch;
    row.best_epoch = tr_report.best_epoch;
    row.scale = tr_report.scale;
    row.per_sample = evaluate_params(data, prepared, te, tr_report.best_params, cfg.tau, std::nullopt);
    const auto dice = collect(row.per_sample, &MetricRow::dice);
    const auto hd = collect(row.per_sample, &MetricRow::hd95);
    const auto as = collect(row.per_sample, &MetricRow::asd);
    row.undefined_distances = static_cast<int>(row.per_sample.size() - hd.size());
    row.dice_mean = mean_of(dice);
    row.dice_sd = sd_of(dice);
    row.hd95_mean = mean_of(hd);
    row.hd95_sd = sd_of(hd);
    row.asd_mean = mean_of(as);
    row.asd_sd = sd_of(as);
    if (progress) {
      *progress << "  " << row.loss << ": epochs " << row.stopped_epoch << " (best " << row.best_epoch
                << "), test dice " << format_double(row.dice_mean) << "\n";
      progress->flush();
    }
    report.rows.push_back(std::move(row));
  }
  if (const AblationRow* ref = report.find("tdist")) {
    const auto ref_samples = ref->per_sample;
    for (AblationRow& row : report.rows) {
      if (row.loss == "tdist") continue;
      row.p_dice = signed_rank_p(pair_up(ref_samples, row.per_sample, &MetricRow::dice));
      row.p_asd = signed_rank_p(pair_up(ref_samples, row.per_sample, &MetricRow::asd));
    }
  }
  return report;
}

std::string ablation_csv(const AblationReport& report) {
  CsvWriter csv({"loss", "dice_mean", "dice_sd", "hd95_mean", "hd95_sd", "asd_mean", "asd_sd", "p_dice", "p_asd"});
  for (const auto& r : report.rows) {
    csv.add_row({r.loss, cell(r.dice_mean), cell(r.dice_sd), cell(r.hd95_mean), cell(r.hd95_sd),
                 cell(r.asd_mean), cell(r.asd_sd), cell(r.p_dice), cell(r.p_asd)});
  }
  return csv.str();
}

std::string ablation_per_sample_csv(const AblationReport& report) {
  CsvWriter csv({"loss", "sample", "dice", "hd95", "asd"});
  for (const auto& r : report.rows) {
    for (const auto& s : r.per_sample) {
      csv.add_row({r.loss, sample_dir_name(s.sample), cell(s.row.dice), cell(s.row.hd95), cell(s.row.asd)});
    }
  }
  return csv.str();
}

namespace {

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string p_cell(const std::optional<double>& p) {
  if (!p) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", *p);
  return std::string(buf) + (*p <= 0.05 ? "*" : " ");
}

}  // namespace

std::string ablation_table(const AblationReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : report.rows) {
    rows.push_back({r.loss, fixed(r.dice_mean, 4) + " +- " + fixed(r.dice_sd, 4),
                    fixed(r.hd95_mean, 3) + " +- " + fixed(r.hd95_sd, 3),
                    fixed(r.asd_mean, 3) + " +- " + fixed(r.asd_sd, 3), p_cell(r.p_dice), p_cell(r.p_asd),
                    std::to_string(r.stopped_epoch)});
  }
  return aligned_table({"loss", "dice", "hd95", "asd", "p(dice)", "p(asd)", "epochs"}, rows);
}

// ---------------------------------------------------------------------------
// field estimation

void FieldEstConfig::validate() const {
  if (seeds < 1) throw UsageError("fieldest: --seeds must be >= 1");
  if (!(contamination >= 0.0 && contamination <= 1.0)) throw UsageError("fieldest: --contamination must be in [0,1]");
  if (labels < 1) throw UsageError("fieldest: --labels must be >= 1");
  if (steps < 1) throw UsageError("fieldest: --steps must be >= 1");
  if (!(lr > 0.0)) throw UsageError("fieldest: --lr must be > 0");
  if (!(label_flip_rate >= 0.0 && label_flip_rate <= 1.0)) throw UsageError("fieldest: --label-flip-rate must be in [0,1]");
  validate_dims(dims);
}

const FieldEstRow* FieldEstReport::find(std::string_view loss) const {
  for (const auto& r : rows)
    if (r.loss == loss) return &r;
  return nullptr;
}

FieldEstCase make_fieldest_case(const FieldEstConfig& cfg, int seed_index) {
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(seed_index)));
  ShapeSpec shape;
  shape.dims = cfg.dims;
  const double extent = static_cast<double>(std::min({cfg.dims.d, cfg.dims.h, cfg.dims.w}));
  shape.lobe_sigma_min = std::max(0.5, extent * (2.5 / 32.0));
  shape.lobe_sigma_max = std::max(shape.lobe_sigma_min, extent * (5.0 / 32.0));
  FieldEstCase c;
  c.gt = gen_shape(rng, shape);
  const int noisy = static_cast<int>(std::lround(cfg.contamination * cfg.labels));
  CorruptionSpec jitter = CorruptionSpec::none();
  jitter.boundary_flip_rate = cfg.label_flip_rate;
  for (int j = 0; j < cfg.labels; ++j) {
    if (j < noisy) {
      const double density = rng.uniform();
      BinaryMask m(cfg.dims, 0);
      for (std::size_t v = 0; v < m.size(); ++v) m[v] = rng.bernoulli(density) ? 1 : 0;
      c.labels.push_back(std::move(m));
    } else {
      c.labels.push_back(corrupt_labels(rng, c.gt, jitter));
    }
  }
  return c;
}

FieldEstReport run_fieldest(const FieldEstConfig& cfg, std::ostream* progress) {
  cfg.validate();
  std::vector<LossKind> kinds = cfg.losses.empty() ? all_loss_kinds(cfg.mode) : cfg.losses;
  for (LossKind& k : kinds) k.mode = cfg.mode;
  FieldEstReport report;
  for (const LossKind& k : kinds) report.rows.push_back({std::string(name(k)), {}, 0.0, 0.0, {}, {}});
  for (int s = 0; s < cfg.seeds; ++s) {
    const FieldEstCase c = make_fieldest_case(cfg, s);
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      const ProbabilityMask mu = field_estimate(c.labels, kinds[i], cfg.steps, cfg.lr);
      const BinaryMask pred = binarize(mu, 0.5);
      double d = 0.0;
      try {
        d = dice(pred, c.gt);
      } catch (const UndefinedMetricError&) {
        d = 0.0;
      }
      report.rows[i].dice.push_back(d);
    }
    if (progress) {
      *progress << "  seed " << s + 1 << "/" << cfg.seeds << "\n";
      progress->flush();
    }
  }
  const FieldEstRow* ref = report.find("tdist");
  const std::vector<double> ref_dice = ref ? ref->dice : std::vector<double>{};
  for (FieldEstRow& row : report.rows) {
    row.dice_mean = mean_of(row.dice);
    row.dice_sd = sd_of(row.dice);
    if (ref && row.loss != "tdist") {
      int wins = 0;
      int strict = 0;
      for (std::size_t s = 0; s < row.dice.size(); ++s) {
        wins += ref_dice[s] >= row.dice[s] ? 1 : 0;
        strict += ref_dice[s] > row.dice[s] ? 1 : 0;
      }
      row.tdist_win_rate = static_cast<double>(wins) / static_cast<double>(row.dice.size());
      row.tdist_strict_win_rate = static_cast<double>(strict) / static_cast<double>(row.dice.size());
    }
  }
  return report;
}

std::string fieldest_csv(const FieldEstReport& report) {
  CsvWriter csv({"loss", "dice_mean", "dice_sd", "tdist_win_rate", "tdist_strict_win_rate"});
  for (const auto& r : report.rows) {
    csv.add_row({r.loss, cell(r.dice_mean), cell(r.dice_sd), cell(r.tdist_win_rate), cell(r.tdist_strict_win_rate)});
  }
  return csv.str();
}

std::string fieldest_per_seed_csv(const FieldEstReport& report) {
  CsvWriter csv({"loss", "seed", "dice"});
  for (const auto& r : report.rows)
    for (std::size_t s = 0; s < r.dice.size(); ++s) csv.add_row({r.loss, std::to_string(s), cell(r.dice[s])});
  return csv.str();
}

std::string fieldest_table(const FieldEstReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : report.rows) {
    rows.push_back({r.loss, fixed(r.dice_mean, 4) + " +- " + fixed(r.dice_sd, 4),
                    r.tdist_win_rate ? fixed(*r.tdist_win_rate, 2) : "-",
                    r.tdist_strict_win_rate ? fixed(*r.tdist_strict_win_rate, 2) : "-"});
  }
  return aligned_table({"loss", "dice", "tdist >=", "tdist >"}, rows);
}

}  // namespace tloss::cli
