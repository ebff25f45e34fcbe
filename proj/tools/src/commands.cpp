#include "tloss_cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>

#include "tloss/metrics.hpp"
#include "tloss/mvol.hpp"
#include "tloss_cli/experiments.hpp"
#include "tloss_cli/io.hpp"

namespace tloss::cli {

namespace fs = std::filesystem;

namespace {

struct GenArgs {
  std::string out;
  std::uint64_t seed = 7;
  int n = 60;
  std::string dims = "32";
  std::string spacing = "1";
  int lobes = 3;
  double flip_rate = 0.15;
  int blobs = 3;
  int blob_radius = 3;
  int morph_min = -1;
  int morph_max = 2;
  double drop_prob = 0.0;
  double noise_sd = 0.35;
};

struct TrainArgs {
  std::string data;
  std::string out;
  std::string loss = "tdist";
  std::uint64_t seed = 1;
  std::string mode = "pervoxel";
  std::string scope = "pervoxel";
  std::string criterion = "tdist";
  std::string split;
  int max_epochs = 600;
  int patience = 20;
  double min_delta = 1e-5;
  double lr_theta = 1e-3;
  double lr_r = 1e-4;
  double lr_sigma = 1e-4;
  bool no_augment = false;
  int hidden = 16;
  double tau = 0.5;
};

struct EvalArgs {
  std::string data;
  std::string params;
  std::string out;
  std::string part = "test";
  std::string split;
  std::string spacing;
  double tau = 0.5;
};

struct AblateArgs {
  TrainArgs train;
  std::string losses;
};

struct FieldArgs {
  std::string out;
  std::uint64_t seed = 1;
  int seeds = 20;
  double contamination = 0.3;
  int labels = 20;
  int steps = 500;
  double lr = 0.05;
  std::string dims = "16";
  double label_flip_rate = 0.15;
  std::string mode = "multivariate";
  std::string losses;
};

struct GradArgs {
  std::string out;
  int trials = 100;
  std::uint64_t seed = 1;
  std::string inject_fault;
};

void add_train_options(CLI::App* app, TrainArgs& a) {
  app->add_option("--data", a.data, "dataset directory written by `gen`");
  app->add_option("--out", a.out, "output directory");
  app->add_option("--seed", a.seed, "seed for initialization, shuffling and augmentation")->capture_default_str();
  app->add_option("--mode", a.mode, "Student-t mode: pervoxel | multivariate")->capture_default_str();
  app->add_option("--scope", a.scope, "sigma^2 scope: shared | pervoxel")->capture_default_str();
  app->add_option("--criterion", a.criterion, "early-stopping series: tdist | own")->capture_default_str();
  app->add_option("--split", a.split, "train,val,test sample counts (default 2/3, 1/6, 1/6)");
  app->add_option("--max-epochs", a.max_epochs)->capture_default_str();
  app->add_option("--patience", a.patience)->capture_default_str();
  app->add_option("--min-delta", a.min_delta)->capture_default_str();
  app->add_option("--lr-theta", a.lr_theta)->capture_default_str();
  app->add_option("--lr-r", a.lr_r)->capture_default_str();
  app->add_option("--lr-sigma", a.lr_sigma)->capture_default_str();
  app->add_flag("--no-augment", a.no_augment, "disable random flips and axis swaps");
  app->add_option("--hidden", a.hidden, "hidden units of the predictor")->capture_default_str();
  app->add_option("--tau", a.tau, "binarization threshold")->capture_default_str();
}

TLossMode mode_arg(const std::string& s) {
  try {
    return parse_tloss_mode(s);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

ScaleScope scope_arg(const std::string& s) {
  if (s == "shared") return ScaleScope::kShared;
  if (s == "pervoxel") return ScaleScope::kPerVoxel;
  throw UsageError("unknown --scope '" + s + "' (expected shared or pervoxel)");
}

TrainConfig train_config(const TrainArgs& a) {
  TrainConfig cfg;
  cfg.loss = parse_loss_kind(a.loss, mode_arg(a.mode));
  cfg.seed = a.seed;
  cfg.scale_scope = scope_arg(a.scope);
  cfg.criterion = parse_stop_criterion(a.criterion);
  cfg.max_epochs = a.max_epochs;
  cfg.patience = a.patience;
  cfg.min_delta = a.min_delta;
  cfg.lr_theta = a.lr_theta;
  cfg.lr_r = a.lr_r;
  cfg.lr_sigma = a.lr_sigma;
  cfg.augment = !a.no_augment;
  if (a.hidden < 1) throw UsageError("--hidden must be >= 1");
  cfg.hidden = static_cast<std::size_t>(a.hidden);
  cfg.tau = a.tau;
  cfg.validate();
  return cfg;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

Split split_for(const std::string& text, std::size_t n) {
  return text.empty() ? default_split(n) : parse_split(text, n);
}

std::vector<LossKind> losses_arg(const std::string& list, TLossMode mode) {
  if (list.empty()) return all_loss_kinds(mode);
  std::vector<LossKind> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t e = std::min(list.find(',', pos), list.size());
    out.push_back(parse_loss_kind(std::string_view(list).substr(pos, e - pos), mode));
    pos = e + 1;
  }
  return out;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// ---- subcommands ----

int cmd_gen(const GenArgs& a, std::ostream& out) {
  require(a.out, "--out");
  if (a.n < 1) throw UsageError("--n must be >= 1");
  Dataset data;
  data.spec.seed = a.seed;
  data.spec.n = a.n;
  data.spec.shape.dims = parse_dims(a.dims);
  data.spec.shape.n_lobes = a.lobes;
  data.spec.corruption.boundary_flip_rate = a.flip_rate;
  data.spec.corruption.outlier_blob_count = a.blobs;
  data.spec.corruption.outlier_blob_radius = a.blob_radius;
  data.spec.corruption.morph_min = a.morph_min;
  data.spec.corruption.morph_max = a.morph_max;
  data.spec.corruption.drop_component_prob = a.drop_prob;
  data.spec.intensity.noise_sd = a.noise_sd;
  data.spec.validate();
  data.spacing = parse_spacing(a.spacing);
  data.samples = gen_dataset(data.spec);
  write_dataset(a.out, data);
  double dsum = 0.0;
  for (const auto& s : data.samples) dsum += dice(s.weak, s.gt);
  out << "generated " << data.samples.size() << " samples in " << a.out << "\n";
  out << "mean dice(weak, gt) = " << format_double(dsum / static_cast<double>(data.samples.size())) << "\n";
  return kExitOk;
}

struct Loaded {
  Dataset data;
  Split split;
  std::vector<TrainingSample> prepared;
};

Loaded load_for_training(const std::string& dir, const std::string& split_text, const FeatureConfig& fc) {
  require(dir, "--data");
  Loaded l;
  l.data = read_dataset(dir);
  l.split = split_for(split_text, l.data.samples.size());
  l.prepared = prepare_samples(l.data.samples, fc);
  return l;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const TrainConfig cfg = train_config(a);
  require(a.out, "--out");
  Loaded l = load_for_training(a.data, a.split, cfg.features);
  const std::size_t n = l.data.samples.size();
  std::vector<TrainingSample> tr, va;
  for (std::size_t i : part_indices(l.split, Part::kTrain, n)) tr.push_back(l.prepared[i]);
  const auto val_idx = part_indices(l.split, Part::kVal, n);
  for (std::size_t i : val_idx) va.push_back(l.prepared[i]);
  const TrainReport report = train(tr, va, cfg);

  const auto metrics = evaluate_params(l.data, l.prepared, val_idx, report.best_params, cfg.tau, std::nullopt);
  std::vector<double> d, h, s;
  for (const auto& m : metrics) {
    if (m.row.dice) d.push_back(*m.row.dice);
    if (m.row.hd95) h.push_back(*m.row.hd95);
    if (m.row.asd) s.push_back(*m.row.asd);
  }
  json j = to_json(report);
  j["split"] = {{"train", l.split.train}, {"val", l.split.val}, {"test", l.split.test}};
  j["metrics"] = {{"val_dice_mean", mean_of(d)}, {"val_hd95_mean", h.empty() ? json() : json(mean_of(h))},
                  {"val_asd_mean", s.empty() ? json() : json(mean_of(s))}};
  make_dir(a.out);
  write_text(fs::path(a.out) / "report.json", j.dump(2) + "\n");
  save_params(fs::path(a.out) / "best.mprm", report.best_params);
  out << "loss " << name(cfg.loss) << ": " << report.stopped_epoch << " epochs, best epoch "
      << report.best_epoch << ", best validation " << format_double(report.best_val) << "\n";
  out << "validation dice vs ground truth " << format_double(mean_of(d)) << "\n";
  return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  require(a.data, "--data");
  require(a.params, "--params");
  if (!(a.tau > 0.0 && a.tau < 1.0)) throw UsageError("--tau must be in (0,1)");
  const PredictorParams params = load_params(a.params);
  FeatureConfig fc;
  if (params.in != fc.channels()) {
    throw ShapeError("params expect " + std::to_string(params.in) + " features, the default extractor gives " +
                     std::to_string(fc.channels()));
  }
  Loaded l = load_for_training(a.data, a.split, fc);
  const auto idx = part_indices(l.split, parse_part(a.part), l.data.samples.size());
  std::optional<Spacing> spacing;
  if (!a.spacing.empty()) spacing = parse_spacing(a.spacing);
  const auto rows = evaluate_params(l.data, l.prepared, idx, params, a.tau, spacing);

  CsvWriter csv({"sample", "dice", "iou", "acc", "pre", "sen", "spe", "hd95", "asd"});
  std::vector<std::vector<double>> cols(8);
  int undefined = 0;
  for (const auto& r : rows) {
    const MetricRow& m = r.row;
    const std::optional<double> vals[8] = {m.dice, m.iou, m.acc, m.pre, m.sen, m.spe, m.hd95, m.asd};
    std::vector<std::string> cells = {sample_dir_name(r.sample)};
    for (int c = 0; c < 8; ++c) {
      cells.push_back(cell(vals[c]));
      if (vals[c]) cols[static_cast<std::size_t>(c)].push_back(*vals[c]);
    }
    if (!m.hd95) {
      ++undefined;
      err << "warning: " << sample_dir_name(r.sample) << ": empty prediction or ground truth; "
          << "surface distances undefined\n";
    }
    csv.add_row(std::move(cells));
  }
  std::vector<std::string> mean_row = {"mean"}, sd_row = {"sd"};
  for (const auto& c : cols) {
    mean_row.push_back(c.empty() ? std::string() : cell(mean_of(c)));
    sd_row.push_back(c.empty() ? std::string() : cell(sd_of(c)));
  }
  csv.add_row(std::move(mean_row));
  csv.add_row(std::move(sd_row));
  if (undefined > 0) {
    err << "warning: " << undefined << " of " << rows.size()
        << " samples excluded from hd95/asd means\n";
  }
  if (a.out.empty()) {
    out << csv.str();
  } else {
    write_text(a.out, csv.str());
    out << "wrote " << rows.size() << " rows to " << a.out << "\n";
  }
  return kExitOk;
}

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  const TrainConfig base = train_config(a.train);
  require(a.train.out, "--out");
  const auto kinds = losses_arg(a.losses, base.loss.mode);
  require(a.train.data, "--data");
  const Dataset data = read_dataset(a.train.data);
  const Split split = split_for(a.train.split, data.samples.size());
  out << "ablation over " << kinds.size() << " losses, split " << split.train << "/" << split.val << "/"
      << split.test << "\n";
  const AblationReport report = run_ablation(data, split, kinds, base, &out);
  make_dir(a.train.out);
  write_text(fs::path(a.train.out) / "ablation.csv", ablation_csv(report));
  write_text(fs::path(a.train.out) / "ablation_samples.csv", ablation_per_sample_csv(report));
  out << ablation_table(report);
  return kExitOk;
}

int cmd_fieldest(const FieldArgs& a, std::ostream& out) {
  FieldEstConfig cfg;
  cfg.seed = a.seed;
  cfg.seeds = a.seeds;
  cfg.contamination = a.contamination;
  cfg.labels = a.labels;
  cfg.steps = a.steps;
  cfg.lr = a.lr;
  cfg.dims = parse_dims(a.dims);
  cfg.label_flip_rate = a.label_flip_rate;
  cfg.mode = mode_arg(a.mode);
  cfg.losses = losses_arg(a.losses, cfg.mode);
  cfg.validate();
  const FieldEstReport report = run_fieldest(cfg, &out);
  if (!a.out.empty()) {
    make_dir(a.out);
    write_text(fs::path(a.out) / "fieldest.csv", fieldest_csv(report));
    write_text(fs::path(a.out) / "fieldest_seeds.csv", fieldest_per_seed_csv(report));
  }
  out << fieldest_table(report);
  return kExitOk;
}

int cmd_gradcheck(const GradArgs& a, std::ostream& out, std::ostream& err) {
  const GradcheckReport report = run_gradcheck(a.trials, a.seed, a.inject_fault);
  std::vector<std::vector<std::string>> rows;
  CsvWriter csv({"component", "trials", "max_rel_error", "passed"});
  double worst = 0.0;
  for (const auto& c : report.components) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", c.max_rel_error);
    rows.push_back({c.name, std::to_string(c.trials), buf, c.passed ? "PASS" : "FAIL"});
    csv.add_row({c.name, std::to_string(c.trials), cell(c.max_rel_error), c.passed ? "1" : "0"});
    worst = std::max(worst, c.max_rel_error);
  }
  out << aligned_table({"component", "trials", "max rel err", "status"}, rows);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", worst);
  out << "max relative error " << buf << " (tolerance 1e-6, step 1e-5)\n";
  if (!a.out.empty()) {
    make_dir(a.out);
    write_text(fs::path(a.out) / "gradcheck.csv", csv.str());
  }
  if (!report.passed()) {
    err << "gradcheck failed: " << report.first_failure() << "\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}

// ---- JSON config layering ----

std::string json_to_arg(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_array()) {
    std::string s;
    for (const auto& e : v) {
      if (!s.empty()) s += ',';
      s += json_to_arg(e);
    }
    return s;
  }
  if (v.is_number_float()) return format_double(v.get<double>());
  return v.dump();
}

/// Fills options of `sub` that were not given on the command line from the
/// JSON object in `path`. Keys are long option names; '_' and '-' are interchangeable.
void apply_config(CLI::App* sub, const std::string& path) {
  const json j = read_json(path);
  if (!j.is_object()) throw ParseError(path + ": config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (flag == "config") throw UsageError(path + ": a config file cannot name another config");
    CLI::Option* opt = nullptr;
    try {
      opt = sub->get_option("--" + flag);
    } catch (const CLI::OptionNotFound&) {
      throw UsageError(path + ": unknown key '" + key + "' for `" + sub->get_name() + "`");
    }
    if (opt->count() > 0) continue;
    opt->add_result(json_to_arg(value));
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError(path + ": bad value for '" + key + "': " + e.what());
    }
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Student-t loss laboratory: synthetic weak-label benchmark, training, evaluation and checks",
               "tloss"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tloss 0.1.0");

  GenArgs gen;
  TrainArgs tr;
  EvalArgs ev;
  AblateArgs ab;
  FieldArgs fe;
  GradArgs gc;
  std::string config;

  CLI::App* s_gen = app.add_subcommand("gen", "generate a synthetic dataset");
  s_gen->add_option("--out", gen.out, "output directory");
  s_gen->add_option("--seed", gen.seed)->capture_default_str();
  s_gen->add_option("--n", gen.n, "number of samples")->capture_default_str();
  s_gen->add_option("--dims", gen.dims, "n or d,h,w")->capture_default_str();
  s_gen->add_option("--spacing", gen.spacing, "s or x,y,z")->capture_default_str();
  s_gen->add_option("--lobes", gen.lobes)->capture_default_str();
  s_gen->add_option("--flip-rate", gen.flip_rate, "boundary flip probability")->capture_default_str();
  s_gen->add_option("--blobs", gen.blobs, "spurious balls per weak label")->capture_default_str();
  s_gen->add_option("--blob-radius", gen.blob_radius)->capture_default_str();
  s_gen->add_option("--morph-min", gen.morph_min)->capture_default_str();
  s_gen->add_option("--morph-max", gen.morph_max)->capture_default_str();
  s_gen->add_option("--drop-prob", gen.drop_prob)->capture_default_str();
  s_gen->add_option("--noise-sd", gen.noise_sd)->capture_default_str();

  CLI::App* s_train = app.add_subcommand("train", "train the predictor with one loss");
  add_train_options(s_train, tr);
  s_train->add_option("--loss", tr.loss, "ce | bce | focal | mse | mae | tdist")->capture_default_str();

  CLI::App* s_eval = app.add_subcommand("eval", "evaluate saved parameters against ground truth");
  s_eval->add_option("--data", ev.data);
  s_eval->add_option("--params", ev.params, "parameter file written by `train`");
  s_eval->add_option("--out", ev.out, "CSV path (default: stdout)");
  s_eval->add_option("--part", ev.part, "train | val | test | all")->capture_default_str();
  s_eval->add_option("--split", ev.split);
  s_eval->add_option("--spacing", ev.spacing, "override voxel spacing for distances");
  s_eval->add_option("--tau", ev.tau)->capture_default_str();

  CLI::App* s_ab = app.add_subcommand("ablate", "train every loss on one split and compare");
  add_train_options(s_ab, ab.train);
  s_ab->add_option("--losses", ab.losses, "comma list (default: all six)");

  CLI::App* s_fe = app.add_subcommand("fieldest", "direct field estimation under label contamination");
  s_fe->add_option("--out", fe.out);
  s_fe->add_option("--seed", fe.seed)->capture_default_str();
  s_fe->add_option("--seeds", fe.seeds)->capture_default_str();
  s_fe->add_option("--contamination", fe.contamination, "fraction of pure-noise labels")->capture_default_str();
  s_fe->add_option("--labels", fe.labels, "label volumes per seed")->capture_default_str();
  s_fe->add_option("--steps", fe.steps)->capture_default_str();
  s_fe->add_option("--lr", fe.lr)->capture_default_str();
  s_fe->add_option("--dims", fe.dims)->capture_default_str();
  s_fe->add_option("--label-flip-rate", fe.label_flip_rate)->capture_default_str();
  s_fe->add_option("--mode", fe.mode)->capture_default_str();
  s_fe->add_option("--losses", fe.losses);

  CLI::App* s_gc = app.add_subcommand("gradcheck", "finite-difference checks of every gradient");
  s_gc->add_option("--out", gc.out);
  s_gc->add_option("--trials", gc.trials, "random instances per component")->capture_default_str();
  s_gc->add_option("--seed", gc.seed)->capture_default_str();
  s_gc->add_option("--inject-fault", gc.inject_fault)->group("");

  for (CLI::App* sub : {s_gen, s_train, s_eval, s_ab, s_fe, s_gc}) {
    sub->add_option("--config", config, "JSON file of option values (command line wins)");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!config.empty()) apply_config(sub, config);
    if (sub == s_gen) return cmd_gen(gen, out);
    if (sub == s_train) return cmd_train(tr, out);
    if (sub == s_eval) return cmd_eval(ev, out, err);
    if (sub == s_ab) return cmd_ablate(ab, out);
    if (sub == s_fe) return cmd_fieldest(fe, out);
    return cmd_gradcheck(gc, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}

}  // namespace tloss::cli
