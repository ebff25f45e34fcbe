#include "tloss_cli/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tloss/mvol.hpp"

namespace tloss::cli {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  add_row(std::move(header));
}

void CsvWriter::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns_) {
    throw UsageError("CsvWriter: row has " + std::to_string(cells.size()) + " cells, expected " +
                     std::to_string(columns_));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) text_ += ',';
    text_ += csv_field(cells[i]);
  }
  text_ += '\n';
}

std::string CsvWriter::str() const { return text_; }

std::string cell(double v) { return format_double(v); }
std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string aligned_table(const std::vector<std::string>& header,
                          const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
  auto line = [&](const std::vector<std::string>& r) {
    std::string s;
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string& v = c < r.size() ? r[c] : std::string();
      if (c) s += "  ";
      if (c == 0) {
        s += v + std::string(width[c] - v.size(), ' ');
      } else {
        s += std::string(width[c] - v.size(), ' ') + v;
      }
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + '\n';
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + '\n';
  for (const auto& r : rows) out += line(r);
  return out;
}

std::string sample_dir_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%04zu", index);
  return buf;
}

json to_json(const DatasetSpec& spec) {
  const ShapeSpec& s = spec.shape;
  const CorruptionSpec& c = spec.corruption;
  const IntensitySpec& i = spec.intensity;
  return json{
      {"seed", spec.seed},
      {"n", spec.n},
      {"shape",
       {{"dims", {s.dims.d, s.dims.h, s.dims.w}},
        {"n_lobes", s.n_lobes},
        {"lobe_sigma_min", s.lobe_sigma_min},
        {"lobe_sigma_max", s.lobe_sigma_max},
        {"threshold", s.threshold}}},
      {"corruption",
       {{"boundary_flip_rate", c.boundary_flip_rate},
        {"outlier_blob_count", c.outlier_blob_count},
        {"outlier_blob_radius", c.outlier_blob_radius},
        {"morph_min", c.morph_min},
        {"morph_max", c.morph_max},
        {"drop_component_prob", c.drop_component_prob}}},
      {"intensity",
       {{"fg_mean", i.fg_mean},
        {"bg_mean", i.bg_mean},
        {"noise_sd", i.noise_sd},
        {"smooth_sigma", i.smooth_sigma}}},
  };
}

DatasetSpec dataset_spec_from_json(const json& j) {
  try {
    DatasetSpec spec;
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.n = j.at("n").get<int>();
    const json& s = j.at("shape");
    const auto dims = s.at("dims").get<std::vector<std::int64_t>>();
    if (dims.size() != 3) throw ParseError("manifest: shape.dims must have 3 entries");
    spec.shape.dims = {dims[0], dims[1], dims[2]};
    spec.shape.n_lobes = s.at("n_lobes").get<int>();
    spec.shape.lobe_sigma_min = s.at("lobe_sigma_min").get<double>();
    spec.shape.lobe_sigma_max = s.at("lobe_sigma_max").get<double>();
    spec.shape.threshold = s.at("threshold").get<double>();
    const json& c = j.at("corruption");
    spec.corruption.boundary_flip_rate = c.at("boundary_flip_rate").get<double>();
    spec.corruption.outlier_blob_count = c.at("outlier_blob_count").get<int>();
    spec.corruption.outlier_blob_radius = c.at("outlier_blob_radius").get<int>();
    spec.corruption.morph_min = c.at("morph_min").get<int>();
    spec.corruption.morph_max = c.at("morph_max").get<int>();
    spec.corruption.drop_component_prob = c.at("drop_component_prob").get<double>();
    const json& i = j.at("intensity");
    spec.intensity.fg_mean = i.at("fg_mean").get<double>();
    spec.intensity.bg_mean = i.at("bg_mean").get<double>();
    spec.intensity.noise_sd = i.at("noise_sd").get<double>();
    spec.intensity.smooth_sigma = i.at("smooth_sigma").get<double>();
    return spec;
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

namespace fs = std::filesystem;

void write_dataset(const fs::path& dir, const Dataset& data) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json names = json::array();
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const std::string name = sample_dir_name(i);
    const fs::path sd = dir / name;
    fs::create_directories(sd, ec);
    if (ec) throw IoError("cannot create " + sd.string() + ": " + ec.message());
    SyntheticSample s = data.samples[i];
    s.intensity.set_spacing(data.spacing);
    s.gt.set_spacing(data.spacing);
    s.weak.set_spacing(data.spacing);
    save_volume(sd / "intensity.mvol", s.intensity);
    save_volume(sd / "gt.mvol", s.gt);
    save_volume(sd / "weak.mvol", s.weak);
    names.push_back(name);
  }
  json manifest = to_json(data.spec);
  manifest["format"] = "tloss-dataset";
  manifest["version"] = kManifestVersion;
  manifest["spacing"] = {data.spacing.d, data.spacing.h, data.spacing.w};
  manifest["samples"] = names;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw IoError("no manifest.json in " + dir.string());
  const json m = read_json(mpath);
  Dataset data;
  try {
    if (m.at("format") != "tloss-dataset") throw ParseError("manifest: unknown format");
    if (m.at("version").get<int>() != kManifestVersion) throw ParseError("manifest: unsupported version");
    data.spec = dataset_spec_from_json(m);
    const auto sp = m.at("spacing").get<std::vector<double>>();
    if (sp.size() != 3) throw ParseError("manifest: spacing must have 3 entries");
    data.spacing = {sp[0], sp[1], sp[2]};
    for (const auto& name : m.at("samples")) {
      const fs::path sd = dir / name.get<std::string>();
      SyntheticSample s;
      s.intensity = load_field(sd / "intensity.mvol");
      s.gt = load_mask(sd / "gt.mvol");
      s.weak = load_mask(sd / "weak.mvol");
      require_same_dims(s.intensity, s.gt, sd.string().c_str());
      require_same_dims(s.intensity, s.weak, sd.string().c_str());
      data.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  if (data.samples.empty()) throw ParseError("manifest lists no samples");
  return data;
}

Split default_split(std::size_t n) {
  Split s;
  s.train = (2 * n + 1) / 3;
  s.val = (n - s.train) / 2;
  s.test = n - s.train - s.val;
  return s;
}

namespace {

std::vector<std::string> split_commas(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t e = text.find(',', pos);
    out.emplace_back(text.substr(pos, e == std::string_view::npos ? std::string_view::npos : e - pos));
    if (e == std::string_view::npos) break;
    pos = e + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s, const char* what) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw UsageError(std::string("invalid ") + what + " '" + s + "'");
  }
  return v;
}

}  // namespace

Split parse_split(std::string_view text, std::size_t n) {
  const auto parts = split_commas(text);
  if (parts.size() != 3) throw UsageError("--split expects train,val,test counts");
  Split s{parse_number<std::size_t>(parts[0], "split count"), parse_number<std::size_t>(parts[1], "split count"),
          parse_number<std::size_t>(parts[2], "split count")};
  if (s.train < 1 || s.val < 1) throw UsageError("--split needs at least one train and one validation sample");
  if (s.train + s.val + s.test > n) {
    throw UsageError("--split asks for " + std::to_string(s.train + s.val + s.test) +
                     " samples but the dataset has " + std::to_string(n));
  }
  return s;
}

Part parse_part(std::string_view name) {
  if (name == "train") return Part::kTrain;
  if (name == "val") return Part::kVal;
  if (name == "test") return Part::kTest;
  if (name == "all") return Part::kAll;
  throw UsageError("unknown part '" + std::string(name) + "' (expected train, val, test or all)");
}

std::vector<std::size_t> part_indices(const Split& split, Part part, std::size_t n) {
  std::size_t lo = 0;
  std::size_t hi = n;
  switch (part) {
    case Part::kTrain: hi = split.train; break;
    case Part::kVal: lo = split.train; hi = lo + split.val; break;
    case Part::kTest: lo = split.train + split.val; hi = lo + split.test; break;
    case Part::kAll: break;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = lo; i < hi && i < n; ++i) out.push_back(i);
  return out;
}

json to_json(const TrainConfig& cfg) {
  const StudentTParams init = StudentTParams::identity_init(ScaleScope::kShared, Dims{});
  return json{
      {"lr_theta", cfg.lr_theta},
      {"lr_r", cfg.lr_r},
      {"lr_sigma", cfg.lr_sigma},
      {"max_epochs", cfg.max_epochs},
      {"patience", cfg.patience},
      {"min_delta", cfg.min_delta},
      {"loss", std::string(name(cfg.loss))},
      {"mode", std::string(to_string(cfg.loss.mode))},
      {"tau", cfg.tau},
      {"augment", cfg.augment},
      {"seed", cfg.seed},
      {"scale_scope", cfg.scale_scope == ScaleScope::kShared ? "shared" : "pervoxel"},
      {"hidden", cfg.hidden},
      {"smooth_sigmas", cfg.features.smooth_sigmas},
      {"include_coords", cfg.features.include_coords},
      {"criterion", std::string(to_string(cfg.criterion))},
      {"r_init", init.r()},
      {"sigma2_init", init.sigma2(0)},
      {"safeguard", init.epsilon},
  };
}

json to_json(const TrainReport& report) {
  return json{
      {"config", to_json(report.config)},
      {"train_loss", report.train_loss},
      {"val_ltd", report.val_ltd},
      {"val_criterion", report.val_criterion},
      {"stopped_epoch", report.stopped_epoch},
      {"best_epoch", report.best_epoch},
      {"best_val", report.best_val},
      {"scale",
       {{"r", report.scale.r},
        {"sigma2_mean", report.scale.sigma2_mean},
        {"sigma2_min", report.scale.sigma2_min},
        {"sigma2_max", report.scale.sigma2_max}}},
  };
}

Dims parse_dims(std::string_view text) {
  const auto parts = split_commas(text);
  Dims d;
  if (parts.size() == 1) {
    const auto n = parse_number<std::int64_t>(parts[0], "dims");
    d = {n, n, n};
  } else if (parts.size() == 3) {
    d = {parse_number<std::int64_t>(parts[0], "dims"), parse_number<std::int64_t>(parts[1], "dims"),
         parse_number<std::int64_t>(parts[2], "dims")};
  } else {
    throw UsageError("--dims expects n or d,h,w");
  }
  try {
    validate_dims(d);
  } catch (const ShapeError& e) {
    throw UsageError(e.what());
  }
  return d;
}

Spacing parse_spacing(std::string_view text) {
  const auto parts = split_commas(text);
  Spacing s;
  if (parts.size() == 1) {
    const double v = parse_number<double>(parts[0], "spacing");
    s = {v, v, v};
  } else if (parts.size() == 3) {
    s = {parse_number<double>(parts[0], "spacing"), parse_number<double>(parts[1], "spacing"),
         parse_number<double>(parts[2], "spacing")};
  } else {
    throw UsageError("--spacing expects s or x,y,z");
  }
  for (int a = 0; a < 3; ++a) {
    if (!(s[a] > 0.0) || !std::isfinite(s[a])) throw UsageError("--spacing values must be > 0");
    // Stored as f32 in MVOL files.
    s[a] = static_cast<double>(static_cast<float>(s[a]));
  }
  return s;
}

}  // namespace tloss::cli
