#include "tloss/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tloss/byte_io.hpp"
#include "tloss/mvol.hpp"

namespace tloss {

void FeatureConfig::validate() const {
  for (double s : smooth_sigmas) {
    if (!(s > 0.0) || !std::isfinite(s)) throw UsageError("FeatureConfig: smoothing sigmas must be > 0");
  }
}

namespace {

void write_zscored(std::span<const double> values, std::size_t channel, FeatureField& out,
                   const char* what) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    throw DomainError(std::string("extract_features: ") + what + " has zero variance");
  }
  for (std::size_t v = 0; v < values.size(); ++v) {
    out.data[v * out.channels + channel] = (values[v] - mean) / sd;
  }
}

double unit_coord(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0.0;
  return 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0;
}

}  // namespace

FeatureField extract_features(const Volume3D& v, const FeatureConfig& cfg) {
  cfg.validate();
  FeatureField f;
  f.dims = v.dims();
  f.channels = cfg.channels();
  f.data.assign(f.voxels() * f.channels, 0.0);

  write_zscored(v.values(), 0, f, "intensity");
  for (std::size_t s = 0; s < cfg.smooth_sigmas.size(); ++s) {
    const Volume3D smoothed = gaussian_smooth(v, cfg.smooth_sigmas[s]);
    write_zscored(smoothed.values(), 1 + s, f, "smoothed intensity");
  }
  if (cfg.include_coords) {
    const std::size_t c0 = cfg.intensity_channels();
    const Dims& n = v.dims();
    std::size_t idx = 0;
    for (std::int64_t i = 0; i < n.d; ++i) {
      for (std::int64_t j = 0; j < n.h; ++j) {
        for (std::int64_t k = 0; k < n.w; ++k, ++idx) {
          double* row = f.data.data() + idx * f.channels + c0;
          row[0] = unit_coord(i, n.d);
          row[1] = unit_coord(j, n.h);
          row[2] = unit_coord(k, n.w);
        }
      }
    }
  }
  return f;
}

PredictorParams PredictorParams::zeros(std::size_t in, std::size_t hidden) {
  PredictorParams p;
  p.in = in;
  p.hidden = hidden;
  p.w1.assign(in * hidden, 0.0);
  p.b1.assign(hidden, 0.0);
  p.w2.assign(hidden, 0.0);
  return p;
}

std::vector<double> PredictorParams::flatten() const {
  std::vector<double> out;
  out.reserve(size());
  out.insert(out.end(), w1.begin(), w1.end());
  out.insert(out.end(), b1.begin(), b1.end());
  out.insert(out.end(), w2.begin(), w2.end());
  out.push_back(b2);
  return out;
}

void PredictorParams::unflatten(std::span<const double> flat) {
  if (flat.size() != size()) {
    throw ShapeError("PredictorParams::unflatten: expected " + std::to_string(size()) +
                     " values, got " + std::to_string(flat.size()));
  }
  auto it = flat.begin();
  std::copy_n(it, w1.size(), w1.begin());
  it += static_cast<std::ptrdiff_t>(w1.size());
  std::copy_n(it, b1.size(), b1.begin());
  it += static_cast<std::ptrdiff_t>(b1.size());
  std::copy_n(it, w2.size(), w2.begin());
  it += static_cast<std::ptrdiff_t>(w2.size());
  b2 = *it;
}

void PredictorParams::validate() const {
  if (in == 0 || hidden == 0) throw ShapeError("PredictorParams: in and hidden must be >= 1");
  if (w1.size() != in * hidden || b1.size() != hidden || w2.size() != hidden) {
    throw ShapeError("PredictorParams: vector lengths do not match in=" + std::to_string(in) +
                     ", hidden=" + std::to_string(hidden));
  }
  for (double v : flatten()) {
    if (!std::isfinite(v)) throw DomainError("PredictorParams: non-finite weight");
  }
}

PredictorParams init_params(Rng& rng, std::size_t in, std::size_t hidden) {
  PredictorParams p = PredictorParams::zeros(in, hidden);
  p.validate();
  const double a1 = std::sqrt(6.0 / static_cast<double>(in + hidden));
  for (double& w : p.w1) w = rng.uniform(-a1, a1);
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  for (double& w : p.w2) w = rng.uniform(-a2, a2);
  return p;
}

PredictorParams init_params(Rng& rng, const FeatureConfig& cfg, std::size_t hidden) {
  cfg.validate();
  return init_params(rng, cfg.channels(), hidden);
}

namespace {

void check_shapes(const PredictorParams& p, const FeatureField& f, const char* what) {
  if (p.in != f.channels) {
    throw ShapeError(std::string(what) + ": params expect " + std::to_string(p.in) +
                     " features, field has " + std::to_string(f.channels));
  }
  if (f.data.size() != f.voxels() * f.channels) {
    throw ShapeError(std::string(what) + ": feature storage does not match dims");
  }
}

// Faster than std::tanh; absolute error is a few 1e-16.
double fast_tanh(double a) {
  const double e = std::exp(-2.0 * std::abs(a));
  return std::copysign((1.0 - e) / (1.0 + e), a);
}

double sigmoid_clamped(double z) {
  z = std::clamp(z, -kLogitClamp, kLogitClamp);
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

ProbabilityMask forward(const PredictorParams& p, const FeatureField& f, ForwardCache* cache) {
  check_shapes(p, f, "forward");
  const std::size_t nv = f.voxels();
  const std::size_t H = p.hidden;
  const std::size_t C = p.in;
  std::vector<double> mu(nv);
  std::vector<double> act(H);
  if (cache) {
    cache->act.resize(nv * H);
    cache->logit.resize(nv);
  }
  for (std::size_t v = 0; v < nv; ++v) {
    const double* x = f.data.data() + v * C;
    double z = p.b2;
    for (std::size_t h = 0; h < H; ++h) {
      const double* row = p.w1.data() + h * C;
      double a = p.b1[h];
      for (std::size_t c = 0; c < C; ++c) a += row[c] * x[c];
      const double t = fast_tanh(a);
      act[h] = t;
      z += p.w2[h] * t;
    }
    mu[v] = sigmoid_clamped(z);
    if (cache) {
      std::copy(act.begin(), act.end(), cache->act.begin() + static_cast<std::ptrdiff_t>(v * H));
      cache->logit[v] = z;
    }
  }
  if (cache) cache->mu = mu;
  return ProbabilityMask(f.dims, std::move(mu));
}

PredictorParams backward(const PredictorParams& p, const FeatureField& f,
                         std::span<const double> d_mu, const ForwardCache* cache) {
  check_shapes(p, f, "backward");
  const std::size_t nv = f.voxels();
  if (d_mu.size() != nv) {
    throw ShapeError("backward: d_mu has " + std::to_string(d_mu.size()) + " entries, expected " +
                     std::to_string(nv));
  }
  ForwardCache local;
  if (cache == nullptr || cache->act.size() != nv * p.hidden || cache->mu.size() != nv ||
      cache->logit.size() != nv) {
    forward(p, f, &local);
    cache = &local;
  }
  const std::size_t H = p.hidden;
  const std::size_t C = p.in;
  PredictorParams g = PredictorParams::zeros(C, H);
  for (std::size_t v = 0; v < nv; ++v) {
    if (d_mu[v] == 0.0) continue;
    const double m = cache->mu[v];
    // The clamp is flat outside its range.
    const bool clamped = std::abs(cache->logit[v]) > kLogitClamp;
    const double dz = clamped ? 0.0 : d_mu[v] * m * (1.0 - m);
    if (dz == 0.0) continue;
    g.b2 += dz;
    const double* t = cache->act.data() + v * H;
    const double* x = f.data.data() + v * C;
    for (std::size_t h = 0; h < H; ++h) {
      g.w2[h] += dz * t[h];
      const double da = dz * p.w2[h] * (1.0 - t[h] * t[h]);
      g.b1[h] += da;
      double* grow = g.w1.data() + h * C;
      for (std::size_t c = 0; c < C; ++c) grow[c] += da * x[c];
    }
  }
  return g;
}

namespace {
constexpr char kMprmMagic[4] = {'M', 'P', 'R', 'M'};
}

std::vector<std::uint8_t> encode_params(const PredictorParams& p) {
  p.validate();
  detail::ByteWriter w;
  w.reserve(16 + 8 * p.size());
  for (char c : kMprmMagic) w.put(static_cast<std::uint8_t>(c));
  w.put<std::uint32_t>(kMprmVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.in));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.hidden));
  for (double v : p.flatten()) w.put<double>(v);
  return std::move(w).take();
}

PredictorParams decode_params(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "MPRM");
  const auto magic = r.get_bytes(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMprmMagic,
                  [](std::uint8_t a, char b) { return a == static_cast<std::uint8_t>(b); })) {
    throw ParseError("MPRM: bad magic");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kMprmVersion) throw ParseError("MPRM: unsupported version " + std::to_string(version));
  const auto in = r.get<std::uint32_t>("in");
  const auto hidden = r.get<std::uint32_t>("hidden");
  if (in == 0 || hidden == 0 || in > 4096 || hidden > 4096) {
    throw ParseError("MPRM: implausible layer sizes in=" + std::to_string(in) +
                     ", hidden=" + std::to_string(hidden));
  }
  PredictorParams p = PredictorParams::zeros(in, hidden);
  std::vector<double> flat(p.size());
  for (double& v : flat) v = r.get<double>("weights");
  if (r.remaining() != 0) {
    throw ParseError("MPRM: " + std::to_string(r.remaining()) + " trailing bytes");
  }
  p.unflatten(flat);
  try {
    p.validate();
  } catch (const Error& e) {
    throw ParseError(std::string("MPRM: ") + e.what());
  }
  return p;
}

void save_params(const std::filesystem::path& path, const PredictorParams& p) {
  write_file(path, encode_params(p));
}

PredictorParams load_params(const std::filesystem::path& path) {
  return decode_params(read_file(path));
}

}  // namespace tloss
