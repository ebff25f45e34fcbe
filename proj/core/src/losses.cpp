#include "tloss/losses.hpp"

#include <algorithm>
#include <cmath>

namespace tloss {

void LossKind::validate() const {
  if (type == Type::kFocal) {
    if (!(focal_alpha > 0.0 && focal_alpha < 1.0)) throw UsageError("focal alpha must be in (0,1)");
    if (!(focal_gamma >= 0.0)) throw UsageError("focal gamma must be >= 0");
  }
}

std::string_view name(const LossKind& kind) {
  switch (kind.type) {
    case LossKind::Type::kMse: return "mse";
    case LossKind::Type::kMae: return "mae";
    case LossKind::Type::kBce: return "bce";
    case LossKind::Type::kCe: return "ce";
    case LossKind::Type::kFocal: return "focal";
    case LossKind::Type::kTDist: return "tdist";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view n, TLossMode mode) {
  if (n == "mse") return LossKind::mse();
  if (n == "mae") return LossKind::mae();
  if (n == "bce") return LossKind::bce();
  if (n == "ce") return LossKind::ce();
  if (n == "focal" || n == "fl") return LossKind::focal();
  if (n == "tdist" || n == "td") return LossKind::tdist(mode);
  throw UsageError("unknown loss '" + std::string(n) + "' (expected one of " + loss_kind_names() + ")");
}

std::vector<LossKind> all_loss_kinds(TLossMode mode) {
  return {LossKind::ce(),  LossKind::bce(), LossKind::focal(),
          LossKind::mse(), LossKind::mae(), LossKind::tdist(mode)};
}

std::string loss_kind_names() { return "ce, bce, focal, mse, mae, tdist"; }

namespace {

// Per-voxel value and derivative; the caller averages.
struct Term {
  double value;
  double deriv;
};

Term mse_term(double k, double mu) {
  const double d = k - mu;
  return {d * d, -2.0 * d};
}

Term mae_term(double k, double mu) {
  const double d = k - mu;
  // Subgradient 0 at the kink.
  return {std::abs(d), d > 0.0 ? -1.0 : (d < 0.0 ? 1.0 : 0.0)};
}

// Derivatives are those of the clamped composite, so they vanish where the
// clamp is active.
Term bce_term(double k, double mu) {
  const double m = std::clamp(mu, kLogClamp, 1.0 - kLogClamp);
  const bool active = mu > kLogClamp && mu < 1.0 - kLogClamp;
  const double value = -(k * std::log(m) + (1.0 - k) * std::log1p(-m));
  const double deriv = active ? -(k / m) + (1.0 - k) / (1.0 - m) : 0.0;
  return {value, deriv};
}

// Two-channel cross entropy over p = (1 - mu, mu) with one-hot target
// t = (1 - k, k): -sum_c t_c ln p_c. Numerically the same as BCE.
Term ce_term(double k, double mu) {
  const double m = std::clamp(mu, kLogClamp, 1.0 - kLogClamp);
  const bool active = mu > kLogClamp && mu < 1.0 - kLogClamp;
  const double p[2] = {1.0 - m, m};
  const double t[2] = {1.0 - k, k};
  const double dp[2] = {-1.0, 1.0};  // d p_c / d mu
  double value = 0.0;
  double deriv = 0.0;
  for (int c = 0; c < 2; ++c) {
    if (t[c] == 0.0) continue;
    value -= t[c] * std::log(p[c]);
    deriv -= t[c] * dp[c] / p[c];
  }
  return {value, active ? deriv : 0.0};
}

double pow_or_one(double base, double e) { return e == 0.0 ? 1.0 : std::pow(base, e); }

Term focal_term(double k, double mu, double alpha, double gamma) {
  const double m = std::clamp(mu, kLogClamp, 1.0 - kLogClamp);
  const bool active = mu > kLogClamp && mu < 1.0 - kLogClamp;
  double value = 0.0;
  double deriv = 0.0;
  if (k > 0.5) {
    const double w = pow_or_one(1.0 - m, gamma);
    value = -alpha * w * std::log(m);
    // d/dm [-(1-m)^g ln m] = g (1-m)^(g-1) ln m - (1-m)^g / m
    const double dw = gamma == 0.0 ? 0.0 : gamma * pow_or_one(1.0 - m, gamma - 1.0);
    deriv = alpha * (dw * std::log(m) - w / m);
  } else {
    const double w = pow_or_one(m, gamma);
    value = -(1.0 - alpha) * w * std::log1p(-m);
    // d/dm [-m^g ln(1-m)] = -g m^(g-1) ln(1-m) + m^g / (1-m)
    const double dw = gamma == 0.0 ? 0.0 : gamma * pow_or_one(m, gamma - 1.0);
    deriv = (1.0 - alpha) * (-dw * std::log1p(-m) + w / (1.0 - m));
  }
  return {value, active ? deriv : 0.0};
}

template <typename F>
LossValueGrad mean_of_terms(const BinaryMask& k, const ProbabilityMask& mu, F&& term) {
  const std::size_t n = k.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossValueGrad out;
  out.d_mu.resize(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Term t = term(static_cast<double>(k[i]), mu[i]);
    sum += t.value;
    out.d_mu[i] = t.deriv * inv_n;
  }
  out.loss = sum * inv_n;
  return out;
}

}  // namespace

LossValueGrad loss_value_grad(const LossKind& kind, const BinaryMask& k, const ProbabilityMask& mu,
                              const StudentTParams* tparams) {
  require_same_dims(k, mu, "loss_value_grad");
  kind.validate();
  switch (kind.type) {
    case LossKind::Type::kMse: return mean_of_terms(k, mu, mse_term);
    case LossKind::Type::kMae: return mean_of_terms(k, mu, mae_term);
    case LossKind::Type::kBce: return mean_of_terms(k, mu, bce_term);
    case LossKind::Type::kCe: return mean_of_terms(k, mu, ce_term);
    case LossKind::Type::kFocal:
      return mean_of_terms(k, mu, [&](double kk, double m) {
        return focal_term(kk, m, kind.focal_alpha, kind.focal_gamma);
      });
    case LossKind::Type::kTDist: {
      const StudentTParams fallback = StudentTParams::identity_init(ScaleScope::kShared, k.dims());
      TLossResult r = t_loss_grad(k, mu, tparams ? *tparams : fallback, kind.mode);
      return {r.loss, std::move(r.grad.d_mu)};
    }
  }
  throw UsageError("loss_value_grad: unknown loss kind");
}

}  // namespace tloss
