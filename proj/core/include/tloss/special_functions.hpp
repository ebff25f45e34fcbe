#pragma once

namespace tloss {

/// ln Gamma(x) for x > 0. Relative error <= 1e-12 on [1e-8, 1e7], including
/// near the zeros at x = 1 and x = 2.
double log_gamma(double x);

/// psi(x) = d/dx ln Gamma(x) for x > 0; absolute error <= 1e-10 on [1e-6, 1e7].
double digamma(double x);

/// ln(1 + e^x) without overflow.
double softplus(double x);

/// Inverse of softplus: ln(e^y - 1) for y > 0.
double softplus_inv(double y);

/// d softplus / dx, i.e. the logistic sigmoid.
double sigmoid(double x);

}  // namespace tloss
