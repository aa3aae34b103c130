#pragma once

namespace fcu {

double digamma(double x);
double trigamma(double x);

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), evaluated without cancellation.
double regularized_gamma_q(double a, double x);

/// Survival function of the chi-square law with `dof` degrees of freedom.
inline double chi_square_sf(double x, double dof) { return x <= 0.0 ? 1.0 : regularized_gamma_q(0.5 * dof, 0.5 * x); }

} // namespace fcu
