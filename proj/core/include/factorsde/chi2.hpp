#pragma once

namespace factorsde {

/// Regularised lower incomplete gamma P(a, x) and its complement Q(a, x),
/// by series for x < a + 1 and a modified-Lentz continued fraction otherwise.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Upper tail P(chi2_df > x). chi2_sf(df, x) = 1 for x <= 0.
double chi2_sf(double df, double x);
double chi2_cdf(double df, double x);

/// Upper alpha point: the x with chi2_sf(df, x) = alpha.
/// Requires df > 0 and 0 < alpha < 1; throws ErrorCode::invalid_argument otherwise.
double chi2_quantile(double df, double alpha);

}  // namespace factorsde
