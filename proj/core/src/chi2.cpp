#include "factorsde/chi2.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "factorsde/error.hpp"

namespace factorsde {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxTerms = 100000;

double log_prefactor(double a, double x) { return a * std::log(x) - x - std::lgamma(a); }

double lower_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxTerms; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(log_prefactor(a, x));
}

double upper_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(log_prefactor(a, x)) * h;
}

void check_gamma_args(double a, double x) {
  if (!(a > 0.0) || std::isnan(x) || x < 0.0) {
    throw Error(ErrorCode::invalid_argument, "incomplete gamma: need a > 0 and x >= 0");
  }
}

}  // namespace

double gamma_p(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? lower_series(a, x) : 1.0 - upper_fraction(a, x);
}

double gamma_q(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return x < a + 1.0 ? 1.0 - lower_series(a, x) : upper_fraction(a, x);
}

double chi2_sf(double df, double x) {
  if (!(df > 0.0)) throw Error(ErrorCode::invalid_argument, "chi2_sf: df must be positive");
  if (std::isnan(x)) throw Error(ErrorCode::invalid_argument, "chi2_sf: x is NaN");
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * x);
}

double chi2_cdf(double df, double x) {
  if (!(df > 0.0)) throw Error(ErrorCode::invalid_argument, "chi2_cdf: df must be positive");
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * df, 0.5 * x);
}

double chi2_quantile(double df, double alpha) {
  if (!(df > 0.0) || !(alpha > 0.0) || !(alpha < 1.0)) {
    throw Error(ErrorCode::invalid_argument,
                "chi2_quantile: need df > 0 and 0 < alpha < 1 (got df=" + std::to_string(df) +
                    ", alpha=" + std::to_string(alpha) + ")");
  }
  const double a = 0.5 * df;
  // Work with whichever tail is smaller so the residual keeps relative accuracy.
  const bool use_upper = alpha < 0.5;
  const double target = use_upper ? alpha : 1.0 - alpha;
  auto tail = [&](double x) { return use_upper ? chi2_sf(df, x) : chi2_cdf(df, x); };

  // Bracket the root, then safeguarded Newton on the tail probability.
  double lo = 0.0;
  double hi = std::max(1.0, df);
  while (chi2_sf(df, hi) > alpha) {
    lo = hi;
    hi *= 2.0;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = tail(x) - target;
    if ((use_upper ? f > 0.0 : f < 0.0)) {
      lo = x;
    } else {
      hi = x;
    }
    const double density = std::exp((a - 1.0) * std::log(0.5 * x) - 0.5 * x - std::lgamma(a)) * 0.5;
    double next = x - (use_upper ? -f : f) / density;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, std::abs(x)) || hi - lo <= 1e-15 * hi) {
      return next;
    }
    x = next;
  }
  return x;
}

}  // namespace factorsde
