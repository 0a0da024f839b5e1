#pragma once

// Reference computations that do not share code paths with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include <factorsde/matrixcalc.hpp>

namespace factorsde::testing {

/// D_p built from its definition: column (i,j), i >= j, has ones at vec
/// positions (i,j) and (j,i).
inline Matrix reference_duplication(Index p) {
  Matrix d = Matrix::Zero(p * p, sym_size(p));
  Index col = 0;
  for (Index j = 0; j < p; ++j) {
    for (Index i = j; i < p; ++i) {
      d(j * p + i, col) = 1.0;
      d(i * p + j, col) = 1.0;
      ++col;
    }
  }
  return d;
}

inline Matrix reference_kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

/// 2 D^+ (S kron S) D^+' with D^+ = (D'D)^{-1} D'.
inline Matrix reference_weight(const Matrix& sigma) {
  const Matrix d = reference_duplication(sigma.rows());
  const Matrix dplus = (d.transpose() * d).inverse() * d.transpose();
  return 2.0 * dplus * reference_kron(sigma, sigma) * dplus.transpose();
}

/// Scaling and squaring with a 30-term Taylor series.
inline Matrix reference_expm(const Matrix& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::ldexp(1.0, squarings) > 0.25) ++squarings;
  const Matrix scaled = a / std::ldexp(1.0, squarings);
  Matrix term = Matrix::Identity(a.rows(), a.cols());
  Matrix sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * scaled / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

/// Composite Simpson rule for a matrix-valued integrand on [0, h].
inline Matrix simpson(const std::function<Matrix(double)>& f, double h, int intervals = 2000) {
  const double dx = h / intervals;
  Matrix acc = f(0.0) + f(h);
  for (int i = 1; i < intervals; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(i * dx);
  return acc * dx / 3.0;
}

/// Richardson-extrapolated central difference.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double rel = 1e-3) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double h = rel * (1.0 + std::abs(x(i)));
    auto central = [&](double step) {
      Vector a = x, b = x;
      a(i) += step;
      b(i) -= step;
      return (f(a) - f(b)) / (2.0 * step);
    };
    g(i) = (4.0 * central(h / 2.0) - central(h)) / 3.0;
  }
  return g;
}

inline Matrix random_spd(Index p, std::mt19937_64& rng, double ridge = 0.5) {
  std::normal_distribution<double> z;
  Matrix g(p, p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) g(i, j) = z(rng);
  }
  return g * g.transpose() / static_cast<double>(p) + ridge * Matrix::Identity(p, p);
}

inline Matrix random_symmetric(Index p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  Matrix m(p, p);
  for (Index j = 0; j < p; ++j) {
    for (Index i = j; i < p; ++i) {
      m(i, j) = u(rng);
      m(j, i) = m(i, j);
    }
  }
  return m;
}

/// Kolmogorov-Smirnov distance of a sample from N(0, 1).
inline double ks_distance_normal(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const boost::math::normal_distribution<double> n01;
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double c = boost::math::cdf(n01, x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - c, c - static_cast<double>(i) / n});
  }
  return d;
}

/// Asymptotic KS critical value sqrt(-log(alpha / 2) / 2) / sqrt(n).
inline double ks_critical(double alpha, std::size_t n) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

/// Least-squares slope of sample quantiles on reference quantiles.
inline double qq_slope(std::vector<double> sample, const std::function<double(double)>& quantile) {
  std::sort(sample.begin(), sample.end());
  const auto n = sample.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> ref(n);
  for (std::size_t i = 0; i < n; ++i) {
    ref[i] = quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
    mx += ref[i];
    my += sample[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (ref[i] - mx) * (sample[i] - my);
    sxx += (ref[i] - mx) * (ref[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace factorsde::testing
