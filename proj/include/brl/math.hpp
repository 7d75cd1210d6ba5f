#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace brl {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_sum_exp(std::span<const double> values);
double log_add_exp(double a, double b);

/// log of x (x+s) (x+2s) ... (x+(r-1)s). Empty product is 1. Returns -inf when a
/// factor is zero; throws when a factor is negative.
double log_generalized_rising(double x, std::int64_t r, double step);

/// log of Gamma(x+n)/Gamma(x) together with its sign, for x not a non-positive integer.
struct SignedLog {
  double log_abs;
  int sign;
};
SignedLog log_pochhammer(double x, double n);

/// log of n (n-1) ... (n-k+1); -inf when k > n.
double log_falling_factorial(std::int64_t n, std::int64_t k);
double log_binomial(std::int64_t n, std::int64_t k);

inline double logit(double p) { return std::log(p) - std::log1p(-p); }
inline double logistic(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace brl
