#include "brl/math.hpp"

#include <algorithm>

#include "brl/error.hpp"

namespace brl {

double log_sum_exp(std::span<const double> values) {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

double log_generalized_rising(double x, std::int64_t r, double step) {
  if (r <= 0) return 0.0;
  if (step > 0.0 && x > 0.0) {
    // x (x+s) ... = s^r Gamma(x/s + r) / Gamma(x/s)
    const double a = x / step;
    return static_cast<double>(r) * std::log(step) + std::lgamma(a + static_cast<double>(r)) -
           std::lgamma(a);
  }
  double acc = 0.0;
  for (std::int64_t i = 0; i < r; ++i) {
    const double f = x + static_cast<double>(i) * step;
    if (f == 0.0) return kNegInf;
    if (f < 0.0) throw Error("log_generalized_rising: negative factor");
    acc += std::log(f);
  }
  return acc;
}

namespace {

int gamma_sign(double x) {
  if (x > 0.0) return 1;
  // Gamma alternates sign on (-1,0), (-2,-1), ...
  const auto k = static_cast<std::int64_t>(std::ceil(-x));
  return (k % 2 == 0) ? 1 : -1;
}

}  // namespace

SignedLog log_pochhammer(double x, double n) {
  const double top = x + n;
  if ((x <= 0.0 && x == std::floor(x)) || (top <= 0.0 && top == std::floor(top))) {
    throw Error("log_pochhammer: argument at a pole of Gamma");
  }
  return {std::lgamma(top) - std::lgamma(x), gamma_sign(top) * gamma_sign(x)};
}

double log_falling_factorial(std::int64_t n, std::int64_t k) {
  if (k < 0) throw Error("log_falling_factorial: negative k");
  if (k > n) return kNegInf;
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(n - k) + 1.0);
}

double log_binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return kNegInf;
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

}  // namespace brl
