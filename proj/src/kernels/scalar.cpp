#include <cmath>
#include <limits>

#include "brl/kernels/kernels.hpp"

namespace brl::kernels::scalar {

void match_scores(const std::int32_t* const* codes, int num_features, const std::int32_t* members,
                  std::size_t n, const std::int32_t* probe, const double* agree,
                  const double* disagree, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = 0.0;
  for (int f = 0; f < num_features; ++f) {
    const std::int32_t* col = codes[f];
    const std::int32_t v = probe[f];
    const double a = agree[f];
    const double d = disagree[f];
    for (std::size_t i = 0; i < n; ++i) out[i] += (col[members[i]] == v) ? a : d;
  }
}

double max_value(const double* w, std::size_t n) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) hi = w[i] > hi ? w[i] : hi;
  return hi;
}

double exp_shift_sum(double* w, std::size_t n, double shift) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(w[i] - shift);
    acc += w[i];
  }
  return acc;
}

}  // namespace brl::kernels::scalar
