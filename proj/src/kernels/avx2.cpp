// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <cmath>
#include <limits>

#include "brl/kernels/kernels.hpp"

namespace brl::kernels::avx2 {

namespace {

// exp(x) for x in [-708, 709]; lanes below -708 return 0.
inline __m256d exp_pd(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  __m256d xc = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d k = _mm256_round_pd(_mm256_mul_pd(xc, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(k, _mm256_set1_pd(6.93147180369123816490e-01), xc);
  r = _mm256_fnmadd_pd(k, _mm256_set1_pd(1.90821492927058770002e-10), r);

  // Taylor series to degree 13; |r| <= ln(2)/2 keeps the remainder below 1e-17.
  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  // 2^k: place k + 1023 in the exponent field via the 1.5 * 2^52 rounding trick.
  const __m256d biased = _mm256_add_pd(k, _mm256_set1_pd(1023.0 + 6755399441055744.0));
  const __m256i bits = _mm256_slli_epi64(_mm256_castpd_si256(biased), 52);
  const __m256d scaled = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
  return _mm256_andnot_pd(underflow, scaled);
}

}  // namespace

void match_scores(const std::int32_t* const* codes, int num_features, const std::int32_t* members,
                  std::size_t n, const std::int32_t* probe, const double* agree,
                  const double* disagree, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m128i idx = _mm_loadu_si128(reinterpret_cast<const __m128i*>(members + i));
    __m256d acc = _mm256_setzero_pd();
    for (int f = 0; f < num_features; ++f) {
      const __m128i got = _mm_i32gather_epi32(codes[f], idx, 4);
      const __m128i eq = _mm_cmpeq_epi32(got, _mm_set1_epi32(probe[f]));
      const __m256d mask = _mm256_castsi256_pd(_mm256_cvtepi32_epi64(eq));
      const __m256d pick =
          _mm256_blendv_pd(_mm256_set1_pd(disagree[f]), _mm256_set1_pd(agree[f]), mask);
      acc = _mm256_add_pd(acc, pick);
    }
    _mm256_storeu_pd(out + i, acc);
  }
  for (; i < n; ++i) {
    double acc = 0.0;
    for (int f = 0; f < num_features; ++f) {
      acc += (codes[f][members[i]] == probe[f]) ? agree[f] : disagree[f];
    }
    out[i] = acc;
  }
}

double max_value(const double* w, std::size_t n) {
  const double neg_inf = -std::numeric_limits<double>::infinity();
  __m256d hi = _mm256_set1_pd(neg_inf);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) hi = _mm256_max_pd(hi, _mm256_loadu_pd(w + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, hi);
  double best = neg_inf;
  for (double v : lanes) best = v > best ? v : best;
  for (; i < n; ++i) best = w[i] > best ? w[i] : best;
  return best;
}

double exp_shift_sum(double* w, std::size_t n, double shift) {
  const __m256d s = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_loadu_pd(w + i), s));
    _mm256_storeu_pd(w + i, e);
    acc = _mm256_add_pd(acc, e);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) {
    w[i] = std::exp(w[i] - shift);
    total += w[i];
  }
  return total;
}

}  // namespace brl::kernels::avx2
