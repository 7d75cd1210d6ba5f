#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace brl::kernels {

enum class Isa { Scalar, Avx2 };

/// Function table for one instruction set. All variants compute the same quantities; the
/// SIMD exponential differs from std::exp by at most a few ulp.
struct KernelTable {
  /// out[i] = sum_f (codes[f][members[i]] == probe[f] ? agree[f] : disagree[f])
  void (*match_scores)(const std::int32_t* const* codes, int num_features,
                       const std::int32_t* members, std::size_t n, const std::int32_t* probe,
                       const double* agree, const double* disagree, double* out);
  double (*max_value)(const double* w, std::size_t n);
  /// w[i] <- exp(w[i] - shift); returns the sum of the new values.
  double (*exp_shift_sum)(double* w, std::size_t n, double shift);
};

bool isa_available(Isa isa);
const KernelTable& table(Isa isa);

/// Table chosen at first use: BRL_ISA=scalar|avx2 if set, otherwise the best available.
const KernelTable& active();
Isa active_isa();
void set_active_isa(Isa isa);

std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);

namespace scalar {
void match_scores(const std::int32_t* const* codes, int num_features, const std::int32_t* members,
                  std::size_t n, const std::int32_t* probe, const double* agree,
                  const double* disagree, double* out);
double max_value(const double* w, std::size_t n);
double exp_shift_sum(double* w, std::size_t n, double shift);
}  // namespace scalar

namespace avx2 {
void match_scores(const std::int32_t* const* codes, int num_features, const std::int32_t* members,
                  std::size_t n, const std::int32_t* probe, const double* agree,
                  const double* disagree, double* out);
double max_value(const double* w, std::size_t n);
double exp_shift_sum(double* w, std::size_t n, double shift);
}  // namespace avx2

}  // namespace brl::kernels
