// aarch64 variant; Advanced SIMD is mandatory on this target.

#include <arm_neon.h>

#include <cmath>
#include <limits>

#include "cloze/kernels.hpp"

namespace cloze::kernels::neon {
namespace {

// Same Cephes reduction as the AVX2 variant, two lanes at a time.
inline float64x2_t exp_pd(float64x2_t x) {
  const float64x2_t lo = vdupq_n_f64(-708.39641853226410622);
  const float64x2_t hi = vdupq_n_f64(709.78271289338399678);
  const uint64x2_t underflow = vcltq_f64(x, lo);
  x = vminq_f64(vmaxq_f64(x, lo), hi);

  const float64x2_t n = vrndnq_f64(vmulq_n_f64(x, 1.4426950408889634073599));
  x = vfmsq_f64(x, n, vdupq_n_f64(6.93145751953125E-1));
  x = vfmsq_f64(x, n, vdupq_n_f64(1.42860682030941723212E-6));

  const float64x2_t xx = vmulq_f64(x, x);
  float64x2_t p = vdupq_n_f64(1.26177193074810590878E-4);
  p = vfmaq_f64(vdupq_n_f64(3.02994407707441961300E-2), p, xx);
  p = vfmaq_f64(vdupq_n_f64(9.99999999999999999910E-1), p, xx);
  p = vmulq_f64(p, x);
  float64x2_t q = vdupq_n_f64(3.00198505138664455042E-6);
  q = vfmaq_f64(vdupq_n_f64(2.52448340349684104192E-3), q, xx);
  q = vfmaq_f64(vdupq_n_f64(2.27265548208155028766E-1), q, xx);
  q = vfmaq_f64(vdupq_n_f64(2.00000000000000000009E0), q, xx);
  float64x2_t r = vdivq_f64(p, vsubq_f64(q, p));
  r = vfmaq_f64(vdupq_n_f64(1.0), r, vdupq_n_f64(2.0));

  const int64x2_t ni = vcvtq_s64_f64(n);
  const int64x2_t half = vshrq_n_s64(ni, 1);
  const int64x2_t rest = vsubq_s64(ni, half);
  const int64x2_t bias = vdupq_n_s64(1023);
  const float64x2_t s1 = vreinterpretq_f64_s64(vshlq_n_s64(vaddq_s64(half, bias), 52));
  const float64x2_t s2 = vreinterpretq_f64_s64(vshlq_n_s64(vaddq_s64(rest, bias), 52));
  r = vmulq_f64(vmulq_f64(r, s1), s2);
  return vreinterpretq_f64_u64(vbicq_u64(vreinterpretq_u64_f64(r), underflow));
}

double max_value(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  if (n >= 2) {
    float64x2_t acc = vdupq_n_f64(m);
    for (; i + 2 <= n; i += 2) acc = vmaxq_f64(acc, vld1q_f64(x + i));
    m = vmaxvq_f64(acc);
  }
  for (; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

double sum_exp_shifted(const double* x, std::size_t n, double shift) {
  const float64x2_t vs = vdupq_n_f64(shift);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, exp_pd(vsubq_f64(vld1q_f64(x + i), vs)));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += std::exp(x[i] - shift);
  return s;
}

void add_scalar(double* x, std::size_t n, double c) {
  const float64x2_t vc = vdupq_n_f64(c);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vaddq_f64(vld1q_f64(x + i), vc));
  for (; i < n; ++i) x[i] += c;
}

std::size_t count_greater(const double* x, std::size_t n, double v) {
  const float64x2_t vv = vdupq_n_f64(v);
  uint64x2_t acc = vdupq_n_u64(0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vsubq_u64(acc, vcgtq_f64(vld1q_f64(x + i), vv));
  std::size_t c = static_cast<std::size_t>(vaddvq_u64(acc));
  for (; i < n; ++i) c += x[i] > v ? 1 : 0;
  return c;
}

std::size_t count_equal(const double* x, std::size_t n, double v) {
  const float64x2_t vv = vdupq_n_f64(v);
  uint64x2_t acc = vdupq_n_u64(0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vsubq_u64(acc, vceqq_f64(vld1q_f64(x + i), vv));
  std::size_t c = static_cast<std::size_t>(vaddvq_u64(acc));
  for (; i < n; ++i) c += x[i] == v ? 1 : 0;
  return c;
}

bool all_finite(const double* x, std::size_t n) {
  uint64x2_t ok = vdupq_n_u64(~0ULL);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t v = vld1q_f64(x + i);
    ok = vandq_u64(ok, vceqq_f64(vsubq_f64(v, v), vdupq_n_f64(0.0)));
  }
  if ((vgetq_lane_u64(ok, 0) & vgetq_lane_u64(ok, 1)) != ~0ULL) return false;
  for (; i < n; ++i) {
    if (!std::isfinite(x[i])) return false;
  }
  return true;
}

}  // namespace

const KernelTable& table() noexcept {
  static constexpr KernelTable kTable{max_value,     sum_exp_shifted, add_scalar,
                                      count_greater, count_equal,     all_finite};
  return kTable;
}

}  // namespace cloze::kernels::neon
