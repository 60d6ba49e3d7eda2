#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>

#include "cloze/error.hpp"
#include "cloze/kernels.hpp"

namespace cloze::kernels {
namespace {

bool force_scalar() noexcept {
  const char* v = std::getenv("CLOZE_FORCE_SCALAR");
  return v != nullptr && std::strcmp(v, "") != 0 && std::strcmp(v, "0") != 0;
}

Isa detect() noexcept {
  if (force_scalar()) return Isa::scalar;
  if (isa_available(Isa::avx2)) return Isa::avx2;
  if (isa_available(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

}  // namespace

const char* isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table_for(Isa isa) {
  if (!isa_available(isa)) {
    throw Error(ErrorCode::InvalidArgument,
                std::string("kernel variant not available on this CPU: ") + isa_name(isa));
  }
  switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::avx2: return avx2::table();
#endif
#if defined(__aarch64__)
    case Isa::neon: return neon::table();
#endif
    default: return scalar::table();
  }
}

Isa active_isa() noexcept {
  static const Isa isa = detect();
  return isa;
}

const KernelTable& active() noexcept {
  static const KernelTable& t = table_for(active_isa());
  return t;
}

double max_value(std::span<const double> x) { return active().max_value(x.data(), x.size()); }

double log_sum_exp(std::span<const double> x) {
  const KernelTable& k = active();
  const double m = k.max_value(x.data(), x.size());
  if (!std::isfinite(m)) return m;
  return m + std::log(k.sum_exp_shifted(x.data(), x.size(), m));
}

void log_softmax_inplace(std::span<double> x) {
  if (x.empty()) return;
  active().add_scalar(x.data(), x.size(), -log_sum_exp(x));
}

void add_constant(std::span<double> x, double c) { active().add_scalar(x.data(), x.size(), c); }

bool all_finite(std::span<const double> x) { return active().all_finite(x.data(), x.size()); }

std::size_t rank_of(std::span<const double> x, std::size_t index) {
  if (index >= x.size()) {
    throw Error(ErrorCode::DimensionMismatch, "rank_of index " + std::to_string(index) +
                                                  " outside row of " + std::to_string(x.size()));
  }
  const KernelTable& k = active();
  const double v = x[index];
  return k.count_greater(x.data(), x.size(), v) + k.count_equal(x.data(), index, v);
}

}  // namespace cloze::kernels
