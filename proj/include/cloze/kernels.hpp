#pragma once

// Vocabulary-wide reductions over log-probability rows.
//
// Every kernel has a scalar reference in kernels::scalar and, where the
// target supports it, an intrinsics variant (kernels::avx2 on x86-64,
// kernels::neon on aarch64). The free functions in kernels:: dispatch to
// the best variant detected at first use; CLOZE_FORCE_SCALAR=1 in the
// environment pins the scalar path.

#include <cstddef>
#include <span>

namespace cloze::kernels {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  double (*max_value)(const double* x, std::size_t n);
  // sum_i exp(x[i] - shift); shift is normally max(x) so every argument is <= 0.
  double (*sum_exp_shifted)(const double* x, std::size_t n, double shift);
  void (*add_scalar)(double* x, std::size_t n, double c);
  std::size_t (*count_greater)(const double* x, std::size_t n, double v);
  std::size_t (*count_equal)(const double* x, std::size_t n, double v);
  bool (*all_finite)(const double* x, std::size_t n);
};

namespace scalar {
const KernelTable& table() noexcept;
}
#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
const KernelTable& table() noexcept;
}
#endif
#if defined(__aarch64__)
namespace neon {
const KernelTable& table() noexcept;
}
#endif

const char* isa_name(Isa isa) noexcept;

// True when the variant is compiled in and the running CPU supports it.
bool isa_available(Isa isa) noexcept;

// Table for a specific variant; throws InvalidArgument when unavailable.
const KernelTable& table_for(Isa isa);

Isa active_isa() noexcept;
const KernelTable& active() noexcept;

double max_value(std::span<const double> x);

// log(sum exp(x)); -inf for an empty span or an all -inf span.
double log_sum_exp(std::span<const double> x);

// x <- x - log_sum_exp(x).
void log_softmax_inplace(std::span<double> x);

void add_constant(std::span<double> x, double c);

bool all_finite(std::span<const double> x);

// Number of entries ordered before x[index] in a descending ranking where
// ties are broken by lower index first. rank 0 is the argmax.
std::size_t rank_of(std::span<const double> x, std::size_t index);

}  // namespace cloze::kernels
