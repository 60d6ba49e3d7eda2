#include <cmath>
#include <limits>

#include "cloze/kernels.hpp"

namespace cloze::kernels::scalar {
namespace {

double max_value(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

double sum_exp_shifted(const double* x, std::size_t n, double shift) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i] - shift);
  return s;
}

void add_scalar(double* x, std::size_t n, double c) {
  for (std::size_t i = 0; i < n; ++i) x[i] += c;
}

std::size_t count_greater(const double* x, std::size_t n, double v) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) c += x[i] > v ? 1 : 0;
  return c;
}

std::size_t count_equal(const double* x, std::size_t n, double v) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) c += x[i] == v ? 1 : 0;
  return c;
}

bool all_finite(const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
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

}  // namespace cloze::kernels::scalar
