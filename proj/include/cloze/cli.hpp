#pragma once

#include <ostream>

namespace cloze::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit status: 0 success, 1 fatal configuration or I/O error, 2 finished with
// per-record failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cloze::cli
