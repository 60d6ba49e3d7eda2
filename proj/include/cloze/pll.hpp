#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cloze/mlm_backend.hpp"
#include "cloze/tokenizer.hpp"

namespace cloze {

struct PLLResult {
  double raw = 0.0;         // sum of true-token log-probs
  double normalized = 0.0;  // raw / token_count
  std::size_t token_count = 0;
};

// Masks each content token in turn (specials are scaffold, never masked or
// counted). Throws EmptyInput, or SequenceTooLong when the sentence plus
// specials exceeds max_len; sentences are never truncated.
PLLResult pll_sentence(std::string_view text, const MaskedLanguageModel& model,
                       const Tokenizer& tokenizer);

struct PLLFailure {
  std::size_t index = 0;
  std::string reason;
};

struct PLLCorpusReport {
  std::vector<std::optional<PLLResult>> sentences;  // aligned with input
  std::vector<PLLFailure> failures;
  std::size_t scored = 0;
  double mean = 0.0;  // of normalized PLL, one weight per sentence
  double std = 0.0;   // population
};

// Throws AllSentencesFailed when no sentence can be scored.
PLLCorpusReport pll_corpus(const std::vector<std::string>& texts, const MaskedLanguageModel& model,
                           const Tokenizer& tokenizer);

}  // namespace cloze
