#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cloze/dataset.hpp"
#include "cloze/mlm_backend.hpp"
#include "cloze/prompt_template.hpp"
#include "cloze/verbalizer.hpp"
#include "json.hpp"

namespace cloze {

enum class CalibrationMode { identity, contextual, batch };

const char* mode_name(CalibrationMode mode) noexcept;
CalibrationMode parse_mode(std::string_view name);

// Contextual: per-label-word log p(w | content-free prompt), subtracted from
// each word's log-prob before aggregation (division by p_cf in prob space).
// Batch: per-class mean raw log-score over an unlabeled batch, subtracted
// from each class score after aggregation.
struct CalibrationState {
  CalibrationMode mode = CalibrationMode::identity;
  std::vector<std::pair<TokenId, double>> cc_logprobs;  // sorted by token id
  std::vector<std::string> class_ids;                   // batch: aligned with bc_means
  std::vector<double> bc_means;

  static CalibrationState identity() { return {}; }

  // Throws ModeMismatch when the vectors required by `mode` are missing or
  // not finite.
  void validate() const;

  // Content-free log-prob of a label word; ModeMismatch when absent.
  double cc_logprob(TokenId id) const;

  nlohmann::json to_json() const;
  static CalibrationState from_json(const nlohmann::json& j);
};

// Word-level raw log-probs per class, aligned with v.classes().
std::vector<std::vector<double>> word_logprobs(const Verbalizer& v, const MaskDistribution& d);

// Contextual or identity correction on word-level scores, then aggregation,
// then the batch correction when the state is batch mode.
ClassScores apply(const CalibrationState& state, const Verbalizer& v,
                  const std::vector<std::vector<double>>& word_scores);

// Class-level correction; identity returns raw unchanged, batch subtracts
// bc_means. Contextual state needs word scores: throws ModeMismatch.
ClassScores apply(const CalibrationState& state, const ClassScores& raw);

CalibrationState fit_contextual(const PromptTemplate& tpl, const Verbalizer& v,
                                const MaskedLanguageModel& model, const Tokenizer& tokenizer,
                                const std::string& content_free = "");

// Throws EmptyBatch on an empty batch.
CalibrationState fit_batch(const PromptTemplate& tpl, const Verbalizer& v,
                           const MaskedLanguageModel& model, const Tokenizer& tokenizer,
                           const std::vector<LabeledExample>& unlabeled);

// Batch state from already computed raw class scores.
CalibrationState fit_batch_from_scores(const Verbalizer& v, const std::vector<ClassScores>& raw);

}  // namespace cloze
