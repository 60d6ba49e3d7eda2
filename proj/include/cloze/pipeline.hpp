#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cloze/calibration.hpp"
#include "cloze/dataset.hpp"
#include "cloze/mlm_backend.hpp"
#include "cloze/prompt_template.hpp"
#include "cloze/verbalizer.hpp"

namespace cloze {

struct Prediction {
  std::string id;
  ClassScores scores;
  std::size_t predicted_index = 0;
  std::string predicted;
  CalibrationMode calibration_mode = CalibrationMode::identity;
};

struct RecordError {
  std::size_t index = 0;  // position in the input
  std::string id;
  std::string code;
  std::string message;
};

struct ClassifyResult {
  std::vector<Prediction> predictions;  // input order, failed records omitted
  std::vector<RecordError> errors;
};

// One prediction per record; per-record failures are collected, never thrown.
ClassifyResult classify(const std::vector<LabeledExample>& dataset, const PromptTemplate& tpl,
                        const Verbalizer& v, const MaskedLanguageModel& model,
                        const Tokenizer& tokenizer,
                        const CalibrationState& calib = CalibrationState::identity());

// {"id","predicted","scores":{class:score}} per line, classes in verbalizer order.
std::string predictions_jsonl(const std::vector<Prediction>& preds, const Verbalizer& v);
std::string errors_jsonl(const std::vector<RecordError>& errors);

std::vector<std::pair<std::string, std::string>> prediction_pairs(const std::vector<Prediction>& preds);

struct FillMaskReport {
  std::vector<std::size_t> ks;
  std::vector<double> hit_rates;  // aligned with ks
  std::size_t evaluated = 0;
  std::vector<std::pair<std::string, std::size_t>> ranks;  // (id, 0-based rank of gold)
  std::vector<RecordError> skipped;
};

// The gold word replaces its first whole-word occurrence in the text, or a
// literal mask token in the text is used as the query. Gold words that are
// not a single vocabulary piece are skipped as MultiPieceGold.
FillMaskReport fillmask_topk(const std::vector<FillMaskExample>& dataset,
                             const MaskedLanguageModel& model, const Tokenizer& tokenizer,
                             const std::vector<std::size_t>& ks);

}  // namespace cloze
