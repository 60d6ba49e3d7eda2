#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cloze/mlm_backend.hpp"
#include "cloze/tokenizer.hpp"
#include "json.hpp"

namespace cloze {

struct CalibrationState;

enum class VerbalizerKind { base, manual, knowledgeable };

const char* kind_name(VerbalizerKind kind) noexcept;
VerbalizerKind parse_kind(std::string_view name);

// Unresolved label words as written in a verbalizer file.
struct RawWord {
  std::string surface;
  double weight = 1.0;
};

struct RawClass {
  std::string id;
  std::vector<RawWord> words;
};

struct RawVerbalizer {
  VerbalizerKind kind = VerbalizerKind::base;
  std::vector<RawClass> classes;

  // {kind, classes: [{id, words: [{surface, weight} | "surface"]}]}
  static RawVerbalizer from_json(const nlohmann::json& j);
  static RawVerbalizer load(const std::filesystem::path& path);
};

struct LabelWord {
  std::string surface;
  TokenId token_id = 0;
  double weight = 1.0;
};

struct VerbalizerClass {
  std::string id;
  std::vector<LabelWord> words;
};

class Verbalizer {
 public:
  Verbalizer(VerbalizerKind kind, std::vector<VerbalizerClass> classes);

  VerbalizerKind kind() const noexcept { return kind_; }
  const std::vector<VerbalizerClass>& classes() const noexcept { return classes_; }
  std::size_t class_count() const noexcept { return classes_.size(); }
  std::optional<std::size_t> class_index(std::string_view id) const;
  std::vector<std::string> class_ids() const;

  // Token ids of every label word, class by class.
  std::vector<TokenId> all_token_ids() const;

  nlohmann::json to_json() const;

 private:
  VerbalizerKind kind_;
  std::vector<VerbalizerClass> classes_;
};

// Per-class log-scores aligned with Verbalizer::classes().
struct ClassScores {
  std::vector<double> values;

  // Highest score; the lowest class index wins ties.
  std::size_t argmax() const;
  // softmax(values), for reporting.
  std::vector<double> normalized() const;
};

struct ResolveWarning {
  std::string class_id;
  std::string surface;
  std::string reason;
};

// Keeps surfaces that tokenize to a single in-vocabulary piece; the rest are
// dropped and reported. Throws EmptyClassAfterResolution when a class loses
// every word (or its remaining weights sum to zero).
Verbalizer resolve(const RawVerbalizer& raw, const Tokenizer& tokenizer,
                   std::vector<ResolveWarning>* warnings = nullptr);

// Class score = weighted mean of label-word log-probabilities, with the
// calibration applied per word (contextual) or per class (batch).
ClassScores score(const Verbalizer& v, const MaskDistribution& d,
                  const CalibrationState* calib = nullptr);

// Copy of v without the given surfaces in class_id. Throws WordNotFound or
// EmptyClassAfterResolution.
Verbalizer ablate(const Verbalizer& v, std::string_view class_id,
                  const std::vector<std::string>& surfaces);

}  // namespace cloze
