#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "cloze/mlm_backend.hpp"
#include "cloze/vocab.hpp"

namespace cloze {

// Context features a toy rule can test at the queried mask position. All
// present fields must hold (conjunction); an empty condition always matches.
struct ToyCondition {
  std::optional<TokenId> prev;
  std::optional<TokenId> next;
  std::optional<std::size_t> position;
  std::vector<TokenId> contains_all;
  std::vector<TokenId> contains_any;
  std::vector<TokenId> not_contains;

  bool matches(const TokenSequence& seq, std::size_t mask_pos) const;
};

struct ToyRule {
  ToyCondition when;
  std::vector<double> logprobs;
};

// Listed tokens get their probability; the remaining mass is spread evenly
// over the unlisted tokens. Throws InvalidArgument when an unlisted token
// would get zero mass or a probability is outside (0, 1].
std::vector<double> distribution_from_probs(std::size_t vocab_size,
                                            const std::vector<std::pair<TokenId, double>>& probs);

// log-softmax over a logit row where unlisted tokens take default_logit.
std::vector<double> distribution_from_logits(std::size_t vocab_size,
                                             const std::vector<std::pair<TokenId, double>>& logits,
                                             double default_logit);

// Declarative rule table: the first matching rule supplies the distribution,
// otherwise the default does. Distributions are precomputed at load, so
// queries are pure lookups.
//
// toy.json:
//   { "default": DIST, "rules": [ { "when": COND, DIST... }, ... ] }
//   DIST := {"uniform": true} | {"probs": {tok: p}} |
//           {"logits": {tok: x}, "default_logit": x0}
//   COND := {"prev": tok, "next": tok, "position": n, "contains": [tok],
//            "contains_any": [tok], "not_contains": [tok]}
// tok is a vocabulary surface string or an integer id.
class ToyBackend final : public MaskedLanguageModel {
 public:
  ToyBackend(std::shared_ptr<const Vocabulary> vocab, std::vector<ToyRule> rules,
             std::vector<double> default_logprobs);

  static std::unique_ptr<ToyBackend> from_json_text(std::string_view json,
                                                    std::shared_ptr<const Vocabulary> vocab);
  static std::unique_ptr<ToyBackend> load(const std::filesystem::path& toy_json,
                                          std::shared_ptr<const Vocabulary> vocab);

  const VocabInfo& vocab_info() const noexcept override { return vocab_->info(); }
  std::size_t rule_count() const noexcept { return rules_.size(); }

 protected:
  MaskDistribution predict_validated(const TokenSequence& seq, std::size_t position) const override;

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<ToyRule> rules_;
  std::vector<double> default_;
};

}  // namespace cloze
