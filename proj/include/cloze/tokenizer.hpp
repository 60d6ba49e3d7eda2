#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cloze/vocab.hpp"

namespace cloze {

struct Tokenization {
  std::vector<TokenId> ids;
  std::vector<std::pair<std::size_t, std::size_t>> offsets;  // byte spans in the input
  bool truncated = false;
};

// A whitespace/punctuation-delimited word of the input, before subword
// segmentation. Special-token surfaces ("[MASK]", "<mask>", ...) are kept whole.
struct PreToken {
  std::string_view text;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::optional<TokenId> special;
};

// Whitespace + punctuation pre-tokenization, then greedy longest-match
// subword segmentation against the bundle vocabulary. A word that cannot be
// fully segmented becomes a single unk token.
class Tokenizer {
 public:
  explicit Tokenizer(std::shared_ptr<const Vocabulary> vocab);

  const Vocabulary& vocab() const noexcept { return *vocab_; }

  // Throws EmptyInput when the text holds no tokens. Keeps the head.
  Tokenization tokenize(std::string_view text, std::size_t max_len) const;

  // No truncation; empty input yields an empty tokenization.
  Tokenization encode(std::string_view text) const;

  std::vector<PreToken> pre_tokenize(std::string_view text) const;

  std::vector<TokenId> encode_word(std::string_view word) const;

  // Id of the word when it maps to exactly one non-unk piece.
  std::optional<TokenId> single_piece_id(std::string_view word) const;
  bool is_single_piece(std::string_view word) const { return single_piece_id(word).has_value(); }

  std::string detokenize(std::span<const TokenId> ids) const;

  // Applies the vocabulary casing policy to a surface form.
  std::string normalize_case(std::string_view s) const;

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<std::pair<std::string, TokenId>> specials_;
  std::size_t max_word_bytes_ = 200;
};

}  // namespace cloze
