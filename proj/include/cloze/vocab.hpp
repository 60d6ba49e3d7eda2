#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cloze {

using TokenId = std::int32_t;

enum class MarkerStyle {
  continuation,  // WordPiece: "##" on every piece after the first
  word_start,    // SentencePiece/BPE: marker on the first piece of a word
};

struct VocabInfo {
  std::size_t size = 0;
  TokenId mask_id = -1;
  TokenId pad_id = -1;
  TokenId unk_id = -1;
  std::optional<TokenId> bos_id;  // [CLS] / <s>
  std::optional<TokenId> eos_id;  // [SEP] / </s>
  std::string subtoken_marker = "##";
  MarkerStyle marker_style = MarkerStyle::continuation;
  bool lowercase = false;
  std::size_t max_len = 512;

  // Throws BundleInvalid when ids are out of range or collide, or size < 4.
  void validate() const;

  bool is_special(TokenId id) const noexcept;

  // Number of special tokens wrapped around every model input.
  std::size_t scaffold_specials() const noexcept {
    return (bos_id ? 1u : 0u) + (eos_id ? 1u : 0u);
  }
};

// Immutable id <-> surface table backed by vocab.txt (line number = id).
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> tokens, VocabInfo info);

  static Vocabulary load(const std::filesystem::path& vocab_txt, VocabInfo info);

  const VocabInfo& info() const noexcept { return info_; }
  std::size_t size() const noexcept { return tokens_.size(); }

  std::optional<TokenId> find(std::string_view surface) const;
  const std::string& surface(TokenId id) const;

  // Surface with the subword marker removed (word_start style) or the
  // continuation marker removed (continuation style).
  std::string word_form(TokenId id) const;

  // True for continuation pieces that cannot start a word.
  bool is_continuation(TokenId id) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  VocabInfo info_;
};

// Reads meta.json into VocabInfo; size is filled by the caller from vocab.txt.
VocabInfo read_meta(const std::filesystem::path& meta_json);

}  // namespace cloze
