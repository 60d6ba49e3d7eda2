#include "cloze/tokenizer.hpp"

#include <algorithm>
#include <cctype>

#include "cloze/error.hpp"

namespace cloze {
namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Byte length of a punctuation code point starting at s[i], or 0.
std::size_t punct_len(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) return std::ispunct(c) ? 1 : 0;
  auto at = [&](std::size_t k) { return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0; };
  // « »
  if (c == 0xC2 && (at(1) == 0xAB || at(1) == 0xBB)) return 2;
  // ‘ ’ “ ” – — …
  if (c == 0xE2 && at(1) == 0x80 &&
      (at(2) == 0x98 || at(2) == 0x99 || at(2) == 0x9C || at(2) == 0x9D || at(2) == 0x93 ||
       at(2) == 0x94 || at(2) == 0xA6)) {
    return 3;
  }
  return 0;
}

std::size_t utf8_len(unsigned char c) {
  if (c < 0x80) return 1;
  if ((c >> 5) == 0x6) return 2;
  if ((c >> 4) == 0xE) return 3;
  if ((c >> 3) == 0x1E) return 4;
  return 1;
}

bool is_char_boundary(std::string_view s, std::size_t i) {
  return i == 0 || i >= s.size() || (static_cast<unsigned char>(s[i]) & 0xC0) != 0x80;
}

}  // namespace

Tokenizer::Tokenizer(std::shared_ptr<const Vocabulary> vocab) : vocab_(std::move(vocab)) {
  const VocabInfo& info = vocab_->info();
  std::vector<TokenId> ids{info.mask_id, info.pad_id, info.unk_id};
  if (info.bos_id) ids.push_back(*info.bos_id);
  if (info.eos_id) ids.push_back(*info.eos_id);
  for (TokenId id : ids) {
    const std::string& s = vocab_->surface(id);
    if (!s.empty()) specials_.emplace_back(s, id);
  }
  // Longest surface first so "<mask>" is not shadowed by a shorter special.
  std::sort(specials_.begin(), specials_.end(),
            [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
}

std::string Tokenizer::normalize_case(std::string_view s) const {
  std::string out(s);
  if (!vocab_->info().lowercase) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto c = static_cast<unsigned char>(out[i]);
    if (c < 0x80) {
      out[i] = static_cast<char>(std::tolower(c));
    } else if (c == 0xC3 && i + 1 < out.size()) {
      // Latin-1 supplement capitals U+00C0..U+00DE (except U+00D7).
      const auto d = static_cast<unsigned char>(out[i + 1]);
      if (d >= 0x80 && d <= 0x9E && d != 0x97) out[i + 1] = static_cast<char>(d + 0x20);
      ++i;
    }
  }
  return out;
}

std::vector<PreToken> Tokenizer::pre_tokenize(std::string_view text) const {
  std::vector<PreToken> out;
  std::size_t i = 0;
  std::size_t word_begin = std::string_view::npos;
  auto flush = [&](std::size_t end) {
    if (word_begin != std::string_view::npos && end > word_begin) {
      out.push_back({text.substr(word_begin, end - word_begin), word_begin, end, std::nullopt});
    }
    word_begin = std::string_view::npos;
  };
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    bool matched_special = false;
    for (const auto& [surface, id] : specials_) {
      if (text.compare(i, surface.size(), surface) == 0) {
        flush(i);
        out.push_back({text.substr(i, surface.size()), i, i + surface.size(), id});
        i += surface.size();
        matched_special = true;
        break;
      }
    }
    if (matched_special) continue;
    if (is_space(c)) {
      flush(i);
      ++i;
      continue;
    }
    if (const std::size_t p = punct_len(text, i); p > 0) {
      flush(i);
      out.push_back({text.substr(i, p), i, i + p, std::nullopt});
      i += p;
      continue;
    }
    if (word_begin == std::string_view::npos) word_begin = i;
    i += std::min(utf8_len(c), text.size() - i);
  }
  flush(text.size());
  return out;
}

std::vector<TokenId> Tokenizer::encode_word(std::string_view raw) const {
  const VocabInfo& info = vocab_->info();
  const std::string word = normalize_case(raw);
  if (word.empty()) return {};
  if (word.size() > max_word_bytes_) return {info.unk_id};
  const std::string& marker = info.subtoken_marker;

  std::vector<TokenId> pieces;
  std::size_t start = 0;
  while (start < word.size()) {
    std::optional<TokenId> found;
    std::size_t end = word.size();
    for (; end > start; --end) {
      if (!is_char_boundary(word, end)) continue;
      const std::string_view sub(word.data() + start, end - start);
      if (info.marker_style == MarkerStyle::continuation) {
        found = start == 0 ? vocab_->find(sub) : vocab_->find(marker + std::string(sub));
      } else if (start == 0) {
        found = vocab_->find(marker + std::string(sub));
        // Bare pieces may start a word only when they are not word characters,
        // otherwise detokenization would glue them to the previous word.
        const auto lead = static_cast<unsigned char>(sub.front());
        if (!found && !(std::isalnum(lead) || lead >= 0x80)) found = vocab_->find(sub);
      } else {
        found = vocab_->find(sub);
      }
      if (found) break;
    }
    if (!found) return {info.unk_id};
    pieces.push_back(*found);
    start = end;
  }
  return pieces;
}

Tokenization Tokenizer::encode(std::string_view text) const {
  Tokenization out;
  for (const PreToken& pt : pre_tokenize(text)) {
    if (pt.special) {
      out.ids.push_back(*pt.special);
      out.offsets.emplace_back(pt.begin, pt.end);
      continue;
    }
    const std::vector<TokenId> pieces = encode_word(pt.text);
    if (pieces.size() == 1) {
      out.ids.push_back(pieces.front());
      out.offsets.emplace_back(pt.begin, pt.end);
      continue;
    }
    // Spread the word span over its pieces by piece byte length.
    std::size_t pos = pt.begin;
    for (TokenId id : pieces) {
      const std::size_t len = std::min(vocab_->word_form(id).size(), pt.end - pos);
      out.ids.push_back(id);
      out.offsets.emplace_back(pos, pos + len);
      pos += len;
    }
  }
  return out;
}

Tokenization Tokenizer::tokenize(std::string_view text, std::size_t max_len) const {
  if (max_len == 0) throw Error(ErrorCode::InvalidArgument, "max_len must be positive");
  Tokenization out = encode(text);
  if (out.ids.empty()) throw Error(ErrorCode::EmptyInput, "text has no tokens");
  if (out.ids.size() > max_len) {
    out.ids.resize(max_len);
    out.offsets.resize(max_len);
    out.truncated = true;
  }
  return out;
}

std::optional<TokenId> Tokenizer::single_piece_id(std::string_view word) const {
  const std::vector<PreToken> pts = pre_tokenize(word);
  if (pts.size() != 1 || pts.front().special) return std::nullopt;
  const std::vector<TokenId> pieces = encode_word(pts.front().text);
  if (pieces.size() != 1 || pieces.front() == vocab_->info().unk_id) return std::nullopt;
  return pieces.front();
}

std::string Tokenizer::detokenize(std::span<const TokenId> ids) const {
  const VocabInfo& info = vocab_->info();
  const std::string& marker = info.subtoken_marker;
  std::string out;
  for (TokenId id : ids) {
    const std::string& s = vocab_->surface(id);
    const bool marked =
        !marker.empty() && s.size() > marker.size() && s.compare(0, marker.size(), marker) == 0;
    if (info.is_special(id)) {
      if (!out.empty()) out.push_back(' ');
      out += s;
    } else if (info.marker_style == MarkerStyle::continuation) {
      if (marked) {
        out += s.substr(marker.size());
      } else {
        if (!out.empty()) out.push_back(' ');
        out += s;
      }
    } else {
      if (marked) {
        if (!out.empty()) out.push_back(' ');
        out += s.substr(marker.size());
      } else if (vocab_->is_continuation(id)) {
        out += s;
      } else {
        if (!out.empty()) out.push_back(' ');
        out += s;
      }
    }
  }
  return out;
}

}  // namespace cloze
