#include "cloze/vocab.hpp"

#include <cctype>
#include <fstream>
#include <set>

#include "cloze/error.hpp"
#include "json.hpp"

namespace cloze {

void VocabInfo::validate() const {
  if (size < 4) {
    throw Error(ErrorCode::BundleInvalid, "vocabulary must hold at least 4 tokens, got " +
                                              std::to_string(size));
  }
  std::set<TokenId> seen;
  auto check = [&](const char* name, TokenId id) {
    if (id < 0 || static_cast<std::size_t>(id) >= size) {
      throw Error(ErrorCode::BundleInvalid,
                  std::string(name) + " " + std::to_string(id) + " outside vocabulary");
    }
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::BundleInvalid,
                  std::string(name) + " " + std::to_string(id) + " collides with another special id");
    }
  };
  check("mask_id", mask_id);
  check("pad_id", pad_id);
  check("unk_id", unk_id);
  if (bos_id) check("bos_id", *bos_id);
  if (eos_id) check("eos_id", *eos_id);
  if (max_len < 1 + scaffold_specials()) {
    throw Error(ErrorCode::BundleInvalid, "max_len too small for the special tokens");
  }
}

bool VocabInfo::is_special(TokenId id) const noexcept {
  return id == mask_id || id == pad_id || id == unk_id || (bos_id && id == *bos_id) ||
         (eos_id && id == *eos_id);
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, VocabInfo info)
    : tokens_(std::move(tokens)), info_(std::move(info)) {
  info_.size = tokens_.size();
  info_.validate();
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    // First occurrence wins for duplicated lines.
    index_.emplace(tokens_[i], static_cast<TokenId>(i));
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& vocab_txt, VocabInfo info) {
  std::ifstream in(vocab_txt, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, vocab_txt.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens), std::move(info));
}

std::optional<TokenId> Vocabulary::find(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::surface(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "token id " + std::to_string(id) +
                                                  " outside vocabulary of " +
                                                  std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::word_form(TokenId id) const {
  const std::string& s = surface(id);
  const std::string& m = info_.subtoken_marker;
  if (!m.empty() && s.size() > m.size() && s.compare(0, m.size(), m) == 0) {
    return s.substr(m.size());
  }
  return s;
}

bool Vocabulary::is_continuation(TokenId id) const {
  if (info_.is_special(id)) return false;
  const std::string& s = surface(id);
  const std::string& m = info_.subtoken_marker;
  const bool marked = !m.empty() && s.size() > m.size() && s.compare(0, m.size(), m) == 0;
  if (info_.marker_style == MarkerStyle::continuation) return marked;
  if (marked || s.empty()) return false;
  const auto c = static_cast<unsigned char>(s.front());
  return std::isalnum(c) || c >= 0x80;
}

VocabInfo read_meta(const std::filesystem::path& meta_json) {
  std::ifstream in(meta_json);
  if (!in) throw Error(ErrorCode::FileNotFound, meta_json.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BundleInvalid, meta_json.string() + ": " + e.what());
  }
  VocabInfo info;
  try {
    info.mask_id = j.at("mask_id").get<TokenId>();
    info.pad_id = j.at("pad_id").get<TokenId>();
    info.unk_id = j.at("unk_id").get<TokenId>();
    if (j.contains("bos_id") && !j["bos_id"].is_null()) info.bos_id = j["bos_id"].get<TokenId>();
    if (j.contains("eos_id") && !j["eos_id"].is_null()) info.eos_id = j["eos_id"].get<TokenId>();
    info.max_len = j.value("max_len", std::size_t{512});
    info.subtoken_marker = j.value("subtoken_marker", std::string("##"));
    const std::string style = j.value("marker_style", std::string("continuation"));
    if (style == "continuation") {
      info.marker_style = MarkerStyle::continuation;
    } else if (style == "word_start") {
      info.marker_style = MarkerStyle::word_start;
    } else {
      throw Error(ErrorCode::BundleInvalid, "unknown marker_style '" + style + "'");
    }
    info.lowercase = j.value("lowercase", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BundleInvalid, meta_json.string() + ": " + e.what());
  }
  return info;
}

}  // namespace cloze
