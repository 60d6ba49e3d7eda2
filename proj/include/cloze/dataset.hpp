#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cloze/prompt_template.hpp"
#include "json.hpp"

namespace cloze {

struct LabeledExample {
  std::string id;
  std::string text;
  std::optional<std::string> entity;
  std::optional<std::string> gold;
};

struct FillMaskExample {
  std::string id;
  std::string text;
  std::string masked_word;
};

struct RejectedRecord {
  std::size_t line = 0;  // 1-based record index
  std::string id;
  std::string reason;
};

// Document records {"id","text","label"?}; entity records add "entity".
// Records that do not match the task schema, or carry more than one label,
// are rejected into `rejected` (or throw SchemaMismatch when it is null).
std::vector<LabeledExample> parse_examples(const std::vector<nlohmann::json>& records,
                                           TemplateTask task,
                                           std::vector<RejectedRecord>* rejected = nullptr);
std::vector<LabeledExample> load_examples(const std::filesystem::path& jsonl, TemplateTask task,
                                          std::vector<RejectedRecord>* rejected = nullptr);

std::vector<FillMaskExample> load_fillmask(const std::filesystem::path& jsonl);

}  // namespace cloze
