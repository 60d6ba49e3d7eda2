#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cloze/mlm_backend.hpp"
#include "cloze/tokenizer.hpp"
#include "json.hpp"

namespace cloze {

enum class TemplateTask { document, entity };

const char* task_name(TemplateTask task) noexcept;
TemplateTask parse_task(std::string_view name);

// A cloze pattern with {text}, exactly one {mask}, and {entity} for entity typing.
class PromptTemplate {
 public:
  // Throws TemplateMalformed when the placeholders do not fit the task.
  PromptTemplate(std::string name, std::string pattern, TemplateTask task);

  static PromptTemplate from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  const std::string& name() const noexcept { return name_; }
  const std::string& pattern() const noexcept { return pattern_; }
  TemplateTask task() const noexcept { return task_; }

  enum class Slot { literal, text, entity, mask };
  struct Segment {
    Slot slot;
    std::string literal;
  };
  const std::vector<Segment>& segments() const noexcept { return segments_; }

 private:
  std::string name_;
  std::string pattern_;
  TemplateTask task_;
  std::vector<Segment> segments_;
};

// "{text}. Questo documento parla di {mask}."
PromptTemplate document_template();
// "{text}. In questa frase, {entity} è un esempio di {mask}."
PromptTemplate entity_template();

struct PromptInstance {
  TokenSequence seq;
  std::size_t mask_index = 0;
  std::string source_id;
  bool text_truncated = false;
};

// Tokenizes every segment separately and concatenates, wrapping with the
// bundle's bos/eos tokens. When the result would exceed max_len only the
// {text} tokens are cut (tail first), so the scaffold and mask always survive.
// Empty text is allowed (content-free calibration input).
PromptInstance render(const PromptTemplate& tpl, const Tokenizer& tokenizer, std::string_view text,
                      std::optional<std::string_view> entity, std::string source_id = {});

}  // namespace cloze
