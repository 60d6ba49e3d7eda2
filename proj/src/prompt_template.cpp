#include "cloze/prompt_template.hpp"

#include <algorithm>

#include "cloze/error.hpp"

namespace cloze {

const char* task_name(TemplateTask task) noexcept {
  return task == TemplateTask::document ? "document" : "entity";
}

TemplateTask parse_task(std::string_view name) {
  if (name == "document") return TemplateTask::document;
  if (name == "entity" || name == "entity-typing") return TemplateTask::entity;
  throw Error(ErrorCode::TemplateMalformed, "unknown template task '" + std::string(name) + "'");
}

PromptTemplate::PromptTemplate(std::string name, std::string pattern, TemplateTask task)
    : name_(std::move(name)), pattern_(std::move(pattern)), task_(task) {
  int text = 0, entity = 0, mask = 0;
  std::string literal;
  for (std::size_t i = 0; i < pattern_.size();) {
    if (pattern_[i] != '{') {
      literal.push_back(pattern_[i++]);
      continue;
    }
    const std::size_t close = pattern_.find('}', i);
    if (close == std::string::npos) {
      throw Error(ErrorCode::TemplateMalformed, "unterminated placeholder in '" + pattern_ + "'");
    }
    const std::string key = pattern_.substr(i + 1, close - i - 1);
    Slot slot;
    if (key == "text") {
      slot = Slot::text;
      ++text;
    } else if (key == "entity") {
      slot = Slot::entity;
      ++entity;
    } else if (key == "mask") {
      slot = Slot::mask;
      ++mask;
    } else {
      throw Error(ErrorCode::TemplateMalformed, "unknown placeholder {" + key + "}");
    }
    if (!literal.empty()) segments_.push_back({Slot::literal, std::move(literal)});
    literal.clear();
    segments_.push_back({slot, {}});
    i = close + 1;
  }
  if (!literal.empty()) segments_.push_back({Slot::literal, std::move(literal)});

  if (mask != 1) throw Error(ErrorCode::TemplateMalformed, "template needs exactly one {mask}");
  if (text != 1) throw Error(ErrorCode::TemplateMalformed, "template needs exactly one {text}");
  if (task_ == TemplateTask::entity && entity != 1) {
    throw Error(ErrorCode::TemplateMalformed, "entity template needs exactly one {entity}");
  }
  if (task_ == TemplateTask::document && entity != 0) {
    throw Error(ErrorCode::TemplateMalformed, "document template must not use {entity}");
  }
}

PromptTemplate PromptTemplate::from_json(const nlohmann::json& j) {
  try {
    return PromptTemplate(j.at("name").get<std::string>(), j.at("pattern").get<std::string>(),
                          parse_task(j.at("task").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::TemplateMalformed, e.what());
  }
}

nlohmann::json PromptTemplate::to_json() const {
  return {{"name", name_}, {"pattern", pattern_}, {"task", task_name(task_)}};
}

PromptTemplate document_template() {
  return PromptTemplate("document", "{text}. Questo documento parla di {mask}.", TemplateTask::document);
}

PromptTemplate entity_template() {
  return PromptTemplate("entity", "{text}. In questa frase, {entity} è un esempio di {mask}.",
                        TemplateTask::entity);
}

PromptInstance render(const PromptTemplate& tpl, const Tokenizer& tokenizer, std::string_view text,
                      std::optional<std::string_view> entity, std::string source_id) {
  const VocabInfo& info = tokenizer.vocab().info();
  if (tpl.task() == TemplateTask::entity && !entity) {
    throw Error(ErrorCode::MissingEntity, "template '" + tpl.name() + "' needs an entity");
  }
  if (tpl.task() == TemplateTask::document && entity) {
    throw Error(ErrorCode::InvalidArgument, "template '" + tpl.name() + "' takes no entity");
  }

  std::vector<std::vector<TokenId>> parts;
  std::size_t text_part = 0;
  std::size_t fixed = info.scaffold_specials();
  for (const auto& seg : tpl.segments()) {
    std::vector<TokenId> ids;
    switch (seg.slot) {
      case PromptTemplate::Slot::literal: ids = tokenizer.encode(seg.literal).ids; break;
      case PromptTemplate::Slot::entity: ids = tokenizer.encode(*entity).ids; break;
      case PromptTemplate::Slot::mask: ids = {info.mask_id}; break;
      case PromptTemplate::Slot::text:
        ids = tokenizer.encode(text).ids;
        text_part = parts.size();
        break;
    }
    // A literal [MASK] inside text or entity would add a second mask.
    if (seg.slot != PromptTemplate::Slot::mask) std::replace(ids.begin(), ids.end(), info.mask_id, info.unk_id);
    if (seg.slot != PromptTemplate::Slot::text) fixed += ids.size();
    parts.push_back(std::move(ids));
  }
  if (fixed > info.max_len) {
    throw Error(ErrorCode::PromptTooLong, "template scaffold needs " + std::to_string(fixed) +
                                              " tokens, max_len is " + std::to_string(info.max_len));
  }
  PromptInstance out;
  out.source_id = std::move(source_id);
  std::vector<TokenId>& text_ids = parts[text_part];
  const std::size_t budget = info.max_len - fixed;
  if (text_ids.size() > budget) {
    text_ids.resize(budget);
    out.text_truncated = true;
  }

  std::vector<TokenId>& ids = out.seq.ids;
  ids.reserve(fixed + text_ids.size());
  if (info.bos_id) ids.push_back(*info.bos_id);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    if (tpl.segments()[p].slot == PromptTemplate::Slot::mask) out.mask_index = ids.size();
    ids.insert(ids.end(), parts[p].begin(), parts[p].end());
  }
  if (info.eos_id) ids.push_back(*info.eos_id);
  out.seq.mask_positions = {out.mask_index};
  return out;
}

}  // namespace cloze
