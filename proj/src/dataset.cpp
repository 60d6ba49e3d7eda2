#include "cloze/dataset.hpp"

#include "cloze/error.hpp"
#include "cloze/io.hpp"

namespace cloze {
namespace {

std::string id_of(const nlohmann::json& r, std::size_t index) {
  if (r.contains("id")) {
    const auto& id = r["id"];
    return id.is_string() ? id.get<std::string>() : id.dump();
  }
  return std::to_string(index);
}

}  // namespace

std::vector<LabeledExample> parse_examples(const std::vector<nlohmann::json>& records,
                                           TemplateTask task, std::vector<RejectedRecord>* rejected) {
  std::vector<LabeledExample> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string id = id_of(r, i);
    auto reject = [&](const std::string& why) {
      if (!rejected) throw Error(ErrorCode::SchemaMismatch, "record " + id + ": " + why);
      rejected->push_back({i + 1, id, why});
    };
    if (!r.is_object() || !r.contains("text") || !r["text"].is_string()) {
      reject("missing string field 'text'");
      continue;
    }
    LabeledExample ex;
    ex.id = id;
    ex.text = r["text"].get<std::string>();
    const bool has_entity = r.contains("entity") && r["entity"].is_string();
    if (task == TemplateTask::entity && !has_entity) {
      reject("entity-typing record without 'entity'");
      continue;
    }
    if (task == TemplateTask::document && r.contains("entity")) {
      reject("document record carries 'entity'");
      continue;
    }
    if (has_entity) ex.entity = r["entity"].get<std::string>();
    if (r.contains("label") && !r["label"].is_null()) {
      const auto& l = r["label"];
      if (l.is_string()) {
        ex.gold = l.get<std::string>();
      } else if (l.is_array() && l.size() == 1 && l[0].is_string()) {
        ex.gold = l[0].get<std::string>();
      } else {
        reject("only single-label records are supported");
        continue;
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<LabeledExample> load_examples(const std::filesystem::path& jsonl, TemplateTask task,
                                          std::vector<RejectedRecord>* rejected) {
  return parse_examples(io::read_jsonl(jsonl), task, rejected);
}

std::vector<FillMaskExample> load_fillmask(const std::filesystem::path& jsonl) {
  std::vector<FillMaskExample> out;
  const auto records = io::read_jsonl(jsonl);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    try {
      out.push_back({id_of(r, i), r.at("text").get<std::string>(), r.at("masked_word").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaMismatch, jsonl.string() + " record " + std::to_string(i + 1) +
                                                 ": " + e.what());
    }
  }
  return out;
}

}  // namespace cloze
