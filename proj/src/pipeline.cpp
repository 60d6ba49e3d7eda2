#include "cloze/pipeline.hpp"

#include <optional>
#include <sstream>

#include "cloze/error.hpp"
#include "cloze/kernels.hpp"
#include "cloze/parallel.hpp"

namespace cloze {

namespace {

RecordError record_error(std::size_t index, const std::string& id, const Error& e) {
  return {index, id, error_code_name(e.code()), e.detail()};
}

}  // namespace

ClassifyResult classify(const std::vector<LabeledExample>& dataset, const PromptTemplate& tpl,
                        const Verbalizer& v, const MaskedLanguageModel& model,
                        const Tokenizer& tokenizer, const CalibrationState& calib) {
  calib.validate();
  std::vector<std::optional<Prediction>> slots(dataset.size());
  std::vector<std::optional<RecordError>> failures(dataset.size());
  parallel_for(dataset.size(), [&](std::size_t i) {
    const LabeledExample& ex = dataset[i];
    try {
      const auto entity = ex.entity ? std::optional<std::string_view>(*ex.entity) : std::nullopt;
      const PromptInstance p = render(tpl, tokenizer, ex.text, entity, ex.id);
      const MaskDistribution d = model.predict_mask(p.seq, p.mask_index);
      Prediction pred;
      pred.id = ex.id;
      pred.scores = score(v, d, &calib);
      pred.predicted_index = pred.scores.argmax();
      pred.predicted = v.classes()[pred.predicted_index].id;
      pred.calibration_mode = calib.mode;
      slots[i] = std::move(pred);
    } catch (const Error& e) {
      failures[i] = record_error(i, ex.id, e);
    }
  });
  ClassifyResult out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (slots[i]) out.predictions.push_back(std::move(*slots[i]));
    if (failures[i]) out.errors.push_back(std::move(*failures[i]));
  }
  return out;
}

std::string predictions_jsonl(const std::vector<Prediction>& preds, const Verbalizer& v) {
  std::ostringstream os;
  for (const auto& p : preds) {
    if (p.scores.values.size() != v.class_count()) {
      throw Error(ErrorCode::DimensionMismatch, "prediction '" + p.id + "' does not match the verbalizer");
    }
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["predicted"] = p.predicted;
    nlohmann::ordered_json scores = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < v.class_count(); ++c) scores[v.classes()[c].id] = p.scores.values[c];
    j["scores"] = std::move(scores);
    os << j.dump() << '\n';
  }
  return os.str();
}

std::string errors_jsonl(const std::vector<RecordError>& errors) {
  std::ostringstream os;
  for (const auto& e : errors) {
    nlohmann::ordered_json j;
    j["index"] = e.index;
    j["id"] = e.id;
    j["error"] = e.code;
    j["message"] = e.message;
    os << j.dump() << '\n';
  }
  return os.str();
}

std::vector<std::pair<std::string, std::string>> prediction_pairs(const std::vector<Prediction>& preds) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.emplace_back(p.id, p.predicted);
  return out;
}

namespace {

struct FillMaskQuery {
  TokenSequence seq;
  std::size_t position = 0;
  TokenId gold = 0;
};

FillMaskQuery build_query(const FillMaskExample& ex, const Tokenizer& tokenizer) {
  const VocabInfo& info = tokenizer.vocab().info();
  const auto gold = tokenizer.single_piece_id(ex.masked_word);
  if (!gold) {
    throw Error(ErrorCode::MultiPieceGold, "'" + ex.masked_word + "' is not a single vocabulary piece");
  }
  const std::string target = tokenizer.normalize_case(ex.masked_word);
  FillMaskQuery q;
  q.gold = *gold;
  std::optional<std::size_t> literal_mask, word_hit;
  std::vector<TokenId> content;
  for (const PreToken& pt : tokenizer.pre_tokenize(ex.text)) {
    if (pt.special) {
      if (*pt.special == info.mask_id && !literal_mask) literal_mask = content.size();
      content.push_back(*pt.special);
      continue;
    }
    const std::vector<TokenId> pieces = tokenizer.encode_word(pt.text);
    if (!word_hit && pieces.size() == 1 && pieces.front() == *gold &&
        tokenizer.normalize_case(pt.text) == target) {
      word_hit = content.size();
    }
    content.insert(content.end(), pieces.begin(), pieces.end());
  }
  const auto pos = literal_mask ? literal_mask : word_hit;
  if (!pos) throw Error(ErrorCode::InvalidArgument, "'" + ex.masked_word + "' does not occur in the text");
  content[*pos] = info.mask_id;
  for (std::size_t i = 0; i < content.size(); ++i) {
    if (i != *pos && content[i] == info.mask_id) content[i] = info.unk_id;
  }

  const std::size_t room = info.max_len - info.scaffold_specials();
  if (*pos >= room) {
    throw Error(ErrorCode::SequenceTooLong, "masked word lies beyond max_len");
  }
  if (content.size() > room) content.resize(room);
  if (info.bos_id) q.seq.ids.push_back(*info.bos_id);
  q.position = q.seq.ids.size() + *pos;
  q.seq.ids.insert(q.seq.ids.end(), content.begin(), content.end());
  if (info.eos_id) q.seq.ids.push_back(*info.eos_id);
  q.seq.mask_positions = {q.position};
  return q;
}

}  // namespace

FillMaskReport fillmask_topk(const std::vector<FillMaskExample>& dataset,
                             const MaskedLanguageModel& model, const Tokenizer& tokenizer,
                             const std::vector<std::size_t>& ks) {
  for (std::size_t k : ks) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
  }
  std::vector<std::optional<std::size_t>> ranks(dataset.size());
  std::vector<std::optional<RecordError>> failures(dataset.size());
  parallel_for(dataset.size(), [&](std::size_t i) {
    try {
      const FillMaskQuery q = build_query(dataset[i], tokenizer);
      const MaskDistribution d = model.predict_mask(q.seq, q.position);
      ranks[i] = kernels::rank_of(d.logprobs, static_cast<std::size_t>(q.gold));
    } catch (const Error& e) {
      failures[i] = record_error(i, dataset[i].id, e);
    }
  });

  FillMaskReport rep;
  rep.ks = ks;
  std::vector<std::size_t> hits(ks.size(), 0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (failures[i]) {
      rep.skipped.push_back(std::move(*failures[i]));
      continue;
    }
    rep.ranks.emplace_back(dataset[i].id, *ranks[i]);
    for (std::size_t j = 0; j < ks.size(); ++j) hits[j] += *ranks[i] < ks[j];
  }
  rep.evaluated = rep.ranks.size();
  for (std::size_t h : hits) {
    rep.hit_rates.push_back(rep.evaluated ? static_cast<double>(h) / static_cast<double>(rep.evaluated) : 0.0);
  }
  return rep;
}

}  // namespace cloze
