#include "cloze/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "cloze/error.hpp"

namespace cloze {

const char* mode_name(CalibrationMode mode) noexcept {
  switch (mode) {
    case CalibrationMode::identity: return "identity";
    case CalibrationMode::contextual: return "contextual";
    case CalibrationMode::batch: return "batch";
  }
  return "identity";
}

CalibrationMode parse_mode(std::string_view name) {
  if (name == "identity" || name == "none") return CalibrationMode::identity;
  if (name == "contextual" || name == "cc") return CalibrationMode::contextual;
  if (name == "batch" || name == "bc") return CalibrationMode::batch;
  throw Error(ErrorCode::ConfigInvalid, "unknown calibration mode '" + std::string(name) + "'");
}

void CalibrationState::validate() const {
  switch (mode) {
    case CalibrationMode::identity: return;
    case CalibrationMode::contextual:
      if (cc_logprobs.empty()) throw Error(ErrorCode::ModeMismatch, "contextual state without cc_logprobs");
      for (const auto& [id, lp] : cc_logprobs) {
        if (!std::isfinite(lp)) throw Error(ErrorCode::ModeMismatch, "non-finite cc log-prob");
      }
      return;
    case CalibrationMode::batch:
      if (bc_means.empty() || bc_means.size() != class_ids.size()) {
        throw Error(ErrorCode::ModeMismatch, "batch state without one mean per class");
      }
      for (double m : bc_means) {
        if (!std::isfinite(m)) throw Error(ErrorCode::ModeMismatch, "non-finite batch mean");
      }
      return;
  }
}

double CalibrationState::cc_logprob(TokenId id) const {
  auto it = std::lower_bound(cc_logprobs.begin(), cc_logprobs.end(), id,
                             [](const auto& p, TokenId t) { return p.first < t; });
  if (it == cc_logprobs.end() || it->first != id) {
    throw Error(ErrorCode::ModeMismatch,
                "no content-free log-prob for token " + std::to_string(id) +
                    "; the calibration was fitted for another verbalizer");
  }
  return it->second;
}

nlohmann::json CalibrationState::to_json() const {
  nlohmann::ordered_json j;
  j["mode"] = mode_name(mode);
  if (mode == CalibrationMode::contextual) {
    j["cc_logprobs"] = nlohmann::ordered_json::array();
    for (const auto& [id, lp] : cc_logprobs) j["cc_logprobs"].push_back({{"token_id", id}, {"logprob", lp}});
  }
  if (mode == CalibrationMode::batch) {
    j["bc_means"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < bc_means.size(); ++i) {
      j["bc_means"].push_back({{"class", class_ids[i]}, {"mean", bc_means[i]}});
    }
  }
  return nlohmann::json(j);
}

CalibrationState CalibrationState::from_json(const nlohmann::json& j) {
  CalibrationState s;
  try {
    s.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("cc_logprobs")) {
      for (const auto& e : j["cc_logprobs"]) {
        s.cc_logprobs.emplace_back(e.at("token_id").get<TokenId>(), e.at("logprob").get<double>());
      }
      std::sort(s.cc_logprobs.begin(), s.cc_logprobs.end());
    }
    if (j.contains("bc_means")) {
      for (const auto& e : j["bc_means"]) {
        s.class_ids.push_back(e.at("class").get<std::string>());
        s.bc_means.push_back(e.at("mean").get<double>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("calibration: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<std::vector<double>> word_logprobs(const Verbalizer& v, const MaskDistribution& d) {
  std::vector<std::vector<double>> out;
  out.reserve(v.class_count());
  for (const auto& c : v.classes()) {
    std::vector<double> row;
    row.reserve(c.words.size());
    for (const auto& w : c.words) {
      if (w.token_id < 0 || static_cast<std::size_t>(w.token_id) >= d.size()) {
        throw Error(ErrorCode::DimensionMismatch, "label word '" + w.surface + "' outside distribution");
      }
      row.push_back(d.logprobs[static_cast<std::size_t>(w.token_id)]);
    }
    out.push_back(std::move(row));
  }
  return out;
}

ClassScores apply(const CalibrationState& state, const Verbalizer& v,
                  const std::vector<std::vector<double>>& word_scores) {
  state.validate();
  if (word_scores.size() != v.class_count()) {
    throw Error(ErrorCode::DimensionMismatch, "word scores do not match the verbalizer classes");
  }
  ClassScores out;
  for (std::size_t c = 0; c < v.class_count(); ++c) {
    const auto& words = v.classes()[c].words;
    if (word_scores[c].size() != words.size()) {
      throw Error(ErrorCode::DimensionMismatch, "word scores do not match class " + v.classes()[c].id);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < words.size(); ++k) {
      double s = word_scores[c][k];
      if (state.mode == CalibrationMode::contextual) s -= state.cc_logprob(words[k].token_id);
      num += words[k].weight * s;
      den += words[k].weight;
    }
    out.values.push_back(num / den);
  }
  if (state.mode == CalibrationMode::batch) return apply(state, out);
  return out;
}

ClassScores apply(const CalibrationState& state, const ClassScores& raw) {
  state.validate();
  switch (state.mode) {
    case CalibrationMode::identity: return raw;
    case CalibrationMode::contextual:
      throw Error(ErrorCode::ModeMismatch, "contextual calibration applies to word scores");
    case CalibrationMode::batch: break;
  }
  if (raw.values.size() != state.bc_means.size()) {
    throw Error(ErrorCode::ModeMismatch, "batch calibration fitted for " +
                                             std::to_string(state.bc_means.size()) + " classes, got " +
                                             std::to_string(raw.values.size()));
  }
  ClassScores out = raw;
  for (std::size_t c = 0; c < out.values.size(); ++c) out.values[c] -= state.bc_means[c];
  return out;
}

CalibrationState fit_contextual(const PromptTemplate& tpl, const Verbalizer& v,
                                const MaskedLanguageModel& model, const Tokenizer& tokenizer,
                                const std::string& content_free) {
  const std::optional<std::string_view> entity =
      tpl.task() == TemplateTask::entity ? std::optional<std::string_view>(content_free) : std::nullopt;
  const PromptInstance p = render(tpl, tokenizer, content_free, entity, "content-free");
  const MaskDistribution d = model.predict_mask(p.seq, p.mask_index);
  CalibrationState s;
  s.mode = CalibrationMode::contextual;
  for (TokenId id : v.all_token_ids()) s.cc_logprobs.emplace_back(id, d[id]);
  std::sort(s.cc_logprobs.begin(), s.cc_logprobs.end());
  s.cc_logprobs.erase(std::unique(s.cc_logprobs.begin(), s.cc_logprobs.end()), s.cc_logprobs.end());
  s.validate();
  return s;
}

CalibrationState fit_batch_from_scores(const Verbalizer& v, const std::vector<ClassScores>& raw) {
  if (raw.empty()) throw Error(ErrorCode::EmptyBatch, "batch calibration needs at least one example");
  CalibrationState s;
  s.mode = CalibrationMode::batch;
  s.class_ids = v.class_ids();
  s.bc_means.assign(v.class_count(), 0.0);
  for (const auto& r : raw) {
    if (r.values.size() != v.class_count()) {
      throw Error(ErrorCode::DimensionMismatch, "class score row does not match the verbalizer");
    }
    for (std::size_t c = 0; c < r.values.size(); ++c) s.bc_means[c] += r.values[c];
  }
  for (double& m : s.bc_means) m /= static_cast<double>(raw.size());
  s.validate();
  return s;
}

CalibrationState fit_batch(const PromptTemplate& tpl, const Verbalizer& v,
                           const MaskedLanguageModel& model, const Tokenizer& tokenizer,
                           const std::vector<LabeledExample>& unlabeled) {
  if (unlabeled.empty()) throw Error(ErrorCode::EmptyBatch, "batch calibration needs at least one example");
  std::vector<TokenSequence> seqs;
  seqs.reserve(unlabeled.size());
  for (const auto& ex : unlabeled) {
    const auto entity = ex.entity ? std::optional<std::string_view>(*ex.entity) : std::nullopt;
    seqs.push_back(render(tpl, tokenizer, ex.text, entity, ex.id).seq);
  }
  const std::vector<MaskDistribution> dists = model.batch_predict(seqs);
  std::vector<ClassScores> raw;
  raw.reserve(dists.size());
  for (const auto& d : dists) raw.push_back(score(v, d));
  return fit_batch_from_scores(v, raw);
}

}  // namespace cloze
