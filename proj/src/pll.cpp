#include "cloze/pll.hpp"

#include <cmath>

#include "cloze/error.hpp"

namespace cloze {

PLLResult pll_sentence(std::string_view text, const MaskedLanguageModel& model,
                       const Tokenizer& tokenizer) {
  const VocabInfo& info = model.vocab_info();
  const std::vector<TokenId> content = tokenizer.encode(text).ids;
  if (content.empty()) throw Error(ErrorCode::EmptyInput, "sentence has no tokens");
  const std::size_t total = content.size() + info.scaffold_specials();
  if (total > info.max_len) {
    throw Error(ErrorCode::SequenceTooLong,
                std::to_string(total) + " tokens exceed max_len " + std::to_string(info.max_len));
  }

  std::vector<TokenId> base;
  base.reserve(total);
  if (info.bos_id) base.push_back(*info.bos_id);
  const std::size_t offset = base.size();
  base.insert(base.end(), content.begin(), content.end());
  if (info.eos_id) base.push_back(*info.eos_id);

  std::vector<TokenSequence> queries(content.size());
  for (std::size_t t = 0; t < content.size(); ++t) {
    queries[t].ids = base;
    queries[t].ids[offset + t] = info.mask_id;
    queries[t].mask_positions = {offset + t};
  }
  const std::vector<MaskDistribution> dists = model.batch_predict(queries);

  PLLResult r;
  for (std::size_t t = 0; t < content.size(); ++t) r.raw += dists[t][content[t]];
  r.token_count = content.size();
  r.normalized = r.raw / static_cast<double>(r.token_count);
  return r;
}

PLLCorpusReport pll_corpus(const std::vector<std::string>& texts, const MaskedLanguageModel& model,
                           const Tokenizer& tokenizer) {
  PLLCorpusReport rep;
  rep.sentences.resize(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    try {
      rep.sentences[i] = pll_sentence(texts[i], model, tokenizer);
    } catch (const Error& e) {
      rep.failures.push_back({i, e.what()});
    }
  }
  double sum = 0.0;
  for (const auto& s : rep.sentences) {
    if (!s) continue;
    sum += s->normalized;
    ++rep.scored;
  }
  if (rep.scored == 0) {
    throw Error(ErrorCode::AllSentencesFailed,
                "none of " + std::to_string(texts.size()) + " sentences could be scored");
  }
  rep.mean = sum / static_cast<double>(rep.scored);
  double ss = 0.0;
  for (const auto& s : rep.sentences) {
    if (s) ss += (s->normalized - rep.mean) * (s->normalized - rep.mean);
  }
  rep.std = std::sqrt(ss / static_cast<double>(rep.scored));
  return rep;
}

}  // namespace cloze
