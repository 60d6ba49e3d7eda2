#include "cloze/kv_builder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "cloze/error.hpp"
#include "cloze/kernels.hpp"
#include "cloze/parallel.hpp"

namespace cloze {

void MiningConfig::validate() const {
  if (candidates_per_occurrence == 0) throw Error(ErrorCode::ConfigInvalid, "candidates_per_occurrence must be > 0");
  if (cv_size == 0) throw Error(ErrorCode::ConfigInvalid, "cv_size must be > 0");
  if (info_threshold == 0 || info_threshold > candidates_per_occurrence) {
    throw Error(ErrorCode::ConfigInvalid, "info_threshold must be in [1, candidates_per_occurrence]");
  }
  if (synonyms.empty()) throw Error(ErrorCode::ConfigInvalid, "no seed classes");
  std::set<std::string> ids;
  for (const auto& c : synonyms) {
    if (!ids.insert(c.id).second) throw Error(ErrorCode::ConfigInvalid, "duplicate seed class '" + c.id + "'");
    if (c.words.empty()) throw Error(ErrorCode::ConfigInvalid, "class '" + c.id + "' has no seed words");
  }
  if (frequency_threshold && !std::isfinite(*frequency_threshold)) {
    throw Error(ErrorCode::ConfigInvalid, "frequency_threshold must be finite");
  }
}

bool ClassVocabulary::contains(TokenId id) const {
  return std::any_of(words.begin(), words.end(), [id](const CvEntry& e) { return e.token_id == id; });
}

std::vector<std::string_view> split_sentences(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    std::string_view s = text.substr(start, end - start);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    if (!s.empty()) out.push_back(s);
    start = end;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      emit(i + 1);
    } else if ((c == '.' || c == '!' || c == '?') &&
               (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      emit(i + 1);
    }
  }
  emit(text.size());
  return out;
}

namespace {

bool is_word_token(const Vocabulary& vocab, TokenId id) {
  if (vocab.info().is_special(id) || vocab.is_continuation(id)) return false;
  const std::string w = vocab.word_form(id);
  return std::any_of(w.begin(), w.end(), [](char ch) {
    const auto c = static_cast<unsigned char>(ch);
    return std::isalnum(c) || c >= 0x80;
  });
}

// Order of CV entries: count desc, token id asc.
void rank_entries(std::vector<CvEntry>& v) {
  std::sort(v.begin(), v.end(), [](const CvEntry& a, const CvEntry& b) {
    return a.count != b.count ? a.count > b.count : a.token_id < b.token_id;
  });
}

}  // namespace

std::vector<Occurrence> find_occurrences(const std::vector<LabeledExample>& corpus,
                                         const Tokenizer& tokenizer, const MiningConfig& cfg,
                                         std::vector<MiningWarning>* warnings) {
  const VocabInfo& info = tokenizer.vocab().info();
  std::unordered_map<std::string, std::size_t> class_of;
  std::vector<std::map<std::string, std::string>> seeds(cfg.synonyms.size());  // normalized -> surface
  for (std::size_t c = 0; c < cfg.synonyms.size(); ++c) {
    class_of.emplace(cfg.synonyms[c].id, c);
    for (const auto& w : cfg.synonyms[c].words) {
      if (!tokenizer.is_single_piece(w)) {
        if (warnings) warnings->push_back({cfg.synonyms[c].id, "seed '" + w + "' is not a single vocabulary piece"});
        continue;
      }
      seeds[c].emplace(tokenizer.normalize_case(w), w);
    }
  }

  const std::size_t room = info.max_len - info.scaffold_specials();
  std::vector<Occurrence> hits;
  std::vector<std::size_t> per_class(cfg.synonyms.size(), 0);
  for (const LabeledExample& ex : corpus) {
    if (!ex.gold) continue;
    auto cls = class_of.find(*ex.gold);
    if (cls == class_of.end()) continue;
    const std::size_t c = cls->second;
    for (std::string_view sentence : split_sentences(ex.text)) {
      std::vector<TokenId> content;
      std::vector<std::pair<std::size_t, std::string>> matches;
      for (const PreToken& pt : tokenizer.pre_tokenize(sentence)) {
        if (pt.special) {
          content.push_back(*pt.special == info.mask_id ? info.unk_id : *pt.special);
          continue;
        }
        const std::vector<TokenId> pieces = tokenizer.encode_word(pt.text);
        if (pieces.size() == 1) {
          auto s = seeds[c].find(tokenizer.normalize_case(pt.text));
          if (s != seeds[c].end()) matches.emplace_back(content.size(), s->second);
        }
        content.insert(content.end(), pieces.begin(), pieces.end());
      }
      for (const auto& [pos, seed] : matches) {
        std::size_t start = 0;
        if (content.size() > room) start = std::min(pos - std::min(pos, room / 2), content.size() - room);
        const std::size_t end = std::min(content.size(), start + room);
        Occurrence o;
        o.class_index = c;
        o.source_id = ex.id;
        o.seed = seed;
        if (info.bos_id) o.seq.ids.push_back(*info.bos_id);
        const std::size_t offset = o.seq.ids.size();
        o.seq.ids.insert(o.seq.ids.end(), content.begin() + static_cast<std::ptrdiff_t>(start),
                         content.begin() + static_cast<std::ptrdiff_t>(end));
        if (info.eos_id) o.seq.ids.push_back(*info.eos_id);
        o.position = offset + pos - start;
        o.seq.ids[o.position] = info.mask_id;
        o.seq.mask_positions = {o.position};
        hits.push_back(std::move(o));
        ++per_class[c];
      }
    }
  }
  if (warnings) {
    for (std::size_t c = 0; c < per_class.size(); ++c) {
      if (per_class[c] == 0) {
        warnings->push_back({cfg.synonyms[c].id, std::string(error_code_name(ErrorCode::NoOccurrencesForClass)) +
                                                     ": no seed occurrence in texts of this class"});
      }
    }
  }
  return hits;
}

std::vector<std::vector<TokenId>> top_fillers(const std::vector<Occurrence>& hits,
                                              const MaskedLanguageModel& model,
                                              const Tokenizer& tokenizer, const MiningConfig& cfg) {
  const Vocabulary& vocab = tokenizer.vocab();
  std::vector<std::vector<TokenId>> out(hits.size());
  parallel_for(hits.size(), [&](std::size_t i) {
    const MaskDistribution d = model.predict_mask(hits[i].seq, hits[i].position);
    const std::size_t k = std::min(cfg.candidates_per_occurrence, d.size());
    std::vector<TokenId> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](TokenId a, TokenId b) {
                        const double la = d.logprobs[static_cast<std::size_t>(a)];
                        const double lb = d.logprobs[static_cast<std::size_t>(b)];
                        return la != lb ? la > lb : a < b;
                      });
    for (std::size_t r = 0; r < k; ++r) {
      if (is_word_token(vocab, idx[r])) out[i].push_back(idx[r]);
    }
  });
  return out;
}

std::vector<ClassVocabulary> build_cv(const std::vector<Occurrence>& hits,
                                      const std::vector<std::vector<TokenId>>& fillers,
                                      const Tokenizer& tokenizer, const MiningConfig& cfg) {
  if (hits.size() != fillers.size()) throw Error(ErrorCode::DimensionMismatch, "one filler list per hit expected");
  const Vocabulary& vocab = tokenizer.vocab();
  std::set<std::string> stop;
  for (const auto& s : cfg.stopwords) stop.insert(tokenizer.normalize_case(s));

  const std::size_t n = cfg.synonyms.size();
  std::vector<std::map<TokenId, std::size_t>> tally(n);
  for (std::size_t h = 0; h < hits.size(); ++h) {
    if (hits[h].class_index >= n) throw Error(ErrorCode::DimensionMismatch, "hit class out of range");
    for (TokenId id : fillers[h]) ++tally[hits[h].class_index][id];
  }

  std::vector<ClassVocabulary> cv(n);
  std::map<TokenId, std::size_t> drafts_with;
  for (std::size_t c = 0; c < n; ++c) {
    cv[c].class_id = cfg.synonyms[c].id;
    for (const auto& [id, count] : tally[c]) {
      std::string w = vocab.word_form(id);
      if (stop.count(tokenizer.normalize_case(w))) continue;
      cv[c].words.push_back({id, std::move(w), count});
    }
    rank_entries(cv[c].words);
    if (cv[c].words.size() > cfg.cv_size) cv[c].words.resize(cfg.cv_size);
    for (const auto& e : cv[c].words) ++drafts_with[e.token_id];
  }
  for (auto& c : cv) {
    std::erase_if(c.words, [&](const CvEntry& e) { return drafts_with[e.token_id] > 1; });
  }
  return cv;
}

std::vector<std::size_t> filter_informative(const std::vector<Occurrence>& hits,
                                            const std::vector<std::vector<TokenId>>& fillers,
                                            const std::vector<ClassVocabulary>& cv,
                                            const MiningConfig& cfg) {
  if (hits.size() != fillers.size()) throw Error(ErrorCode::DimensionMismatch, "one filler list per hit expected");
  std::vector<std::unordered_set<TokenId>> sets(cv.size());
  for (std::size_t c = 0; c < cv.size(); ++c) {
    for (const auto& e : cv[c].words) sets[c].insert(e.token_id);
  }
  std::vector<std::size_t> keep;
  for (std::size_t h = 0; h < hits.size(); ++h) {
    const std::size_t c = hits[h].class_index;
    if (c >= sets.size()) throw Error(ErrorCode::DimensionMismatch, "hit class out of range");
    const auto in_cv = static_cast<std::size_t>(
        std::count_if(fillers[h].begin(), fillers[h].end(), [&](TokenId id) { return sets[c].count(id) > 0; }));
    if (in_cv >= cfg.info_threshold) keep.push_back(h);
  }
  return keep;
}

namespace {

MaskDistribution predict_rendered(const PromptTemplate& tpl, const Tokenizer& tokenizer,
                                  const MaskedLanguageModel& model, std::string_view text,
                                  const std::optional<std::string>& entity) {
  std::optional<std::string_view> ent;
  if (tpl.task() == TemplateTask::entity) ent = entity ? std::string_view(*entity) : std::string_view();
  const PromptInstance p = render(tpl, tokenizer, text, ent);
  return model.predict_mask(p.seq, p.mask_index);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Verbalizer refine(const std::vector<ClassVocabulary>& kb, const MaskedLanguageModel& model,
                  const Tokenizer& tokenizer, const PromptTemplate& tpl,
                  const std::vector<LabeledExample>& probes, const MiningConfig& cfg,
                  RefineReport* report) {
  if (kb.empty()) throw Error(ErrorCode::InvalidArgument, "empty knowledge base");
  if (probes.empty()) throw Error(ErrorCode::EmptyBatch, "refinement needs probe prompts");
  RefineReport local;
  RefineReport& rep = report ? *report : local;
  rep = {};

  // Sub-token discard.
  std::vector<std::vector<CvEntry>> words(kb.size());
  for (std::size_t c = 0; c < kb.size(); ++c) {
    for (const auto& e : kb[c].words) {
      if (tokenizer.single_piece_id(e.surface) == e.token_id) {
        words[c].push_back(e);
      } else {
        rep.removed.push_back({kb[c].class_id, e.surface, "subtoken"});
      }
    }
  }

  std::vector<TokenId> cand;
  for (std::size_t c = 0; c < kb.size(); ++c) {
    if (kb[c].seed_fallback) continue;
    for (const auto& e : words[c]) cand.push_back(e.token_id);
  }
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  std::unordered_map<TokenId, std::size_t> slot;
  for (std::size_t i = 0; i < cand.size(); ++i) slot.emplace(cand[i], i);

  std::unordered_map<std::string, std::size_t> class_of;
  for (std::size_t c = 0; c < kb.size(); ++c) class_of.emplace(kb[c].class_id, c);

  if (!cand.empty()) {
    const MaskDistribution cf = predict_rendered(tpl, tokenizer, model, "", std::string());
    // Calibrated log-probs of the candidates on every probe.
    std::vector<std::vector<double>> cal(probes.size(), std::vector<double>(cand.size()));
    parallel_for(probes.size(), [&](std::size_t p) {
      const MaskDistribution d = predict_rendered(tpl, tokenizer, model, probes[p].text, probes[p].entity);
      for (std::size_t i = 0; i < cand.size(); ++i) cal[p][i] = d[cand[i]] - cf[cand[i]];
    });

    // Frequency: renormalize over all candidates, average over probes.
    std::vector<double> freq(cand.size(), 0.0);
    std::vector<double> row;
    for (const auto& r : cal) {
      row = r;
      kernels::log_softmax_inplace(row);
      for (std::size_t i = 0; i < cand.size(); ++i) freq[i] += std::exp(row[i]);
    }
    for (double& f : freq) f /= static_cast<double>(probes.size());
    rep.frequency_threshold = cfg.frequency_threshold ? *cfg.frequency_threshold : median(freq);

    // Relevance: per-class means of calibrated log-probs over labeled probes.
    std::vector<std::vector<double>> mean(kb.size(), std::vector<double>(cand.size(), 0.0));
    std::vector<std::size_t> count(kb.size(), 0);
    for (std::size_t p = 0; p < probes.size(); ++p) {
      if (!probes[p].gold) continue;
      auto it = class_of.find(*probes[p].gold);
      if (it == class_of.end()) continue;
      ++count[it->second];
      for (std::size_t i = 0; i < cand.size(); ++i) mean[it->second][i] += cal[p][i];
    }
    for (std::size_t c = 0; c < kb.size(); ++c) {
      if (count[c] == 0) continue;
      for (double& m : mean[c]) m /= static_cast<double>(count[c]);
    }

    for (std::size_t c = 0; c < kb.size(); ++c) {
      if (kb[c].seed_fallback) continue;
      std::vector<CvEntry> kept;
      for (const auto& e : words[c]) {
        if (freq[slot.at(e.token_id)] < rep.frequency_threshold) {
          rep.removed.push_back({kb[c].class_id, e.surface, "frequency"});
        } else {
          kept.push_back(e);
        }
      }
      words[c] = std::move(kept);
    }
    for (std::size_t c = 0; c < kb.size(); ++c) {
      if (kb[c].seed_fallback || count[c] == 0) continue;
      std::vector<CvEntry> kept;
      for (const auto& e : words[c]) {
        const std::size_t i = slot.at(e.token_id);
        bool dominant = true;
        for (std::size_t k = 0; k < kb.size() && dominant; ++k) {
          if (k != c && count[k] > 0 && !(mean[c][i] > mean[k][i])) dominant = false;
        }
        if (dominant) {
          kept.push_back(e);
        } else {
          rep.removed.push_back({kb[c].class_id, e.surface, "relevance"});
        }
      }
      words[c] = std::move(kept);
    }
  }

  std::vector<VerbalizerClass> classes;
  for (std::size_t c = 0; c < kb.size(); ++c) {
    if (words[c].empty()) {
      throw Error(ErrorCode::EmptyClassAfterResolution, "refinement removed every word of '" + kb[c].class_id + "'");
    }
    VerbalizerClass vc{kb[c].class_id, {}};
    for (const auto& e : words[c]) vc.words.push_back({e.surface, e.token_id, 1.0});
    classes.push_back(std::move(vc));
  }
  return Verbalizer(VerbalizerKind::knowledgeable, std::move(classes));
}

namespace {

nlohmann::ordered_json cv_json(const std::vector<ClassVocabulary>& cv) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& c : cv) {
    nlohmann::ordered_json jc;
    jc["class"] = c.class_id;
    jc["seed_fallback"] = c.seed_fallback;
    jc["words"] = nlohmann::ordered_json::array();
    for (const auto& e : c.words) jc["words"].push_back({{"surface", e.surface}, {"count", e.count}});
    arr.push_back(std::move(jc));
  }
  return arr;
}

}  // namespace

nlohmann::json KvBuildResult::report_json() const {
  nlohmann::ordered_json j;
  j["hits"] = hits;
  j["informative_hits"] = informative_hits;
  j["fallback_classes"] = fallback_classes;
  j["warnings"] = nlohmann::ordered_json::array();
  for (const auto& w : warnings) j["warnings"].push_back({{"class", w.class_id}, {"message", w.message}});
  j["class_vocabulary"] = cv_json(cv);
  j["knowledge_base"] = cv_json(kb);
  j["frequency_threshold"] = refine.frequency_threshold;
  j["removed"] = nlohmann::ordered_json::array();
  for (const auto& r : refine.removed) {
    j["removed"].push_back({{"class", r.class_id}, {"surface", r.surface}, {"stage", r.stage}});
  }
  return nlohmann::json(j);
}

KvBuildResult build_kv(const std::vector<LabeledExample>& corpus,
                       const std::vector<LabeledExample>& probes, const PromptTemplate& tpl,
                       const MaskedLanguageModel& model, const Tokenizer& tokenizer,
                       const MiningConfig& cfg) {
  cfg.validate();
  std::vector<MiningWarning> warnings;
  const std::vector<Occurrence> hits = find_occurrences(corpus, tokenizer, cfg, &warnings);
  if (hits.empty()) throw Error(ErrorCode::NoOccurrencesForClass, "no seed word occurs in the corpus");

  const std::vector<std::vector<TokenId>> fillers = top_fillers(hits, model, tokenizer, cfg);
  std::vector<ClassVocabulary> cv = build_cv(hits, fillers, tokenizer, cfg);
  const std::vector<std::size_t> keep = filter_informative(hits, fillers, cv, cfg);

  std::vector<Occurrence> kept_hits;
  std::vector<std::vector<TokenId>> kept_fillers;
  for (std::size_t h : keep) {
    kept_hits.push_back(hits[h]);
    kept_fillers.push_back(fillers[h]);
  }
  std::vector<ClassVocabulary> kb = build_cv(kept_hits, kept_fillers, tokenizer, cfg);

  std::vector<std::string> fallback;
  for (std::size_t c = 0; c < kb.size(); ++c) {
    if (!kb[c].words.empty()) continue;
    fallback.push_back(kb[c].class_id);
    kb[c].seed_fallback = true;
    for (const auto& s : cfg.synonyms[c].words) {
      if (auto id = tokenizer.single_piece_id(s)) {
        kb[c].words.push_back({*id, s, 0});
        break;
      }
    }
    warnings.push_back({kb[c].class_id, "no informative occurrence; falling back to the seed word"});
  }

  RefineReport rep;
  Verbalizer v = refine(kb, model, tokenizer, tpl, probes, cfg, &rep);
  return KvBuildResult{std::move(v), hits.size(), keep.size(), std::move(cv), std::move(kb),
                       std::move(fallback), std::move(warnings), std::move(rep)};
}

}  // namespace cloze
