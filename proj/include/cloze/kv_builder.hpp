#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cloze/dataset.hpp"
#include "cloze/mlm_backend.hpp"
#include "cloze/prompt_template.hpp"
#include "cloze/tokenizer.hpp"
#include "cloze/verbalizer.hpp"
#include "json.hpp"

namespace cloze {

struct ClassSeeds {
  std::string id;
  std::vector<std::string> words;  // class name first, then synonyms and variants
};

struct MiningConfig {
  std::size_t candidates_per_occurrence = 50;
  std::size_t cv_size = 100;
  std::size_t info_threshold = 20;
  std::vector<ClassSeeds> synonyms;  // fixes the class order of the output
  std::set<std::string> stopwords;
  // Frequency refinement cut; the median of the candidates' mean calibrated
  // probabilities when unset.
  std::optional<double> frequency_threshold;

  // Throws ConfigInvalid.
  void validate() const;
};

// One masked occurrence of a seed word inside a sentence of its own class.
struct Occurrence {
  std::size_t class_index = 0;
  std::string source_id;
  std::string seed;
  TokenSequence seq;
  std::size_t position = 0;
};

struct CvEntry {
  TokenId token_id = 0;
  std::string surface;
  std::size_t count = 0;
};

struct ClassVocabulary {
  std::string class_id;
  std::vector<CvEntry> words;  // count desc, token id asc
  // Built from the class seed because no informative hit survived; refine
  // keeps such classes unchanged.
  bool seed_fallback = false;

  bool contains(TokenId id) const;
};

struct MiningWarning {
  std::string class_id;
  std::string message;
};

// Sentences end at . ! ? followed by whitespace or end of text, and at newlines.
std::vector<std::string_view> split_sentences(std::string_view text);

// Scans each sentence of every record labeled with a seeded class for whole-
// word seed matches; each match becomes one hit with only that word masked.
// A class without hits is reported as NoOccurrencesForClass in `warnings`.
std::vector<Occurrence> find_occurrences(const std::vector<LabeledExample>& corpus,
                                         const Tokenizer& tokenizer, const MiningConfig& cfg,
                                         std::vector<MiningWarning>* warnings = nullptr);

// Top candidates_per_occurrence mask fillers of every hit (whole vocabulary,
// log-prob desc, lower id first on ties), keeping only word tokens: special,
// continuation and punctuation-only pieces are dropped.
std::vector<std::vector<TokenId>> top_fillers(const std::vector<Occurrence>& hits,
                                              const MaskedLanguageModel& model,
                                              const Tokenizer& tokenizer, const MiningConfig& cfg);

// Tallies fillers per class, drops stopwords, keeps the top cv_size of each
// class, then removes words present in more than one class.
std::vector<ClassVocabulary> build_cv(const std::vector<Occurrence>& hits,
                                      const std::vector<std::vector<TokenId>>& fillers,
                                      const Tokenizer& tokenizer, const MiningConfig& cfg);

// Indices of hits with at least info_threshold fillers inside their class CV.
std::vector<std::size_t> filter_informative(const std::vector<Occurrence>& hits,
                                            const std::vector<std::vector<TokenId>>& fillers,
                                            const std::vector<ClassVocabulary>& cv,
                                            const MiningConfig& cfg);

struct RemovedWord {
  std::string class_id;
  std::string surface;
  std::string stage;  // subtoken | frequency | relevance
};

struct RefineReport {
  double frequency_threshold = 0.0;
  std::vector<RemovedWord> removed;
};

// Sub-token discard, then frequency refinement (contextually calibrated
// probability renormalized over all candidates, averaged over probes, kept
// when >= threshold), then relevance refinement (mean calibrated log-prob over
// own-class probes must beat the mean over every other class's probes).
// Probes are labeled records rendered with `tpl`. Throws EmptyBatch without
// probes and EmptyClassAfterResolution when a class loses every word.
Verbalizer refine(const std::vector<ClassVocabulary>& kb, const MaskedLanguageModel& model,
                  const Tokenizer& tokenizer, const PromptTemplate& tpl,
                  const std::vector<LabeledExample>& probes, const MiningConfig& cfg,
                  RefineReport* report = nullptr);

struct KvBuildResult {
  Verbalizer verbalizer;
  std::size_t hits = 0;
  std::size_t informative_hits = 0;
  std::vector<ClassVocabulary> cv;
  std::vector<ClassVocabulary> kb;
  std::vector<std::string> fallback_classes;  // no informative hit; seed word used
  std::vector<MiningWarning> warnings;
  RefineReport refine;

  nlohmann::json report_json() const;
};

// The four mining steps followed by refinement.
KvBuildResult build_kv(const std::vector<LabeledExample>& corpus,
                       const std::vector<LabeledExample>& probes, const PromptTemplate& tpl,
                       const MaskedLanguageModel& model, const Tokenizer& tokenizer,
                       const MiningConfig& cfg);

}  // namespace cloze
