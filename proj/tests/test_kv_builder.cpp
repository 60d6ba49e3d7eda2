#include <algorithm>
#include <chrono>
#include <regex>

#include "cloze/error.hpp"
#include "cloze/eval.hpp"
#include "cloze/kv_builder.hpp"
#include "cloze/pipeline.hpp"
#include "doctest.h"
#include "support/synthetic.hpp"
#include "support/toy_fixture.hpp"

using namespace cloze;
using namespace cloze::testing;
using nlohmann::json;

namespace {

ToyModel small_model(const json& toy = {{"default", {{"uniform", true}}}}) {
  return make_toy(bert_vocab({"Questo", "documento", "parla", "di", ".", ",", "ambiente", "ambienti", "scuola", "e",
                              "Poi", "aria", "##ria", "mare", "x", "y", "z"}),
                  bert_meta(), toy);
}

MiningConfig two_class_config() {
  MiningConfig cfg;
  cfg.synonyms = {{"Ambiente", {"ambiente", "ambienti"}}, {"Istruzione", {"scuola"}}};
  return cfg;
}

LabeledExample labeled(std::string id, std::string text, std::string gold) {
  return {std::move(id), std::move(text), std::nullopt, std::move(gold)};
}

Occurrence hit(std::size_t c) {
  Occurrence o;
  o.class_index = c;
  return o;
}

std::set<std::string> surfaces(const VerbalizerClass& c) {
  std::set<std::string> s;
  for (const auto& w : c.words) s.insert(w.surface);
  return s;
}

}  // namespace

TEST_CASE("sentence split") {
  const auto s = split_sentences("Uno due. Tre! quattro?\ncinque 3.5 sei\n\n  sette");
  CHECK(s == std::vector<std::string_view>{"Uno due.", "Tre!", "quattro?", "cinque 3.5 sei", "sette"});
  CHECK(split_sentences("").empty());
  CHECK(split_sentences("  \n ").empty());
}

TEST_CASE("occurrences: one hit per whole-word seed match in own-class texts") {
  const ToyModel m = small_model();
  std::vector<MiningWarning> warnings;
  const auto hits = find_occurrences({labeled("a", "ambiente e ambiente. Poi ambienti e ambiente", "Ambiente"),
                                      labeled("b", "scuola e ambiente", "Ambiente"),
                                      labeled("c", "ambiente ambiente", "Altro"),
                                      labeled("d", "mare", "Istruzione")},
                                     *m.tokenizer, two_class_config(), &warnings);
  REQUIRE(hits.size() == 5);
  CHECK(hits[0].seq.ids.size() == 6);
  CHECK(hits[0].position == 1);
  CHECK(hits[0].seq.ids[1] == m.vocab->info().mask_id);
  CHECK(hits[0].seq.ids[3] == m.id("ambiente"));
  CHECK(hits[1].position == 3);
  CHECK(hits[2].seed == "ambienti");
  CHECK(hits[2].source_id == "a");
  CHECK(hits[4].source_id == "b");
  for (const auto& h : hits) {
    CHECK(h.class_index == 0);
    CHECK(std::count(h.seq.ids.begin(), h.seq.ids.end(), m.vocab->info().mask_id) == 1);
    CHECK(h.seq.mask_positions == std::vector<std::size_t>{h.position});
  }
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].class_id == "Istruzione");
  CHECK(warnings[0].message.rfind("NoOccurrencesForClass", 0) == 0);
}

TEST_CASE("top fillers keep whole-word tokens only") {
  const json toy = {{"default", {{"probs", {{"[SEP]", 0.2}, {"##ria", 0.2}, {".", 0.2}, {"x", 0.1}, {"y", 0.1}}}}}};
  const ToyModel m = small_model(toy);
  MiningConfig cfg = two_class_config();
  cfg.candidates_per_occurrence = 5;
  cfg.info_threshold = 1;
  const auto hits = find_occurrences({labeled("a", "ambiente", "Ambiente")}, *m.tokenizer, cfg);
  const auto fillers = top_fillers(hits, *m.model, *m.tokenizer, cfg);
  // The top 5 are [SEP] ##ria . x y; three are not words.
  CHECK(fillers == std::vector<std::vector<TokenId>>{{m.id("x"), m.id("y")}});
}

TEST_CASE("candidate vocabulary: tally, stopwords, size cap, cross-class removal") {
  const ToyModel m = small_model();
  MiningConfig cfg = two_class_config();
  cfg.stopwords = {"e"};
  cfg.cv_size = 3;
  const TokenId aria = m.id("aria"), mare = m.id("mare"), x = m.id("x"), y = m.id("y"), z = m.id("z"), e = m.id("e");
  const std::vector<Occurrence> hits{hit(0), hit(0), hit(0), hit(1)};
  const std::vector<std::vector<TokenId>> fillers{{aria, mare, e, y}, {aria, x, e}, {aria, mare, x, z}, {x, z}};
  const auto cv = build_cv(hits, fillers, *m.tokenizer, cfg);
  REQUIRE(cv.size() == 2);
  // Class 0 draft: aria 3, mare 2, x 2 (y, z cut by the cap, e a stopword); x is shared.
  REQUIRE(cv[0].words.size() == 2);
  CHECK(cv[0].words[0].surface == "aria");
  CHECK(cv[0].words[0].count == 3);
  CHECK(cv[0].words[1].surface == "mare");
  CHECK_FALSE(cv[0].contains(x));
  CHECK_FALSE(cv[0].contains(e));
  // Class 1 draft: x 1, z 1; z survives because class 0 cut it from its draft.
  REQUIRE(cv[1].words.size() == 1);
  CHECK(cv[1].words[0].surface == "z");
}

TEST_CASE("informative filter boundary") {
  MiningConfig cfg;
  cfg.info_threshold = 20;
  ClassVocabulary cv{"A", {}, false};
  for (TokenId t = 100; t < 125; ++t) cv.words.push_back({t, "w", 1});
  auto fill = [](std::size_t inside) {
    std::vector<TokenId> f;
    for (std::size_t i = 0; i < inside; ++i) f.push_back(static_cast<TokenId>(100 + i));
    for (std::size_t i = inside; i < 50; ++i) f.push_back(static_cast<TokenId>(500 + i));
    return f;
  };
  const auto keep = filter_informative({hit(0), hit(0), hit(0)}, {fill(25), fill(19), fill(20)}, {cv}, cfg);
  CHECK(keep == std::vector<std::size_t>{0, 2});
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(MiningConfig{}.validate(), Error);
  MiningConfig cfg = two_class_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.info_threshold = 51;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = two_class_config();
  cfg.synonyms.push_back({"Ambiente", {"mare"}});
  try {
    cfg.validate();
    FAIL("expected ConfigInvalid");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::ConfigInvalid);
  }
}

TEST_CASE("refine discards sub-tokens and needs probes") {
  const ToyModel m = small_model();
  const std::vector<ClassVocabulary> kb{{"Ambiente", {{m.id("##ria"), "##ria", 3}, {m.id("aria"), "aria", 2}}, false},
                                        {"Istruzione", {{m.id("scuola"), "scuola", 1}}, true}};
  RefineReport rep;
  const Verbalizer v = refine(kb, *m.model, *m.tokenizer, document_template(),
                              {labeled("p", "aria", "Ambiente")}, two_class_config(), &rep);
  CHECK(v.kind() == VerbalizerKind::knowledgeable);
  CHECK(surfaces(v.classes()[0]) == std::set<std::string>{"aria"});
  CHECK(surfaces(v.classes()[1]) == std::set<std::string>{"scuola"});
  REQUIRE_FALSE(rep.removed.empty());
  CHECK(rep.removed[0].stage == "subtoken");
  CHECK(rep.removed[0].surface == "##ria");
  try {
    refine(kb, *m.model, *m.tokenizer, document_template(), {}, two_class_config());
    FAIL("expected EmptyBatch");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::EmptyBatch);
  }
}

TEST_CASE("refine relevance keeps words dominant on their own class") {
  // "aria" is likelier on Istruzione probes than Ambiente ones, so Ambiente loses it.
  const json toy = {{"default", {{"uniform", true}}},
                    {"rules", json::array({{{"when", {{"contains", "x"}}}, {"probs", {{"aria", 0.3}, {"mare", 0.3}}}},
                                           {{"when", {{"contains", "y"}}}, {"probs", {{"aria", 0.5}, {"scuola", 0.3}}}}})}};
  const ToyModel m = small_model(toy);
  MiningConfig cfg = two_class_config();
  cfg.frequency_threshold = 0.0;
  const std::vector<ClassVocabulary> kb{{"Ambiente", {{m.id("aria"), "aria", 2}, {m.id("mare"), "mare", 2}}, false},
                                        {"Istruzione", {{m.id("scuola"), "scuola", 2}}, false}};
  RefineReport rep;
  const Verbalizer v = refine(kb, *m.model, *m.tokenizer, document_template(),
                              {labeled("p1", "x", "Ambiente"), labeled("p2", "y", "Istruzione")}, cfg, &rep);
  CHECK(surfaces(v.classes()[0]) == std::set<std::string>{"mare"});
  REQUIRE(rep.removed.size() == 1);
  CHECK(rep.removed[0].stage == "relevance");
  CHECK(rep.removed[0].surface == "aria");
}

TEST_CASE("refine frequency drops words below the threshold") {
  const json toy = {{"default", {{"uniform", true}}},
                    {"rules", json::array({{{"when", {{"contains", "x"}}}, {"probs", {{"aria", 0.4}, {"mare", 0.01}}}}})}};
  const ToyModel m = small_model(toy);
  MiningConfig cfg = two_class_config();
  cfg.synonyms.pop_back();
  const std::vector<ClassVocabulary> kb{
      {"Ambiente", {{m.id("aria"), "aria", 2}, {m.id("mare"), "mare", 2}, {m.id("z"), "z", 2}}, false}};
  RefineReport rep;
  const Verbalizer v =
      refine(kb, *m.model, *m.tokenizer, document_template(), {labeled("p", "x", "Ambiente")}, cfg, &rep);
  // Calibrated probabilities renormalized over {aria, mare, z}; median is z's.
  CHECK(surfaces(v.classes()[0]) == std::set<std::string>{"aria", "z"});
  const double n = 1.0 / static_cast<double>(m.vocab->size());
  const double cal_aria = 0.4 / n, cal_z = ((1.0 - 0.41) / double(m.vocab->size() - 2)) / n, cal_mare = 0.01 / n;
  CHECK(rep.frequency_threshold == doctest::Approx(cal_z / (cal_aria + cal_z + cal_mare)).epsilon(1e-12));
  REQUIRE(rep.removed.size() == 1);
  CHECK(rep.removed[0].stage == "frequency");
}

TEST_CASE("synthetic corpus: planted words recovered, confounders removed") {
  const SyntheticKv s = make_synthetic_kv();
  const ToyModel m = make_toy(s.tokens, s.meta, s.toy);
  const auto t0 = std::chrono::steady_clock::now();
  const KvBuildResult r = build_kv(s.corpus, s.probes, document_template(), *m.model, *m.tokenizer, s.mining_config());
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(10));
  CHECK(r.hits == 4 * 40);
  CHECK(r.informative_hits == 4 * 30);
  CHECK(r.fallback_classes.empty());

  for (std::size_t a = 0; a < r.cv.size(); ++a) {
    for (std::size_t b = a + 1; b < r.cv.size(); ++b) {
      for (const auto& e : r.cv[a].words) CHECK_FALSE(r.cv[b].contains(e.token_id));
    }
  }
  REQUIRE(r.verbalizer.class_count() == 4);
  for (std::size_t c = 0; c < 4; ++c) {
    const auto words = surfaces(r.verbalizer.classes()[c]);
    for (const auto& p : s.planted[c]) CHECK_MESSAGE(words.count(p), s.class_ids[c] << " lacks " << p);
    for (const auto& cf : s.confounders) CHECK_FALSE(words.count(cf));
    for (const auto& sw : s.stopwords) CHECK_FALSE(words.count(sw));
  }
  std::map<std::string, std::string> stage;
  for (const auto& rm : r.refine.removed) stage[rm.surface] = rm.stage;
  for (int i = 5; i < 9; ++i) CHECK(stage["c" + std::to_string(i)] == "relevance");
  CHECK(stage["c9"] == "frequency");

  const auto cls = classify(s.test, document_template(), r.verbalizer, *m.model, *m.tokenizer);
  std::map<std::string, std::string> gold;
  for (const auto& e : s.test) gold[e.id] = *e.gold;
  CHECK(evaluate(prediction_pairs(cls.predictions), gold, s.class_ids).macro_f1 == 1.0);
}

TEST_CASE("deterministic report") {
  const SyntheticKv s = make_synthetic_kv();
  const ToyModel m = make_toy(s.tokens, s.meta, s.toy);
  const auto a = build_kv(s.corpus, s.probes, document_template(), *m.model, *m.tokenizer, s.mining_config());
  const auto b = build_kv(s.corpus, s.probes, document_template(), *m.model, *m.tokenizer, s.mining_config());
  CHECK(a.report_json().dump() == b.report_json().dump());
  CHECK(a.verbalizer.to_json().dump() == b.verbalizer.to_json().dump());
}

TEST_CASE("class without informative hits falls back to its seed") {
  SyntheticKv s = make_synthetic_kv();
  const std::regex trigger("t3[0-2]");
  for (auto& e : s.corpus) {
    if (*e.gold == "Tributi") e.text = std::regex_replace(e.text, trigger, "esempio");
  }
  const ToyModel m = make_toy(s.tokens, s.meta, s.toy);
  const auto r = build_kv(s.corpus, s.probes, document_template(), *m.model, *m.tokenizer, s.mining_config());
  CHECK(r.fallback_classes == std::vector<std::string>{"Tributi"});
  CHECK(surfaces(r.verbalizer.classes()[3]) == std::set<std::string>{"tributo"});
  CHECK(r.verbalizer.class_count() == 4);
}

TEST_CASE("no occurrence at all") {
  const ToyModel m = small_model();
  try {
    build_kv({labeled("a", "mare", "Ambiente")}, {labeled("p", "x", "Ambiente")}, document_template(), *m.model,
             *m.tokenizer, two_class_config());
    FAIL("expected NoOccurrencesForClass");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::NoOccurrencesForClass);
  }
}
