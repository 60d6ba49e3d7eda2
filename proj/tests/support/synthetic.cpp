#include "synthetic.hpp"

#include <random>

#include "cloze/io.hpp"
#include "toy_fixture.hpp"

namespace cloze::testing {

namespace {

using nlohmann::json;

constexpr std::size_t kClasses = 4;
constexpr std::size_t kFillers = 60;

}  // namespace

MiningConfig SyntheticKv::mining_config() const {
  MiningConfig cfg;
  for (std::size_t c = 0; c < class_ids.size(); ++c) cfg.synonyms.push_back({class_ids[c], seeds[c]});
  cfg.stopwords.insert(stopwords.begin(), stopwords.end());
  return cfg;
}

json SyntheticKv::seeds_json() const {
  json j;
  j["classes"] = json::array();
  for (std::size_t c = 0; c < class_ids.size(); ++c) j["classes"].push_back({{"id", class_ids[c]}, {"seeds", seeds[c]}});
  return j;
}

std::string to_jsonl(const std::vector<LabeledExample>& records, bool with_label) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["text"] = r.text;
    if (r.entity) j["entity"] = *r.entity;
    if (with_label && r.gold) j["label"] = *r.gold;
    out += j.dump() + "\n";
  }
  return out;
}

void SyntheticKv::write(const std::filesystem::path& dir) const {
  write_bundle(dir / "bundle", tokens, meta, toy);
  io::write_atomic(dir / "corpus.jsonl", to_jsonl(corpus));
  io::write_atomic(dir / "probes.jsonl", to_jsonl(probes));
  io::write_atomic(dir / "test.jsonl", to_jsonl(test));
  io::write_atomic(dir / "seeds.json", seeds_json().dump(2) + "\n");
  std::string stop = "# stopwords\n";
  for (const auto& s : stopwords) stop += s + "\n";
  io::write_atomic(dir / "stopwords.txt", stop);
}

SyntheticKv make_synthetic_kv(std::uint64_t seed) {
  SyntheticKv s;
  s.class_ids = {"Ambiente", "Istruzione", "Trasporti", "Tributi"};
  s.seeds = {{"ambiente", "ambienti"}, {"scuola", "scuole"}, {"trasporto", "trasporti"}, {"tributo", "tributi"}};
  s.stopwords = {"il", "della", "per"};

  // Low ids: scaffold and filler words, which soak up the uniform tail of
  // every distribution when top-k ties are broken by id.
  std::vector<std::string> words = {"Questo", "documento", "parla", "di", ".", ",", "In", "questa",
                                    "frase", "è", "un", "esempio", "il", "della", "per"};
  std::vector<std::string> fillers;
  for (std::size_t i = 0; i < kFillers; ++i) fillers.push_back("f" + std::to_string(i));
  words.insert(words.end(), fillers.begin(), fillers.end());
  std::vector<std::vector<std::string>> triggers(kClasses);
  for (std::size_t c = 0; c < kClasses; ++c) {
    words.insert(words.end(), s.seeds[c].begin(), s.seeds[c].end());
    for (std::size_t j = 0; j < 3; ++j) triggers[c].push_back("t" + std::to_string(c) + std::to_string(j));
    words.insert(words.end(), triggers[c].begin(), triggers[c].end());
  }
  s.planted.resize(kClasses);
  s.related.resize(kClasses);
  for (std::size_t c = 0; c < kClasses; ++c) {
    for (std::size_t j = 0; j < 5; ++j) s.planted[c].push_back("p" + std::to_string(c) + std::to_string(j));
    for (std::size_t j = 0; j < 25; ++j) s.related[c].push_back("r" + std::to_string(c) + "q" + std::to_string(j));
    words.insert(words.end(), s.planted[c].begin(), s.planted[c].end());
    words.insert(words.end(), s.related[c].begin(), s.related[c].end());
  }
  for (std::size_t i = 0; i < 10; ++i) s.confounders.push_back("c" + std::to_string(i));
  words.insert(words.end(), s.confounders.begin(), s.confounders.end());
  s.tokens = bert_vocab(words);
  s.meta = bert_meta();

  // Rules: probe slots (mask right after "di", trigger present) first, then
  // mining slots (trigger present anywhere else); the default is uniform.
  json rules = json::array();
  for (std::size_t c = 0; c < kClasses; ++c) {
    json probs = json::object();
    for (const auto& w : s.planted[c]) probs[w] = 0.08;
    for (std::size_t j = 0; j < 25; ++j) probs[s.related[c][j]] = 0.016 - 0.0005 * static_cast<double>(j);
    probs["c" + std::to_string(5 + c)] = 0.005;
    probs["c" + std::to_string(5 + (c + kClasses - 1) % kClasses)] = 0.05;
    rules.push_back({{"when", {{"contains_any", triggers[c]}, {"prev", "di"}}}, {"probs", probs}});
  }
  for (std::size_t c = 0; c < kClasses; ++c) {
    json probs = json::object();
    for (const auto& w : s.planted[c]) probs[w] = 0.05;
    for (const auto& w : s.related[c]) probs[w] = 0.02;
    for (std::size_t i = 0; i < 5; ++i) probs["c" + std::to_string(i)] = 0.02;
    probs["c" + std::to_string(5 + c)] = 0.03;
    if (c == 0) probs["c9"] = 0.03;
    probs["il"] = 0.01;
    rules.push_back({{"when", {{"contains_any", triggers[c]}}}, {"probs", probs}});
  }
  s.toy = {{"default", {{"uniform", true}}}, {"rules", rules}};

  std::mt19937_64 rng(seed);
  auto pick = [&](const std::vector<std::string>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  auto filler_run = [&](std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + pick(fillers);
    return out;
  };

  for (std::size_t c = 0; c < kClasses; ++c) {
    for (std::size_t d = 0; d < 30; ++d) {
      // Informative: seed plus trigger; uninformative: seed without trigger.
      std::string text = filler_run(2) + " " + pick(triggers[c]) + " " + filler_run(1) + " " + pick(s.seeds[c]) +
                         " " + filler_run(2) + ".";
      if (d % 3 == 0) text += " " + filler_run(2) + " " + pick(s.seeds[c]) + " " + filler_run(3) + ".";
      text += " " + filler_run(4) + ".";
      s.corpus.push_back({"m" + std::to_string(c) + "_" + std::to_string(d), text, std::nullopt, s.class_ids[c]});
    }
    for (std::size_t d = 0; d < 10; ++d) {
      const std::string text = filler_run(3) + " " + pick(triggers[c]) + " " + filler_run(3);
      s.probes.push_back({"p" + std::to_string(c) + "_" + std::to_string(d), text, std::nullopt, s.class_ids[c]});
    }
    for (std::size_t d = 0; d < 15; ++d) {
      const std::string text = filler_run(4) + " " + pick(triggers[c]) + " " + filler_run(2) + " " + pick(triggers[c]);
      s.test.push_back({"x" + std::to_string(c) + "_" + std::to_string(d), text, std::nullopt, s.class_ids[c]});
    }
  }
  return s;
}

}  // namespace cloze::testing
