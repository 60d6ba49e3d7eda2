#include "toy_fixture.hpp"

#include <fstream>
#include <stdexcept>

#include <unistd.h>

#include "cloze/io.hpp"

namespace cloze::testing {

std::vector<std::string> bert_vocab(const std::vector<std::string>& words) {
  std::vector<std::string> v{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  v.insert(v.end(), words.begin(), words.end());
  return v;
}

nlohmann::json bert_meta(std::size_t max_len) {
  return {{"pad_id", 0},  {"unk_id", 1},          {"bos_id", 2},
          {"eos_id", 3},  {"mask_id", 4},         {"max_len", max_len},
          {"subtoken_marker", "##"}, {"marker_style", "continuation"}, {"lowercase", false}};
}

VocabInfo info_from_meta(const nlohmann::json& meta) {
  const auto dir = scratch_dir("meta");
  io::write_atomic(dir / "meta.json", meta.dump());
  return read_meta(dir / "meta.json");
}

TokenId ToyModel::id(const std::string& surface) const {
  const auto id = vocab->find(surface);
  if (!id) throw std::runtime_error("no token '" + surface + "'");
  return *id;
}

ToyModel make_toy(const std::vector<std::string>& tokens, const nlohmann::json& meta,
                  const nlohmann::json& toy) {
  ToyModel m;
  m.vocab = std::make_shared<const Vocabulary>(tokens, info_from_meta(meta));
  m.tokenizer = std::make_shared<const Tokenizer>(m.vocab);
  m.model = ToyBackend::from_json_text(toy.dump(), m.vocab);
  return m;
}

void write_bundle(const std::filesystem::path& dir, const std::vector<std::string>& tokens,
                  const nlohmann::json& meta, const nlohmann::json& toy) {
  std::filesystem::create_directories(dir);
  std::string vocab;
  for (const auto& t : tokens) vocab += t + "\n";
  io::write_atomic(dir / "vocab.txt", vocab);
  nlohmann::json m = meta;
  m["vocab_size"] = tokens.size();
  io::write_atomic(dir / "meta.json", m.dump(2) + "\n");
  io::write_atomic(dir / "toy.json", toy.dump(2) + "\n");
}

std::filesystem::path scratch_dir(const std::string& name) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("cloze_test_" + std::to_string(::getpid()) + "_" + name + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace cloze::testing
