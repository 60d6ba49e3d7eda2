#include "cloze/bundle.hpp"

#include "cloze/error.hpp"
#include "cloze/io.hpp"
#include "cloze/toy_backend.hpp"

namespace cloze {
namespace fs = std::filesystem;

Bundle load_bundle(const fs::path& dir, std::optional<bool> lowercase) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::FileNotFound, "bundle directory " + dir.string());
  Bundle b;
  b.dir = dir;
  VocabInfo info = read_meta(dir / "meta.json");
  if (lowercase) info.lowercase = *lowercase;
  b.vocab = std::make_shared<const Vocabulary>(Vocabulary::load(dir / "vocab.txt", info));
  b.tokenizer = std::make_shared<const Tokenizer>(b.vocab);
  if (fs::exists(dir / "toy.json")) {
    b.kind = BackendKind::toy;
    b.model = ToyBackend::load(dir / "toy.json", b.vocab);
  } else if (fs::exists(dir / "model.onnx")) {
    b.kind = BackendKind::onnx;
    b.model = std::make_shared<NormalizingBackend>(
        make_onnx_logits_source(dir / "model.onnx", b.vocab->info()));
  } else {
    throw Error(ErrorCode::BundleInvalid, dir.string() + " holds neither toy.json nor model.onnx");
  }
  return b;
}

BundleReport validate_bundle(const fs::path& dir) {
  BundleReport r;
  auto problem = [&](std::string s) { r.problems.push_back(std::move(s)); };
  if (!fs::is_directory(dir)) {
    problem("not a directory: " + dir.string());
    return r;
  }
  for (const char* f : {"vocab.txt", "meta.json"}) {
    if (!fs::exists(dir / f)) problem(std::string("missing ") + f);
  }
  const bool toy = fs::exists(dir / "toy.json");
  const bool onnx = fs::exists(dir / "model.onnx");
  if (!toy && !onnx) problem("missing model.onnx (or toy.json)");
  r.kind = toy ? BackendKind::toy : BackendKind::onnx;
  if (!r.ok()) return r;

  nlohmann::json meta;
  try {
    meta = io::read_json(dir / "meta.json");
    const VocabInfo info = read_meta(dir / "meta.json");
    const Vocabulary vocab = Vocabulary::load(dir / "vocab.txt", info);
    r.vocab_size = vocab.size();
    if (meta.contains("vocab_size") && meta["vocab_size"].get<std::size_t>() != vocab.size()) {
      problem("meta.json vocab_size " + meta["vocab_size"].dump() + " != vocab.txt lines " +
              std::to_string(vocab.size()));
    }
    if (toy) {
      const auto shared = std::make_shared<const Vocabulary>(vocab);
      (void)ToyBackend::load(dir / "toy.json", shared);
    }
  } catch (const Error& e) {
    problem(e.what());
  } catch (const nlohmann::json::exception& e) {
    problem(std::string("meta.json: ") + e.what());
  }
  if (onnx && meta.contains("graph_sha256")) {
    const std::string want = meta["graph_sha256"].get<std::string>();
    const std::string got = io::sha256_file(dir / "model.onnx");
    if (want != got) problem("model.onnx checksum " + got + " does not match meta.json " + want);
  }
  return r;
}

}  // namespace cloze
