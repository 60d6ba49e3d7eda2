#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cloze/mlm_backend.hpp"
#include "cloze/tokenizer.hpp"
#include "cloze/vocab.hpp"

namespace cloze {

enum class BackendKind { toy, onnx };

// A model bundle directory: vocab.txt + meta.json + (toy.json | model.onnx).
struct Bundle {
  std::filesystem::path dir;
  BackendKind kind = BackendKind::toy;
  std::shared_ptr<const Vocabulary> vocab;
  std::shared_ptr<const Tokenizer> tokenizer;
  std::shared_ptr<const MaskedLanguageModel> model;
};

// `lowercase` overrides the casing flag of meta.json.
Bundle load_bundle(const std::filesystem::path& dir, std::optional<bool> lowercase = std::nullopt);

struct BundleReport {
  BackendKind kind = BackendKind::toy;
  std::size_t vocab_size = 0;
  std::vector<std::string> problems;
  bool ok() const noexcept { return problems.empty(); }
};

// Structural checks without running the model: files present, special ids in
// range and distinct, meta.json vocab_size and graph_sha256 (when recorded)
// consistent with the emitted files.
BundleReport validate_bundle(const std::filesystem::path& dir);

}  // namespace cloze
