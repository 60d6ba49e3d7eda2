#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "cloze/vocab.hpp"

namespace cloze {

struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<std::size_t> mask_positions;
};

// Natural-log probabilities over the whole vocabulary at one mask position.
struct MaskDistribution {
  std::vector<double> logprobs;

  std::size_t size() const noexcept { return logprobs.size(); }
  double operator[](TokenId id) const { return logprobs.at(static_cast<std::size_t>(id)); }

  // |logsumexp - 0| <= tol and every entry finite.
  bool is_normalized(double tol = 1e-5) const;
};

// "Tokens in, mask-position log-probabilities out". Implementations are
// immutable after construction and safe for concurrent const use.
class MaskedLanguageModel {
 public:
  virtual ~MaskedLanguageModel() = default;

  virtual const VocabInfo& vocab_info() const noexcept = 0;
  std::size_t max_len() const noexcept { return vocab_info().max_len; }

  // Throws PositionNotMasked unless position is listed in seq.mask_positions
  // and holds mask_id; SequenceTooLong when seq exceeds max_len.
  MaskDistribution predict_mask(const TokenSequence& seq, std::size_t position) const;

  // One query per sequence, each at its single mask position. Output order
  // matches input order; the first failing item is rethrown with its index.
  std::vector<MaskDistribution> batch_predict(std::span<const TokenSequence> seqs) const;

 protected:
  virtual MaskDistribution predict_validated(const TokenSequence& seq,
                                             std::size_t position) const = 0;
};

// Raw scores for one position, before normalization.
class LogitsSource {
 public:
  virtual ~LogitsSource() = default;
  virtual const VocabInfo& vocab_info() const noexcept = 0;
  // Logits of length vocab_info().size at `position` for an unpadded sequence.
  virtual std::vector<double> logits(std::span<const TokenId> ids, std::size_t position) const = 0;
};

// Wraps a LogitsSource and applies log-softmax; the only normalization point
// for graph-backed models.
class NormalizingBackend final : public MaskedLanguageModel {
 public:
  explicit NormalizingBackend(std::unique_ptr<const LogitsSource> source);
  const VocabInfo& vocab_info() const noexcept override { return source_->vocab_info(); }

 protected:
  MaskDistribution predict_validated(const TokenSequence& seq, std::size_t position) const override;

 private:
  std::unique_ptr<const LogitsSource> source_;
};

// True when the library was built against ONNX Runtime.
bool onnx_runtime_available() noexcept;

// Session over model.onnx with inputs (input_ids, attention_mask) and output
// logits [batch, seq, vocab]. Throws BackendUnavailable without ONNX Runtime.
std::unique_ptr<const LogitsSource> make_onnx_logits_source(const std::filesystem::path& model_onnx,
                                                            VocabInfo info);

}  // namespace cloze
