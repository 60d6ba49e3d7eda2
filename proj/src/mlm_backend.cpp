#include "cloze/mlm_backend.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "cloze/error.hpp"
#include "cloze/kernels.hpp"
#include "cloze/parallel.hpp"

namespace cloze {

bool MaskDistribution::is_normalized(double tol) const {
  if (logprobs.empty() || !kernels::all_finite(logprobs)) return false;
  return std::abs(kernels::log_sum_exp(logprobs)) <= tol;
}

MaskDistribution MaskedLanguageModel::predict_mask(const TokenSequence& seq,
                                                   std::size_t position) const {
  const VocabInfo& info = vocab_info();
  if (seq.ids.size() > info.max_len) {
    throw Error(ErrorCode::SequenceTooLong, "sequence of " + std::to_string(seq.ids.size()) +
                                                " tokens exceeds max_len " +
                                                std::to_string(info.max_len));
  }
  const bool listed = std::find(seq.mask_positions.begin(), seq.mask_positions.end(), position) !=
                      seq.mask_positions.end();
  if (!listed || position >= seq.ids.size() || seq.ids[position] != info.mask_id) {
    throw Error(ErrorCode::PositionNotMasked,
                "position " + std::to_string(position) + " does not hold the mask token");
  }
  for (TokenId id : seq.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= info.size) {
      throw Error(ErrorCode::DimensionMismatch, "token id " + std::to_string(id) +
                                                    " outside vocabulary");
    }
  }
  return predict_validated(seq, position);
}

std::vector<MaskDistribution> MaskedLanguageModel::batch_predict(
    std::span<const TokenSequence> seqs) const {
  std::vector<MaskDistribution> out(seqs.size());
  std::vector<std::optional<Error>> failures(seqs.size());
  parallel_for(seqs.size(), [&](std::size_t i) {
    const TokenSequence& s = seqs[i];
    try {
      if (s.mask_positions.size() != 1) {
        throw Error(ErrorCode::PositionNotMasked,
                    "batch items need exactly one mask position, got " +
                        std::to_string(s.mask_positions.size()));
      }
      out[i] = predict_mask(s, s.mask_positions.front());
    } catch (const Error& e) {
      failures[i] = e;
    }
  });
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (failures[i]) throw Error(failures[i]->code(), failures[i]->detail(), i);
  }
  return out;
}

NormalizingBackend::NormalizingBackend(std::unique_ptr<const LogitsSource> source)
    : source_(std::move(source)) {
  if (!source_) throw Error(ErrorCode::InvalidArgument, "null logits source");
  source_->vocab_info().validate();
}

MaskDistribution NormalizingBackend::predict_validated(const TokenSequence& seq,
                                                       std::size_t position) const {
  MaskDistribution d{source_->logits(seq.ids, position)};
  if (d.logprobs.size() != vocab_info().size) {
    throw Error(ErrorCode::DimensionMismatch,
                "logits row of " + std::to_string(d.logprobs.size()) + " for vocabulary of " +
                    std::to_string(vocab_info().size));
  }
  if (!kernels::all_finite(d.logprobs)) {
    throw Error(ErrorCode::InvalidArgument, "model produced non-finite logits");
  }
  kernels::log_softmax_inplace(d.logprobs);
  return d;
}

}  // namespace cloze
