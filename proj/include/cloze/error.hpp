#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace cloze {

enum class ErrorCode {
  PositionNotMasked,
  SequenceTooLong,
  EmptyInput,
  MissingEntity,
  TemplateMalformed,
  PromptTooLong,
  EmptyClassAfterResolution,
  WordNotFound,
  DimensionMismatch,
  ModeMismatch,
  EmptyBatch,
  NoOccurrencesForClass,
  MultiPieceGold,
  AllSentencesFailed,
  MissingGold,
  SchemaMismatch,
  ConfigInvalid,
  FileNotFound,
  BundleInvalid,
  BackendUnavailable,
  InvalidArgument,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  Error(ErrorCode code, const std::string& message, std::size_t item_index)
      : std::runtime_error(std::string(error_code_name(code)) + ": item " +
                           std::to_string(item_index) + ": " + message),
        code_(code),
        detail_(message),
        item_index_(item_index) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> item_index() const noexcept { return item_index_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
  std::optional<std::size_t> item_index_;
};

}  // namespace cloze
