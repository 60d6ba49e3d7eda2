#include "cloze/error.hpp"

namespace cloze {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::PositionNotMasked: return "PositionNotMasked";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingEntity: return "MissingEntity";
    case ErrorCode::TemplateMalformed: return "TemplateMalformed";
    case ErrorCode::PromptTooLong: return "PromptTooLong";
    case ErrorCode::EmptyClassAfterResolution: return "EmptyClassAfterResolution";
    case ErrorCode::WordNotFound: return "WordNotFound";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ModeMismatch: return "ModeMismatch";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::NoOccurrencesForClass: return "NoOccurrencesForClass";
    case ErrorCode::MultiPieceGold: return "MultiPieceGold";
    case ErrorCode::AllSentencesFailed: return "AllSentencesFailed";
    case ErrorCode::MissingGold: return "MissingGold";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::BundleInvalid: return "BundleInvalid";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace cloze
