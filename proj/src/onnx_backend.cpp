#include <string>

#include "cloze/error.hpp"
#include "cloze/mlm_backend.hpp"

#ifdef CLOZE_HAVE_ONNXRUNTIME
#include <onnxruntime_cxx_api.h>

#include <array>
#include <mutex>
#endif

namespace cloze {

#ifdef CLOZE_HAVE_ONNXRUNTIME
namespace {

class OnnxLogitsSource final : public LogitsSource {
 public:
  OnnxLogitsSource(const std::filesystem::path& model, VocabInfo info)
      : info_(std::move(info)), env_(ORT_LOGGING_LEVEL_WARNING, "cloze") {
    Ort::SessionOptions opts;
    opts.SetIntraOpNumThreads(1);
    opts.SetGraphOptimizationLevel(GraphOptimizationLevel::ORT_ENABLE_ALL);
    session_ = std::make_unique<Ort::Session>(env_, model.c_str(), opts);
    Ort::AllocatorWithDefaultOptions alloc;
    if (session_->GetInputCount() < 2 || session_->GetOutputCount() < 1) {
      throw Error(ErrorCode::BundleInvalid,
                  "model.onnx must take (input_ids, attention_mask) and return logits");
    }
    for (std::size_t i = 0; i < 2; ++i) {
      input_names_.emplace_back(session_->GetInputNameAllocated(i, alloc).get());
    }
    output_name_ = session_->GetOutputNameAllocated(0, alloc).get();
  }

  const VocabInfo& vocab_info() const noexcept override { return info_; }

  std::vector<double> logits(std::span<const TokenId> ids, std::size_t position) const override {
    const auto n = static_cast<std::int64_t>(ids.size());
    std::vector<std::int64_t> input_ids(ids.begin(), ids.end());
    std::vector<std::int64_t> attention(ids.size(), 1);
    const std::array<std::int64_t, 2> shape{1, n};
    auto mem = Ort::MemoryInfo::CreateCpu(OrtArenaAllocator, OrtMemTypeDefault);
    std::array<Ort::Value, 2> inputs{
        Ort::Value::CreateTensor<std::int64_t>(mem, input_ids.data(), input_ids.size(), shape.data(), 2),
        Ort::Value::CreateTensor<std::int64_t>(mem, attention.data(), attention.size(), shape.data(), 2)};
    const std::array<const char*, 2> in_names{input_names_[0].c_str(), input_names_[1].c_str()};
    const char* out_name = output_name_.c_str();
    std::vector<Ort::Value> out;
    {
      // Ort::Session::Run is thread-safe, but the run options are shared.
      std::lock_guard<std::mutex> lock(mutex_);
      out = session_->Run(Ort::RunOptions{nullptr}, in_names.data(), inputs.data(), 2, &out_name, 1);
    }
    const auto info = out.front().GetTensorTypeAndShapeInfo();
    const std::vector<std::int64_t> dims = info.GetShape();
    if (dims.size() != 3 || dims[1] != n || static_cast<std::size_t>(dims[2]) != info_.size) {
      throw Error(ErrorCode::DimensionMismatch, "unexpected logits shape from model.onnx");
    }
    const float* data = out.front().GetTensorData<float>();
    const float* row = data + position * info_.size;
    return std::vector<double>(row, row + info_.size);
  }

 private:
  VocabInfo info_;
  Ort::Env env_;
  std::unique_ptr<Ort::Session> session_;
  std::vector<std::string> input_names_;
  std::string output_name_;
  mutable std::mutex mutex_;
};

}  // namespace

bool onnx_runtime_available() noexcept { return true; }

std::unique_ptr<const LogitsSource> make_onnx_logits_source(const std::filesystem::path& model_onnx,
                                                            VocabInfo info) {
  try {
    return std::make_unique<OnnxLogitsSource>(model_onnx, std::move(info));
  } catch (const Ort::Exception& e) {
    throw Error(ErrorCode::BundleInvalid, model_onnx.string() + ": " + e.what());
  }
}

#else

bool onnx_runtime_available() noexcept { return false; }

std::unique_ptr<const LogitsSource> make_onnx_logits_source(const std::filesystem::path& model_onnx,
                                                            VocabInfo) {
  throw Error(ErrorCode::BackendUnavailable,
              "built without ONNX Runtime; cannot load " + model_onnx.string());
}

#endif

}  // namespace cloze
