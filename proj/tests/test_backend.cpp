#include <cmath>
#include <filesystem>

#include "cloze/bundle.hpp"
#include "cloze/error.hpp"
#include "cloze/io.hpp"
#include "cloze/mlm_backend.hpp"
#include "cloze/toy_backend.hpp"
#include "doctest.h"
#include "support/toy_fixture.hpp"

using namespace cloze;
using namespace cloze::testing;
using nlohmann::json;

namespace {

// Ten tokens: five specials and A..E.
ToyModel ten_token_model(const json& toy) { return make_toy(bert_vocab({"A", "B", "C", "D", "E"}), bert_meta(), toy); }

TokenSequence masked(std::vector<TokenId> ids, std::size_t pos) {
  ids[pos] = 4;
  return {ids, {pos}};
}

class FakeLogits final : public LogitsSource {
 public:
  explicit FakeLogits(VocabInfo info) : info_(std::move(info)) {}
  const VocabInfo& vocab_info() const noexcept override { return info_; }
  std::vector<double> logits(std::span<const TokenId> ids, std::size_t position) const override {
    std::vector<double> out(info_.size);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 100.0 + static_cast<double>(i) * 0.5 + position;
    out[static_cast<std::size_t>(ids.front())] += 3.0;
    return out;
  }

 private:
  VocabInfo info_;
};

}  // namespace

TEST_CASE("uniform toy table") {
  const ToyModel m = ten_token_model({{"default", {{"uniform", true}}}});
  const MaskDistribution d = m.model->predict_mask(masked({2, 5, 4, 3}, 2), 2);
  REQUIRE(d.size() == 10);
  for (double lp : d.logprobs) CHECK(lp == doctest::Approx(std::log(0.1)).epsilon(1e-15));
  CHECK(d.is_normalized());
}

TEST_CASE("rule table reads back configured probabilities") {
  const json toy = {{"default", {{"uniform", true}}},
                    {"rules", json::array({{{"when", {{"prev", "A"}}}, {"probs", {{"B", 0.9}}}}})}};
  const ToyModel m = ten_token_model(toy);
  const MaskDistribution after_a = m.model->predict_mask(masked({2, m.id("A"), 4, 3}, 2), 2);
  CHECK(after_a[m.id("B")] == doctest::Approx(std::log(0.9)).epsilon(1e-14));
  CHECK(after_a[m.id("C")] == doctest::Approx(std::log(0.1 / 9.0)).epsilon(1e-14));
  CHECK(after_a.is_normalized(1e-12));
  const MaskDistribution other = m.model->predict_mask(masked({2, m.id("C"), 4, 3}, 2), 2);
  CHECK(other[m.id("B")] == doctest::Approx(std::log(0.1)));
}

TEST_CASE("conditions are conjunctive and first match wins") {
  const json toy = {
      {"default", {{"uniform", true}}},
      {"rules", json::array({
                    {{"when", {{"prev", "A"}, {"contains", json::array({"E"})}}}, {"probs", {{"C", 0.5}}}},
                    {{"when", {{"prev", "A"}}}, {"probs", {{"D", 0.5}}}},
                    {{"when", {{"position", 1}}}, {"logits", {{"E", 4.0}}}, {"default_logit", 0.0}},
                })}};
  const ToyModel m = ten_token_model(toy);
  CHECK(m.model->rule_count() == 3);
  auto d1 = m.model->predict_mask(masked({2, m.id("A"), 4, m.id("E"), 3}, 2), 2);
  CHECK(d1[m.id("C")] == doctest::Approx(std::log(0.5)));
  auto d2 = m.model->predict_mask(masked({2, m.id("A"), 4, 3}, 2), 2);
  CHECK(d2[m.id("D")] == doctest::Approx(std::log(0.5)));
  auto d3 = m.model->predict_mask(masked({2, 4, m.id("B"), 3}, 1), 1);
  CHECK(d3[m.id("E")] == doctest::Approx(4.0 - std::log(std::exp(4.0) + 9.0)));
}

TEST_CASE("toy table validation") {
  const auto vocab = bert_vocab({"A", "B"});
  CHECK_THROWS_AS(make_toy(vocab, bert_meta(), {{"default", {{"probs", {{"A", 1.5}}}}}}), Error);
  CHECK_THROWS_AS(make_toy(vocab, bert_meta(), {{"default", {{"probs", {{"Z", 0.5}}}}}}), Error);
  // All mass on listed tokens would leave unlisted tokens at zero probability.
  CHECK_THROWS_AS(make_toy(vocab, bert_meta(), {{"default", {{"probs", {{"A", 0.5}, {"B", 0.5}}}}}}), Error);
}

TEST_CASE("predict_mask preconditions") {
  const ToyModel m = ten_token_model({{"default", {{"uniform", true}}}});
  CHECK_THROWS_AS(m.model->predict_mask({{2, 5, 6, 3}, {1}}, 1), Error);
  try {
    m.model->predict_mask({{2, 4, 6, 3}, {1}}, 2);
    FAIL("expected PositionNotMasked");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PositionNotMasked);
  }
  std::vector<TokenId> long_ids(513, 5);
  long_ids[10] = 4;
  try {
    m.model->predict_mask({long_ids, {10}}, 10);
    FAIL("expected SequenceTooLong");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SequenceTooLong);
  }
  long_ids.resize(512);
  CHECK_NOTHROW(m.model->predict_mask({long_ids, {10}}, 10));
}

TEST_CASE("batch_predict equals per-item predict_mask") {
  const json toy = {{"default", {{"uniform", true}}},
                    {"rules", json::array({{{"when", {{"next", "C"}}}, {"probs", {{"D", 0.3}}}}})}};
  const ToyModel m = ten_token_model(toy);
  CHECK(m.model->batch_predict({}).empty());
  std::vector<TokenSequence> seqs{masked({2, 5, 4, m.id("C"), 3}, 2), masked({2, 4, 7, 3}, 1)};
  const auto out = m.model->batch_predict(seqs);
  REQUIRE(out.size() == 2);
  CHECK(out[0].logprobs == m.model->predict_mask(seqs[0], 2).logprobs);
  CHECK(out[1].logprobs == m.model->predict_mask(seqs[1], 1).logprobs);

  std::vector<TokenSequence> same(100, seqs[0]);
  const auto many = m.model->batch_predict(same);
  for (const auto& d : many) CHECK(d.logprobs == many.front().logprobs);

  seqs.push_back({{2, 5, 3}, {1}});
  try {
    m.model->batch_predict(seqs);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PositionNotMasked);
    REQUIRE(e.item_index());
    CHECK(*e.item_index() == 2);
  }
}

TEST_CASE("normalizing backend applies log-softmax") {
  const VocabInfo info = Vocabulary(bert_vocab({"A", "B", "C"}), info_from_meta(bert_meta())).info();
  NormalizingBackend nb(std::make_unique<FakeLogits>(info));
  const MaskDistribution d = nb.predict_mask({{2, 4, 3}, {1}}, 1);
  CHECK(d.is_normalized(1e-12));
  // Shift invariance of softmax: the oracle uses the unshifted row.
  std::vector<double> raw(info.size);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<double>(i) * 0.5 + 1.0;
  raw[2] += 3.0;
  long double z = 0.0L;
  for (double r : raw) z += std::exp(static_cast<long double>(r));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    CHECK(d.logprobs[i] == doctest::Approx(raw[i] - static_cast<double>(std::log(z))).epsilon(1e-13));
  }
}

TEST_CASE("onnx backend availability") {
  if (!onnx_runtime_available()) {
    const VocabInfo info = Vocabulary(bert_vocab({"A"}), info_from_meta(bert_meta())).info();
    try {
      make_onnx_logits_source("missing.onnx", info);
      FAIL("expected BackendUnavailable");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BackendUnavailable);
    }
  }
}

TEST_CASE("bundle loading and validation") {
  const auto dir = scratch_dir("bundle");
  const auto tokens = bert_vocab({"A", "B"});
  write_bundle(dir, tokens, bert_meta(), {{"default", {{"uniform", true}}}});
  const Bundle b = load_bundle(dir);
  CHECK(b.kind == BackendKind::toy);
  CHECK(b.vocab->size() == 7);
  CHECK(validate_bundle(dir).ok());

  auto meta = bert_meta();
  meta["vocab_size"] = 99;
  io::write_atomic(dir / "meta.json", meta.dump());
  CHECK_FALSE(validate_bundle(dir).ok());

  const auto graph_dir = scratch_dir("graph");
  write_bundle(graph_dir, tokens, bert_meta(), json::object());
  std::filesystem::remove(graph_dir / "toy.json");
  io::write_atomic(graph_dir / "model.onnx", "graph-bytes");
  meta = bert_meta();
  meta["vocab_size"] = tokens.size();
  meta["graph_sha256"] = io::sha256_hex("graph-bytes");
  io::write_atomic(graph_dir / "meta.json", meta.dump());
  const BundleReport ok = validate_bundle(graph_dir);
  CHECK(ok.kind == BackendKind::onnx);
  CHECK(ok.ok());
  io::write_atomic(graph_dir / "model.onnx", "tampered");
  CHECK_FALSE(validate_bundle(graph_dir).ok());

  CHECK_FALSE(validate_bundle(scratch_dir("empty")).ok());
  CHECK_THROWS_AS(load_bundle(dir / "nope"), Error);
}
