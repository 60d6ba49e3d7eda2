#include "cloze/toy_backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cloze/error.hpp"
#include "cloze/kernels.hpp"
#include "json.hpp"

namespace cloze {
namespace {

using nlohmann::json;

bool holds(const TokenSequence& seq, std::size_t mask_pos, TokenId id) {
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (i != mask_pos && seq.ids[i] == id) return true;
  }
  return false;
}

TokenId resolve_token(const json& j, const Vocabulary& vocab) {
  if (j.is_number_integer()) {
    const auto id = j.get<long long>();
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
      throw Error(ErrorCode::InvalidArgument, "toy token id " + std::to_string(id) +
                                                  " outside vocabulary");
    }
    return static_cast<TokenId>(id);
  }
  if (!j.is_string()) throw Error(ErrorCode::InvalidArgument, "toy token must be a string or id");
  const auto id = vocab.find(j.get<std::string>());
  if (!id) {
    throw Error(ErrorCode::InvalidArgument,
                "toy token '" + j.get<std::string>() + "' not in vocabulary");
  }
  return *id;
}

std::vector<TokenId> resolve_list(const json& j, const Vocabulary& vocab) {
  std::vector<TokenId> out;
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(resolve_token(e, vocab));
  } else {
    out.push_back(resolve_token(j, vocab));
  }
  return out;
}

std::vector<std::pair<TokenId, double>> resolve_weights(const json& j, const Vocabulary& vocab) {
  std::vector<std::pair<TokenId, double>> out;
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) out.emplace_back(resolve_token(json(k), vocab), v.get<double>());
  } else if (j.is_array()) {
    // [[tok, value], ...]
    for (const auto& e : j) out.emplace_back(resolve_token(e.at(0), vocab), e.at(1).get<double>());
  } else {
    throw Error(ErrorCode::InvalidArgument, "toy weights must be an object or a list of pairs");
  }
  return out;
}

std::vector<double> parse_distribution(const json& j, const Vocabulary& vocab) {
  if (j.contains("logits")) {
    return distribution_from_logits(vocab.size(), resolve_weights(j["logits"], vocab),
                                    j.value("default_logit", 0.0));
  }
  if (j.contains("probs")) return distribution_from_probs(vocab.size(), resolve_weights(j["probs"], vocab));
  if (j.value("uniform", false)) return distribution_from_probs(vocab.size(), {});
  throw Error(ErrorCode::InvalidArgument, "toy distribution needs 'probs', 'logits' or 'uniform'");
}

ToyCondition parse_condition(const json& j, const Vocabulary& vocab) {
  ToyCondition c;
  if (j.is_null()) return c;
  for (const auto& [key, value] : j.items()) {
    if (key == "prev") {
      c.prev = resolve_token(value, vocab);
    } else if (key == "next") {
      c.next = resolve_token(value, vocab);
    } else if (key == "position") {
      c.position = value.get<std::size_t>();
    } else if (key == "contains") {
      c.contains_all = resolve_list(value, vocab);
    } else if (key == "contains_any") {
      c.contains_any = resolve_list(value, vocab);
    } else if (key == "not_contains") {
      c.not_contains = resolve_list(value, vocab);
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown toy condition '" + key + "'");
    }
  }
  return c;
}

}  // namespace

bool ToyCondition::matches(const TokenSequence& seq, std::size_t mask_pos) const {
  if (position && *position != mask_pos) return false;
  if (prev && (mask_pos == 0 || seq.ids[mask_pos - 1] != *prev)) return false;
  if (next && (mask_pos + 1 >= seq.ids.size() || seq.ids[mask_pos + 1] != *next)) return false;
  for (TokenId id : contains_all) {
    if (!holds(seq, mask_pos, id)) return false;
  }
  if (!contains_any.empty() &&
      std::none_of(contains_any.begin(), contains_any.end(),
                   [&](TokenId id) { return holds(seq, mask_pos, id); })) {
    return false;
  }
  for (TokenId id : not_contains) {
    if (holds(seq, mask_pos, id)) return false;
  }
  return true;
}

std::vector<double> distribution_from_probs(std::size_t vocab_size,
                                            const std::vector<std::pair<TokenId, double>>& probs) {
  std::vector<double> p(vocab_size, -1.0);
  double listed = 0.0;
  for (const auto& [id, v] : probs) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw Error(ErrorCode::InvalidArgument, "probability for token outside vocabulary");
    }
    if (!(v > 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "toy probabilities must lie in (0, 1]");
    }
    if (p[static_cast<std::size_t>(id)] >= 0.0) {
      throw Error(ErrorCode::InvalidArgument, "token listed twice in toy probabilities");
    }
    p[static_cast<std::size_t>(id)] = v;
    listed += v;
  }
  const auto unlisted = static_cast<std::size_t>(std::count(p.begin(), p.end(), -1.0));
  const double rest = 1.0 - listed;
  if (listed > 1.0 + 1e-12 || (unlisted > 0 && rest <= 0.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "toy probabilities leave no mass for unlisted tokens; use logits instead");
  }
  const double each = unlisted > 0 ? rest / static_cast<double>(unlisted) : 0.0;
  std::vector<double> out(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) out[i] = std::log(p[i] < 0.0 ? each : p[i]);
  return out;
}

std::vector<double> distribution_from_logits(std::size_t vocab_size,
                                             const std::vector<std::pair<TokenId, double>>& logits,
                                             double default_logit) {
  std::vector<double> out(vocab_size, default_logit);
  for (const auto& [id, v] : logits) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw Error(ErrorCode::InvalidArgument, "logit for token outside vocabulary");
    }
    out[static_cast<std::size_t>(id)] = v;
  }
  if (!kernels::all_finite(out)) throw Error(ErrorCode::InvalidArgument, "toy logits must be finite");
  kernels::log_softmax_inplace(out);
  return out;
}

ToyBackend::ToyBackend(std::shared_ptr<const Vocabulary> vocab, std::vector<ToyRule> rules,
                       std::vector<double> default_logprobs)
    : vocab_(std::move(vocab)), rules_(std::move(rules)), default_(std::move(default_logprobs)) {
  auto check = [&](const std::vector<double>& d, const std::string& what) {
    MaskDistribution probe{d};
    if (d.size() != vocab_->size() || !probe.is_normalized(1e-9)) {
      throw Error(ErrorCode::InvalidArgument, what + " is not a normalized distribution");
    }
  };
  check(default_, "toy default distribution");
  for (std::size_t i = 0; i < rules_.size(); ++i) check(rules_[i].logprobs, "toy rule " + std::to_string(i));
}

std::unique_ptr<ToyBackend> ToyBackend::from_json_text(std::string_view text,
                                                       std::shared_ptr<const Vocabulary> vocab) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BundleInvalid, std::string("toy.json: ") + e.what());
  }
  try {
    std::vector<double> def = j.contains("default") ? parse_distribution(j["default"], *vocab)
                                                    : distribution_from_probs(vocab->size(), {});
    std::vector<ToyRule> rules;
    if (j.contains("rules")) {
      for (const auto& r : j["rules"]) {
        rules.push_back({parse_condition(r.value("when", json()), *vocab), parse_distribution(r, *vocab)});
      }
    }
    return std::make_unique<ToyBackend>(std::move(vocab), std::move(rules), std::move(def));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BundleInvalid, std::string("toy.json: ") + e.what());
  }
}

std::unique_ptr<ToyBackend> ToyBackend::load(const std::filesystem::path& toy_json,
                                             std::shared_ptr<const Vocabulary> vocab) {
  std::ifstream in(toy_json);
  if (!in) throw Error(ErrorCode::FileNotFound, toy_json.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), std::move(vocab));
}

MaskDistribution ToyBackend::predict_validated(const TokenSequence& seq, std::size_t position) const {
  for (const ToyRule& r : rules_) {
    if (r.when.matches(seq, position)) return MaskDistribution{r.logprobs};
  }
  return MaskDistribution{default_};
}

}  // namespace cloze
