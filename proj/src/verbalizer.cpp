#include "cloze/verbalizer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cloze/calibration.hpp"
#include "cloze/error.hpp"
#include "cloze/io.hpp"

namespace cloze {

const char* kind_name(VerbalizerKind kind) noexcept {
  switch (kind) {
    case VerbalizerKind::base: return "base";
    case VerbalizerKind::manual: return "manual";
    case VerbalizerKind::knowledgeable: return "knowledgeable";
  }
  return "base";
}

VerbalizerKind parse_kind(std::string_view name) {
  if (name == "base") return VerbalizerKind::base;
  if (name == "manual") return VerbalizerKind::manual;
  if (name == "knowledgeable") return VerbalizerKind::knowledgeable;
  throw Error(ErrorCode::SchemaMismatch, "unknown verbalizer kind '" + std::string(name) + "'");
}

RawVerbalizer RawVerbalizer::from_json(const nlohmann::json& j) {
  RawVerbalizer raw;
  try {
    raw.kind = parse_kind(j.value("kind", std::string("base")));
    for (const auto& c : j.at("classes")) {
      RawClass rc;
      rc.id = c.at("id").get<std::string>();
      for (const auto& w : c.at("words")) {
        if (w.is_string()) {
          rc.words.push_back({w.get<std::string>(), 1.0});
        } else {
          rc.words.push_back({w.at("surface").get<std::string>(), w.value("weight", 1.0)});
        }
      }
      raw.classes.push_back(std::move(rc));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("verbalizer: ") + e.what());
  }
  return raw;
}

RawVerbalizer RawVerbalizer::load(const std::filesystem::path& path) {
  return from_json(io::read_json(path));
}

Verbalizer::Verbalizer(VerbalizerKind kind, std::vector<VerbalizerClass> classes)
    : kind_(kind), classes_(std::move(classes)) {
  if (classes_.empty()) throw Error(ErrorCode::InvalidArgument, "verbalizer has no classes");
  std::set<std::string> ids;
  for (const auto& c : classes_) {
    if (!ids.insert(c.id).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate class id '" + c.id + "'");
    }
    double total = 0.0;
    for (const auto& w : c.words) {
      if (!std::isfinite(w.weight) || w.weight < 0.0) {
        throw Error(ErrorCode::InvalidArgument,
                    "weight of '" + w.surface + "' in " + c.id + " must be finite and >= 0");
      }
      total += w.weight;
    }
    if (c.words.empty() || total <= 0.0) {
      throw Error(ErrorCode::EmptyClassAfterResolution, "class '" + c.id + "' has no usable label words");
    }
  }
}

std::optional<std::size_t> Verbalizer::class_index(std::string_view id) const {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].id == id) return i;
  }
  return std::nullopt;
}

std::vector<std::string> Verbalizer::class_ids() const {
  std::vector<std::string> out;
  out.reserve(classes_.size());
  for (const auto& c : classes_) out.push_back(c.id);
  return out;
}

std::vector<TokenId> Verbalizer::all_token_ids() const {
  std::vector<TokenId> out;
  for (const auto& c : classes_) {
    for (const auto& w : c.words) out.push_back(w.token_id);
  }
  return out;
}

nlohmann::json Verbalizer::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = kind_name(kind_);
  j["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : classes_) {
    nlohmann::ordered_json jc;
    jc["id"] = c.id;
    jc["words"] = nlohmann::ordered_json::array();
    for (const auto& w : c.words) {
      nlohmann::ordered_json jw;
      jw["surface"] = w.surface;
      jw["weight"] = w.weight;
      jc["words"].push_back(std::move(jw));
    }
    j["classes"].push_back(std::move(jc));
  }
  return nlohmann::json(j);
}

std::size_t ClassScores::argmax() const {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "argmax of empty class scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<double> ClassScores::normalized() const {
  std::vector<double> out(values.size());
  if (values.empty()) return out;
  const double m = *std::max_element(values.begin(), values.end());
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += out[i] = std::exp(values[i] - m);
  for (double& x : out) x /= s;
  return out;
}

Verbalizer resolve(const RawVerbalizer& raw, const Tokenizer& tokenizer,
                   std::vector<ResolveWarning>* warnings) {
  std::vector<VerbalizerClass> classes;
  for (const RawClass& rc : raw.classes) {
    if (rc.words.empty()) {
      throw Error(ErrorCode::EmptyClassAfterResolution, "class '" + rc.id + "' lists no words");
    }
    VerbalizerClass vc{rc.id, {}};
    std::set<TokenId> seen;
    for (const RawWord& w : rc.words) {
      const auto id = tokenizer.single_piece_id(w.surface);
      if (!id) {
        if (warnings) warnings->push_back({rc.id, w.surface, "not a single vocabulary piece"});
        continue;
      }
      if (!seen.insert(*id).second) {
        if (warnings) warnings->push_back({rc.id, w.surface, "duplicate of an earlier word"});
        continue;
      }
      vc.words.push_back({w.surface, *id, w.weight});
    }
    if (vc.words.empty()) {
      throw Error(ErrorCode::EmptyClassAfterResolution,
                  "class '" + rc.id + "' has no single-piece label word in the vocabulary");
    }
    classes.push_back(std::move(vc));
  }
  return Verbalizer(raw.kind, std::move(classes));
}

ClassScores score(const Verbalizer& v, const MaskDistribution& d, const CalibrationState* calib) {
  if (calib) calib->validate();
  const bool contextual = calib && calib->mode == CalibrationMode::contextual;
  ClassScores out;
  out.values.reserve(v.class_count());
  for (const auto& c : v.classes()) {
    double num = 0.0, den = 0.0;
    for (const auto& w : c.words) {
      if (w.token_id < 0 || static_cast<std::size_t>(w.token_id) >= d.size()) {
        throw Error(ErrorCode::DimensionMismatch, "label word '" + w.surface + "' id " +
                                                      std::to_string(w.token_id) +
                                                      " outside distribution of " +
                                                      std::to_string(d.size()));
      }
      double s = d.logprobs[static_cast<std::size_t>(w.token_id)];
      if (contextual) s -= calib->cc_logprob(w.token_id);
      num += w.weight * s;
      den += w.weight;
    }
    out.values.push_back(num / den);
  }
  if (calib && calib->mode == CalibrationMode::batch) return apply(*calib, out);
  return out;
}

Verbalizer ablate(const Verbalizer& v, std::string_view class_id,
                  const std::vector<std::string>& surfaces) {
  const auto idx = v.class_index(class_id);
  if (!idx) throw Error(ErrorCode::WordNotFound, "no class '" + std::string(class_id) + "'");
  std::vector<VerbalizerClass> classes = v.classes();
  auto& words = classes[*idx].words;
  for (const auto& s : surfaces) {
    auto it = std::find_if(words.begin(), words.end(), [&](const LabelWord& w) { return w.surface == s; });
    if (it == words.end()) {
      throw Error(ErrorCode::WordNotFound, "'" + s + "' is not a label word of " + std::string(class_id));
    }
    words.erase(it);
  }
  if (words.empty()) {
    throw Error(ErrorCode::EmptyClassAfterResolution,
                "ablation removes every word of " + std::string(class_id));
  }
  return Verbalizer(v.kind(), std::move(classes));
}

}  // namespace cloze
