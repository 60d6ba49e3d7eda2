#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace cloze {

struct ClassMetrics {
  std::string class_id;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
  std::size_t true_positives = 0;
  // Zero predicted and zero gold: every metric is reported as 0.
  bool no_support = false;
  bool precision_undefined = false;
  bool recall_undefined = false;
};

struct EvalReport {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
  std::vector<ClassMetrics> per_class;
  std::size_t total = 0;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  // Macro average over classes with gold support > 0 only.
  double macro_f1_supported = 0.0;
  double weighted_f1 = 0.0;
  double micro_f1 = 0.0;

  nlohmann::json to_json() const;
};

// predictions: (record id, predicted class). golds: record id -> gold class.
// `classes` fixes the row order; labels seen in the data but missing from it
// are appended in sorted order. Throws MissingGold for an id without gold.
EvalReport evaluate(const std::vector<std::pair<std::string, std::string>>& predictions,
                    const std::map<std::string, std::string>& golds,
                    std::vector<std::string> classes = {});

struct RenderedTable {
  std::string text;
  std::string csv;
};

// One F1 column per report, one row per class, then MacAvg / MacAvg* (zero
// support excluded) / WeAvg / MicAvg rows. Column order follows `reports`.
RenderedTable render_table(const std::vector<std::pair<std::string, EvalReport>>& reports);

}  // namespace cloze
