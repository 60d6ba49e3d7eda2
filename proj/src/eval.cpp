#include "cloze/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cloze/error.hpp"

namespace cloze {

EvalReport evaluate(const std::vector<std::pair<std::string, std::string>>& predictions,
                    const std::map<std::string, std::string>& golds,
                    std::vector<std::string> classes) {
  std::set<std::string> seen;
  for (const auto& [id, pred] : predictions) {
    auto g = golds.find(id);
    if (g == golds.end()) throw Error(ErrorCode::MissingGold, "no gold label for '" + id + "'");
    seen.insert(pred);
    seen.insert(g->second);
  }
  const std::set<std::string> listed(classes.begin(), classes.end());
  if (listed.size() != classes.size()) throw Error(ErrorCode::InvalidArgument, "duplicate class in list");
  for (const auto& c : seen) {
    if (!listed.count(c)) classes.push_back(c);
  }

  EvalReport r;
  r.classes = classes;
  const std::size_t k = classes.size();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < k; ++i) index.emplace(classes[i], i);
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (const auto& [id, pred] : predictions) {
    ++r.confusion[index.at(golds.at(id))][index.at(pred)];
  }
  r.total = predictions.size();

  std::size_t correct = 0, supported = 0;
  double sum_f1_supported = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    ClassMetrics m;
    m.class_id = classes[c];
    m.true_positives = r.confusion[c][c];
    for (std::size_t j = 0; j < k; ++j) {
      m.support += r.confusion[c][j];
      m.predicted += r.confusion[j][c];
    }
    m.precision_undefined = m.predicted == 0;
    m.recall_undefined = m.support == 0;
    m.no_support = m.precision_undefined && m.recall_undefined;
    m.precision = m.predicted ? static_cast<double>(m.true_positives) / static_cast<double>(m.predicted) : 0.0;
    m.recall = m.support ? static_cast<double>(m.true_positives) / static_cast<double>(m.support) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    correct += m.true_positives;
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
    r.weighted_f1 += m.f1 * static_cast<double>(m.support);
    if (m.support > 0) {
      ++supported;
      sum_f1_supported += m.f1;
    }
    r.per_class.push_back(std::move(m));
  }
  if (k > 0) {
    r.macro_precision /= static_cast<double>(k);
    r.macro_recall /= static_cast<double>(k);
    r.macro_f1 /= static_cast<double>(k);
  }
  r.macro_f1_supported = supported ? sum_f1_supported / static_cast<double>(supported) : 0.0;
  if (r.total > 0) {
    r.weighted_f1 /= static_cast<double>(r.total);
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
  }
  // Single-label: every error is one FP and one FN, so micro P = R = accuracy.
  r.micro_f1 = r.accuracy;
  return r;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["total"] = total;
  j["accuracy"] = accuracy;
  j["macro_precision"] = macro_precision;
  j["macro_recall"] = macro_recall;
  j["macro_f1"] = macro_f1;
  j["macro_f1_supported"] = macro_f1_supported;
  j["weighted_f1"] = weighted_f1;
  j["micro_f1"] = micro_f1;
  j["classes"] = classes;
  j["confusion"] = confusion;
  j["per_class"] = nlohmann::ordered_json::array();
  for (const auto& m : per_class) {
    nlohmann::ordered_json e;
    e["class"] = m.class_id;
    e["precision"] = m.precision;
    e["recall"] = m.recall;
    e["f1"] = m.f1;
    e["support"] = m.support;
    e["predicted"] = m.predicted;
    e["no_support"] = m.no_support;
    e["precision_undefined"] = m.precision_undefined;
    e["recall_undefined"] = m.recall_undefined;
    j["per_class"].push_back(std::move(e));
  }
  return nlohmann::json(j);
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Display width in code points.
std::size_t width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

std::string pad(const std::string& s, std::size_t w, bool right) {
  const std::size_t n = width(s);
  const std::string fill(w > n ? w - n : 0, ' ');
  return right ? fill + s : s + fill;
}

}  // namespace

RenderedTable render_table(const std::vector<std::pair<std::string, EvalReport>>& reports) {
  if (reports.empty()) throw Error(ErrorCode::InvalidArgument, "render_table needs at least one report");
  std::vector<std::string> rows;
  for (const auto& [name, rep] : reports) {
    for (const auto& c : rep.classes) {
      if (std::find(rows.begin(), rows.end(), c) == rows.end()) rows.push_back(c);
    }
  }

  std::vector<std::vector<std::string>> cells;  // header + body, text form
  std::ostringstream csv;
  std::vector<std::string> header{"Class"};
  csv << "class";
  for (const auto& [name, rep] : reports) {
    header.push_back(name);
    csv << ',' << csv_field(name);
  }
  csv << '\n';
  cells.push_back(header);

  auto f1_of = [](const EvalReport& rep, const std::string& c) -> std::optional<double> {
    for (const auto& m : rep.per_class) {
      if (m.class_id == c) return m.f1;
    }
    return std::nullopt;
  };
  auto add_row = [&](const std::string& label, auto&& get) {
    std::vector<std::string> row{label};
    csv << csv_field(label);
    for (const auto& [name, rep] : reports) {
      const std::optional<double> v = get(rep);
      row.push_back(v ? fixed(*v, 2) : "-");
      csv << ',' << (v ? fixed(*v, 6) : "");
    }
    csv << '\n';
    cells.push_back(std::move(row));
  };

  for (const auto& c : rows) add_row(c, [&](const EvalReport& rep) { return f1_of(rep, c); });
  if (!rows.empty()) {
    add_row("MacAvg", [](const EvalReport& rep) { return std::optional<double>(rep.macro_f1); });
    add_row("MacAvg*", [](const EvalReport& rep) { return std::optional<double>(rep.macro_f1_supported); });
    add_row("WeAvg", [](const EvalReport& rep) { return std::optional<double>(rep.weighted_f1); });
    add_row("MicAvg", [](const EvalReport& rep) { return std::optional<double>(rep.micro_f1); });
  }

  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], width(row[i]));
  }
  std::ostringstream text;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      if (i) text << "  ";
      text << pad(cells[r][i], widths[i], i > 0);
    }
    text << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : widths) total += w;
      text << std::string(total + 2 * (widths.size() - 1), '-') << '\n';
    }
  }
  return {text.str(), csv.str()};
}

}  // namespace cloze
