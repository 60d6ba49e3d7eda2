#include <algorithm>
#include <random>
#include <sstream>

#include "cloze/error.hpp"
#include "cloze/eval.hpp"
#include "doctest.h"

using namespace cloze;

namespace {

using Pairs = std::vector<std::pair<std::string, std::string>>;

std::map<std::string, std::string> gold_map(const std::vector<std::string>& gold) {
  std::map<std::string, std::string> g;
  for (std::size_t i = 0; i < gold.size(); ++i) g["r" + std::to_string(i)] = gold[i];
  return g;
}

Pairs preds_of(const std::vector<std::string>& pred) {
  Pairs p;
  for (std::size_t i = 0; i < pred.size(); ++i) p.emplace_back("r" + std::to_string(i), pred[i]);
  return p;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("all correct") {
  const auto r = evaluate(preds_of({"A", "B", "C"}), gold_map({"A", "B", "C"}));
  for (const auto& m : r.per_class) CHECK(m.f1 == 1.0);
  CHECK(r.macro_f1 == 1.0);
  CHECK(r.weighted_f1 == 1.0);
  CHECK(r.micro_f1 == 1.0);
}

TEST_CASE("two-class worked example") {
  const auto r = evaluate(preds_of({"A", "B", "B", "B"}), gold_map({"A", "A", "B", "B"}));
  REQUIRE(r.classes == std::vector<std::string>{"A", "B"});
  CHECK(r.confusion == std::vector<std::vector<std::size_t>>{{1, 1}, {0, 2}});
  CHECK(r.per_class[0].precision == 1.0);
  CHECK(r.per_class[0].recall == 0.5);
  CHECK(r.per_class[0].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class[1].precision == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class[1].recall == 1.0);
  CHECK(r.per_class[1].f1 == doctest::Approx(0.8));
  CHECK(r.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 2.0));
  CHECK(r.macro_f1 == doctest::Approx(0.733).epsilon(1e-3));
  CHECK(r.micro_f1 == 0.75);
  CHECK(r.accuracy == 0.75);
  CHECK(r.weighted_f1 == doctest::Approx((2.0 * 2.0 / 3.0 + 2.0 * 0.8) / 4.0));
}

TEST_CASE("missing gold") {
  try {
    evaluate({{"zz", "A"}}, gold_map({"A"}));
    FAIL("expected MissingGold");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingGold);
  }
}

TEST_CASE("zero-support classes are flagged and both macro variants reported") {
  const auto r = evaluate(preds_of({"A", "A"}), gold_map({"A", "A"}), {"A", "B"});
  REQUIRE(r.per_class.size() == 2);
  CHECK(r.per_class[1].no_support);
  CHECK(r.per_class[1].f1 == 0.0);
  CHECK(r.macro_f1 == 0.5);
  CHECK(r.macro_f1_supported == 1.0);

  const auto only_pred = evaluate(preds_of({"B"}), gold_map({"A"}), {"A", "B"});
  CHECK(only_pred.per_class[1].recall_undefined);
  CHECK_FALSE(only_pred.per_class[1].no_support);
  CHECK(only_pred.per_class[0].precision_undefined);
}

TEST_CASE("labels outside the class list are appended") {
  const auto r = evaluate(preds_of({"Z", "A"}), gold_map({"A", "A"}), {"A"});
  CHECK(r.classes == std::vector<std::string>{"A", "Z"});
}

TEST_CASE("matches a brute-force recount on random instances") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng() % 6, n = rng() % 40;
    std::vector<std::string> classes;
    for (std::size_t c = 0; c < k; ++c) classes.push_back("K" + std::to_string(c));
    std::vector<std::string> gold, pred;
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back(classes[rng() % k]);
      pred.push_back(classes[rng() % k]);
    }
    const auto r = evaluate(preds_of(pred), gold_map(gold), classes);
    double macro = 0.0;
    std::size_t correct = 0;
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += pred[i] == classes[c] && gold[i] == classes[c];
        fp += pred[i] == classes[c] && gold[i] != classes[c];
        fn += pred[i] != classes[c] && gold[i] == classes[c];
      }
      const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
      const double rc = tp + fn ? double(tp) / double(tp + fn) : 0.0;
      const double f = p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0;
      CHECK(r.per_class[c].true_positives == tp);
      CHECK(r.per_class[c].predicted == tp + fp);
      CHECK(r.per_class[c].support == tp + fn);
      CHECK(r.per_class[c].f1 == doctest::Approx(f).epsilon(1e-15));
      macro += f;
      correct += tp;
    }
    CHECK(r.macro_f1 == doctest::Approx(macro / double(k)).epsilon(1e-14));
    CHECK(r.micro_f1 == (n ? double(correct) / double(n) : 0.0));

    std::vector<std::string> shuffled = classes;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(evaluate(preds_of(pred), gold_map(gold), shuffled).macro_f1 == doctest::Approx(r.macro_f1).epsilon(1e-14));
  }
}

TEST_CASE("render_table layouts") {
  const auto r = evaluate(preds_of({"A", "B", "B", "B"}), gold_map({"A", "A", "B", "B"}));
  const RenderedTable one = render_table({{"model", r}});
  CHECK(line_count(one.csv) == 1 + 2 + 4);
  CHECK(one.csv.rfind("class,model\n", 0) == 0);
  CHECK(one.text.find("0.67") != std::string::npos);
  CHECK(one.text.find("MacAvg") != std::string::npos);

  const RenderedTable three = render_table({{"m1", r}, {"m2", r}, {"m3", r}});
  std::istringstream first(three.csv);
  std::string header;
  std::getline(first, header);
  CHECK(header == "class,m1,m2,m3");
  CHECK(render_table({{"m1", r}, {"m2", r}}).csv == render_table({{"m1", r}, {"m2", r}}).csv);

  const RenderedTable empty = render_table({{"model", evaluate({}, {})}});
  CHECK(empty.csv == "class,model\n");
  CHECK(line_count(empty.text) == 2);
  CHECK_THROWS_AS(render_table({}), Error);
}
