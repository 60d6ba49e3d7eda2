#include "cloze/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cloze/bundle.hpp"
#include "cloze/calibration.hpp"
#include "cloze/dataset.hpp"
#include "cloze/error.hpp"
#include "cloze/eval.hpp"
#include "cloze/io.hpp"
#include "cloze/kernels.hpp"
#include "cloze/kv_builder.hpp"
#include "cloze/parallel.hpp"
#include "cloze/pipeline.hpp"
#include "cloze/pll.hpp"

namespace cloze::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// Option names whose config values are paths, resolved against the config
// file's directory.
const std::set<std::string> kPathKeys = {"bundle",    "verbalizer", "data",   "calib_data", "corpus",
                                         "probes",    "seeds",      "stopwords", "gold",    "predictions",
                                         "out",       "calibration"};

std::string key_of(const CLI::Option* opt) {
  std::string k = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
  for (char& c : k) {
    if (c == '-') c = '_';
  }
  return k;
}

struct ConfigFile {
  json top = json::object();
  fs::path base;

  std::optional<json> lookup(const std::string& section, const std::string& key) const {
    if (top.contains(section) && top[section].is_object() && top[section].contains(key)) {
      return top[section][key];
    }
    if (top.contains(key)) return top[key];
    return std::nullopt;
  }
};

std::string scalar_text(const json& v, const std::string& key, bool is_path, const fs::path& base) {
  std::string s;
  if (v.is_string()) {
    s = v.get<std::string>();
  } else if (v.is_boolean()) {
    s = v.get<bool>() ? "true" : "false";
  } else if (v.is_number()) {
    s = v.dump();
  } else {
    throw Error(ErrorCode::ConfigInvalid, "config key '" + key + "' must be a scalar");
  }
  if (is_path && key == "predictions" && !base.empty()) {
    // name=path: only the path part is relative to the config.
    if (auto eq = s.find('='); eq != std::string::npos && fs::path(s.substr(eq + 1)).is_relative()) {
      return s.substr(0, eq + 1) + (base / s.substr(eq + 1)).lexically_normal().string();
    }
  }
  if (is_path && v.is_string() && !base.empty() && fs::path(s).is_relative() &&
      !(key == "calibration" && (s == "none" || s == "identity" || s == "contextual" || s == "cc" ||
                                 s == "batch" || s == "bc"))) {
    s = (base / s).lexically_normal().string();
  }
  return s;
}

// Fills every option not given on the command line from the subcommand
// section, then from the top level of the config file.
void apply_config(CLI::App* sub, const ConfigFile& cfg) {
  for (CLI::Option* opt : sub->get_options()) {
    if (opt->count() > 0 || opt->get_lnames().empty()) continue;
    const std::string key = key_of(opt);
    if (key == "help") continue;
    const auto v = cfg.lookup(sub->get_name(), key);
    if (!v || v->is_object() || v->is_null()) continue;
    const bool is_path = kPathKeys.count(key) > 0;
    if (v->is_array()) {
      for (const auto& e : *v) opt->add_result(scalar_text(e, key, is_path, cfg.base));
    } else {
      opt->add_result(scalar_text(*v, key, is_path, cfg.base));
    }
    opt->run_callback();
  }
}

void require(const std::string& value, const char* name) {
  if (value.empty()) throw Error(ErrorCode::ConfigInvalid, std::string("missing --") + name);
}

std::optional<bool> parse_bool(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw Error(ErrorCode::ConfigInvalid, "expected a boolean, got '" + s + "'");
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Manifest {
 public:
  explicit Manifest(std::string subcommand) : subcommand_(std::move(subcommand)) {}

  void input(const std::string& role, const fs::path& p) {
    if (!fs::is_regular_file(p)) throw Error(ErrorCode::FileNotFound, p.string());
    inputs_.push_back({{"role", role}, {"path", p.string()}, {"sha256", io::sha256_file(p)}});
  }
  void bundle(const fs::path& dir) {
    for (const char* f : {"vocab.txt", "meta.json", "toy.json", "model.onnx"}) {
      if (fs::exists(dir / f)) input("bundle", dir / f);
    }
  }
  void param(const std::string& k, ojson v) { params_[k] = std::move(v); }

  // Writes content atomically and records its checksum.
  void output(const fs::path& p, const std::string& content) {
    io::write_atomic(p, content);
    outputs_.push_back({{"path", p.filename().string()}, {"sha256", io::sha256_hex(content)}});
  }

  void write(const fs::path& out_dir) const {
    ojson j;
    j["subcommand"] = subcommand_;
    j["version"] = kVersion;
    j["created"] = utc_now();
    j["isa"] = kernels::isa_name(kernels::active_isa());
    j["threads"] = worker_count();
    j["params"] = params_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    io::write_atomic(out_dir / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string subcommand_;
  ojson inputs_ = ojson::array();
  ojson outputs_ = ojson::array();
  ojson params_ = ojson::object();
};

fs::path prepare_out(const std::string& out) {
  require(out, "out");
  fs::create_directories(out);
  return fs::path(out);
}

PromptTemplate resolve_template(const std::string& flag, bool from_flag, const ConfigFile& cfg,
                                const std::string& section) {
  if (!from_flag) {
    if (auto v = cfg.lookup(section, "template"); v && v->is_object()) return PromptTemplate::from_json(*v);
  }
  const std::string name = flag.empty() ? "document" : flag;
  if (cfg.top.contains("templates")) {
    for (const auto& t : cfg.top["templates"]) {
      if (t.value("name", std::string()) == name) return PromptTemplate::from_json(t);
    }
  }
  if (name == "document") return document_template();
  if (name == "entity") return entity_template();
  throw Error(ErrorCode::ConfigInvalid, "unknown template '" + name + "'");
}

Verbalizer load_verbalizer(const std::string& path, const Tokenizer& tok, std::ostream& err) {
  require(path, "verbalizer");
  std::vector<ResolveWarning> warnings;
  Verbalizer v = resolve(RawVerbalizer::load(path), tok, &warnings);
  for (const auto& w : warnings) err << "warning: " << w.class_id << ": '" << w.surface << "' " << w.reason << "\n";
  return v;
}

std::vector<RecordError> rejected_as_errors(const std::vector<RejectedRecord>& rejected) {
  std::vector<RecordError> out;
  for (const auto& r : rejected) out.push_back({r.line - 1, r.id, error_code_name(ErrorCode::SchemaMismatch), r.reason});
  return out;
}

bool is_mode_name(const std::string& s) {
  return s == "none" || s == "identity" || s == "contextual" || s == "cc" || s == "batch" || s == "bc";
}

// --- subcommands ----------------------------------------------------------

struct CommonOpts {
  std::string bundle, out, lowercase;
};

struct ClassifyOpts : CommonOpts {
  std::string tpl, verbalizer, data, calibration = "none", calib_data, content_free;
};

int do_classify(const ClassifyOpts& o, bool tpl_flag, const ConfigFile& cfg, std::ostream& out,
                std::ostream& err) {
  require(o.bundle, "bundle");
  require(o.data, "data");
  const fs::path out_dir = prepare_out(o.out);
  const Bundle b = load_bundle(o.bundle, parse_bool(o.lowercase));
  const PromptTemplate tpl = resolve_template(o.tpl, tpl_flag, cfg, "classify");
  const Verbalizer v = load_verbalizer(o.verbalizer, *b.tokenizer, err);

  Manifest m("classify");
  m.bundle(o.bundle);
  m.input("verbalizer", o.verbalizer);
  m.input("data", o.data);
  m.param("template", ojson(tpl.to_json()));

  std::vector<RejectedRecord> rejected;
  const std::vector<LabeledExample> data = load_examples(o.data, tpl.task(), &rejected);

  CalibrationState calib;
  bool fitted = false;
  if (is_mode_name(o.calibration)) {
    switch (parse_mode(o.calibration)) {
      case CalibrationMode::identity: break;
      case CalibrationMode::contextual:
        calib = fit_contextual(tpl, v, *b.model, *b.tokenizer, o.content_free);
        fitted = true;
        break;
      case CalibrationMode::batch: {
        std::vector<LabeledExample> batch = data;
        if (!o.calib_data.empty()) {
          m.input("calib_data", o.calib_data);
          batch = load_examples(o.calib_data, tpl.task());
        }
        const ClassifyResult raw = classify(batch, tpl, v, *b.model, *b.tokenizer);
        std::vector<ClassScores> scores;
        for (const auto& p : raw.predictions) scores.push_back(p.scores);
        calib = fit_batch_from_scores(v, scores);
        fitted = true;
        break;
      }
    }
  } else {
    m.input("calibration", o.calibration);
    calib = CalibrationState::from_json(io::read_json(o.calibration));
  }
  m.param("calibration", mode_name(calib.mode));

  ClassifyResult r = classify(data, tpl, v, *b.model, *b.tokenizer, calib);
  std::vector<RecordError> errors = rejected_as_errors(rejected);
  errors.insert(errors.end(), r.errors.begin(), r.errors.end());

  m.output(out_dir / "predictions.jsonl", predictions_jsonl(r.predictions, v));
  m.output(out_dir / "errors.jsonl", errors_jsonl(errors));
  if (fitted) m.output(out_dir / "calibration.json", calib.to_json().dump(2) + "\n");
  m.write(out_dir);

  out << "classified " << r.predictions.size() << " of " << data.size() + rejected.size()
      << " records (" << errors.size() << " failed) -> " << (out_dir / "predictions.jsonl").string() << "\n";
  return errors.empty() ? 0 : 2;
}

struct CalibrateOpts : CommonOpts {
  std::string tpl, verbalizer, mode, data, content_free;
};

int do_calibrate(const CalibrateOpts& o, bool tpl_flag, const ConfigFile& cfg, std::ostream& out,
                 std::ostream& err) {
  require(o.bundle, "bundle");
  require(o.mode, "mode");
  const fs::path out_dir = prepare_out(o.out);
  const Bundle b = load_bundle(o.bundle, parse_bool(o.lowercase));
  const PromptTemplate tpl = resolve_template(o.tpl, tpl_flag, cfg, "calibrate");
  const Verbalizer v = load_verbalizer(o.verbalizer, *b.tokenizer, err);

  Manifest m("calibrate");
  m.bundle(o.bundle);
  m.input("verbalizer", o.verbalizer);
  m.param("template", ojson(tpl.to_json()));

  CalibrationState s;
  std::size_t failed = 0;
  switch (parse_mode(o.mode)) {
    case CalibrationMode::identity: break;
    case CalibrationMode::contextual:
      m.param("content_free", o.content_free);
      s = fit_contextual(tpl, v, *b.model, *b.tokenizer, o.content_free);
      break;
    case CalibrationMode::batch: {
      require(o.data, "data");
      m.input("data", o.data);
      std::vector<RejectedRecord> rejected;
      const auto batch = load_examples(o.data, tpl.task(), &rejected);
      const ClassifyResult raw = classify(batch, tpl, v, *b.model, *b.tokenizer);
      std::vector<ClassScores> scores;
      for (const auto& p : raw.predictions) scores.push_back(p.scores);
      s = fit_batch_from_scores(v, scores);
      failed = rejected.size() + raw.errors.size();
      break;
    }
  }
  m.param("mode", mode_name(s.mode));
  m.output(out_dir / "calibration.json", s.to_json().dump(2) + "\n");
  m.write(out_dir);
  out << "wrote " << mode_name(s.mode) << " calibration -> " << (out_dir / "calibration.json").string() << "\n";
  if (failed) err << "warning: " << failed << " batch records could not be scored\n";
  return failed ? 2 : 0;
}

struct BuildKvOpts : CommonOpts {
  std::string tpl, corpus, probes, seeds, stopwords;
  std::size_t candidates = 50, cv_size = 100, info_threshold = 20;
  std::optional<double> frequency_threshold;
};

std::vector<ClassSeeds> load_seeds(const fs::path& path) {
  const json j = io::read_json(path);
  std::vector<ClassSeeds> out;
  try {
    for (const auto& c : j.at("classes")) {
      ClassSeeds s;
      s.id = c.at("id").get<std::string>();
      const json& words = c.contains("seeds") ? c["seeds"] : c.at("words");
      for (const auto& w : words) s.words.push_back(w.is_string() ? w.get<std::string>() : w.at("surface").get<std::string>());
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, path.string() + ": " + e.what());
  }
  return out;
}

std::set<std::string> load_stopwords(const fs::path& path) {
  std::set<std::string> out;
  std::istringstream in(io::read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t b = 0;
    while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    line = line.substr(b);
    if (line.empty() || line[0] == '#') continue;
    out.insert(line);
  }
  return out;
}

int do_build_kv(const BuildKvOpts& o, bool tpl_flag, const ConfigFile& cfg, std::ostream& out,
                std::ostream& err) {
  require(o.bundle, "bundle");
  require(o.corpus, "corpus");
  require(o.seeds, "seeds");
  const fs::path out_dir = prepare_out(o.out);
  const Bundle b = load_bundle(o.bundle, parse_bool(o.lowercase));
  const PromptTemplate tpl = resolve_template(o.tpl, tpl_flag, cfg, "build-kv");

  Manifest m("build-kv");
  m.bundle(o.bundle);
  m.input("corpus", o.corpus);
  m.input("seeds", o.seeds);

  MiningConfig mc;
  mc.candidates_per_occurrence = o.candidates;
  mc.cv_size = o.cv_size;
  mc.info_threshold = o.info_threshold;
  mc.frequency_threshold = o.frequency_threshold;
  mc.synonyms = load_seeds(o.seeds);
  if (!o.stopwords.empty()) {
    m.input("stopwords", o.stopwords);
    mc.stopwords = load_stopwords(o.stopwords);
  }
  mc.validate();

  const auto corpus = load_examples(o.corpus, tpl.task());
  std::vector<LabeledExample> probes;
  if (o.probes.empty()) {
    err << "warning: no --probes given; refining on the mining corpus\n";
    probes = corpus;
  } else {
    m.input("probes", o.probes);
    probes = load_examples(o.probes, tpl.task());
  }
  m.param("template", ojson(tpl.to_json()));
  m.param("candidates_per_occurrence", mc.candidates_per_occurrence);
  m.param("cv_size", mc.cv_size);
  m.param("info_threshold", mc.info_threshold);
  if (mc.frequency_threshold) m.param("frequency_threshold", *mc.frequency_threshold);

  const KvBuildResult r = build_kv(corpus, probes, tpl, *b.model, *b.tokenizer, mc);
  for (const auto& w : r.warnings) err << "warning: " << w.class_id << ": " << w.message << "\n";
  m.output(out_dir / "verbalizer.json", r.verbalizer.to_json().dump(2) + "\n");
  m.output(out_dir / "kv_report.json", r.report_json().dump(2) + "\n");
  m.write(out_dir);

  out << r.hits << " hits, " << r.informative_hits << " informative\n";
  for (const auto& c : r.verbalizer.classes()) out << "  " << c.id << ": " << c.words.size() << " words\n";
  return 0;
}

struct PllOpts : CommonOpts {
  std::string data;
};

int do_pll(const PllOpts& o, std::ostream& out) {
  require(o.bundle, "bundle");
  require(o.data, "data");
  const fs::path out_dir = prepare_out(o.out);
  const Bundle b = load_bundle(o.bundle, parse_bool(o.lowercase));
  Manifest m("pll");
  m.bundle(o.bundle);
  m.input("data", o.data);

  std::vector<std::string> ids, texts;
  if (fs::path(o.data).extension() == ".jsonl") {
    const auto records = io::read_jsonl(o.data);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (!r.is_object() || !r.contains("text") || !r["text"].is_string()) {
        throw Error(ErrorCode::SchemaMismatch, o.data + " record " + std::to_string(i + 1) + ": missing 'text'");
      }
      ids.push_back(r.contains("id") ? (r["id"].is_string() ? r["id"].get<std::string>() : r["id"].dump())
                                     : std::to_string(i));
      texts.push_back(r["text"].get<std::string>());
    }
  } else {
    std::istringstream in(io::read_text(o.data));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      ids.push_back(std::to_string(ids.size()));
      texts.push_back(line);
    }
  }

  const PLLCorpusReport rep = pll_corpus(texts, *b.model, *b.tokenizer);
  std::ostringstream csv;
  csv << "sentence_id,raw,normalized,tokens\n";
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto& s = rep.sentences[i];
    if (!s) continue;
    csv << ids[i] << ',' << fmt_double(s->raw) << ',' << fmt_double(s->normalized) << ',' << s->token_count << '\n';
  }
  ojson summary;
  summary["sentences"] = texts.size();
  summary["scored"] = rep.scored;
  summary["failed"] = rep.failures.size();
  summary["mean"] = rep.mean;
  summary["std"] = rep.std;
  summary["std_convention"] = "population";
  summary["note"] = "PLL is comparable only between models that share a vocabulary";
  summary["failures"] = ojson::array();
  for (const auto& f : rep.failures) summary["failures"].push_back({{"id", ids[f.index]}, {"reason", f.reason}});
  m.output(out_dir / "pll.csv", csv.str());
  m.output(out_dir / "pll_summary.json", summary.dump(2) + "\n");
  m.write(out_dir);

  out << "PLL (normalized) over " << rep.scored << " sentences: mean " << fmt_double(rep.mean) << ", std "
      << fmt_double(rep.std) << " (population)\n";
  return rep.failures.empty() ? 0 : 2;
}

struct FillMaskOpts : CommonOpts {
  std::string data;
  std::vector<std::size_t> k{1, 5, 10};
};

int do_fillmask(const FillMaskOpts& o, std::ostream& out) {
  require(o.bundle, "bundle");
  require(o.data, "data");
  const fs::path out_dir = prepare_out(o.out);
  const Bundle b = load_bundle(o.bundle, parse_bool(o.lowercase));
  Manifest m("fillmask");
  m.bundle(o.bundle);
  m.input("data", o.data);
  m.param("k", o.k);

  const FillMaskReport rep = fillmask_topk(load_fillmask(o.data), *b.model, *b.tokenizer, o.k);
  ojson j;
  j["evaluated"] = rep.evaluated;
  j["hit_rate"] = ojson::object();
  for (std::size_t i = 0; i < rep.ks.size(); ++i) j["hit_rate"][std::to_string(rep.ks[i])] = rep.hit_rates[i];
  j["ranks"] = ojson::array();
  for (const auto& [id, rank] : rep.ranks) j["ranks"].push_back({{"id", id}, {"rank", rank + 1}});
  j["skipped"] = ojson::array();
  for (const auto& s : rep.skipped) {
    j["skipped"].push_back({{"id", s.id}, {"error", s.code}, {"message", s.message}});
  }
  m.output(out_dir / "fillmask.json", j.dump(2) + "\n");
  m.write(out_dir);

  for (std::size_t i = 0; i < rep.ks.size(); ++i) {
    out << "top-" << rep.ks[i] << ": " << fmt_double(rep.hit_rates[i]) << "\n";
  }
  out << rep.evaluated << " evaluated, " << rep.skipped.size() << " skipped\n";
  return rep.skipped.empty() ? 0 : 2;
}

struct EvalOpts {
  std::vector<std::string> predictions;
  std::string gold, verbalizer, out;
  std::vector<std::string> classes;
};

int do_eval(const EvalOpts& o, std::ostream& out) {
  if (o.predictions.empty()) throw Error(ErrorCode::ConfigInvalid, "missing --predictions");
  if (o.gold.empty()) throw Error(ErrorCode::ConfigInvalid, "eval needs a gold file (--gold)");
  const fs::path out_dir = prepare_out(o.out);
  Manifest m("eval");
  m.input("gold", o.gold);

  std::map<std::string, std::string> golds;
  for (const auto& r : io::read_jsonl(o.gold)) {
    if (!r.is_object() || !r.contains("id") || !r.contains("label")) continue;
    const std::string id = r["id"].is_string() ? r["id"].get<std::string>() : r["id"].dump();
    const auto& l = r["label"];
    if (l.is_string()) {
      golds[id] = l.get<std::string>();
    } else if (l.is_array() && l.size() == 1 && l[0].is_string()) {
      golds[id] = l[0].get<std::string>();
    }
  }
  if (golds.empty()) throw Error(ErrorCode::ConfigInvalid, o.gold + " holds no gold labels");

  std::vector<std::string> classes = o.classes;
  if (classes.empty() && !o.verbalizer.empty()) {
    m.input("verbalizer", o.verbalizer);
    for (const auto& c : RawVerbalizer::load(o.verbalizer).classes) classes.push_back(c.id);
  }

  std::vector<std::pair<std::string, EvalReport>> reports;
  for (const std::string& spec : o.predictions) {
    std::string name, path = spec;
    if (auto eq = spec.find('='); eq != std::string::npos && !fs::exists(spec)) {
      name = spec.substr(0, eq);
      path = spec.substr(eq + 1);
    } else {
      name = fs::path(spec).parent_path().filename().string();
      if (name.empty()) name = fs::path(spec).stem().string();
    }
    m.input("predictions", path);
    std::vector<std::pair<std::string, std::string>> preds;
    const auto records = io::read_jsonl(path);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (!r.is_object() || !r.contains("id") || !r.contains("predicted")) {
        throw Error(ErrorCode::SchemaMismatch, path + " record " + std::to_string(i + 1) + ": needs 'id' and 'predicted'");
      }
      preds.emplace_back(r["id"].is_string() ? r["id"].get<std::string>() : r["id"].dump(),
                         r["predicted"].get<std::string>());
    }
    reports.emplace_back(name, evaluate(preds, golds, classes));
  }

  ojson j = ojson::array();
  for (const auto& [name, rep] : reports) {
    ojson e;
    e["name"] = name;
    e["report"] = ojson(rep.to_json());
    j.push_back(std::move(e));
  }
  const RenderedTable t = render_table(reports);
  m.output(out_dir / "eval.json", j.dump(2) + "\n");
  m.output(out_dir / "eval.csv", t.csv);
  m.output(out_dir / "eval.txt", t.text);
  m.write(out_dir);
  out << t.text;
  return 0;
}

int do_validate(const std::string& bundle, std::ostream& out) {
  require(bundle, "bundle");
  const BundleReport r = validate_bundle(bundle);
  out << "bundle " << bundle << ": " << (r.kind == BackendKind::toy ? "toy" : "onnx") << ", vocab " << r.vocab_size
      << "\n";
  for (const auto& p : r.problems) out << "  problem: " << p << "\n";
  out << (r.ok() ? "OK" : "INVALID") << "\n";
  return r.ok() ? 0 : 1;
}

void add_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--bundle", o.bundle, "Model bundle directory");
  sub->add_option("--out", o.out, "Output directory");
  sub->add_option("--lowercase", o.lowercase, "Override the bundle casing flag (true|false)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot cloze-prompt classification with masked language models", "cloze"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON run config (flags override its values)");

  ClassifyOpts co;
  CLI::App* classify_cmd = app.add_subcommand("classify", "Predict a class for every record");
  add_common(classify_cmd, co);
  CLI::Option* co_tpl = classify_cmd->add_option("--template", co.tpl, "Template name");
  classify_cmd->add_option("--verbalizer", co.verbalizer, "Verbalizer JSON");
  classify_cmd->add_option("--data", co.data, "Dataset JSONL");
  classify_cmd->add_option("--calibration", co.calibration, "none | contextual | batch | calibration JSON");
  classify_cmd->add_option("--calib-data", co.calib_data, "Unlabeled JSONL for batch calibration");
  classify_cmd->add_option("--content-free", co.content_free, "Content-free input for contextual calibration");

  CalibrateOpts ca;
  CLI::App* calibrate_cmd = app.add_subcommand("calibrate", "Fit a calibration state");
  add_common(calibrate_cmd, ca);
  CLI::Option* ca_tpl = calibrate_cmd->add_option("--template", ca.tpl, "Template name");
  calibrate_cmd->add_option("--verbalizer", ca.verbalizer, "Verbalizer JSON");
  calibrate_cmd->add_option("--mode", ca.mode, "contextual | batch");
  calibrate_cmd->add_option("--data", ca.data, "Unlabeled JSONL for batch calibration");
  calibrate_cmd->add_option("--content-free", ca.content_free, "Content-free input");

  BuildKvOpts kv;
  CLI::App* kv_cmd = app.add_subcommand("build-kv", "Mine and refine a knowledgeable verbalizer");
  add_common(kv_cmd, kv);
  CLI::Option* kv_tpl = kv_cmd->add_option("--template", kv.tpl, "Template used for refinement probes");
  kv_cmd->add_option("--corpus", kv.corpus, "Labeled mining corpus JSONL");
  kv_cmd->add_option("--probes", kv.probes, "Labeled held-out JSONL for refinement");
  kv_cmd->add_option("--seeds", kv.seeds, "Seed words JSON {classes:[{id, seeds}]}");
  kv_cmd->add_option("--stopwords", kv.stopwords, "Stopword list, one per line");
  kv_cmd->add_option("--candidates-per-occurrence", kv.candidates, "Fillers per masked occurrence");
  kv_cmd->add_option("--cv-size", kv.cv_size, "Class vocabulary size");
  kv_cmd->add_option("--info-threshold", kv.info_threshold, "Minimum fillers inside the class vocabulary");
  kv_cmd->add_option("--frequency-threshold", kv.frequency_threshold, "Frequency refinement cut (default: median)");

  PllOpts po;
  CLI::App* pll_cmd = app.add_subcommand("pll", "Length-normalized pseudo-log-likelihood");
  add_common(pll_cmd, po);
  pll_cmd->add_option("--data", po.data, "Sentences: JSONL with 'text' or plain text, one per line");

  FillMaskOpts fo;
  CLI::App* fm_cmd = app.add_subcommand("fillmask", "Top-k hit rate of masked words");
  add_common(fm_cmd, fo);
  fm_cmd->add_option("--data", fo.data, "JSONL {id, text, masked_word}");
  fm_cmd->add_option("--k", fo.k, "k values")->delimiter(',');

  EvalOpts eo;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Precision, recall and F1 against gold labels");
  eval_cmd->add_option("--predictions", eo.predictions, "Prediction JSONL, optionally name=path; repeatable");
  eval_cmd->add_option("--gold", eo.gold, "Gold JSONL with id and label");
  eval_cmd->add_option("--verbalizer", eo.verbalizer, "Verbalizer JSON fixing the class order");
  eval_cmd->add_option("--classes", eo.classes, "Class order")->delimiter(',');
  eval_cmd->add_option("--out", eo.out, "Output directory");

  std::string validate_bundle_dir;
  CLI::App* validate_cmd = app.add_subcommand("validate", "Check a model bundle");
  validate_cmd->add_option("--bundle", validate_bundle_dir, "Model bundle directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    ConfigFile cfg;
    if (!config_path.empty()) {
      cfg.top = io::read_json(config_path);
      if (!cfg.top.is_object()) throw Error(ErrorCode::ConfigInvalid, "config must be a JSON object");
      cfg.base = fs::path(config_path).parent_path();
    }
    for (CLI::App* sub : app.get_subcommands()) apply_config(sub, cfg);

    if (classify_cmd->parsed()) return do_classify(co, co_tpl->count() > 0, cfg, out, err);
    if (calibrate_cmd->parsed()) return do_calibrate(ca, ca_tpl->count() > 0, cfg, out, err);
    if (kv_cmd->parsed()) return do_build_kv(kv, kv_tpl->count() > 0, cfg, out, err);
    if (pll_cmd->parsed()) return do_pll(po, out);
    if (fm_cmd->parsed()) return do_fillmask(fo, out);
    if (eval_cmd->parsed()) return do_eval(eo, out);
    if (validate_cmd->parsed()) return do_validate(validate_bundle_dir, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const CLI::ParseError& e) {
    err << "error: ConfigInvalid: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace cloze::cli
