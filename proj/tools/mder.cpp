// Copyright 2026 The MDER Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end for the whole pipeline.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <algorithm>
#include <map>
#include <set>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mder/mder.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

// Resolved configuration of one invocation. Precedence: defaults, then the
// --config file, then flags.
struct RunConfig {
  mder::ModelConfig model;
  mder::TrainConfig train;
  std::string data_dir;
  std::string lexicon_dir;
  std::string split = "7:1:2";
  double multiplier = 1.0;
  std::size_t repeats = 1;
  std::size_t min_edge_weight = 3;
  std::size_t top_k = 10;
  std::string alias_file;
  std::string exclude_file;
  std::string category_file;
  bool allow_self = true;
};

json to_json(const RunConfig& c, const std::string& command) {
  return {{"tool", "mder"},
          {"version", kVersion},
          {"command", command},
          {"seed", c.train.seed},
          {"model", c.model},
          {"train", c.train},
          {"data_dir", c.data_dir},
          {"lexicon_dir", c.lexicon_dir},
          {"split", c.split},
          {"multiplier", c.multiplier},
          {"repeats", c.repeats},
          {"min_edge_weight", c.min_edge_weight},
          {"top_k", c.top_k},
          {"alias_file", c.alias_file},
          {"exclude_file", c.exclude_file},
          {"category_file", c.category_file},
          {"allow_self", c.allow_self}};
}

void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mder::IoError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw mder::ConfigError(path + ": " + e.what());
  }
  try {
    if (j.contains("model")) c.model = j.at("model").get<mder::ModelConfig>();
    if (j.contains("train")) c.train = j.at("train").get<mder::TrainConfig>();
    if (j.contains("seed")) c.train.seed = j.at("seed").get<std::uint64_t>();
    c.data_dir = j.value("data_dir", c.data_dir);
    c.lexicon_dir = j.value("lexicon_dir", c.lexicon_dir);
    c.split = j.value("split", c.split);
    c.multiplier = j.value("multiplier", c.multiplier);
    c.repeats = j.value("repeats", c.repeats);
    c.min_edge_weight = j.value("min_edge_weight", c.min_edge_weight);
    c.top_k = j.value("top_k", c.top_k);
    c.alias_file = j.value("alias_file", c.alias_file);
    c.exclude_file = j.value("exclude_file", c.exclude_file);
    c.category_file = j.value("category_file", c.category_file);
    c.allow_self = j.value("allow_self", c.allow_self);
  } catch (const json::exception& e) {
    throw mder::ConfigError(path + ": " + e.what());
  }
}

// Writes next to `path`, then renames over it.
void write_atomic(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw mder::IoError("cannot open " + tmp + " for writing");
    out << content;
    if (!out) throw mder::IoError("failed to write " + tmp);
  }
  fs::rename(tmp, path);
}

void write_corpus_with_provenance(const std::string& path, const mder::Corpus& c,
                                  const json& run) {
  std::ostringstream out;
  mder::write_corpus(out, c);
  write_atomic(path, out.str());
  write_atomic(path + ".run.json", json{{"run", run}, {"sentences", c.size()}}.dump(2) + "\n");
}

void emit(const json& j, const std::string& out_path) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_atomic(out_path, text);
  }
}

mder::TrainLog make_log(bool quiet) {
  if (quiet) return {};
  return [](const json& rec) { std::cerr << rec.dump() << std::endl; };
}

std::string resolve_grammar(const std::string& name_or_path, const std::string& data_dir) {
  if (fs::exists(name_or_path)) return name_or_path;
  const fs::path candidate = fs::path(data_dir) / "synth" / (name_or_path + ".json");
  if (fs::exists(candidate)) return candidate.string();
  throw mder::IoError("no grammar file '" + name_or_path + "' (also looked for " +
                      candidate.string() + ")");
}

struct Cli {
  CLI::App app{"Character-level method and dataset entity recognition", "mder"};
  RunConfig cfg;

  // Raw flag values; applied on top of the config file.
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> lexicon_dir;
  std::vector<std::string> ablation;
  std::optional<double> multiplier;
  std::optional<std::size_t> repeats, min_edge_weight, top_k;
  std::optional<std::string> alias_file, exclude_file, category_file, split;
  std::optional<std::size_t> epochs, patience, batch_size;
  std::optional<double> lr, dropout, clip_norm, target_f1;
  std::optional<std::size_t> rule_dim, char_dim, hidden_dim, attention_dim, cnn_kernels,
      max_length;
  bool no_self = false;
  bool quiet = false;

  // Positional and per-command values.
  std::string in, out, model_path, val_path, test_path, name, report_path, format = "json";
  std::vector<std::string> inputs;
  std::size_t count = 1000, per_area = 0;
  std::optional<int> year;

  std::string command;

  Cli() {
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();
    const char* g = "Run configuration";
    app.add_option("--config", config_path, "JSON run configuration file")->group(g);
    app.add_option("--seed", seed, "Seed of the run's random generator")->group(g);
    app.add_option("--lexicon-dir", lexicon_dir,
                   "Directory holding methods.txt, datasets.txt, blacklist.txt "
                   "(default: $MDER_DATA_DIR/lexicon)")
        ->group(g);
    app.add_option("--ablation", ablation, "Components to remove: rule, cnn, attention, crf")
        ->check(CLI::IsMember({"rule", "cnn", "attention", "crf"}))
        ->expected(1, 4)
        ->group(g);
    app.add_option("--multiplier", multiplier, "Augmentation size factor (>= 1)")->group(g);
    app.add_option("--repeats", repeats, "Independent training runs to average")->group(g);
    app.add_option("--min-edge-weight", min_edge_weight,
                   "Keep co-occurrence edges with at least this weight (default 3, i.e. > 2)")
        ->group(g);
    app.add_option("--top-k", top_k, "Entities per year in the centrality ranking")->group(g);
    app.add_option("--alias-file", alias_file, "Alias map: 'surface<TAB>canonical' per line")
        ->group(g);
    app.add_option("--exclude-file", exclude_file, "Surface forms to drop, one per line")
        ->group(g);
    app.add_option("--category-file", category_file,
                   "Node categories for graph export: 'entity<TAB>category' per line")
        ->group(g);
    app.add_option("--split", split, "Train:val:test ratio, e.g. 7:1:2 or 7/10,1/10,2/10")
        ->group(g);
    app.add_flag("--no-self", no_self, "Never substitute an entity by its own surface form")
        ->group(g);
    app.add_flag("-q,--quiet", quiet, "Suppress the per-epoch training log")->group(g);

    const char* t = "Training";
    app.add_option("--epochs", epochs, "Maximum epochs")->group(t);
    app.add_option("--patience", patience, "Early-stopping patience in epochs")->group(t);
    app.add_option("--batch-size", batch_size, "Sentences per batch")->group(t);
    app.add_option("--lr", lr, "Adam learning rate")->group(t);
    app.add_option("--dropout", dropout, "Dropout rate")->group(t);
    app.add_option("--clip-norm", clip_norm, "Global gradient-norm clip")->group(t);
    app.add_option("--target-f1", target_f1, "Stop once validation F1 reaches this value")
        ->group(t);

    const char* m = "Model";
    app.add_option("--rule-dim", rule_dim, "Rule embedding width")->group(m);
    app.add_option("--char-dim", char_dim, "Character embedding width")->group(m);
    app.add_option("--hidden-dim", hidden_dim, "LSTM hidden units per direction")->group(m);
    app.add_option("--attention-dim", attention_dim, "Query/key width")->group(m);
    app.add_option("--cnn-kernels", cnn_kernels, "Number of convolution kernels")->group(m);
    app.add_option("--max-length", max_length, "Maximum characters per sentence")->group(m);

    add_commands();
  }

  void add_commands() {
    auto* c = app.add_subcommand("prepare", "Segment plain text into a JSONL corpus");
    c->add_option("input", in, "Plain text, paragraphs separated by blank lines")->required();
    c->add_option("output", out, "Output JSONL corpus")->required();
    c->callback([this] { run_prepare(); });

    c = app.add_subcommand("split", "Split a corpus into train/val/test folds");
    c->add_option("input", in, "Input JSONL corpus")->required();
    c->add_option("outdir", out, "Directory for train.jsonl, val.jsonl, test.jsonl")
        ->required();
    c->callback([this] { run_split(); });

    c = app.add_subcommand("mix", "Sample equally from several corpora");
    c->add_option("output", out, "Output JSONL corpus")->required();
    c->add_option("inputs", inputs, "Input corpora")->required();
    c->add_option("--per-area", per_area, "Sentences drawn from each corpus")->required();
    c->add_option("--name", name, "Corpus name (default: mixed)");
    c->callback([this] { run_mix(); });

    c = app.add_subcommand("synth", "Generate an annotated corpus from a template grammar");
    c->add_option("grammar", in, "Grammar JSON, or an area name under $MDER_DATA_DIR/synth")
        ->required();
    c->add_option("output", out, "Output JSONL corpus")->required();
    c->add_option("-n,--count", count, "Number of sentences");
    c->callback([this] { run_synth(); });

    c = app.add_subcommand("train", "Train a tagger");
    c->add_option("train", in, "Training corpus")->required();
    c->add_option("val", val_path, "Validation corpus")->required();
    c->add_option("-o,--output", model_path, "Checkpoint path")->required();
    c->add_option("--test", test_path, "Test corpus scored after training (needed for --repeats)");
    c->add_option("--report", report_path, "Write the training report JSON here");
    c->callback([this] { run_train(); });

    c = app.add_subcommand("eval", "Score a checkpoint on an annotated corpus");
    c->add_option("model", model_path, "Checkpoint")->required();
    c->add_option("corpus", in, "Annotated JSONL corpus")->required();
    c->add_option("-o,--output", out, "Report path (default: stdout)");
    c->callback([this] { run_eval(); });

    c = app.add_subcommand("grid", "Cross-corpus train/test matrix");
    c->add_option("corpora", inputs, "Corpora; each is split with --split")->required();
    c->add_option("-o,--output", out, "Grid JSON path (default: stdout)");
    c->callback([this] { run_grid(); });

    c = app.add_subcommand("predict", "Tag sentences with a checkpoint");
    c->add_option("model", model_path, "Checkpoint")->required();
    c->add_option("input", in, "JSONL with a \"text\" field per line")->required();
    c->add_option("-o,--output", out, "Output JSONL (default: stdout)");
    c->callback([this] { run_predict(); });

    c = app.add_subcommand("augment", "Entity-substitution data augmentation");
    c->add_option("input", in, "Input corpus")->required();
    c->add_option("output", out, "Output corpus")->required();
    c->callback([this] { run_augment(); });

    c = app.add_subcommand("mine", "Co-occurrence networks, centrality and dataset usage");
    c->add_option("input", in, "Papers JSONL (paper_id, year and entities)")->required();
    c->add_option("outdir", out, "Output directory")->required();
    c->add_option("--year", year, "Only this year (default: every year present)");
    c->callback([this] { run_mine(); });

    c = app.add_subcommand("report", "Aggregate metrics reports");
    c->add_option("reports", inputs, "Report JSON files written by eval or train")->required();
    c->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    c->add_option("-o,--output", out, "Output path (default: stdout)");
    c->callback([this] { run_report(); });

    for (auto* sub : app.get_subcommands({})) {
      sub->preparse_callback([this, sub](std::size_t) { command = sub->get_name(); });
    }
  }

  // Merges defaults, config file and flags. Called at the start of every
  // subcommand.
  void resolve() {
    const char* env = std::getenv("MDER_DATA_DIR");
    cfg.data_dir = env && *env ? env : MDER_DEFAULT_DATA_DIR;
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    if (cfg.lexicon_dir.empty()) cfg.lexicon_dir = (fs::path(cfg.data_dir) / "lexicon").string();
    if (seed) cfg.train.seed = *seed;
    if (lexicon_dir) cfg.lexicon_dir = *lexicon_dir;
    if (!ablation.empty()) cfg.train.ablation = mder::parse_ablation(ablation);
    if (multiplier) cfg.multiplier = *multiplier;
    if (repeats) cfg.repeats = *repeats;
    if (min_edge_weight) cfg.min_edge_weight = *min_edge_weight;
    if (top_k) cfg.top_k = *top_k;
    if (alias_file) cfg.alias_file = *alias_file;
    if (exclude_file) cfg.exclude_file = *exclude_file;
    if (category_file) cfg.category_file = *category_file;
    if (split) cfg.split = *split;
    if (no_self) cfg.allow_self = false;
    if (epochs) cfg.train.max_epochs = *epochs;
    if (patience) cfg.train.patience = *patience;
    if (batch_size) cfg.train.batch_size = *batch_size;
    if (lr) cfg.train.learning_rate = *lr;
    if (dropout) cfg.train.dropout = *dropout;
    if (clip_norm) cfg.train.clip_norm = *clip_norm;
    if (target_f1) cfg.train.target_f1 = *target_f1;
    if (rule_dim) cfg.model.rule_dim = *rule_dim;
    if (char_dim) cfg.model.char_dim = *char_dim;
    if (hidden_dim) cfg.model.hidden_dim = *hidden_dim;
    if (attention_dim) cfg.model.attention_dim = *attention_dim;
    if (cnn_kernels) cfg.model.cnn_kernels = *cnn_kernels;
    if (max_length) cfg.model.max_length = *max_length;
    mder::validate(cfg.train);
    mder::validate(cfg.model, cfg.train.ablation);
    if (cfg.repeats == 0) throw mder::ConfigError("--repeats must be positive");
  }

  json run_json() const { return to_json(cfg, command); }

  mder::RuleLexicon lexicon() const { return mder::load_lexicon_dir(cfg.lexicon_dir); }

  mder::SplitSpec split_spec() const {
    mder::SplitSpec s = mder::parse_split_ratio(cfg.split, cfg.train.seed);
    mder::check_split(s);
    return s;
  }

  void run_prepare() {
    resolve();
    std::ifstream f(in);
    if (!f) throw mder::IoError("cannot open " + in);
    const mder::Corpus c = mder::prepare_corpus(f, mder::stem_of(out));
    write_corpus_with_provenance(out, c, run_json());
    std::cout << json{{"sentences", c.size()}, {"output", out}}.dump() << "\n";
  }

  void run_split() {
    resolve();
    const mder::Corpus c = mder::load_corpus(in);
    mder::validate(c);
    const mder::CorpusSplit s = mder::split_corpus(c, split_spec());
    const json run = run_json();
    const fs::path dir(out);
    write_corpus_with_provenance((dir / "train.jsonl").string(), s.train, run);
    write_corpus_with_provenance((dir / "val.jsonl").string(), s.val, run);
    write_corpus_with_provenance((dir / "test.jsonl").string(), s.test, run);
    std::cout << json{{"train", s.train.size()}, {"val", s.val.size()}, {"test", s.test.size()}}
                     .dump()
              << "\n";
  }

  void run_mix() {
    resolve();
    std::vector<mder::Corpus> corpora;
    for (const auto& p : inputs) corpora.push_back(mder::load_corpus(p));
    const mder::Corpus m = mder::build_mixed(corpora, per_area, cfg.train.seed,
                                             name.empty() ? "mixed" : name);
    write_corpus_with_provenance(out, m, run_json());
    std::cout << json{{"sentences", m.size()}, {"output", out}}.dump() << "\n";
  }

  void run_synth() {
    resolve();
    const mder::SyntheticSpec spec =
        mder::load_synthetic_spec(resolve_grammar(in, cfg.data_dir));
    const mder::Corpus c = mder::generate_synthetic(spec, count, cfg.train.seed);
    write_corpus_with_provenance(out, c, run_json());
    std::cout << json{{"sentences", c.size()}, {"output", out}}.dump() << "\n";
  }

  void run_train() {
    resolve();
    const mder::RuleLexicon lex = lexicon();
    const mder::Corpus tr = mder::load_corpus(in), va = mder::load_corpus(val_path);
    mder::validate(tr);
    mder::validate(va);
    std::optional<mder::Corpus> te;
    if (!test_path.empty()) {
      te = mder::load_corpus(test_path);
      mder::validate(*te);
    }
    if (cfg.repeats > 1 && !te) throw mder::ConfigError("--repeats needs --test");
    json run = run_json();
    run["inputs"] = {{"train", in}, {"val", val_path}, {"test", test_path}};
    run["lexicon_fingerprint"] = lex.fingerprint();

    json result = {{"run", run}};
    std::vector<mder::MetricsReport> test_reports;
    json reports = json::array();
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
      mder::TrainConfig tc = cfg.train;
      tc.seed = cfg.train.seed + r;
      const mder::TrainResult res = mder::train(tr, va, lex, cfg.model, tc, make_log(quiet));
      const std::string path = cfg.repeats == 1 ? model_path : model_path + ".r" + std::to_string(r);
      json ck_run = run;
      ck_run["seed"] = tc.seed;
      mder::save_checkpoint(path, res.tagger, ck_run);
      json entry = {{"seed", tc.seed}, {"checkpoint", path}, {"training", res.report}};
      if (te) {
        test_reports.push_back(mder::evaluate(res.tagger, *te));
        entry["test"] = test_reports.back();
      }
      reports.push_back(entry);
    }
    result["runs"] = reports;
    if (te) result["test"] = mder::aggregate(test_reports);
    if (!report_path.empty()) emit(result, report_path);
    std::cout << result.dump(2) << "\n";
  }

  void run_eval() {
    resolve();
    const mder::Tagger t = mder::load_checkpoint(model_path, lexicon());
    const mder::Corpus c = mder::load_corpus(in);
    mder::validate(c);
    json j = mder::evaluate(t, c);
    json run = run_json();
    run["model"] = t.params.config;
    run["train"]["ablation"] = t.params.ablation;
    run["inputs"] = {{"model", model_path}, {"corpus", in}};
    j["run"] = run;
    emit(j, out);
  }

  void run_grid() {
    resolve();
    const mder::RuleLexicon lex = lexicon();
    std::vector<mder::CorpusSplit> folds;
    std::vector<std::string> names;
    const mder::SplitSpec spec = split_spec();
    for (const auto& p : inputs) {
      const mder::Corpus c = mder::load_corpus(p);
      mder::validate(c);
      folds.push_back(mder::split_corpus(c, spec));
      names.push_back(c.name);
    }
    json j = mder::run_grid(folds, names, lex, cfg.model, cfg.train, make_log(quiet));
    json run = run_json();
    run["inputs"] = inputs;
    j["run"] = run;
    emit(j, out);
  }

  void run_predict() {
    resolve();
    const mder::Tagger t = mder::load_checkpoint(model_path, lexicon());
    std::ifstream f(in);
    if (!f) throw mder::IoError("cannot open " + in);
    std::ostringstream buf;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw mder::FormatError(in + ":" + std::to_string(line_no) + ": " + e.what());
      }
      if (!j.is_object() || !j.contains("text") || !j.at("text").is_string()) {
        throw mder::FormatError(in + ":" + std::to_string(line_no) + ": missing \"text\"");
      }
      const std::string text = j.at("text").get<std::string>();
      json ents = json::array();
      const std::u32string cps = mder::utf8::decode(text);
      for (const auto& e : t.entities(text)) {
        ents.push_back({{"start", e.start},
                        {"end", e.end},
                        {"kind", mder::kind_name(e.kind)},
                        {"text", mder::utf8::encode(cps.substr(e.start, e.end - e.start))}});
      }
      j["entities"] = ents;
      buf << j.dump() << "\n";
    }
    if (out.empty() || out == "-") {
      std::cout << buf.str();
    } else {
      write_atomic(out, buf.str());
      json run = run_json();
      run["inputs"] = {{"model", model_path}, {"input", in}};
      write_atomic(out + ".run.json", json{{"run", run}}.dump(2) + "\n");
    }
  }

  void run_augment() {
    resolve();
    const mder::Corpus c = mder::load_corpus(in);
    mder::validate(c);
    const mder::Glossary g = mder::build_glossaries(c);
    const mder::Corpus a =
        mder::augment(c, g, {cfg.multiplier, cfg.train.seed, cfg.allow_self});
    write_corpus_with_provenance(out, a, run_json());
    std::cout << json{{"input", c.size()},
                      {"output", a.size()},
                      {"glossary", {{"M", g.methods.size()}, {"D", g.datasets.size()}}}}
                     .dump()
              << "\n";
  }

  void run_mine() {
    resolve();
    const mder::AliasMap aliases =
        cfg.alias_file.empty() ? mder::AliasMap{} : mder::load_alias_file(cfg.alias_file);
    const std::set<std::string> exclude =
        cfg.exclude_file.empty() ? std::set<std::string>{}
                                 : mder::load_exclude_file(cfg.exclude_file);
    const std::map<std::string, std::string> categories =
        cfg.category_file.empty() ? std::map<std::string, std::string>{}
                                  : mder::load_category_file(cfg.category_file, aliases);
    std::ifstream f(in);
    if (!f) throw mder::IoError("cannot open " + in);
    const auto papers = mder::read_papers(f, aliases, exclude);
    std::set<int> years = mder::years_of(papers);
    if (year) years = {*year};

    const fs::path dir(out);
    std::ostringstream rankings, datasets;
    mder::write_rankings_header(rankings);
    datasets << "year,dataset,papers\n";
    json summary = json::array();
    for (int y : years) {
      const auto full = mder::build_graph(papers, y);
      const auto g = mder::filter_edges(full, cfg.min_edge_weight);
      const auto centrality = mder::betweenness(g);
      const auto ranked = mder::top_k(centrality, cfg.top_k);
      mder::write_rankings(rankings, y, ranked);
      for (const auto& [d, n] : mder::dataset_frequency(papers, y)) {
        datasets << y << ',' << mder::csv_field(d) << ',' << n << '\n';
      }
      json graph = mder::to_node_link(g, y, centrality, categories);
      graph["run"] = run_json();
      write_atomic((dir / ("graph_" + std::to_string(y) + ".json")).string(),
                   graph.dump(2) + "\n");
      std::ostringstream xml;
      mder::write_graphml(xml, g, y, centrality, categories);
      write_atomic((dir / ("graph_" + std::to_string(y) + ".graphml")).string(), xml.str());
      json top = json::array();
      for (const auto& r : ranked) top.push_back({{"entity", r.entity}, {"score", r.score}});
      summary.push_back({{"year", y},
                         {"papers", std::count_if(papers.begin(), papers.end(),
                                                  [y](const auto& p) { return p.year == y; })},
                         {"nodes", g.nodes.size()},
                         {"edges", g.edges.size()},
                         {"edges_before_filter", full.edges.size()},
                         {"top", top}});
    }
    write_atomic((dir / "rankings.csv").string(), rankings.str());
    write_atomic((dir / "datasets.csv").string(), datasets.str());
    json result = {{"run", run_json()}, {"years", summary}};
    write_atomic((dir / "summary.json").string(), result.dump(2) + "\n");
    std::cout << result.dump(2) << "\n";
  }

  // Accepts eval reports, train reports (their "test" aggregate runs) and
  // bare MetricsReport objects.
  void run_report() {
    resolve();
    std::vector<std::pair<std::string, mder::MetricsReport>> rows;
    for (const auto& p : inputs) {
      std::ifstream f(p);
      if (!f) throw mder::IoError("cannot open " + p);
      json j;
      try {
        f >> j;
      } catch (const json::exception& e) {
        throw mder::FormatError(p + ": " + e.what());
      }
      try {
        if (j.contains("runs") && j.contains("test")) {
          for (const auto& r : j.at("runs")) rows.emplace_back(p, r.at("test").get<mder::MetricsReport>());
        } else {
          rows.emplace_back(p, j.get<mder::MetricsReport>());
        }
      } catch (const json::exception& e) {
        throw mder::FormatError(p + ": not a metrics report (" + e.what() + ")");
      }
    }
    std::vector<mder::MetricsReport> reports;
    for (const auto& r : rows) reports.push_back(r.second);
    const mder::RepeatedMetrics agg = mder::aggregate(reports);
    if (format == "csv") {
      std::ostringstream csv;
      csv << std::setprecision(6) << "source,precision,recall,f1\n";
      for (const auto& [src, r] : rows) {
        csv << mder::csv_field(src) << ',' << r.precision() << ',' << r.recall() << ','
            << r.f1() << '\n';
      }
      csv << "mean," << agg.precision.mean << ',' << agg.recall.mean << ',' << agg.f1.mean
          << '\n';
      csv << "std," << agg.precision.std << ',' << agg.recall.std << ',' << agg.f1.std << '\n';
      csv << "f1_of_means,,," << agg.f1_of_means << '\n';
      if (out.empty() || out == "-") {
        std::cout << csv.str();
      } else {
        write_atomic(out, csv.str());
      }
      return;
    }
    json j = agg;
    j["sources"] = inputs;
    j["run"] = run_json();
    emit(j, out);
  }
};

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  Cli cli;
  try {
    cli.app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return cli.app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 64);
  } catch (const mder::Error& e) {
    return fail(e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 70);
  }
  return 0;
}
