// decnn: command-line front end.
//
//   decnn convert           dataset format conversion
//   decnn train-embeddings  domain embeddings from a raw corpus
//   decnn train             train one tagger and save it
//   decnn eval              score a saved model, or run the multi-seed protocol
//   decnn predict           tag sentences with a saved model
//
// Exit status: 0 success, 2 bad usage / bad input data, 1 anything else.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "decnn/config_json.hpp"
#include "decnn/errors.hpp"
#include "decnn/model_io.hpp"
#include "decnn/run_config.hpp"
#include "decnn/utf8.hpp"

using namespace decnn;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

const std::vector<std::string> kModes{"dual", "general-only", "domain-only"};
const std::vector<std::string> kAblations{"none", "maxpool"};
const std::vector<std::string> kFormats{"jsonl", "jsonl_spans", "conll", "conll_two_col"};

// Options shared by train and eval.
struct ExperimentFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string emb_mode;
  std::string ablation;
  std::string data_format;
  bool quiet = false;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f) {
  cmd->add_option("--config", f.config, "Run config (JSON)")->envname("DECNN_CONFIG");
  cmd->add_option("--seed", f.seed, "Seed for initialization, shuffling and dropout");
  cmd->add_option("--emb-mode", f.emb_mode, "Embedding input")->check(CLI::IsMember(kModes));
  cmd->add_option("--ablation", f.ablation, "Architecture ablation")
      ->check(CLI::IsMember(kAblations));
  cmd->add_option("--data-format", f.data_format, "Dataset format")->check(CLI::IsMember(kFormats));
  cmd->add_flag("--quiet", f.quiet, "No per-epoch progress on stderr");
}

RunConfig resolve_config(const ExperimentFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (f.seed) cfg.set_seed(*f.seed);
  if (!f.emb_mode.empty()) cfg.model.emb_mode = parse_embedding_mode(f.emb_mode);
  if (!f.ablation.empty()) cfg.model.maxpool_ablation = f.ablation == "maxpool";
  if (!f.data_format.empty()) cfg.data_format = parse_data_format(f.data_format);
  return cfg;
}

void require_paths(const std::vector<std::string>& missing) {
  if (missing.empty()) return;
  std::string list;
  for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
  throw UsageError("missing required path(s) in config: " + list);
}

void require_file(const std::optional<fs::path>& p, const char* name) {
  if (p && !fs::exists(*p)) {
    throw IoError(std::string(name) + ": file '" + p->string() + "' does not exist");
  }
}

std::shared_ptr<const DualEmbedder> load_embedder(const RunConfig& cfg,
                                                  const std::vector<const Dataset*>& data) {
  std::vector<std::vector<std::string>> token_lists;
  for (const Dataset* d : data) {
    for (const auto& s : d->sentences) token_lists.push_back(s.words());
  }
  const auto vocab = lookup_vocabulary(token_lists);
  LoadOptions opts;
  opts.keep = &vocab;
  std::shared_ptr<const EmbeddingTable> general;
  std::shared_ptr<const EmbeddingTable> domain;
  if (cfg.model.emb_mode != EmbeddingMode::domain_only) {
    general = std::make_shared<const EmbeddingTable>(load_table(*cfg.paths.general_emb, opts));
  }
  if (cfg.model.emb_mode != EmbeddingMode::general_only) {
    domain = std::make_shared<const EmbeddingTable>(load_table(*cfg.paths.domain_emb, opts));
  }
  return std::make_shared<const DualEmbedder>(general, domain, cfg.model.emb_mode);
}

void print_warnings(const Dataset& d, const fs::path& from) {
  for (const auto& w : d.warnings) std::cerr << "warning: " << from.string() << ": " << w << "\n";
}

Dataset load_split(const fs::path& path, DataFormat format, Split split) {
  Dataset d = load_dataset(path, format, split);
  print_warnings(d, path);
  return d;
}

// Sends epoch lines to a file and, unless quiet, to stderr.
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == EOF) return !EOF;
    if (a_ && a_->sputc(char(c)) == EOF) return EOF;
    if (b_ && b_->sputc(char(c)) == EOF) return EOF;
    return c;
  }
  int sync() override {
    int r = 0;
    if (a_) r |= a_->pubsync();
    if (b_) r |= b_->pubsync();
    return r;
  }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

int cmd_convert(const std::string& input, const std::string& from, const std::string& to,
                const std::string& out) {
  const Dataset d = load_split(input, parse_data_format(from), Split::train);
  if (out.empty() || out == "-") {
    write_dataset(std::cout, d, parse_data_format(to));
  } else {
    save_dataset(out, d, parse_data_format(to));
  }
  return 0;
}

struct EmbeddingFlags {
  std::string config;
  std::string corpus;
  std::string out;
  std::optional<int> dim;
  std::optional<int> epochs;
  std::optional<int> min_count;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

int cmd_train_embeddings(const EmbeddingFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  TrainerConfig& tc = cfg.embeddings;
  if (f.dim) tc.dim = *f.dim;
  if (f.epochs) tc.epochs = *f.epochs;
  if (f.min_count) tc.min_count = *f.min_count;
  if (f.threads) tc.threads = *f.threads;
  if (f.seed) tc.seed = *f.seed;
  tc.validate();
  const std::optional<fs::path> corpus =
      f.corpus.empty() ? cfg.paths.corpus : std::optional<fs::path>(f.corpus);
  if (!corpus) throw UsageError("no corpus given: pass --corpus or set paths.corpus");
  require_file(corpus, "corpus");

  const auto lines = read_corpus_lines(*corpus);
  const TrainedEmbeddings trained = train_embeddings(lines, tc);
  export_table(trained.table, f.out);
  std::cout << json{{"words", trained.table.size()},
                    {"dim", trained.table.dim()},
                    {"stored_buckets", trained.table.subwords().rows.size()},
                    {"pairs", trained.log.pairs},
                    {"epoch_loss", trained.log.epoch_loss},
                    {"out", f.out}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_train(const ExperimentFlags& flags, const std::string& out_override) {
  RunConfig cfg = resolve_config(flags);
  if (!out_override.empty()) cfg.paths.out_dir = fs::path(out_override);
  auto missing = missing_paths(cfg, true, false);
  if (!cfg.paths.out_dir) missing.emplace_back("paths.out_dir (or --out)");
  require_paths(missing);
  require_file(cfg.paths.general_emb, "paths.general_emb");
  require_file(cfg.paths.domain_emb, "paths.domain_emb");
  require_file(cfg.paths.train, "paths.train");
  require_file(cfg.paths.test, "paths.test");

  const Dataset full_train = load_split(*cfg.paths.train, cfg.data_format, Split::train);
  std::optional<Dataset> test;
  if (cfg.paths.test) test = load_split(*cfg.paths.test, cfg.data_format, Split::test);
  std::vector<const Dataset*> seen{&full_train};
  if (test) seen.push_back(&*test);
  auto embedder = load_embedder(cfg, seen);

  const auto [kept, held] =
      hold_out(full_train, cfg.train.holdout,
               cfg.train.holdout_random ? std::optional<std::uint64_t>(cfg.train.seed)
                                        : std::nullopt);
  fs::create_directories(*cfg.paths.out_dir);
  std::ofstream log_file(*cfg.paths.out_dir / "train_log.jsonl");
  TeeBuf tee(log_file.rdbuf(), flags.quiet ? nullptr : std::cerr.rdbuf());
  std::ostream log(&tee);

  DeCnn<float> model(cfg.model, embedder);
  const TrainingLog tlog = train(model, kept, held, cfg.train, &log);

  ModelSources sources;
  if (cfg.paths.general_emb && cfg.model.emb_mode != EmbeddingMode::domain_only) {
    sources.general = EmbeddingRef{*cfg.paths.general_emb};
  }
  if (cfg.paths.domain_emb && cfg.model.emb_mode != EmbeddingMode::general_only) {
    sources.domain = EmbeddingRef{*cfg.paths.domain_emb};
  }
  const fs::path model_path = *cfg.paths.out_dir / "model.bin";
  save_model(model, model_path, sources);
  std::ofstream(*cfg.paths.out_dir / "run_config.json") << to_json(cfg).dump(2) << "\n";

  json summary{{"model", model_path.string()},
               {"epochs_run", tlog.epochs.size()},
               {"best_epoch", tlog.best_epoch},
               {"best_validation_f1", tlog.best_f1},
               {"validated_on_train", tlog.validated_on_train}};
  if (test) summary["test"] = to_json(evaluate(model, *test));
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_eval(const ExperimentFlags& flags, const std::string& model_path,
             const std::string& test_override, std::optional<int> runs, bool fixed_seed) {
  if (!model_path.empty()) {
    if (runs) throw UsageError("--runs trains fresh models; it cannot be combined with --model");
    if (test_override.empty()) throw UsageError("eval --model needs --test");
    DataFormat format = DataFormat::jsonl_spans;
    if (!flags.data_format.empty()) format = parse_data_format(flags.data_format);
    const Dataset test = load_split(test_override, format, Split::test);
    std::vector<std::vector<std::string>> toks;
    for (const auto& s : test.sentences) toks.push_back(s.words());
    const auto vocab = lookup_vocabulary(toks);
    LoadOptions opts;
    opts.keep = &vocab;
    const LoadedModel loaded = load_model(model_path, opts);
    std::cout << to_json(evaluate(loaded.model, test)).dump() << "\n";
    return 0;
  }

  RunConfig cfg = resolve_config(flags);
  if (!test_override.empty()) cfg.paths.test = fs::path(test_override);
  require_paths(missing_paths(cfg, true, true));
  require_file(cfg.paths.general_emb, "paths.general_emb");
  require_file(cfg.paths.domain_emb, "paths.domain_emb");
  require_file(cfg.paths.train, "paths.train");
  require_file(cfg.paths.test, "paths.test");

  ProtocolInputs in;
  in.model = cfg.model;
  in.train = cfg.train;
  in.training = load_split(*cfg.paths.train, cfg.data_format, Split::train);
  in.test = load_split(*cfg.paths.test, cfg.data_format, Split::test);
  in.embedder = load_embedder(cfg, {&in.training, &in.test});
  const int n = runs.value_or(cfg.runs);
  std::ostream* log = flags.quiet ? nullptr : &std::cerr;
  const EvalReport report = run_protocol(
      in, n, cfg.seed, fixed_seed ? SeedSchedule::fixed : SeedSchedule::increment, log);
  json j = to_json(report);
  j["emb_mode"] = std::string(to_string(cfg.model.emb_mode));
  j["maxpool_ablation"] = cfg.model.maxpool_ablation;
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& input,
                const std::string& input_format, const std::string& out) {
  Dataset data;
  if (input_format == "text") {
    std::ifstream in(input);
    if (!in) throw IoError("cannot open input '" + input + "'");
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      data.sentences.push_back(make_sentence(line, {}));
    }
  } else {
    data = load_split(input, parse_data_format(input_format), Split::test);
  }

  std::vector<std::vector<std::string>> toks;
  for (const auto& s : data.sentences) toks.push_back(s.words());
  const auto vocab = lookup_vocabulary(toks);
  LoadOptions opts;
  opts.keep = &vocab;
  const LoadedModel loaded = load_model(model_path, opts);

  std::ofstream file;
  if (!out.empty() && out != "-") {
    file.open(out);
    if (!file) throw IoError("cannot write '" + out + "'");
  }
  std::ostream& os = file.is_open() ? file : std::cout;
  const auto labels = predict_dataset(loaded.model, data);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sentence& s = data.sentences[i];
    const auto spans = s.tokens.empty() ? std::vector<Span>{} : bio_to_spans(s.tokens, labels[i]);
    json span_list = json::array();
    json aspects = json::array();
    for (const Span& sp : spans) {
      span_list.push_back({sp.start, sp.end});
      aspects.push_back(utf8::slice(s.text, sp.start, sp.end));
    }
    os << json{{"text", s.text}, {"spans", span_list}, {"aspects", aspects}}.dump() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aspect extraction with a dual-embedding CNN tagger", "decnn"};
  app.require_subcommand(1);

  auto* convert = app.add_subcommand("convert", "Convert a dataset between formats");
  std::string conv_in, conv_from = "jsonl", conv_to = "conll", conv_out;
  convert->add_option("--input", conv_in, "Input dataset")->required();
  convert->add_option("--from", conv_from, "Input format")->check(CLI::IsMember(kFormats));
  convert->add_option("--to", conv_to, "Output format")->check(CLI::IsMember(kFormats));
  convert->add_option("--out", conv_out, "Output file (default stdout)");

  auto* emb = app.add_subcommand("train-embeddings", "Train domain embeddings on a raw corpus");
  EmbeddingFlags ef;
  emb->add_option("--config", ef.config, "Run config (JSON)")->envname("DECNN_CONFIG");
  emb->add_option("--corpus", ef.corpus, "Corpus, one sentence per line");
  emb->add_option("--out", ef.out, "Output embedding file")->required();
  emb->add_option("--dim", ef.dim, "Vector dimension");
  emb->add_option("--epochs", ef.epochs, "Passes over the corpus");
  emb->add_option("--min-count", ef.min_count, "Minimum word frequency");
  emb->add_option("--threads", ef.threads, "Worker threads (1 = reproducible)");
  emb->add_option("--seed", ef.seed, "Seed");

  auto* train_cmd = app.add_subcommand("train", "Train a tagger and save it");
  ExperimentFlags train_flags;
  std::string train_out;
  add_experiment_flags(train_cmd, train_flags);
  train_cmd->add_option("--out", train_out, "Output directory (overrides paths.out_dir)");

  auto* eval_cmd = app.add_subcommand("eval", "Score a saved model or run the seeded protocol");
  ExperimentFlags eval_flags;
  std::string eval_model, eval_test;
  std::optional<int> eval_runs;
  bool eval_fixed = false;
  add_experiment_flags(eval_cmd, eval_flags);
  eval_cmd->add_option("--model", eval_model, "Saved model to score");
  eval_cmd->add_option("--test", eval_test, "Test dataset (overrides paths.test)");
  eval_cmd->add_option("--runs", eval_runs, "Train and average this many runs")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--fixed-seed", eval_fixed, "Use the same seed for every run");

  auto* predict_cmd = app.add_subcommand("predict", "Tag sentences with a saved model");
  std::string pred_model, pred_input, pred_format = "jsonl", pred_out;
  predict_cmd->add_option("--model", pred_model, "Saved model")->required();
  predict_cmd->add_option("--input", pred_input, "Sentences to tag")->required();
  predict_cmd->add_option("--input-format", pred_format, "jsonl, conll or text (one per line)")
      ->check(CLI::IsMember({"jsonl", "jsonl_spans", "conll", "conll_two_col", "text"}));
  predict_cmd->add_option("--out", pred_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*convert) return cmd_convert(conv_in, conv_from, conv_to, conv_out);
    if (*emb) return cmd_train_embeddings(ef);
    if (*train_cmd) return cmd_train(train_flags, train_out);
    if (*eval_cmd) return cmd_eval(eval_flags, eval_model, eval_test, eval_runs, eval_fixed);
    if (*predict_cmd) return cmd_predict(pred_model, pred_input, pred_format, pred_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IntegrityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
