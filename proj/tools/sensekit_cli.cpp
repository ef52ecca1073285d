// sensekit command-line tool.
//
// Exit codes: 0 success, 2 usage, 3 data or format error, 4 numeric failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sensekit/error.hpp"
#include "sensekit/eval.hpp"
#include "sensekit/io.hpp"
#include "sensekit/teacher.hpp"
#include "sensekit/train.hpp"

using namespace sensekit;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_md5(const fs::path& path) { return to_hex(md5(read_file(path))); }

/// Collects what a run read and wrote, then writes it as JSON.
class RunManifest {
 public:
  explicit RunManifest(std::string command) : started_(utc_now()) {
    doc_["command"] = std::move(command);
    doc_["config"] = json::object();
  }

  json& config() { return doc_["config"]; }
  void input(const fs::path& p) { inputs_[p.string()] = file_md5(p); }
  void output(const fs::path& p) { outputs_[p.string()] = file_md5(p); }

  void write(const fs::path& path) {
    doc_["inputs"] = inputs_;
    doc_["started"] = started_;
    doc_["finished"] = utc_now();
    doc_["outputs"] = outputs_;
    write_file_atomic(path, doc_.dump(2) + "\n");
  }

 private:
  json doc_;
  json inputs_ = json::object();
  json outputs_ = json::object();
  std::string started_;
};

fs::path manifest_path(const std::string& flag, const fs::path& out) {
  if (!flag.empty()) return flag;
  return out.string() + ".manifest.json";
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("SENSEKIT_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw DataError(std::string("SENSEKIT_SEED is not an unsigned integer: ") + env);
    }
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Shared training flags

struct TrainFlags {
  std::string corpus, vocab, out, manifest;
  TrainConfig config;
  std::string context = "global";
  std::string iter_context = "shared-window";
  unsigned float_width = 4;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--corpus", f.corpus, "Corpus file or directory")->required();
  cmd->add_option("--vocab", f.vocab, "Vocabulary file")->required();
  cmd->add_option("--out", f.out, "Output model file")->required();
  cmd->add_option("--manifest", f.manifest, "Run manifest path (default: <out>.manifest.json)");
  cmd->add_option("--dim", f.config.dim, "Embedding dimension D")->capture_default_str();
  cmd->add_option("--senses", f.config.senses, "Senses per word K")->capture_default_str();
  cmd->add_option("--window", f.config.window, "Context half-width (delta)")->capture_default_str();
  cmd->add_option("--negatives", f.config.negatives, "Negative samples n")->capture_default_str();
  cmd->add_option("--lr", f.config.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--epochs", f.config.epochs, "Passes over the corpus")->capture_default_str();
  cmd->add_option("--batch", f.config.batch_size, "Windows per Adam step")->capture_default_str();
  cmd->add_option("--seed", f.config.seed, "Random seed (fallback: SENSEKIT_SEED)")
      ->capture_default_str();
  cmd->add_option("--context", f.context, "Center-word context: global|iterative")
      ->capture_default_str();
  cmd->add_option("--iter-context", f.iter_context,
                  "First-pass context in iterative mode: shared-window|word-centered")
      ->capture_default_str();
  cmd->add_option("--threads", f.config.threads, "Worker threads (1 is deterministic)")
      ->capture_default_str();
  cmd->add_option("--float-width", f.float_width, "Bytes per stored value: 4 or 8")
      ->capture_default_str();
}

void resolve_modes(TrainFlags& f) {
  auto c = parse_context_mode(f.context);
  if (!c) throw CLI::ValidationError("--context", "expected global or iterative");
  f.config.context = *c;
  auto i = parse_iter_context(f.iter_context);
  if (!i) throw CLI::ValidationError("--iter-context", "expected shared-window or word-centered");
  f.config.iter_context = *i;
}

json train_config_json(const TrainConfig& c) {
  json j;
  j["dim"] = c.dim;
  j["senses"] = c.senses;
  j["window"] = c.window;
  j["negatives"] = c.negatives;
  j["lr"] = c.lr;
  j["epochs"] = c.epochs;
  j["batch"] = c.batch_size;
  j["seed"] = c.seed;
  j["context"] = to_string(c.context);
  j["iter_context"] = to_string(c.iter_context);
  j["threads"] = c.threads;
  j["distill"] = c.distill;
  if (c.distill) {
    j["alpha"] = c.alpha;
    j["temperature"] = c.temperature;
    j["kd_direction"] = to_string(c.kd_direction);
  }
  return j;
}

int run_training(TrainFlags& f, const std::string& command, const std::string& posteriors) {
  RunManifest manifest(command);
  f.config.validate();
  manifest.config() = train_config_json(f.config);
  manifest.config()["float_width"] = f.float_width;

  auto vocab = load_vocab(f.vocab);
  manifest.input(f.vocab);
  auto docs = read_corpus(f.corpus);
  if (fs::is_regular_file(f.corpus)) manifest.input(f.corpus);
  auto encoded = encode_corpus(docs, vocab);

  std::optional<PosteriorStore> store;
  if (!posteriors.empty()) {
    store = read_posteriors(posteriors);
    manifest.input(posteriors);
    if (store->senses() != f.config.senses) {
      throw DataError("posterior store has " + std::to_string(store->senses()) +
                      " senses, model has " + std::to_string(f.config.senses));
    }
  }

  auto result = train(encoded, vocab, f.config, store ? &*store : nullptr,
                      [](const EpochStats& s, const SenseModelParams&) {
                        std::cout << format_epoch_line(s) << std::endl;
                      });
  save_model(result.params, vocab, f.out, f.float_width);
  manifest.output(f.out);
  manifest.write(manifest_path(f.manifest, f.out));
  return 0;
}

// ---------------------------------------------------------------------------

double purity(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& truth,
              const std::vector<WordId>& word) {
  std::map<std::pair<WordId, std::size_t>, std::map<std::size_t, std::size_t>> table;
  for (std::size_t i = 0; i < predicted.size(); ++i) table[{word[i], predicted[i]}][truth[i]]++;
  std::size_t hits = 0;
  for (const auto& [key, counts] : table) {
    std::size_t best = 0;
    for (const auto& [label, c] : counts) best = std::max(best, c);
    hits += best;
  }
  return predicted.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::vector<std::size_t> read_labels(const fs::path& path) {
  std::vector<std::size_t> labels;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      labels.push_back(std::stoull(line));
    } catch (const std::exception&) {
      throw DataError(path.string() + ": bad label line '" + line + "'");
    }
  }
  return labels;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-sense word embeddings with contextual-teacher distillation"};
  app.require_subcommand(1);
  // Repeated flags: the last one wins, so wrappers can append overrides.
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", "sensekit 0.1.0");

  // build-vocab
  std::string bv_corpus, bv_out, bv_list, bv_manifest;
  std::uint64_t bv_min = 5;
  auto* bv = app.add_subcommand("build-vocab", "Count words and write a vocabulary file");
  bv->add_option("--corpus", bv_corpus, "Corpus file or directory")->required();
  bv->add_option("--out", bv_out, "Vocabulary file to write")->required();
  auto* min_opt = bv->add_option("--min-count", bv_min, "Drop words seen fewer times")->capture_default_str();
  bv->add_option("--vocab-list", bv_list, "Fixed word list; keeps exactly these words")->excludes(min_opt);
  bv->add_option("--manifest", bv_manifest, "Run manifest path (default: <out>.manifest.json)");

  // train
  TrainFlags tr;
  auto* trc = app.add_subcommand("train", "Train sense embeddings without a teacher");
  add_train_flags(trc, tr);

  // distill
  TrainFlags ds;
  std::string ds_posteriors;
  std::string ds_direction = "paper";
  ds.config.distill = true;
  auto* dsc = app.add_subcommand("distill", "Train sense embeddings against teacher posteriors");
  add_train_flags(dsc, ds);
  dsc->add_option("--posteriors", ds_posteriors, "Teacher posterior store (TPO1)")->required();
  dsc->add_option("--alpha", ds.config.alpha, "Weight of the transfer loss")->capture_default_str();
  dsc->add_option("--temperature", ds.config.temperature, "Softening temperature T")
      ->capture_default_str();
  dsc->add_option("--kd-direction", ds_direction,
                  "Transfer cross-entropy form: paper (student outside the log) or teacher-outside")
      ->capture_default_str();

  // fit-teacher
  std::string ft_records, ft_vocab, ft_params, ft_posteriors, ft_labels, ft_manifest;
  TeacherFitConfig ft;
  double ft_export_t = 1.0;
  std::size_t ft_dim = 0;
  auto* ftc = app.add_subcommand("fit-teacher", "Fit teacher sense vectors and export posteriors");
  ftc->add_option("--records", ft_records, "Teacher record file (TSE1)")->required();
  ftc->add_option("--vocab", ft_vocab, "Vocabulary file")->required();
  ftc->add_option("--out-params", ft_params, "Teacher parameter file (TSP1)")->required();
  ftc->add_option("--out-posteriors", ft_posteriors, "Posterior store (TPO1)")->required();
  ftc->add_option("--senses", ft.senses, "Senses per word K")->capture_default_str();
  ftc->add_option("--epochs", ft.epochs, "Passes over the records")->capture_default_str();
  ftc->add_option("--lr", ft.lr, "Adam learning rate")->capture_default_str();
  ftc->add_option("--batch", ft.batch_size, "Records per Adam step")->capture_default_str();
  ftc->add_option("--seed", ft.seed, "Random seed (fallback: SENSEKIT_SEED)")->capture_default_str();
  ftc->add_option("--teacher-dim", ft_dim, "Expected encoder width Dt; checked against the file");
  ftc->add_option("--export-temperature", ft_export_t,
                  "Temperature of the exported posteriors (distill softens them again)")
      ->capture_default_str();
  ftc->add_option("--labels", ft_labels, "Known cluster id per record; prints sense purity");
  ftc->add_option("--manifest", ft_manifest,
                  "Run manifest path (default: <out-posteriors>.manifest.json)");

  // eval
  std::string ev_model, ev_vocab, ev_data, ev_task, ev_metric = "avgsimc", ev_format = "json";
  std::string ev_manifest;
  SenseContextOptions ev_opts;
  auto* evc = app.add_subcommand("eval", "Score a model on a WSI or SCWS dataset");
  evc->add_option("--model", ev_model, "Model file")->required();
  evc->add_option("--vocab", ev_vocab, "Vocabulary file")->required();
  evc->add_option("--data", ev_data, "Dataset file")->required();
  evc->add_option("--task", ev_task, "wsi or scws")->required()->check(CLI::IsMember({"wsi", "scws"}));
  evc->add_option("--metric", ev_metric, "SCWS similarity: avgsimc or maxsimc")
      ->capture_default_str()
      ->check(CLI::IsMember({"avgsimc", "maxsimc"}));
  evc->add_option("--window", ev_opts.window, "Context half-width")->capture_default_str();
  evc->add_flag("--full-context", ev_opts.full_context, "Use the whole context, not +-window");
  evc->add_option("--format", ev_format, "json or tsv")
      ->capture_default_str()
      ->check(CLI::IsMember({"json", "tsv"}));
  evc->add_option("--manifest", ev_manifest, "Write a run manifest here");

  // nn
  std::string nn_model, nn_vocab, nn_word, nn_context, nn_manifest;
  std::size_t nn_top = 10;
  auto* nnc = app.add_subcommand("nn", "Nearest neighbours of a word's sense in context");
  nnc->add_option("--model", nn_model, "Model file")->required();
  nnc->add_option("--vocab", nn_vocab, "Vocabulary file")->required();
  nnc->add_option("--word", nn_word, "Query word")->required();
  nnc->add_option("--context", nn_context, "Text around the word")->required();
  nnc->add_option("--top", nn_top, "Rows to print")->capture_default_str();
  nnc->add_option("--manifest", nn_manifest, "Write a run manifest here");

  // validate-records
  std::string vr_file, vr_vocab;
  auto* vrc = app.add_subcommand("validate-records", "Check a teacher record file");
  vrc->add_option("--file", vr_file, "Teacher record file (TSE1)")->required();
  vrc->add_option("--vocab", vr_vocab, "Vocabulary file")->required();

  // export-text
  std::string ex_model, ex_vocab, ex_out, ex_manifest;
  auto* exc = app.add_subcommand("export-text", "Write embeddings in word2vec text format");
  exc->add_option("--model", ex_model, "Model file")->required();
  exc->add_option("--vocab", ex_vocab, "Vocabulary file")->required();
  exc->add_option("--out", ex_out, "Text file to write")->required();
  exc->add_option("--manifest", ex_manifest, "Run manifest path (default: <out>.manifest.json)");

  try {
    app.parse(argc, argv);
    if (trc->count("--seed") == 0) tr.config.seed = default_seed();
    if (dsc->count("--seed") == 0) ds.config.seed = default_seed();
    if (ftc->count("--seed") == 0) ft.seed = default_seed();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*bv) {
      RunManifest manifest("build-vocab");
      auto docs = read_corpus(bv_corpus);
      if (fs::is_regular_file(bv_corpus)) manifest.input(bv_corpus);
      Vocabulary vocab;
      if (!bv_list.empty()) {
        vocab = build_vocab_fixed(docs, load_word_list(bv_list));
        manifest.input(bv_list);
        manifest.config()["vocab_list"] = bv_list;
      } else {
        vocab = build_vocab(docs, bv_min);
        manifest.config()["min_count"] = bv_min;
      }
      if (vocab.empty()) throw DataError("vocabulary is empty: " + bv_corpus);
      save_vocab(vocab, bv_out);
      manifest.output(bv_out);
      manifest.write(manifest_path(bv_manifest, bv_out));
      std::cout << vocab.size() << " words, digest " << to_hex(vocab.digest()) << "\n";
      return 0;
    }

    if (*trc) {
      resolve_modes(tr);
      return run_training(tr, "train", "");
    }

    if (*dsc) {
      resolve_modes(ds);
      auto dir = parse_kd_direction(ds_direction);
      if (!dir) throw CLI::ValidationError("--kd-direction", "expected paper or teacher-outside");
      ds.config.kd_direction = *dir;
      return run_training(ds, "distill", ds_posteriors);
    }

    if (*ftc) {
      RunManifest manifest("fit-teacher");
      if (ft_dim > 0) ft.expected_dim = ft_dim;
      auto vocab = load_vocab(ft_vocab);
      manifest.input(ft_vocab);
      auto store = read_teacher_records(ft_records, &vocab);
      manifest.input(ft_records);
      manifest.config() = {{"senses", ft.senses}, {"epochs", ft.epochs}, {"lr", ft.lr},
                           {"batch", ft.batch_size}, {"seed", ft.seed},
                           {"teacher_dim", store.header.dim},
                           {"export_temperature", ft_export_t}};
      auto fit = fit_teacher(store, vocab.size(), ft, [](std::size_t epoch, double loss) {
        std::printf("%zu\t%.9g\n", epoch, loss);
        std::fflush(stdout);
      });
      save_teacher_params(fit.params, vocab, ft_params);
      auto posteriors = export_posteriors(store, fit.params, ft_export_t);
      write_posteriors(posteriors, ft_posteriors);
      manifest.output(ft_params);
      manifest.output(ft_posteriors);
      std::cout << posteriors.size() << " posteriors for " << store.records.size()
                << " records\n";
      if (!ft_labels.empty()) {
        auto truth = read_labels(ft_labels);
        manifest.input(ft_labels);
        if (truth.size() != store.records.size()) {
          throw DataError(ft_labels + ": " + std::to_string(truth.size()) + " labels for " +
                          std::to_string(store.records.size()) + " records");
        }
        std::vector<std::size_t> predicted;
        std::vector<WordId> words;
        for (const auto& rec : store.records) {
          predicted.push_back(teacher_sense_posterior(rec.center, rec, fit.params).argmax());
          words.push_back(rec.center);
        }
        std::printf("purity\t%.6f\n", purity(predicted, truth, words));
      }
      manifest.write(manifest_path(ft_manifest, ft_posteriors));
      return 0;
    }

    if (*evc) {
      RunManifest manifest("eval");
      auto vocab = load_vocab(ev_vocab);
      auto params = load_model(ev_model, vocab);
      manifest.input(ev_vocab);
      manifest.input(ev_model);
      manifest.input(ev_data);
      json report;
      report["dataset"] = fs::path(ev_data).filename().string();
      if (ev_task == "wsi") {
        auto data = load_wsi(ev_data, vocab);
        auto res = eval_wsi(data.instances, vocab, params, ev_opts);
        report["metric"] = "ari";
        report["value"] = res.mean;
        report["skipped"] = data.skipped_oov + res.skipped_instances;
        report["scored_words"] = res.per_word.size();
        report["skipped_words"] = res.skipped_words;
      } else {
        auto data = load_scws(ev_data, vocab);
        auto metric = ev_metric == "maxsimc" ? SimMetric::kMaxSimC : SimMetric::kAvgSimC;
        auto res = eval_scws(data, params, metric, ev_opts);
        report["metric"] = ev_metric;
        report["value"] = res.rho;
        report["skipped"] = res.skipped;
        report["scored"] = res.scored;
      }
      manifest.config() = {{"task", ev_task}, {"metric", report["metric"]},
                           {"window", ev_opts.window}, {"full_context", ev_opts.full_context}};
      if (ev_format == "json") {
        std::cout << report.dump() << "\n";
      } else {
        std::cout << "dataset\tmetric\tvalue\tskipped\n"
                  << report["dataset"].get<std::string>() << "\t"
                  << report["metric"].get<std::string>() << "\t"
                  << report["value"].get<double>() << "\t" << report["skipped"] << "\n";
      }
      if (!ev_manifest.empty()) manifest.write(ev_manifest);
      return 0;
    }

    if (*nnc) {
      RunManifest manifest("nn");
      auto vocab = load_vocab(nn_vocab);
      auto params = load_model(nn_model, vocab);
      manifest.input(nn_vocab);
      manifest.input(nn_model);
      auto word = vocab.id_of(nn_word);
      if (!word) throw DataError("word not in vocabulary: " + nn_word);
      auto tokens = tokenize(nn_context);
      auto res = nearest_neighbors(*word, tokens, vocab, params, nn_top);
      std::printf("%s\tsense %zu\tp=%.4f\n", nn_word.c_str(), res.sense, res.probability);
      std::printf("rank\tword\tcosine\n");
      for (std::size_t i = 0; i < res.neighbors.size(); ++i) {
        std::printf("%zu\t%s\t%.6f\n", i + 1, vocab.word(res.neighbors[i].word).c_str(),
                    res.neighbors[i].cosine);
      }
      manifest.config() = {{"word", nn_word}, {"context", nn_context}, {"top", nn_top}};
      if (!nn_manifest.empty()) manifest.write(nn_manifest);
      return 0;
    }

    if (*vrc) {
      auto vocab = load_vocab(vr_vocab);
      auto report = validate_teacher_records(vr_file, vocab);
      if (report.ok) {
        std::cout << "ok\t" << report.records << " records\n";
        return 0;
      }
      std::cerr << "invalid: " << report.message << "\n";
      if (report.first_bad_record) std::cerr << "first bad record: " << *report.first_bad_record << "\n";
      return kExitData;
    }

    if (*exc) {
      RunManifest manifest("export-text");
      auto vocab = load_vocab(ex_vocab);
      auto params = load_model(ex_model, vocab);
      manifest.input(ex_vocab);
      manifest.input(ex_model);
      export_text(params, vocab, ex_out);
      manifest.output(ex_out);
      manifest.write(manifest_path(ex_manifest, ex_out));
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
