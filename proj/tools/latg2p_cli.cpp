// Copyright 2026 The latg2p Authors
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

// latg2p: prepare, train, eval, ablate, predict, bench, plot-data, init.
//
// Exit codes:
//   0 success
//   1 other error (invalid configuration, corrupt checkpoint, ...)
//   2 missing or unreadable input file
//   3 a language has too few unique words to split
//   4 non-finite training loss
//   5 checkpoint/vocabulary mismatch
//   6 unknown language code
//   7 too few words for a throughput measurement

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "latg2p/config.hpp"
#include "latg2p/eval.hpp"
#include "latg2p/log.hpp"
#include "latg2p/pipeline.hpp"
#include "latg2p/report.hpp"
#include "latg2p/train.hpp"
#include "latg2p/unicode.hpp"

namespace fs = std::filesystem;
using namespace latg2p;

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return 2;
    case ErrorCode::InsufficientData: return 3;
    case ErrorCode::NonFiniteLoss: return 4;
    case ErrorCode::VocabMismatch: return 5;
    case ErrorCode::UnknownLanguage: return 6;
    case ErrorCode::TooFewWords: return 7;
    default: return 1;
  }
}

struct GlobalOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::size_t> threads;
  bool quiet = false;
  bool verbose = false;
};

/// Defaults, then the config file, then --set overrides, then --threads.
RunConfig resolve_config(const GlobalOptions& g, RunConfig base) {
  if (!g.config_file.empty()) base = load_run_config(g.config_file, base);
  for (const auto& o : g.overrides) {
    const auto [key, value] = parse_override(o);
    apply_setting(base, key, value);
  }
  if (g.threads) base.threads = *g.threads;
  return base;
}

std::vector<LanguageId> parse_language_list(const std::string& text) {
  if (text.empty()) return {kAllLanguages.begin(), kAllLanguages.end()};
  std::vector<LanguageId> out;
  std::istringstream in(text);
  std::string code;
  while (std::getline(in, code, ',')) {
    if (!code.empty()) out.push_back(parse_language(code));
  }
  return out;
}

std::string normalize_word(const std::string& word) { return unicode::nfc(unicode::to_lower(word)); }

// --------------------------------------------------------------------------

struct PrepareOptions {
  std::string data_dir;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<bool> keep_stress;
  std::string multi_pron;
  std::string langs;
};

int cmd_prepare(const GlobalOptions& g, const PrepareOptions& o) {
  RunConfig cfg = resolve_config(g, RunConfig{});
  if (!o.data_dir.empty()) cfg.data_dir = o.data_dir;
  if (!o.out.empty()) cfg.work_dir = o.out;
  if (o.seed) cfg.split_seed = *o.seed;
  if (o.keep_stress) cfg.policy.keep_stress = *o.keep_stress;
  if (!o.multi_pron.empty()) cfg.policy.multi_pron_rule = parse_multi_pron_rule(o.multi_pron);
  const auto prepared = prepare_corpus(cfg.data_dir, parse_language_list(o.langs), cfg.split_seed, cfg.policy);
  write_prepared(prepared, cfg, WorkDir{cfg.work_dir});
  std::cout << format_stats_table(corpus_stats(prepared.split));
  log_info("prepared " + cfg.work_dir + " (" + std::to_string(prepared.vocab.graphemes().size()) + " graphemes, " +
           std::to_string(prepared.vocab.phonemes().size()) + " phonemes)");
  return 0;
}

// --------------------------------------------------------------------------

struct TrainOptions {
  std::string work_dir;
  bool toy = false;
  bool reference = false;
  bool ablate_no_langid = false;
  std::string out;
  std::string metrics;
  std::optional<std::size_t> steps;
};

RunConfig train_config(const GlobalOptions& g, const TrainOptions& o) {
  RunConfig cfg = resolve_config(g, o.toy ? RunConfig::toy() : RunConfig{});
  if (o.reference) {
    cfg.model = ModelConfig::reference();
    cfg.train = TrainConfig::reference();
  }
  if (!o.work_dir.empty()) cfg.work_dir = o.work_dir;
  if (o.ablate_no_langid) cfg.model.use_lang_id = false;
  if (o.steps) {
    cfg.train.total_steps = *o.steps;
    cfg.train.warmup_steps = std::min(cfg.train.warmup_steps, *o.steps / 10);
    cfg.train.val_every = std::min(cfg.train.val_every, *o.steps);
  }
  return cfg;
}

fs::path default_checkpoint(const RunConfig& cfg) {
  return fs::path(cfg.work_dir) / (cfg.model.use_lang_id ? "model.latp" : "model-no-langid.latp");
}

int cmd_train(const GlobalOptions& g, const TrainOptions& o) {
  const RunConfig cfg = train_config(g, o);
  const WorkDir dir{cfg.work_dir};
  const auto prepared = load_prepared(dir);
  const ModelConfig model_cfg = cfg.model.with_vocab(prepared.vocab);
  model_cfg.validate();

  const fs::path ckpt = o.out.empty() ? default_checkpoint(cfg) : fs::path(o.out);
  fs::path metrics = o.metrics.empty() ? fs::path(ckpt).replace_extension(".metrics.jsonl") : fs::path(o.metrics);
  fs::remove(metrics);

  TrainingOptions opts;
  opts.checkpoint_path = ckpt;
  opts.metrics_path = metrics;
  opts.init_seed = cfg.init_seed;
  opts.eval_threads = cfg.threads;
  opts.manifest_extra = {{"run_config", run_config_json(cfg)}, {"run_config_text", run_config_text(cfg)}};
  opts.on_record = [](const nlohmann::json& rec) { log_info(rec.dump()); };
  const auto result = run_training<float>(prepared.split, prepared.vocab, cfg.train, model_cfg, opts);

  std::cout << "checkpoint " << ckpt.string() << "\n"
            << "best_step " << result.best_step << "\n"
            << "best_mean_val_per " << detail::fmt("%.2f", result.best_mean_val_per) << "\n"
            << "params " << count_params(result.best_model).total << "\n";
  return 0;
}

// --------------------------------------------------------------------------

struct InitOptions {
  std::string work_dir;
  bool toy = false;
  std::string out;
};

int cmd_init(const GlobalOptions& g, const InitOptions& o) {
  RunConfig cfg = resolve_config(g, o.toy ? RunConfig::toy() : RunConfig{});
  if (!o.work_dir.empty()) cfg.work_dir = o.work_dir;
  const auto vocab = load_vocab(WorkDir{cfg.work_dir}.vocab());
  const auto model = init_model<float>(cfg.model.with_vocab(vocab), cfg.init_seed);
  const fs::path out = o.out.empty() ? fs::path(cfg.work_dir) / "untrained.latp" : fs::path(o.out);
  save_checkpoint(model, vocab_hash(vocab), out, {{"run_config", run_config_json(cfg)}, {"untrained", true}});
  std::cout << "checkpoint " << out.string() << "\nparams " << count_params(model).total << "\nbytes " << fs::file_size(out) << "\n";
  return 0;
}

// --------------------------------------------------------------------------

struct EvalOptions {
  std::string checkpoint;
  std::string work_dir;
  std::string split = "test";
  std::string compare;
  std::string out;
};

void write_eval(const EvalReport& report, const fs::path& prefix) {
  write_file_atomic(prefix.string() + ".report.txt", format_per_table(report));
  write_file_atomic(prefix.string() + ".report.jsonl", eval_report_jsonl(report));
}

int run_comparison(const EvalReport& with_id, const EvalReport& without_id, const fs::path& prefix) {
  const auto ablation = ablation_compare(with_id, without_id);
  const std::string table = format_ablation_table(ablation);
  write_file_atomic(prefix.string() + ".ablation.txt", table);
  write_file_atomic(prefix.string() + ".ablation.jsonl", ablation_report_jsonl(ablation));
  std::cout << "\n" << table;
  return 0;
}

int cmd_eval(const GlobalOptions& g, const EvalOptions& o) {
  RunConfig cfg = resolve_config(g, RunConfig{});
  if (!o.work_dir.empty()) cfg.work_dir = o.work_dir;
  const auto prepared = load_prepared(WorkDir{cfg.work_dir});
  const fs::path prefix = o.out.empty() ? fs::path(fs::path(o.checkpoint).replace_extension("").string() + "." + o.split) : fs::path(o.out);
  const auto report = evaluate_checkpoint(o.checkpoint, prepared, o.split, cfg.threads);
  write_eval(report, prefix);
  std::cout << format_per_table(report);
  if (o.compare.empty()) return 0;
  const auto other = evaluate_checkpoint(o.compare, prepared, o.split, cfg.threads);
  write_eval(other, fs::path(o.compare).replace_extension("").string() + "." + o.split);
  return run_comparison(report, other, prefix);
}

struct AblateOptions {
  std::string with_id;
  std::string without_id;
  std::string work_dir;
  std::string split = "test";
  std::string out;
};

int cmd_ablate(const GlobalOptions& g, const AblateOptions& o) {
  RunConfig cfg = resolve_config(g, RunConfig{});
  if (!o.work_dir.empty()) cfg.work_dir = o.work_dir;
  const auto prepared = load_prepared(WorkDir{cfg.work_dir});
  const auto with_id = evaluate_checkpoint(o.with_id, prepared, o.split, cfg.threads);
  const auto without_id = evaluate_checkpoint(o.without_id, prepared, o.split, cfg.threads);
  const fs::path prefix = o.out.empty() ? fs::path(cfg.work_dir) / ("ablation." + o.split) : fs::path(o.out);
  std::cout << format_per_table(with_id);
  return run_comparison(with_id, without_id, prefix);
}

// --------------------------------------------------------------------------

struct PredictOptions {
  std::string checkpoint;
  std::string vocab;
  std::string work_dir;
  std::string lang;
  std::vector<std::string> words;
  bool from_stdin = false;
};

fs::path vocab_path(const RunConfig& cfg, const std::string& explicit_path) {
  return explicit_path.empty() ? WorkDir{cfg.work_dir}.vocab() : fs::path(explicit_path);
}

int cmd_predict(const GlobalOptions& g, const PredictOptions& o) {
  const LanguageId lang = parse_language(o.lang);
  RunConfig cfg = resolve_config(g, RunConfig{});
  if (!o.work_dir.empty()) cfg.work_dir = o.work_dir;
  const auto vocab = load_vocab(vocab_path(cfg, o.vocab));
  const auto loaded = load_checkpoint<float>(o.checkpoint, vocab_hash(vocab));
  auto emit = [&](const std::string& word) {
    const auto phonemes = greedy_decode(loaded.model, normalize_word(word), lang, vocab);
    std::cout << word << "\t/" << join_phonemes(phonemes) << "/\n";
  };
  for (const auto& w : o.words) emit(w);
  if (o.from_stdin) {
    std::string line;
    while (std::getline(std::cin, line)) {
      const auto trimmed = detail::trim(line);
      if (!trimmed.empty()) emit(std::string(trimmed));
    }
  }
  return 0;
}

// --------------------------------------------------------------------------

struct BenchOptions {
  std::string checkpoint;
  std::string vocab;
  std::string work_dir;
  std::string words_file;
  std::string lang = "en";
  std::size_t n = 500;
  std::size_t warmup = 20;
  std::string device = "cpu";
  std::string out;
};

int cmd_bench(const GlobalOptions& g, const BenchOptions& o) {
  const LanguageId lang = parse_language(o.lang);
  if (o.n < kMinBenchWords) {
    throw Error(ErrorCode::TooFewWords, "--n " + std::to_string(o.n) + " is below the minimum of " + std::to_string(kMinBenchWords));
  }
  RunConfig cfg = resolve_config(g, RunConfig{});
  if (!o.work_dir.empty()) cfg.work_dir = o.work_dir;
  const auto vocab = load_vocab(vocab_path(cfg, o.vocab));
  const auto loaded = load_checkpoint<float>(o.checkpoint, vocab_hash(vocab));

  std::vector<std::string> pool;
  if (!o.words_file.empty()) {
    std::istringstream in(read_file(o.words_file));
    std::string line;
    while (std::getline(in, line)) {
      const auto word = detail::trim(line.substr(0, line.find('\t')));
      if (!word.empty()) pool.push_back(normalize_word(std::string(word)));
    }
  } else {
    const auto split = read_manifest(WorkDir{cfg.work_dir}.manifest());
    const auto it = split.languages.find(lang);
    if (it != split.languages.end()) {
      for (const auto& e : it->second.test) pool.push_back(e.word);
    }
  }
  if (pool.empty()) throw Error(ErrorCode::TooFewWords, "no words available for the benchmark");
  std::vector<std::string> words;
  for (std::size_t i = 0; i < o.n; ++i) words.push_back(pool[i % pool.size()]);

  const auto report = throughput_bench(model_predictor(loaded.model, vocab), lang, words, o.warmup, o.device);
  std::cout << format_throughput_table({report});
  const fs::path out = o.out.empty() ? fs::path(o.checkpoint).replace_extension(".bench.json") : fs::path(o.out);
  auto record = to_record(report);
  record["checkpoint"] = fs::path(o.checkpoint).filename().string();
  record["params"] = count_params(loaded.model).total;
  write_file_atomic(out, record.dump(2) + "\n");
  return 0;
}

// --------------------------------------------------------------------------

struct PlotOptions {
  std::vector<std::string> reports;
  std::string out;
};

int cmd_plot_data(const PlotOptions& o) {
  std::vector<ParetoPoint> points;
  for (const auto& path : o.reports) points.push_back(pareto_point(parse_eval_report_jsonl(read_file(path))));
  const std::string csv = pareto_plot_data(points);
  if (o.out.empty()) std::cout << csv;
  else write_file_atomic(o.out, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilingual grapheme-to-phoneme toolkit"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_file, "Run configuration file (key = value)")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "Override a configuration key, e.g. --set train.peak_lr=1e-3");
  app.add_option("--threads", g.threads, "Worker threads for evaluation; 1 is the deterministic test mode")->check(CLI::PositiveNumber);
  app.add_flag("-q,--quiet", g.quiet, "Suppress warnings");
  app.add_flag("-v,--verbose", g.verbose, "Progress output on stderr");

  PrepareOptions prep;
  auto* prepare = app.add_subcommand("prepare", "Parse ipa-dict files, split them and build vocabularies");
  prepare->add_option("--data-dir", prep.data_dir, "Directory with one <code>.txt ipa-dict file per language");
  prepare->add_option("--out", prep.out, "Work directory for the manifest, vocab and stats");
  prepare->add_option("--seed", prep.seed, "Split seed");
  prepare->add_option("--keep-stress", prep.keep_stress, "Keep stress marks as tokens (true/false)");
  prepare->add_option("--multi-pron", prep.multi_pron, "first or all");
  prepare->add_option("--langs", prep.langs, "Comma-separated language codes (default: all six)");

  TrainOptions tr;
  auto* train = app.add_subcommand("train", "Train a model on a prepared work directory");
  train->add_option("--work-dir", tr.work_dir, "Prepared work directory");
  auto* toy_flag = train->add_flag("--toy", tr.toy, "Desk-scale model and 2k-step schedule");
  train->add_flag("--reference", tr.reference, "Full-size model and 100k-step schedule")->excludes(toy_flag);
  train->add_flag("--ablate-no-langid", tr.ablate_no_langid, "Train without the language-ID token");
  train->add_option("--out", tr.out, "Checkpoint path");
  train->add_option("--metrics", tr.metrics, "Metrics log path (JSON lines)");
  train->add_option("--steps", tr.steps, "Override the number of updates")->check(CLI::PositiveNumber);

  InitOptions in;
  auto* init = app.add_subcommand("init", "Write an untrained checkpoint (for benchmarking)");
  init->add_option("--work-dir", in.work_dir, "Prepared work directory");
  init->add_flag("--toy", in.toy, "Desk-scale model");
  init->add_option("--out", in.out, "Checkpoint path");

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint and write PER reports");
  eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint to score")->required();
  eval->add_option("--work-dir", ev.work_dir, "Prepared work directory");
  eval->add_option("--split", ev.split, "test or val")->check(CLI::IsMember({"test", "val"}));
  eval->add_option("--compare", ev.compare, "Second checkpoint (without language ID) for a delta report");
  eval->add_option("--out", ev.out, "Output path prefix");

  AblateOptions ab;
  auto* ablate = app.add_subcommand("ablate", "Compare checkpoints trained with and without the language-ID token");
  ablate->add_option("--with", ab.with_id, "Checkpoint with language ID")->required();
  ablate->add_option("--without", ab.without_id, "Checkpoint without language ID")->required();
  ablate->add_option("--work-dir", ab.work_dir, "Prepared work directory");
  ablate->add_option("--split", ab.split, "test or val")->check(CLI::IsMember({"test", "val"}));
  ablate->add_option("--out", ab.out, "Output path prefix");

  PredictOptions pr;
  auto* predict = app.add_subcommand("predict", "Transcribe words; one `word<TAB>/ipa/` line each");
  predict->add_option("--checkpoint", pr.checkpoint, "Checkpoint")->required();
  predict->add_option("--vocab", pr.vocab, "Vocabulary file (default: <work-dir>/vocab.tsv)");
  predict->add_option("--work-dir", pr.work_dir, "Prepared work directory");
  predict->add_option("--lang", pr.lang, "Language code")->required();
  predict->add_flag("--stdin", pr.from_stdin, "Read one word per line from standard input");
  predict->add_option("words", pr.words, "Words to transcribe");

  BenchOptions be;
  auto* bench = app.add_subcommand("bench", "Batch-1 decoding throughput");
  bench->add_option("--checkpoint", be.checkpoint, "Checkpoint")->required();
  bench->add_option("--vocab", be.vocab, "Vocabulary file (default: <work-dir>/vocab.tsv)");
  bench->add_option("--work-dir", be.work_dir, "Prepared work directory");
  bench->add_option("--words-file", be.words_file, "One word per line (default: test words of --lang)");
  bench->add_option("--lang", be.lang, "Language code");
  bench->add_option("--n", be.n, "Measured words");
  bench->add_option("--warmup", be.warmup, "Untimed warm-up words");
  bench->add_option("--device", be.device, "Device label for the record");
  bench->add_option("--out", be.out, "Record path (JSON)");

  PlotOptions pl;
  auto* plot = app.add_subcommand("plot-data", "Parameter count vs PER table for plotting");
  plot->add_option("--reports", pl.reports, "Evaluation reports (.report.jsonl)");
  plot->add_option("--out", pl.out, "CSV path (default: standard output)");

  CLI11_PARSE(app, argc, argv);
  set_log_level(g.quiet ? LogLevel::Quiet : g.verbose ? LogLevel::Info : LogLevel::Warn);

  try {
    if (*prepare) return cmd_prepare(g, prep);
    if (*train) return cmd_train(g, tr);
    if (*init) return cmd_init(g, in);
    if (*eval) return cmd_eval(g, ev);
    if (*ablate) return cmd_ablate(g, ab);
    if (*predict) return cmd_predict(g, pr);
    if (*bench) return cmd_bench(g, be);
    if (*plot) return cmd_plot_data(pl);
  } catch (const Error& e) {
    std::cerr << "latg2p: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "latg2p: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
