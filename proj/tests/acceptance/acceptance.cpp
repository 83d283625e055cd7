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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Criteria 7 and 8 train two toy models on the bundled
// fixture and dominate the runtime.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <map>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "latg2p/checkpoint.hpp"
#include "latg2p/eval.hpp"
#include "latg2p/io.hpp"
#include "latg2p/metrics.hpp"
#include "latg2p/pipeline.hpp"
#include "latg2p/report.hpp"
#include "latg2p/train.hpp"
#include "test_util.hpp"

namespace latg2p::acceptance {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(const char* format, double v) { return detail::fmt(format, v); }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// 1. Parameter budget
// ---------------------------------------------------------------------------

Outcome parameter_budget() {
  const auto cfg = ModelConfig::reference();
  const auto model = Model<float>::allocate(cfg);
  const auto count = count_params(model);
  std::size_t summed = 0;
  for (const auto& [name, p] : model.named_parameters()) summed += p->value.numel();
  const std::size_t lang_rows = count.breakdown.at("lang_id_embedding");
  const bool ok = count.total >= 7'000'000 && count.total <= 8'000'000 && lang_rows == 1536 && closed_form_param_count(cfg) == summed &&
                  count.total == summed;
  return {ok, "total " + std::to_string(count.total) + ", closed form " + std::to_string(closed_form_param_count(cfg)) +
                  ", language-id rows " + std::to_string(lang_rows)};
}

// ---------------------------------------------------------------------------
// 2. Checkpoint footprint
// ---------------------------------------------------------------------------

Outcome checkpoint_footprint() {
  const auto model = init_model<float>(ModelConfig::reference(), 1);
  const auto path = testing::scratch_dir("acceptance_ckpt") / "reference.latp";
  save_checkpoint(model, "feedface", path);
  const auto bytes = std::filesystem::file_size(path);
  const auto loaded = load_checkpoint<float>(path, std::string("feedface"));
  bool identical = true;
  const auto a = model.parameters(), b = loaded.model.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    identical = identical && std::memcmp(a[i]->value.data(), b[i]->value.data(), a[i]->value.numel() * sizeof(float)) == 0;
  }
  identical = identical && checkpoint_bytes(loaded.model, "feedface") == read_file(path);
  return {bytes <= 32'000'000 && identical, num("%.2f MB", static_cast<double>(bytes) / 1e6) + (identical ? ", roundtrip bitwise identical" : ", roundtrip differs")};
}

// ---------------------------------------------------------------------------
// 3. Gradient correctness
// ---------------------------------------------------------------------------

Outcome gradient_check() {
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.n_enc_layers = 1;
  cfg.n_dec_layers = 1;
  cfg.d_ffn = 32;
  cfg.grapheme_vocab_size = 8;
  cfg.phoneme_vocab_size = 8;
  cfg.dropout = 0.0;
  const auto model = init_model<double>(cfg, 3);
  const std::vector<EncodedExample> examples = {
      {{4, 10, 11, 12, 13}, {1, 4, 5, 6, 2}, LanguageId::en},
      {{7, 14, 15}, {1, 7, 8, 9, 10, 11, 2}, LanguageId::it},
      {{9, 17, 10, 16, 12, 11}, {1, 11, 2}, LanguageId::ro},
  };
  const SeqBatch batch = collate(examples, {0, 1, 2});
  auto loss_value = [&] {
    auto tape = Tape<double>::inference();
    return batch_loss(tape, model, batch)->value.item();
  };
  model.zero_grad();
  Tape<double> tape;
  tape.backward(batch_loss(tape, model, batch));

  const auto params = model.parameters();
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params[i]->value.numel(); ++j) all.emplace_back(i, j);
  }
  deterministic_shuffle(all, 2026);
  constexpr std::size_t kSamples = 256;
  constexpr double h = 1e-3;
  constexpr double kFineH = 1e-5;  // diagnostic only; does not decide the verdict
  auto central = [&](double& value, double step) {
    const double saved = value;
    value = saved + step;
    const double up = loss_value();
    value = saved - step;
    const double down = loss_value();
    value = saved;
    return (up - down) / (2 * step);
  };
  auto relative = [](double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
  };
  double worst = 0.0, worst_fine = 0.0, worst_grad = 0.0;
  std::size_t checked = 0, above = 0;
  for (std::size_t s = 0; s < kSamples && s < all.size(); ++s) {
    auto& value = params[all[s].first]->value[all[s].second];
    const double analytic = params[all[s].first]->grad[all[s].second];
    const double rel = relative(analytic, central(value, h));
    if (rel > worst) {
      worst = rel;
      worst_grad = analytic;
    }
    if (rel >= 1e-4) ++above;
    worst_fine = std::max(worst_fine, relative(analytic, central(value, kFineH)));
    ++checked;
  }
  return {checked >= 200 && worst < 1e-4, std::to_string(checked) + " of " + std::to_string(all.size()) + " parameters, h=1e-3: max relative error " +
                                               num("%.3g", worst) + " (" + std::to_string(above) + " at or above 1e-4; worst has gradient " +
                                               num("%.3g", worst_grad) + "); same parameters at h=1e-5: max " + num("%.3g", worst_fine)};
}

// ---------------------------------------------------------------------------
// 4. Schedule
// ---------------------------------------------------------------------------

Outcome schedule() {
  const auto cfg = TrainConfig::reference();
  const double at_warmup = lr_at_step(10000, cfg);
  const double at_zero = lr_at_step(0, cfg);
  const double mid = lr_at_step(55000, cfg);
  const double jump = std::max(std::abs(lr_at_step(10000, cfg) - lr_at_step(9999, cfg)), std::abs(lr_at_step(10001, cfg) - lr_at_step(10000, cfg)));
  const bool ok = at_warmup == 3e-4 && at_zero == 0.0 && std::abs(mid - 1.5e-4) <= 1e-12 && jump <= cfg.peak_lr / cfg.warmup_steps;
  return {ok, "lr(0)=" + num("%g", at_zero) + " lr(10000)=" + num("%.17g", at_warmup) + " lr(55000)=" + num("%.17g", mid) +
                  " max step change at junction " + num("%.3g", jump)};
}

// ---------------------------------------------------------------------------
// 5. Metric oracles
// ---------------------------------------------------------------------------

/// Every string of length <= max_len over `alphabet`, shortest first.
std::vector<std::string> enumerate_strings(const std::string& alphabet, std::size_t max_len) {
  std::vector<std::string> out{""};
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].size() < max_len) {
      for (char c : alphabet) out.push_back(out[i] + c);
    }
  }
  return out;
}

Outcome metric_oracles() {
  // Edit distance by breadth-first search over the graph of all strings of
  // length <= 6 joined by single insertions, deletions and substitutions.
  // Some optimal edit script does substitutions, then deletions, then
  // insertions, so it never leaves this bounded graph.
  const std::string alphabet = "abc";
  const auto strings = enumerate_strings(alphabet, 6);
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < strings.size(); ++i) index[strings[i]] = static_cast<int>(i);
  std::vector<std::vector<int>> adjacent(strings.size());
  for (std::size_t i = 0; i < strings.size(); ++i) {
    const std::string& s = strings[i];
    std::set<int> next;
    for (std::size_t k = 0; k < s.size(); ++k) next.insert(index.at(s.substr(0, k) + s.substr(k + 1)));
    for (char c : alphabet) {
      for (std::size_t k = 0; k < s.size(); ++k) {
        std::string t = s;
        t[k] = c;
        if (t != s) next.insert(index.at(t));
      }
      if (s.size() < 6) {
        for (std::size_t k = 0; k <= s.size(); ++k) next.insert(index.at(s.substr(0, k) + c + s.substr(k)));
      }
    }
    adjacent[i].assign(next.begin(), next.end());
  }
  std::size_t pairs = 0, mismatches = 0;
  std::vector<int> dist(strings.size());
  std::vector<int> queue(strings.size());
  for (std::size_t src = 0; src < strings.size(); ++src) {
    std::fill(dist.begin(), dist.end(), -1);
    std::size_t head = 0, tail = 0;
    dist[src] = 0;
    queue[tail++] = static_cast<int>(src);
    while (head < tail) {
      const int u = queue[head++];
      for (int v : adjacent[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(v)] < 0) {
          dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
          queue[tail++] = v;
        }
      }
    }
    for (std::size_t dst = 0; dst < strings.size(); ++dst) {
      ++pairs;
      if (levenshtein(strings[src], strings[dst]) != static_cast<std::size_t>(dist[dst])) ++mismatches;
    }
  }

  // Wilson interval from its closed form.
  auto closed_form = [](double e, double n) {
    const double z = 1.959964, p = e / n;
    const double center = (p + z * z / (2 * n)) / (1 + z * z / n);
    const double half = z / (1 + z * z / n) * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n));
    return std::pair{std::max(0.0, center - half), std::min(1.0, center + half)};
  };
  double wilson_err = 0.0;
  for (std::size_t e : {0u, 50u}) {
    const auto got = wilson_ci(e, 100);
    const auto want = closed_form(static_cast<double>(e), 100.0);
    wilson_err = std::max({wilson_err, std::abs(got.lo - want.first), std::abs(got.hi - want.second)});
  }

  bool antisymmetric = true;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n1 = 1 + bounded_draw(rng, 5000), n2 = 1 + bounded_draw(rng, 5000);
    const std::size_t e1 = bounded_draw(rng, n1 + 1), e2 = bounded_draw(rng, n2 + 1);
    const auto a = two_prop_ztest(e1, n1, e2, n2), b = two_prop_ztest(e2, n2, e1, n1);
    antisymmetric = antisymmetric && a.z == -b.z && a.p + b.p == 1.0;
  }
  const auto equal = two_prop_ztest(30, 300, 70, 700);
  const bool ok = mismatches == 0 && wilson_err < 1e-3 && antisymmetric && equal.z == 0.0;
  return {ok, std::to_string(pairs) + " string pairs, " + std::to_string(mismatches) + " mismatches; Wilson max error " + num("%.2g", wilson_err) +
                  "; z-test antisymmetric " + (antisymmetric ? "yes" : "no") + ", equal proportions z=" + num("%g", equal.z)};
}

// ---------------------------------------------------------------------------
// 6. Uniform-loss sanity
// ---------------------------------------------------------------------------

Outcome uniform_loss() {
  const auto cfg = ModelConfig::reference();
  const auto model = init_model<float>(cfg, 1);
  std::mt19937_64 rng(6);
  std::vector<EncodedExample> examples;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < 16; ++i) {
    EncodedExample ex;
    ex.src.push_back(kFirstLangToken + static_cast<int>(bounded_draw(rng, kNumLanguages)));
    const std::size_t src_len = 3 + bounded_draw(rng, 8), tgt_len = 3 + bounded_draw(rng, 8);
    for (std::size_t j = 0; j < src_len; ++j) ex.src.push_back(kFirstGrapheme + static_cast<int>(bounded_draw(rng, cfg.grapheme_vocab_size)));
    ex.tgt.push_back(kBos);
    for (std::size_t j = 0; j < tgt_len; ++j) ex.tgt.push_back(kFirstPhoneme + static_cast<int>(bounded_draw(rng, cfg.phoneme_vocab_size)));
    ex.tgt.push_back(kEos);
    examples.push_back(std::move(ex));
    idx.push_back(i);
  }
  auto tape = Tape<float>::inference();
  const double loss = batch_loss(tape, model, collate(examples, idx))->value.item();
  const double target = std::log(109.0);
  return {std::abs(loss - target) <= 0.1 * target, "initial loss " + num("%.4f", loss) + " vs ln(109) = " + num("%.4f", target)};
}

// ---------------------------------------------------------------------------
// 7 and 8. Toy training and the language-id ablation
// ---------------------------------------------------------------------------

struct ToyRuns {
  PreparedCorpus prepared;
  std::optional<TrainResult<float>> with_id;
  std::optional<TrainResult<float>> without_id;
  double untrained_val_per = 0.0;
};

ToyRuns& toy_runs() {
  static ToyRuns runs = [] {
    ToyRuns r;
    r.prepared = prepare_corpus(testing::fixture_dir(), {kAllLanguages.begin(), kAllLanguages.end()}, 42, NormalizationPolicy{});
    return r;
  }();
  return runs;
}

const TrainResult<float>& trained(bool use_lang_id) {
  auto& runs = toy_runs();
  auto& slot = use_lang_id ? runs.with_id : runs.without_id;
  if (!slot) {
    auto model_cfg = ModelConfig::toy().with_vocab(runs.prepared.vocab);
    model_cfg.use_lang_id = use_lang_id;
    const auto start = std::chrono::steady_clock::now();
    slot = run_training<float>(runs.prepared.split, runs.prepared.vocab, TrainConfig::toy(), model_cfg);
    std::cerr << "trained " << (use_lang_id ? "with" : "without") << " language id in " << num("%.0f", seconds_since(start)) << " s\n";
  }
  return *slot;
}

Outcome toy_learning() {
  auto& runs = toy_runs();
  const auto model_cfg = ModelConfig::toy().with_vocab(runs.prepared.vocab);
  runs.untrained_val_per = evaluate_model(init_model<float>(model_cfg, 1), runs.prepared.vocab, runs.prepared.split.all_val()).mean_per;
  const auto start = std::chrono::steady_clock::now();
  const auto& result = trained(true);
  const double elapsed = seconds_since(start);
  return {result.best_mean_val_per < 10.0 && runs.untrained_val_per > 80.0,
          "val PER " + num("%.2f%%", result.best_mean_val_per) + " at step " + std::to_string(result.best_step) + " (untrained " +
              num("%.1f%%", runs.untrained_val_per) + "), " + num("%.0f s", elapsed)};
}

/// Pooled error and reference counts over the pt and ro test sets, the two
/// fixture languages that share spellings but not pronunciations.
std::pair<std::size_t, std::size_t> conflict_counts(const Model<float>& model) {
  const auto& runs = toy_runs();
  std::vector<WordEntry> entries;
  for (LanguageId lang : {LanguageId::pt, LanguageId::ro}) {
    const auto& test = runs.prepared.split.languages.at(lang).test;
    entries.insert(entries.end(), test.begin(), test.end());
  }
  const auto report = evaluate_model(model, runs.prepared.vocab, entries);
  std::size_t errors = 0, refs = 0;
  for (const auto& r : report.languages) {
    errors += r.n_errors;
    refs += r.n_ref;
  }
  return {errors, refs};
}

Outcome ablation_mechanism() {
  const auto start = std::chrono::steady_clock::now();
  const auto [e_with, n_with] = conflict_counts(trained(true).best_model);
  const auto [e_without, n_without] = conflict_counts(trained(false).best_model);
  const double per_with = 100.0 * static_cast<double>(e_with) / static_cast<double>(n_with);
  const double per_without = 100.0 * static_cast<double>(e_without) / static_cast<double>(n_without);
  const auto test = two_prop_ztest(e_with, n_with, e_without, n_without);
  return {per_with < 5.0 && per_without >= 45.0 && test.p < 1e-6,
          "conflict-token PER with id " + num("%.2f%%", per_with) + ", without " + num("%.2f%%", per_without) + ", z=" + num("%.1f", test.z) +
              ", p=" + num("%.3g", test.p) + ", " + num("%.0f s", seconds_since(start))};
}

// ---------------------------------------------------------------------------
// 9. Throughput
// ---------------------------------------------------------------------------

/// The fixture vocabulary padded with filler symbols to exactly the
/// reference inventory sizes, so the model below has the reference shape.
VocabPair reference_sized_vocab(const std::vector<WordEntry>& train) {
  auto entries = train;
  const auto base = build_vocabs(train);
  const std::size_t extra_g = ModelConfig::reference().grapheme_vocab_size - base.graphemes().size();
  const std::size_t extra_p = ModelConfig::reference().phoneme_vocab_size - base.phonemes().size();
  WordEntry filler;
  for (std::size_t i = 0; i < extra_g; ++i) filler.word += unicode::encode(static_cast<char32_t>(0x0430 + i));
  for (std::size_t i = 0; i < extra_p; ++i) filler.phonemes.push_back("q" + std::to_string(i));
  entries.push_back(filler);
  return build_vocabs(entries);
}

Outcome throughput() {
  const auto& prepared = toy_runs().prepared;
  const auto vocab = reference_sized_vocab(prepared.split.all_train());
  const auto cfg = ModelConfig::reference().with_vocab(vocab);
  if (!(cfg == ModelConfig::reference())) return {false, "could not build a reference-shaped vocabulary"};
  const auto model = init_model<float>(cfg, 1);
  std::vector<std::string> words;
  for (const auto& e : prepared.split.languages.at(LanguageId::en).test) words.push_back(e.word);
  words.resize(kMinBenchWords);
  const auto r = throughput_bench(model_predictor(model, vocab), LanguageId::en, words, 20);
  return {r.words_per_sec >= 5.0, "untrained reference model (" + std::to_string(count_params(model).total) + " parameters): " +
                                      num("%.1f", r.words_per_sec) + " words/s, " + num("%.1f", r.chars_per_sec) + " chars/s over " +
                                      std::to_string(r.n_words) + " words"};
}

// ---------------------------------------------------------------------------
// 10. Decoder causality
// ---------------------------------------------------------------------------

Outcome decoder_causality() {
  auto cfg = ModelConfig::toy();
  cfg.grapheme_vocab_size = 30;
  cfg.phoneme_vocab_size = 60;
  const auto model = init_model<float>(cfg, 10);
  std::mt19937_64 rng(10);
  std::size_t violations = 0;
  constexpr int kTrials = 100;
  for (int trial = 0; trial < kTrials; ++trial) {
    std::vector<int> src{kFirstLangToken + static_cast<int>(bounded_draw(rng, kNumLanguages))};
    const std::size_t src_len = 1 + bounded_draw(rng, 12), tgt_len = 2 + bounded_draw(rng, 14);
    for (std::size_t j = 0; j < src_len; ++j) src.push_back(kFirstGrapheme + static_cast<int>(bounded_draw(rng, cfg.grapheme_vocab_size)));
    std::vector<int> tgt{kBos};
    for (std::size_t j = 1; j < tgt_len; ++j) tgt.push_back(kFirstPhoneme + static_cast<int>(bounded_draw(rng, cfg.phoneme_vocab_size)));
    const std::size_t cut = 1 + bounded_draw(rng, tgt_len - 1);
    auto perturbed = tgt;
    for (std::size_t j = cut; j < tgt_len; ++j) perturbed[j] = kFirstPhoneme + static_cast<int>(bounded_draw(rng, cfg.phoneme_vocab_size));
    const auto a = forward(model, src, tgt), b = forward(model, src, perturbed);
    if (std::memcmp(a.data(), b.data(), cut * a.cols() * sizeof(float)) != 0) ++violations;
  }
  return {violations == 0, std::to_string(kTrials) + " random trials, " + std::to_string(violations) + " with changed earlier rows"};
}

// ---------------------------------------------------------------------------
// 11. Reference recipe and report layout
// ---------------------------------------------------------------------------

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome reference_recipe() {
  std::vector<std::string> problems;
  EvalReport synthetic;
  const std::vector<std::pair<std::size_t, std::size_t>> counts = {{120, 1000}, {5, 900}, {30, 1100}, {40, 1000}, {60, 1200}, {3, 800}};
  for (std::size_t i = 0; i < counts.size(); ++i) {
    synthetic.languages.push_back(make_language_result(kAllLanguages[i], counts[i].second / 7, counts[i].first, counts[i].second));
  }
  finalize_mean(synthetic);
  if (format_per_table(synthetic) != read_file(std::filesystem::path(LATG2P_GOLDEN_DIR) / "per_table.txt")) problems.push_back("table layout differs from golden file");

  const auto m = ModelConfig::reference();
  if (m.d_model != 256 || m.n_heads != 8 || m.n_enc_layers != 4 || m.n_dec_layers != 4 || m.d_ffn != 1024 || m.phoneme_vocab_size != 109) {
    problems.push_back("reference model config drifted");
  }
  const auto t = TrainConfig::reference();
  if (t.total_steps != 100000 || t.warmup_steps != 10000 || t.batch_size != 64) problems.push_back("reference schedule drifted");

  const std::string readme = read_file(std::filesystem::path(LATG2P_SOURCE_DIR) / "README.md");
  if (readme.find("train --reference") == std::string::npos) problems.push_back("README lacks the --reference recipe");
  const auto out = testing::scratch_dir("acceptance_cli") / "help.txt";
  if (run_command(std::string("'") + LATG2P_CLI_PATH + "' train --help > '" + out.string() + "' 2>&1") != 0 ||
      read_file(out).find("--reference") == std::string::npos) {
    problems.push_back("train --reference is not accepted");
  }
  std::string detail = problems.empty() ? "golden table matches; reference configs and --reference recipe present" : "";
  for (const auto& p : problems) detail += (detail.empty() ? "" : "; ") + p;
  return {problems.empty(), detail};
}

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace latg2p::acceptance

int main(int argc, char** argv) {
  using namespace latg2p::acceptance;
  CLI::App app{"latg2p acceptance suite"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  latg2p::set_log_level(latg2p::LogLevel::Warn);

  const std::vector<Criterion> criteria = {
      {1, "parameter budget", parameter_budget},
      {2, "checkpoint footprint", checkpoint_footprint},
      {3, "gradient correctness", gradient_check},
      {4, "learning-rate schedule", schedule},
      {5, "metric oracles", metric_oracles},
      {6, "uniform initial loss", uniform_loss},
      {7, "toy-scale learning", toy_learning},
      {8, "language-id ablation", ablation_mechanism},
      {9, "throughput", throughput},
      {10, "decoder causality", decoder_causality},
      {11, "reference recipe and report layout", reference_recipe},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    if (!outcome.pass) ++failures;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << outcome.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
