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

// Library walkthrough: load one fixture language, train a small model for a
// few hundred steps, then transcribe words and score the test split.

#include <iostream>

#include "CLI11.hpp"
#include "latg2p/pipeline.hpp"
#include "latg2p/report.hpp"
#include "latg2p/train.hpp"

int main(int argc, char** argv) {
  using namespace latg2p;
  CLI::App app{"Train a small G2P model on one language and transcribe a few words"};
  std::string data_dir = LATG2P_DEMO_DATA_DIR;
  std::string lang_code = "es";
  std::size_t steps = 600;
  std::vector<std::string> words = {"calle", "queso", "perro"};
  app.add_option("--data-dir", data_dir, "Directory with <lang>.txt pronunciation files");
  app.add_option("--lang", lang_code, "Language code");
  app.add_option("--steps", steps, "Training steps")->check(CLI::Range(2, 100000));
  app.add_option("words", words, "Words to transcribe after training");
  CLI11_PARSE(app, argc, argv);

  try {
    const LanguageId lang = parse_language(lang_code);
    const auto prepared = prepare_corpus(data_dir, {lang}, 42, NormalizationPolicy{});
    const auto& split = prepared.split.languages.at(lang);
    std::cout << code_of(lang) << ": " << split.train.size() << " train / " << split.val.size() << " val / " << split.test.size()
              << " test words, " << prepared.vocab.phonemes().size() << " phonemes\n";

    ModelConfig model_cfg = ModelConfig::toy().with_vocab(prepared.vocab);
    TrainConfig train_cfg = TrainConfig::toy();
    train_cfg.total_steps = steps;
    train_cfg.warmup_steps = std::max<std::size_t>(1, steps / 10);
    train_cfg.val_every = steps;
    TrainingOptions options;
    options.on_record = [](const nlohmann::json& rec) {
      std::cout << "step " << rec.at("step") << "  loss " << detail::fmt("%.4f", rec.at("train_loss").get<double>()) << '\n';
    };
    const auto result = run_training<float>(prepared.split, prepared.vocab, train_cfg, model_cfg, options);

    for (const auto& w : words) {
      const auto word = unicode::nfc(unicode::to_lower(w));
      std::cout << w << "\t/" << join_phonemes(greedy_decode(result.best_model, word, lang, prepared.vocab)) << "/\n";
    }
    auto report = evaluate_model(result.best_model, prepared.vocab, split.test);
    std::cout << '\n' << format_per_table(report);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
