// Copyright 2026 The AQA Desk Authors.
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "aqa/autodiff.hpp"
#include "aqa/corpus.hpp"
#include "aqa/trainer.hpp"

namespace aqa {

// Index of the chosen rewrite; the candidate overloads return its answer.
// All throw PreconditionError on an empty episode.
std::size_t top_hyp_index(const Episode& episode);
std::size_t vote_index(const Episode& episode);
std::size_t max_conf_index(const Episode& episode);
std::size_t oracle_index(const Episode& episode);

AnswerCandidate top_hyp(const Episode& episode);
AnswerCandidate vote(const Episode& episode);
AnswerCandidate max_conf(const Episode& episode);
AnswerCandidate oracle(const Episode& episode);

struct SelectorExample {
  std::string qid;
  Tokens question;
  Tokens rewrite;
  Tokens answer;
  bool above = false;
  double f1 = 0.0;

  bool operator==(const SelectorExample&) const = default;
};

// One example per rewrite, labelled above when its F1 beats the episode mean.
// Episodes whose rewards are all equal contribute nothing.
std::vector<SelectorExample> build_selector_data(const std::vector<Episode>& episodes);

void save_selector_data(const std::vector<SelectorExample>& data, const std::filesystem::path& path);
std::vector<SelectorExample> load_selector_data(const std::filesystem::path& path);

struct SelectorConfig {
  std::size_t embedding_dim = 100;
  std::size_t channels = 100;
  std::size_t hidden = 100;
  std::size_t width = 3;
};

struct SelectorParameters {
  SelectorConfig config;
  Vocabulary vocab;
  ad::ParameterStore params;
};

SelectorParameters init_selector(const SelectorConfig& config, const Vocabulary& vocab,
                                 std::uint64_t seed);
// Every parameter set to zero.
SelectorParameters zero_selector(const SelectorConfig& config, const Vocabulary& vocab);

// Overwrites embedding rows for tokens listed in a "token v1 v2 ..." text
// file. Returns the number of rows replaced.
std::size_t load_embeddings(SelectorParameters& phi, const std::filesystem::path& path);

void save_selector(const SelectorParameters& phi, const std::filesystem::path& stem);
SelectorParameters load_selector(const std::filesystem::path& stem);

// Pre-sigmoid score inside a graph; the graph must bind phi.params.
ad::Var selector_logit(ad::Graph& graph, const Tokens& question, const Tokens& rewrite,
                       const Tokens& answer, const SelectorParameters& phi);

double selector_forward(const Tokens& question, const Tokens& rewrite, const Tokens& answer,
                        const SelectorParameters& phi);

struct SelectorTrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
};

struct SelectorTrainResult {
  SelectorParameters phi;
  // Entry 0 is the initialization, entry e the state after epoch e.
  std::vector<double> validation_accuracy;
  std::vector<double> train_loss;
  std::size_t best_epoch = 0;
};

// Validation accuracy drives checkpoint selection; an empty validation set
// falls back to the training set.
SelectorTrainResult train_selector(const std::vector<SelectorExample>& train,
                                   const std::vector<SelectorExample>& validation,
                                   SelectorParameters init, const SelectorTrainConfig& config);

double selector_accuracy(const std::vector<SelectorExample>& data, const SelectorParameters& phi);

std::size_t select_index(const Episode& episode, const SelectorParameters& phi);
AnswerCandidate select(const Episode& episode, const SelectorParameters& phi);

}  // namespace aqa
