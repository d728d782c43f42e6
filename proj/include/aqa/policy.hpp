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

namespace aqa {

using TokenIds = std::vector<std::size_t>;

struct PolicyConfig {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 32;
  // Decoder state size; each encoder direction gets half.
  std::size_t hidden = 64;
  std::size_t attention_dim = 32;
  // Maximum number of generated tokens before EOS is forced.
  std::size_t max_len = 24;
  std::size_t bos_id = Vocabulary::kBos;
  std::size_t eos_id = Vocabulary::kEos;
};

// θ: all weights of the reformulation policy plus its architecture.
struct PolicyParameters {
  PolicyConfig config;
  ad::ParameterStore params;
};

/// Small random initialization (uniform in [-init_scale, init_scale]).
PolicyParameters init_policy(const PolicyConfig& config, std::uint64_t seed, double init_scale = 0.1);

void save_policy(const PolicyParameters& theta, const std::filesystem::path& stem);
PolicyParameters load_policy(const std::filesystem::path& stem);

struct Rewrite {
  TokenIds tokens;  // ends with EOS
  double log_prob = 0.0;
  std::vector<double> entropies;  // one per scored step
};

// Number of decode steps that carry probability mass for a sequence of
// `length` ids (EOS included). A final EOS after max_len generated tokens
// was forced and is not scored.
std::size_t scored_steps(std::size_t length, std::size_t max_len);

/// Teacher-forced Σ_t log p(w_t | w_<t, q0). `q` must end with EOS.
double log_prob(const TokenIds& q, const TokenIds& q0, const PolicyParameters& theta);

/// n i.i.d. ancestral samples; duplicates are kept. Sample i depends only
/// on (seed, i), so a larger n extends a smaller one.
std::vector<Rewrite> sample(const TokenIds& q0, const PolicyParameters& theta, std::size_t n,
                            std::uint64_t seed, std::size_t max_len = 0);

/// Argmax decoding, ties to the lowest token id.
Rewrite greedy_decode(const TokenIds& q0, const PolicyParameters& theta, std::size_t max_len = 0);

/// Length-unnormalized beam search; finished hypotheses leave the beam.
/// Results are sorted by log_prob, best first. The greedy path is always
/// among the final candidates.
std::vector<Rewrite> beam_decode(const TokenIds& q0, const PolicyParameters& theta,
                                 std::size_t width, std::size_t max_len = 0);

/// Σ over q's scored decode steps of the full-vocabulary entropy.
double sequence_entropy(const TokenIds& q0, const TokenIds& q, const PolicyParameters& theta);

/// p(. | prefix, q0) as a dense vector over V.
std::vector<double> next_token_distribution(const TokenIds& q0, const TokenIds& prefix,
                                            const PolicyParameters& theta);

// Graph-level access used by training.
struct ScoredBatch {
  ad::Var log_probs;  // (B x 1) per-sequence log-probabilities
  ad::Var entropies;  // (B x 1) per-sequence summed step entropies
  ad::Var token_nll;  // (1 x 1) summed negative log-likelihood over scored steps
  std::size_t scored_tokens = 0;
};

/// Teacher-forces every sequence in `batch` (each ending with EOS) against
/// the same source `q0` inside `graph`.
ScoredBatch score_batch(ad::Graph& graph, const TokenIds& q0, const std::vector<TokenIds>& batch,
                        const PolicyConfig& config);

}  // namespace aqa
