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

#include "aqa/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aqa/checkpoint.hpp"
#include "aqa/error.hpp"
#include "aqa/rng.hpp"

namespace aqa {

using ad::Graph;
using ad::Tensor;
using ad::Var;

namespace {

void require_valid(const PolicyConfig& c) {
  if (c.vocab_size < 2) throw PreconditionError("policy: vocab_size must be >= 2");
  if (c.hidden < 2 || c.hidden % 2 != 0) throw PreconditionError("policy: hidden must be even");
  if (c.embedding_dim == 0 || c.attention_dim == 0 || c.max_len == 0)
    throw PreconditionError("policy: dimensions must be positive");
  if (c.bos_id >= c.vocab_size || c.eos_id >= c.vocab_size)
    throw PreconditionError("policy: bos/eos outside vocabulary");
}

// GRU parameter block: input weights, recurrent weights and the two biases.
void add_gru(ad::ParameterStore& p, const std::string& prefix, std::size_t in, std::size_t hidden) {
  p.add(prefix + ".Wx", Tensor({in, 3 * hidden}));
  p.add(prefix + ".Wh", Tensor({hidden, 3 * hidden}));
  p.add(prefix + ".bx", Tensor({1, 3 * hidden}));
  p.add(prefix + ".bh", Tensor({1, 3 * hidden}));
}

struct Gru {
  Var wx, wh, bx, bh;
  std::size_t hidden;

  Gru(Graph& g, const std::string& prefix, std::size_t h)
      : wx(g.param(prefix + ".Wx")),
        wh(g.param(prefix + ".Wh")),
        bx(g.param(prefix + ".bx")),
        bh(g.param(prefix + ".bh")),
        hidden(h) {}

  Var step(Var x, Var h) const {
    const Var gx = ad::add_bias(ad::matmul(x, wx), bx);
    const Var gh = ad::add_bias(ad::matmul(h, wh), bh);
    const std::size_t H = hidden;
    const Var r = ad::sigmoid(ad::slice(gx, 1, 0, H) + ad::slice(gh, 1, 0, H));
    const Var z = ad::sigmoid(ad::slice(gx, 1, H, 2 * H) + ad::slice(gh, 1, H, 2 * H));
    const Var n = ad::tanh(ad::slice(gx, 1, 2 * H, 3 * H) + r * ad::slice(gh, 1, 2 * H, 3 * H));
    return n + z * (h - n);
  }
};

struct Encoded {
  Var annotations;  // (S x hidden)
  Var keys;         // (S x attention_dim)
  Var init_state;   // (1 x hidden)
  std::size_t length = 0;
};

// Attention-based encoder-decoder evaluated inside one graph.
class Net {
 public:
  Net(Graph& g, const PolicyConfig& c)
      : g_(g),
        c_(c),
        embedding_(g.param("embedding")),
        enc_fwd_(g, "enc_fwd", c.hidden / 2),
        enc_bwd_(g, "enc_bwd", c.hidden / 2),
        dec_(g, "dec", c.hidden),
        init_w_(g.param("init.W")),
        init_b_(g.param("init.b")),
        att_w_(g.param("att.W")),
        att_u_(g.param("att.U")),
        att_v_(g.param("att.v")),
        out_w_(g.param("out.W")),
        out_b_(g.param("out.b")) {}

  Encoded encode(const TokenIds& q0) {
    TokenIds src = q0;
    src.push_back(c_.eos_id);
    for (std::size_t& id : src)
      if (id >= c_.vocab_size) id = std::min<std::size_t>(Vocabulary::kUnk, c_.vocab_size - 1);
    const std::size_t S = src.size();
    const std::size_t half = c_.hidden / 2;
    const Var emb = ad::embedding(embedding_, src);
    std::vector<Var> fwd(S), bwd(S);
    Var h = g_.constant(Tensor({1, half}));
    for (std::size_t t = 0; t < S; ++t) {
      h = enc_fwd_.step(ad::slice(emb, 0, t, t + 1), h);
      fwd[t] = h;
    }
    h = g_.constant(Tensor({1, half}));
    for (std::size_t t = S; t-- > 0;) {
      h = enc_bwd_.step(ad::slice(emb, 0, t, t + 1), h);
      bwd[t] = h;
    }
    std::vector<Var> rows(S);
    for (std::size_t t = 0; t < S; ++t) rows[t] = ad::concat({fwd[t], bwd[t]}, 1);
    Encoded e;
    e.length = S;
    e.annotations = S == 1 ? rows[0] : ad::concat(rows, 0);
    e.keys = ad::matmul(e.annotations, att_u_);
    e.init_state =
        ad::tanh(ad::add_bias(ad::matmul(ad::concat({fwd[S - 1], bwd[0]}, 1), init_w_), init_b_));
    return e;
  }

  struct StepOut {
    Var logits;  // (B x V)
    Var state;   // (B x hidden)
  };

  StepOut step(const Encoded& e, Var state, const TokenIds& prev) {
    const Var query = ad::matmul(state, att_w_);
    std::vector<Var> scores(e.length);
    for (std::size_t s = 0; s < e.length; ++s)
      scores[s] = ad::matmul(ad::tanh(ad::add_bias(query, ad::slice(e.keys, 0, s, s + 1))), att_v_);
    const Var weights = ad::softmax(e.length == 1 ? scores[0] : ad::concat(scores, 1));
    const Var context = ad::matmul(weights, e.annotations);
    const Var x = ad::concat({ad::embedding(embedding_, prev), context}, 1);
    const Var next = dec_.step(x, state);
    const Var logits = ad::add_bias(ad::matmul(ad::concat({next, context}, 1), out_w_), out_b_);
    return {logits, next};
  }

  Var initial(const Encoded& e, std::size_t rows) {
    return ad::gather_rows(e.init_state, TokenIds(rows, 0));
  }

 private:
  Graph& g_;
  const PolicyConfig& c_;
  Var embedding_;
  Gru enc_fwd_, enc_bwd_, dec_;
  Var init_w_, init_b_, att_w_, att_u_, att_v_, out_w_, out_b_;
};

std::size_t effective_max_len(const PolicyParameters& theta, std::size_t max_len) {
  return max_len == 0 ? theta.config.max_len : max_len;
}

// Decode-time view: runs steps for a batch of live rows and exposes the
// step's log-probabilities and entropies.
struct Decoder {
  Graph graph;
  Net net;
  Encoded encoded;

  Decoder(const PolicyParameters& theta, const TokenIds& q0)
      : graph(const_cast<ad::ParameterStore*>(&theta.params)), net(graph, theta.config) {
    encoded = net.encode(q0);
  }
};

}  // namespace

PolicyParameters init_policy(const PolicyConfig& config, std::uint64_t seed, double init_scale) {
  require_valid(config);
  PolicyParameters theta;
  theta.config = config;
  auto& p = theta.params;
  const std::size_t V = config.vocab_size, E = config.embedding_dim, H = config.hidden,
                    A = config.attention_dim;
  p.add("embedding", Tensor({V, E}));
  add_gru(p, "enc_fwd", E, H / 2);
  add_gru(p, "enc_bwd", E, H / 2);
  add_gru(p, "dec", E + H, H);
  p.add("init.W", Tensor({H, H}));
  p.add("init.b", Tensor({1, H}));
  p.add("att.W", Tensor({H, A}));
  p.add("att.U", Tensor({H, A}));
  p.add("att.v", Tensor({A, 1}));
  p.add("out.W", Tensor({2 * H, V}));
  p.add("out.b", Tensor({1, V}));
  Rng rng(seed);
  for (auto& [name, t] : p.entries())
    for (double& v : t.values()) v = rng.uniform(-init_scale, init_scale);
  return theta;
}

void save_policy(const PolicyParameters& theta, const std::filesystem::path& stem) {
  const PolicyConfig& c = theta.config;
  ad::save_checkpoint(theta.params, stem,
                      {{"model", "policy"},
                       {"vocab_size", c.vocab_size},
                       {"embedding_dim", c.embedding_dim},
                       {"hidden", c.hidden},
                       {"attention_dim", c.attention_dim},
                       {"max_len", c.max_len},
                       {"bos_id", c.bos_id},
                       {"eos_id", c.eos_id}});
}

PolicyParameters load_policy(const std::filesystem::path& stem) {
  ad::Checkpoint ck = ad::load_checkpoint(stem);
  if (ck.metadata.value("model", "") != "policy")
    throw ParseError(stem.string() + ": not a policy checkpoint", 0);
  PolicyParameters theta;
  auto& m = ck.metadata;
  theta.config.vocab_size = m.at("vocab_size");
  theta.config.embedding_dim = m.at("embedding_dim");
  theta.config.hidden = m.at("hidden");
  theta.config.attention_dim = m.at("attention_dim");
  theta.config.max_len = m.at("max_len");
  theta.config.bos_id = m.at("bos_id");
  theta.config.eos_id = m.at("eos_id");
  require_valid(theta.config);
  theta.params = std::move(ck.params);
  return theta;
}

std::size_t scored_steps(std::size_t length, std::size_t max_len) {
  return std::min(length, max_len);
}

ScoredBatch score_batch(Graph& graph, const TokenIds& q0, const std::vector<TokenIds>& batch,
                        const PolicyConfig& config) {
  if (batch.empty()) throw PreconditionError("score_batch: empty batch");
  const std::size_t B = batch.size();
  std::size_t steps = 0;
  std::vector<std::size_t> scored(B);
  for (std::size_t i = 0; i < B; ++i) {
    const TokenIds& q = batch[i];
    if (q.empty()) throw PreconditionError("score_batch: empty sequence");
    if (q.back() != config.eos_id) throw PreconditionError("score_batch: sequence must end with EOS");
    if (q.size() > config.max_len + 1)
      throw PreconditionError("score_batch: sequence longer than max_len + EOS");
    for (std::size_t id : q)
      if (id >= config.vocab_size) throw PreconditionError("score_batch: token outside vocabulary");
    scored[i] = scored_steps(q.size(), config.max_len);
    steps = std::max(steps, scored[i]);
  }

  Net net(graph, config);
  const Encoded enc = net.encode(q0);
  Var state = net.initial(enc, B);
  ScoredBatch out;
  Var logp_sum, ent_sum, nll;
  for (std::size_t t = 0; t < steps; ++t) {
    TokenIds prev(B), target(B);
    std::vector<double> mask(B);
    for (std::size_t i = 0; i < B; ++i) {
      const bool live = t < scored[i];
      prev[i] = t == 0 ? config.bos_id : (live ? batch[i][t - 1] : config.eos_id);
      target[i] = live ? batch[i][t] : config.eos_id;
      mask[i] = live ? 1.0 : 0.0;
      out.scored_tokens += live ? 1 : 0;
    }
    const auto step = net.step(enc, state, prev);
    state = step.state;
    const Var m = graph.constant(Tensor::column(mask));
    const Var lp = ad::pick(ad::log_softmax(step.logits), target) * m;
    const Var h = ad::row_entropy(step.logits) * m;
    logp_sum = t == 0 ? lp : logp_sum + lp;
    ent_sum = t == 0 ? h : ent_sum + h;
  }
  out.log_probs = logp_sum;
  out.entropies = ent_sum;
  out.token_nll = ad::neg(ad::sum(logp_sum));
  return out;
}

double log_prob(const TokenIds& q, const TokenIds& q0, const PolicyParameters& theta) {
  if (q.empty()) throw PreconditionError("log_prob: empty sequence");
  Graph g(const_cast<ad::ParameterStore*>(&theta.params));
  return score_batch(g, q0, {q}, theta.config).log_probs.value().item();
}

double sequence_entropy(const TokenIds& q0, const TokenIds& q, const PolicyParameters& theta) {
  Graph g(const_cast<ad::ParameterStore*>(&theta.params));
  return score_batch(g, q0, {q}, theta.config).entropies.value().item();
}

std::vector<double> next_token_distribution(const TokenIds& q0, const TokenIds& prefix,
                                            const PolicyParameters& theta) {
  Decoder d(theta, q0);
  Var state = d.net.initial(d.encoded, 1);
  TokenIds prev{theta.config.bos_id};
  Var logits;
  for (std::size_t t = 0; t <= prefix.size(); ++t) {
    auto step = d.net.step(d.encoded, state, prev);
    state = step.state;
    logits = step.logits;
    if (t < prefix.size()) prev = {prefix[t]};
  }
  const Tensor& lp = ad::log_softmax(logits).value();
  std::vector<double> p(lp.size());
  for (std::size_t i = 0; i < lp.size(); ++i) p[i] = std::exp(lp[i]);
  return p;
}

std::vector<Rewrite> sample(const TokenIds& q0, const PolicyParameters& theta, std::size_t n,
                            std::uint64_t seed, std::size_t max_len) {
  if (n == 0) throw PreconditionError("sample: n must be >= 1");
  max_len = effective_max_len(theta, max_len);
  const PolicyConfig& c = theta.config;
  Decoder d(theta, q0);
  // One stream per sample, so the first k of n samples do not depend on n.
  std::vector<Rng> rngs;
  rngs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) rngs.emplace_back(Rng::derive(seed, i, 1));
  std::vector<Rewrite> out(n);
  std::vector<bool> done(n, false);
  Var state = d.net.initial(d.encoded, n);
  TokenIds prev(n, c.bos_id);
  std::size_t remaining = n;
  for (std::size_t t = 0; t < max_len && remaining > 0; ++t) {
    const auto step = d.net.step(d.encoded, state, prev);
    state = step.state;
    const Tensor& lp = ad::log_softmax(step.logits).value();
    const Tensor& ent = ad::row_entropy(step.logits).value();
    const std::size_t V = lp.cols();
    std::vector<double> probs(V);
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) {
        prev[i] = c.eos_id;
        continue;
      }
      for (std::size_t w = 0; w < V; ++w) probs[w] = std::exp(lp(i, w));
      const std::size_t w = rngs[i].categorical(probs);
      out[i].tokens.push_back(w);
      out[i].log_prob += lp(i, w);
      out[i].entropies.push_back(ent[i]);
      prev[i] = w;
      if (w == c.eos_id) {
        done[i] = true;
        --remaining;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!done[i]) out[i].tokens.push_back(c.eos_id);
  return out;
}

namespace {

struct Hypothesis {
  TokenIds tokens;
  double score = 0.0;
  std::vector<double> entropies;
};

}  // namespace

Rewrite greedy_decode(const TokenIds& q0, const PolicyParameters& theta, std::size_t max_len) {
  max_len = effective_max_len(theta, max_len);
  const PolicyConfig& c = theta.config;
  Decoder d(theta, q0);
  Var state = d.net.initial(d.encoded, 1);
  TokenIds prev{c.bos_id};
  Rewrite out;
  for (std::size_t t = 0; t < max_len; ++t) {
    const auto step = d.net.step(d.encoded, state, prev);
    state = step.state;
    const Tensor& lp = ad::log_softmax(step.logits).value();
    std::size_t best = 0;
    for (std::size_t w = 1; w < lp.size(); ++w)
      if (lp[w] > lp[best]) best = w;
    out.tokens.push_back(best);
    out.log_prob += lp[best];
    out.entropies.push_back(ad::row_entropy(step.logits).value().item());
    if (best == c.eos_id) return out;
    prev = {best};
  }
  out.tokens.push_back(c.eos_id);
  return out;
}

std::vector<Rewrite> beam_decode(const TokenIds& q0, const PolicyParameters& theta,
                                 std::size_t width, std::size_t max_len) {
  if (width == 0) throw PreconditionError("beam_decode: width must be >= 1");
  max_len = effective_max_len(theta, max_len);
  const PolicyConfig& c = theta.config;
  Decoder d(theta, q0);
  std::vector<Hypothesis> alive(1);
  std::vector<Hypothesis> finished;
  Var state = d.net.initial(d.encoded, 1);

  auto worst_kept = [&] {
    std::vector<double> s;
    for (const auto& h : finished) s.push_back(h.score);
    std::sort(s.begin(), s.end(), std::greater<>());
    return s[width - 1];
  };

  for (std::size_t t = 0; t < max_len && !alive.empty(); ++t) {
    TokenIds prev;
    for (const auto& h : alive) prev.push_back(h.tokens.empty() ? c.bos_id : h.tokens.back());
    const auto step = d.net.step(d.encoded, state, prev);
    const Tensor& lp = ad::log_softmax(step.logits).value();
    const Tensor& ent = ad::row_entropy(step.logits).value();
    const std::size_t V = lp.cols();

    struct Cand {
      double score;
      std::size_t beam, token;
    };
    std::vector<Cand> cands;
    cands.reserve(alive.size() * V);
    for (std::size_t b = 0; b < alive.size(); ++b)
      for (std::size_t w = 0; w < V; ++w) cands.push_back({alive[b].score + lp(b, w), b, w});
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) { return a.score > b.score; });
    if (cands.size() > width) cands.resize(width);

    std::vector<Hypothesis> next;
    TokenIds rows;
    for (const Cand& cand : cands) {
      Hypothesis h = alive[cand.beam];
      h.tokens.push_back(cand.token);
      h.score = cand.score;
      h.entropies.push_back(ent[cand.beam]);
      if (cand.token == c.eos_id) {
        finished.push_back(std::move(h));
      } else {
        rows.push_back(cand.beam);
        next.push_back(std::move(h));
      }
    }
    // Scores never increase, so an alive hypothesis below the width-th
    // finished score can never enter the result.
    if (finished.size() >= width) {
      const double cutoff = worst_kept();
      std::vector<Hypothesis> kept;
      TokenIds kept_rows;
      for (std::size_t i = 0; i < next.size(); ++i) {
        if (next[i].score < cutoff) continue;
        kept.push_back(std::move(next[i]));
        kept_rows.push_back(rows[i]);
      }
      next = std::move(kept);
      rows = std::move(kept_rows);
    }
    alive = std::move(next);
    if (!alive.empty()) state = ad::gather_rows(step.state, rows);
  }
  for (Hypothesis& h : alive) {
    h.tokens.push_back(c.eos_id);
    finished.push_back(std::move(h));
  }

  std::vector<Rewrite> out;
  for (Hypothesis& h : finished) out.push_back({std::move(h.tokens), h.score, std::move(h.entropies)});
  Rewrite greedy = greedy_decode(q0, theta, max_len);
  if (std::none_of(out.begin(), out.end(), [&](const Rewrite& r) { return r.tokens == greedy.tokens; }))
    out.push_back(std::move(greedy));
  std::stable_sort(out.begin(), out.end(),
                   [](const Rewrite& a, const Rewrite& b) { return a.log_prob > b.log_prob; });
  if (out.size() > width) out.resize(width);
  return out;
}

}  // namespace aqa
