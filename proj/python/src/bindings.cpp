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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "aqa/analysis.hpp"
#include "aqa/config.hpp"
#include "aqa/corpus.hpp"
#include "aqa/environment.hpp"
#include "aqa/error.hpp"
#include "aqa/harness.hpp"
#include "aqa/misubquery.hpp"
#include "aqa/policy.hpp"
#include "aqa/trainer.hpp"

namespace py = pybind11;
using namespace aqa;

namespace {

// Decoded rewrite as plain Python data.
py::dict rewrite_dict(const Rewrite& r, const Vocabulary& vocab) {
  py::dict d;
  d["text"] = join(render_rewrite(r.tokens, vocab));
  d["log_prob"] = r.log_prob;
  return d;
}

class Policy {
 public:
  Policy(const std::filesystem::path& policy_stem, const std::filesystem::path& vocab_path)
      : theta_(load_policy(policy_stem)), vocab_(Vocabulary::load(vocab_path)) {}

  py::dict greedy(const std::string& question) const {
    return rewrite_dict(greedy_decode(encode(question), theta_), vocab_);
  }
  py::list beam(const std::string& question, std::size_t width) const {
    return to_list(beam_decode(encode(question), theta_, width));
  }
  py::list sample(const std::string& question, std::size_t n, std::uint64_t seed) const {
    return to_list(aqa::sample(encode(question), theta_, n, seed));
  }
  double log_prob(const std::string& question, const std::string& rewrite) const {
    TokenIds q = encode(rewrite);
    q.push_back(Vocabulary::kEos);
    return aqa::log_prob(q, encode(question), theta_);
  }

 private:
  TokenIds encode(const std::string& text) const { return vocab_.encode(tokenize(text)); }
  py::list to_list(const std::vector<Rewrite>& rewrites) const {
    py::list out;
    for (const auto& r : rewrites) out.append(rewrite_dict(r, vocab_));
    return out;
  }

  PolicyParameters theta_;
  Vocabulary vocab_;
};

}  // namespace

PYBIND11_MODULE(_aqa, m) {
  m.doc() = "Question reformulation toolkit: environment, metrics, policy decoding, analysis";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<PreconditionError>(m, "PreconditionError", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<NumericError>(m, "NumericError", error.ptr());
  py::register_exception<StageError>(m, "StageError", error.ptr());

  m.def("tokenize", [](const std::string& text) { return tokenize(text); });
  m.def("normalize_answer", &normalize_answer);
  m.def("token_f1", &token_f1, py::arg("prediction"), py::arg("gold"));
  m.def("exact_match", &exact_match, py::arg("prediction"), py::arg("gold"));

  py::class_<ReferenceEnvironment>(m, "ReferenceEnvironment")
      .def(py::init([](std::size_t max_span, std::size_t window, bool exclude_question_terms) {
             ReferenceEnvironmentConfig c;
             c.max_span = max_span;
             c.window = window;
             c.exclude_question_terms = exclude_question_terms;
             return ReferenceEnvironment(c);
           }),
           py::arg("max_span") = 6, py::arg("window") = 5, py::arg("exclude_question_terms") = true)
      .def(
          "answer",
          [](const ReferenceEnvironment& env, const Tokens& question, const std::vector<Tokens>& snippets) {
            Tokens context;
            for (std::size_t i = 0; i < snippets.size(); ++i) {
              if (i) context.push_back(std::string(kSnippetSeparator));
              context.insert(context.end(), snippets[i].begin(), snippets[i].end());
            }
            const AnswerCandidate c = env.answer(question, context);
            return py::make_tuple(c.answer, c.score);
          },
          py::arg("question"), py::arg("snippets"),
          "Best span for the question tokens over a list of tokenized snippets, as (tokens, score).");

  m.def("stem", &stem);
  py::class_<QueryStats>(m, "QueryStats")
      .def_readonly("id", &QueryStats::id)
      .def_readonly("length", &QueryStats::length)
      .def_readonly("mean_tf", &QueryStats::mean_tf)
      .def_readonly("median_df", &QueryStats::median_df)
      .def_readonly("query_clarity", &QueryStats::query_clarity)
      .def_readonly("repeated_stem", &QueryStats::repeated_stem);
  m.def("query_stats", &query_stats, py::arg("id"), py::arg("question"), py::arg("contexts"));
  py::class_<TTest>(m, "TTest")
      .def_readonly("metric", &TTest::metric)
      .def_readonly("mean_a", &TTest::mean_a)
      .def_readonly("mean_b", &TTest::mean_b)
      .def_readonly("t", &TTest::t)
      .def_readonly("df", &TTest::df)
      .def_readonly("p", &TTest::p)
      .def_readonly("defined", &TTest::defined);
  m.def("welch_t_test", &welch_t_test);

  m.def("mutual_information", &mutual_information, py::arg("a"), py::arg("b"), py::arg("documents"));
  m.def(
      "rank_subqueries",
      [](const Tokens& query, const std::vector<Tokens>& documents, std::size_t n) {
        std::vector<std::pair<Tokens, double>> out;
        for (auto& r : rank_subqueries(query, documents, n)) out.emplace_back(std::move(r.terms), r.score);
        return out;
      },
      py::arg("query"), py::arg("documents"), py::arg("n"));

  py::class_<Policy>(m, "Policy")
      .def(py::init<const std::filesystem::path&, const std::filesystem::path&>(), py::arg("policy"),
           py::arg("vocab"))
      .def("greedy", &Policy::greedy)
      .def("beam", &Policy::beam, py::arg("question"), py::arg("width") = 4)
      .def("sample", &Policy::sample, py::arg("question"), py::arg("n"), py::arg("seed") = 0)
      .def("log_prob", &Policy::log_prob, py::arg("question"), py::arg("rewrite"));

  py::class_<Experiment>(m, "Experiment")
      .def(py::init([](const std::filesystem::path& path, const std::map<std::string, std::string>& overrides) {
             Config c = Config::load(path);
             for (const auto& [key, value] : overrides) {
               const auto dot = key.find('.');
               if (dot == std::string::npos) throw PreconditionError("override key must be section.key: " + key);
               c.set(key.substr(0, dot), key.substr(dot + 1), value);
             }
             return Experiment(ExperimentConfig::from(c, std::filesystem::absolute(path).parent_path()));
           }),
           py::arg("config"), py::arg("overrides") = std::map<std::string, std::string>{})
      .def("run_stage", &Experiment::run_stage, py::call_guard<py::gil_scoped_release>())
      .def("run_all", &Experiment::run_all, py::call_guard<py::gil_scoped_release>())
      .def("completed", &Experiment::completed)
      .def_property_readonly("work_dir", [](const Experiment& e) { return e.layout().root; });
  m.def("stage_names", &stage_names);
}
