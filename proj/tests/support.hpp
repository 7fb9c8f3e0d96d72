// Copyright 2026 The ppsca Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "ppsca/config.hpp"
#include "ppsca/corpus.hpp"
#include "ppsca/pipeline.hpp"

namespace ppsca::test {

inline std::string data_path(const std::string& name) { return std::string(PPSCA_TEST_DATA) + "/" + name; }

// A fresh directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ppsca_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Generated corpus with its server DB and target inputs, built once per
// seed and process.
struct Fixture {
  Corpus corpus;
  SegmentedDb db;
  std::vector<TargetInput> targets;
};

inline const Fixture& corpus_fixture(std::uint64_t seed = 1) {
  static std::map<std::uint64_t, std::unique_ptr<Fixture>> cache;
  auto& slot = cache[seed];
  if (!slot) {
    slot = std::make_unique<Fixture>();
    CorpusConfig cc;
    cc.seed = seed;
    slot->corpus = generate_corpus(cc);
    const RunConfig rc;
    slot->db = build_database(corpus_snapshots(slot->corpus), rc.model(), rc.analysis.match.segment_params());
    slot->targets = corpus_targets(slot->corpus);
  }
  return *slot;
}

// Random C-like text: function definitions, namespaces, comments and
// stray statements, for the extractor property tests.
inline std::string random_source(Rng& rng) {
  static const std::vector<std::string> names = {"alpha", "beta", "gamma_fn", "delta", "eps",
                                                 "zeta", "eta", "theta_fn", "iota", "kappa"};
  static const std::vector<std::string> stmts = {
      "x = x + 1;",         "if (x > 2 && y) { y--; }", "while (i < n) i++;", "return x;",
      "// trailing note",   "/* block { note } */",     "z = a ? b : c;",     "for (i = 0; i < n; i++) { s += i; }",
      "",                   "call_me(x, y);",           "p->go(1);",          "switch (x) { case 1: break; }"};
  std::string out;
  int open_ns = 0;
  const auto parts = rng.range(1, 12);
  for (int p = 0; p < parts; ++p) {
    switch (rng.below(5)) {
      case 0:
        out += "namespace ns" + std::to_string(rng.below(3)) + " {\n";
        ++open_ns;
        break;
      case 1:
        if (open_ns > 0) {
          out += "}\n";
          --open_ns;
        }
        break;
      case 2:
        out += "#define M" + std::to_string(p) + " 1\n";
        break;
      default: {
        out += "int " + rng.pick(names) + std::to_string(rng.below(50)) + "(int x, int y) {\n";
        const auto n = rng.range(0, 8);
        for (int s = 0; s < n; ++s) {
          out += std::string(static_cast<std::size_t>(rng.range(0, 4)), ' ') + rng.pick(stmts) + "\n";
          if (rng.below(4) == 0) out += "\n";
        }
        if (rng.below(3) == 0) out += "  if (x) { return " + rng.pick(names) + "(y, x); }\n";
        out += "}\n";
      }
    }
  }
  while (open_ns-- > 0) out += "}\n";
  return out;
}

}  // namespace ppsca::test
