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

#include <gtest/gtest.h>

#include "ppsca/corpus.hpp"
#include "ppsca/ingest.hpp"
#include "support.hpp"

namespace ppsca {
namespace {

std::vector<std::string> rendered(const std::vector<FunctionId>& ids) {
  std::vector<std::string> out;
  for (const auto& id : ids) out.push_back(id.str());
  return out;
}

std::set<std::string> edge_set(const CallGraph& g) {
  std::set<std::string> out;
  for (const auto& e : g.edges) out.insert(e.caller.str() + "->" + e.callee.str() + (e.external ? "(ext)" : ""));
  return out;
}

TEST(FunctionId, RendersScopeChain) {
  const FunctionId id{{"a", "b"}, "f"};
  EXPECT_EQ(id.str(), "a::b::f");
  EXPECT_EQ(FunctionId::parse("a::b::f"), id);
  EXPECT_NE(id, (FunctionId{{"a"}, "f"}));
  EXPECT_EQ(FunctionId::parse("f"), (FunctionId{{}, "f"}));
}

TEST(Extract, SingleDefinition) {
  const auto fns = extract_source_functions("int add(int a,int b){return a+b;}", "a.c");
  ASSERT_EQ(fns.size(), 1u);
  EXPECT_EQ(fns[0].id.str(), "add");
  EXPECT_EQ(fns[0].loc, 1u);
  EXPECT_TRUE(fns[0].callees.empty());
}

TEST(Extract, NamespacedCall) {
  const auto fns = extract_source_functions("namespace ns{void f(){g();}}", "a.cc");
  ASSERT_EQ(fns.size(), 1u);
  EXPECT_EQ(fns[0].id.str(), "ns::f");
  EXPECT_EQ(rendered(fns[0].callees), std::vector<std::string>{"g"});
}

// Offsets annotated by hand: each function starts at its return type (or
// storage class) and ends one past its closing brace.
TEST(Extract, NestedNamespaceFixture) {
  const std::string text =
      "#include <stdio.h>\n"                          // 0..18
      "namespace outer {\n"                           // 19..36
      "namespace inner {\n"                           // 37..54
      "static int twice(int x) { return x * 2; }\n"   // 55..96
      "}\n"                                           // 97..98
      "int add(int a, int b) {\n"                     // 99..122
      "  return inner::twice(a) + b;\n"               // 123..152
      "}\n"                                           // 153..154
      "}\n"                                           // 155..156
      "void run(void) { outer::add(1, 2); }\n";       // 157..193
  const auto fns = extract_source_functions(text, "fixture.cc");
  ASSERT_EQ(fns.size(), 3u);
  struct Expect {
    std::string id;
    std::size_t begin, end, loc;
    std::vector<std::string> callees;
  };
  const std::vector<Expect> want = {
      {"outer::inner::twice", 55, 96, 1, {}},
      {"outer::add", 99, 154, 3, {"inner::twice"}},
      {"run", 157, 193, 1, {"outer::add"}},
  };
  for (std::size_t i = 0; i < want.size(); ++i) {
    SCOPED_TRACE(want[i].id);
    EXPECT_EQ(fns[i].id.str(), want[i].id);
    EXPECT_EQ(fns[i].begin, want[i].begin);
    EXPECT_EQ(fns[i].end, want[i].end);
    EXPECT_EQ(fns[i].loc, want[i].loc);
    EXPECT_EQ(fns[i].text, text.substr(want[i].begin, want[i].end - want[i].begin));
    EXPECT_EQ(rendered(fns[i].callees), want[i].callees);
    EXPECT_EQ(fns[i].file, "fixture.cc");
  }
}

TEST(Extract, ClassMembersAreScoped) {
  const auto fns = extract_source_functions(
      "class Box { public: int size() const { return n_; } private: int n_; };\n"
      "int Box::grow(int k) { return size() + k; }\n",
      "box.cc");
  ASSERT_EQ(fns.size(), 2u);
  EXPECT_EQ(fns[0].id.str(), "Box::size");
  EXPECT_EQ(fns[1].id.str(), "Box::grow");
  EXPECT_EQ(rendered(fns[1].callees), std::vector<std::string>{"size"});
}

TEST(Extract, UnbalancedBracesSkipFile) {
  std::vector<Diagnostic> diags;
  const auto fns = extract_source_functions("int f() { if (x) { return 1; }\nint g() { return 2; }\n", "bad.c", &diags);
  EXPECT_TRUE(fns.empty());
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].file, "bad.c");
  diags.clear();
  EXPECT_TRUE(extract_source_functions("int f() { return 1; }}\n", "bad2.c", &diags).empty());
  EXPECT_EQ(diags.size(), 1u);
}

TEST(Extract, CommentsAndStringsDoNotConfuseBraces) {
  const auto fns = extract_source_functions(
      "/* } */ int f(void) { const char* s = \"}\"; // }\n return s[0]; }\n", "c.c");
  ASSERT_EQ(fns.size(), 1u);
  EXPECT_EQ(fns[0].id.str(), "f");
}

TEST(CallGraph, SimpleEdge) {
  const auto fns = extract_source_functions("void g(void) {}\nvoid f(void) { g(); }\n", "a.c");
  EXPECT_EQ(edge_set(build_call_graph(fns)), (std::set<std::string>{"f->g"}));
}

TEST(CallGraph, RecursionIsASelfEdge) {
  const auto fns = extract_source_functions("int f(int n) { return n ? f(n - 1) : 0; }\n", "a.c");
  EXPECT_EQ(edge_set(build_call_graph(fns)), (std::set<std::string>{"f->f"}));
}

// Ten functions; edges annotated by hand from the source below.
TEST(CallGraph, TenFunctionFixture) {
  const std::string text =
      "int leaf(int x) { return x + 1; }\n"
      "int twice(int x) { return leaf(x) + leaf(x); }\n"
      "int fact(int n) { if (n <= 1) return 1; return n * fact(n - 1); }\n"
      "int sum(int *v, int n) { int s = 0; for (int i = 0; i < n; i++) s += leaf(v[i]); return s; }\n"
      "void log_value(int v) { printf(\"%d\\n\", v); }\n"
      "int pipeline(int x) { log_value(x); return twice(fact(x)); }\n"
      "int guard(int x) { if (x > 0) return pipeline(x); return 0; }\n"
      "int noop(void) { return 0; }\n"
      "int sizer(int x) { return sizeof(x) + noop(); }\n"
      "int entry(int argc) { int r = guard(argc); r += sum(&r, 1); free(0); return r; }\n";
  const auto fns = extract_source_functions(text, "ten.c");
  ASSERT_EQ(fns.size(), 10u);
  const std::set<std::string> want = {
      "twice->leaf",        "fact->fact",        "sum->leaf",     "log_value->printf(ext)",
      "pipeline->log_value", "pipeline->twice",  "pipeline->fact", "guard->pipeline",
      "sizer->noop",        "entry->guard",      "entry->sum",    "entry->free(ext)",
  };
  EXPECT_EQ(edge_set(build_call_graph(fns)), want);
}

TEST(CallGraph, QualifiedCalleeResolvesToDefinition) {
  const auto fns = extract_source_functions(
      "namespace a { int h() { return 1; } }\nnamespace b { int h() { return 2; } int k() { return h() + a::h(); } }\n",
      "q.cc");
  EXPECT_EQ(edge_set(build_call_graph(fns)), (std::set<std::string>{"b::k->a::h", "b::k->b::h"}));
}

TEST(Metrics, DegenerateMaintainability) {
  // V below 1 is clamped to 1, so ln V = 0.
  EXPECT_NEAR(maintainability_index(0.5, 1, 1), (171.0 - 0.23) * 100.0 / 171.0, 1e-12);
  EXPECT_NEAR(maintainability_index(1.0, 1, 1), 99.8654970760, 1e-9);
}

TEST(Metrics, EmptyBody) {
  const auto m = compute_metrics("", 1);
  EXPECT_EQ(m.cyclomatic, 1u);
  EXPECT_EQ(m.halstead_volume, 0.0);
  EXPECT_NEAR(m.maintainability, 100.0 * (171.0 - 0.23) / 171.0, 1e-12);
}

TEST(Metrics, BranchCounting) {
  EXPECT_EQ(compute_metrics("int f(int a, int b) { if (a && b) return 1; return 0; }", 1).cyclomatic, 3u);
  EXPECT_EQ(compute_metrics("int f(int a) { return a ? 1 : 0; }", 1).cyclomatic, 2u);
  EXPECT_EQ(compute_metrics("void f() { for (;;) {} while (1) {} switch (x) { case 1: case 2: ; } }", 1).cyclomatic, 5u);
}

// Hand count for the fixture below:
//   operators: int x3, if, return x2, ( x2, ',', '{', <, &&, >, ; x2
//              -> N1 = 15, n1 = 10
//   operands:  clamp, v x3, lo x4, 0 -> N2 = 9, n2 = 4
//   V = 24 log2 14, CC = 3, LoC = 4.
TEST(Metrics, HandComputedFixture) {
  const std::string text = "int clamp(int v, int lo) {\n  if (v < lo && lo > 0) return lo;\n  return v;\n}";
  const auto fns = extract_source_functions(text, "m.c");
  ASSERT_EQ(fns.size(), 1u);
  EXPECT_EQ(fns[0].loc, 4u);
  const auto m = compute_metrics(fns[0]);
  EXPECT_EQ(m.cyclomatic, 3u);
  EXPECT_NEAR(m.halstead_volume, 91.3765181293825, 1e-9);
  EXPECT_NEAR(m.maintainability, 72.73338653940439, 1e-9);
  EXPECT_EQ(fns[0].cyclomatic, 3u);
  EXPECT_NEAR(fns[0].halstead_volume, 91.3765181293825, 1e-9);
}

TEST(Assembly, TwoBlocks) {
  const auto fns = parse_assembly_listing("func f\nblock entry:\n    mov r0 r1\nblock exit:\n    ret\nendfunc\n");
  ASSERT_EQ(fns.size(), 1u);
  EXPECT_EQ(fns[0].name, "f");
  EXPECT_EQ(fns[0].block_num(), 2u);
  EXPECT_EQ(fns[0].blocks[0].instructions[0], (std::vector<std::string>{"mov", "r0", "r1"}));
}

TEST(Assembly, EmptyFile) { EXPECT_TRUE(parse_assembly_listing("").empty()); }

TEST(Assembly, MalformedHeaderNamesLine) {
  try {
    parse_assembly_listing("func ok\nblock a:\n  ret\nendfunc\nfunc two words\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 5"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_assembly_listing("func f\nblock nocolon\nendfunc\n"), ParseError);
  EXPECT_THROW(parse_assembly_listing("func f\nblock a:\n  ret\n"), ParseError);
  EXPECT_THROW(parse_assembly_listing("  ret\n"), ParseError);
}

TEST(Assembly, GeneratedListingRoundTrips) {
  Rng rng(11);
  const auto vocab = corpus_detail::make_vocab(rng, "rt");
  std::vector<AssemblyFunction> fns;
  for (int i = 0; i < 5; ++i) {
    const auto g = corpus_detail::make_function(rng, vocab, FunctionId{{}, "rt_fn_" + std::to_string(i)}, {"helper"},
                                                i % 2 == 0);
    fns.push_back(compile_to_assembly(g.id.name, g.text));
  }
  const auto parsed = parse_assembly_listing(render_assembly_listing(fns));
  ASSERT_EQ(parsed.size(), 5u);
  for (std::size_t i = 0; i < fns.size(); ++i) {
    EXPECT_EQ(parsed[i].name, fns[i].name);
    EXPECT_EQ(parsed[i].block_num(), fns[i].block_num());
    EXPECT_EQ(parsed[i], fns[i]);
  }
}

TEST(Normalize, StripsCommentsAndCollapsesWhitespace) {
  EXPECT_EQ(normalize_source("int  f( )\n{ /* c */ return 1; // x\n}\n"), "int f( ) { return 1; }");
}

// ---------------------------------------------------------------------------
// Properties over random inputs

TEST(ExtractProperties, DeterministicDisjointAndBounded) {
  Rng rng(2026);
  for (int trial = 0; trial < 1500; ++trial) {
    const auto text = test::random_source(rng);
    const auto a = extract_source_functions(text, "r.c");
    const auto b = extract_source_functions(text, "r.c");
    ASSERT_EQ(a.size(), b.size());
    std::size_t loc_sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].id, b[i].id);
      EXPECT_EQ(a[i].text, b[i].text);
      EXPECT_EQ(a[i].callees, b[i].callees);
      EXPECT_EQ(a[i].cyclomatic, b[i].cyclomatic);
      EXPECT_EQ(a[i].halstead_volume, b[i].halstead_volume);
      EXPECT_GE(a[i].loc, 1u);
      EXPECT_GE(a[i].cyclomatic, 1u);
      EXPECT_FALSE(a[i].id.name.empty());
      EXPECT_EQ(a[i].text, text.substr(a[i].begin, a[i].end - a[i].begin));
      if (i > 0) { EXPECT_LE(a[i - 1].end, a[i].begin) << "overlap in trial " << trial; }
      loc_sum += a[i].loc;
      // Every callee appears as a call expression in the body.
      for (const auto& c : a[i].callees) {
        EXPECT_NE(a[i].text.find(c.name), std::string::npos);
      }
    }
    EXPECT_LE(loc_sum, count_nonblank_lines(text)) << "trial " << trial;
    EXPECT_EQ(edge_set(build_call_graph(a)), edge_set(build_call_graph(b)));
  }
}

TEST(ExtractProperties, AppendingIfNeverLowersComplexity) {
  Rng rng(77);
  for (int trial = 0; trial < 1200; ++trial) {
    for (const auto& f : extract_source_functions(test::random_source(rng), "r.c")) {
      const auto close = f.text.rfind('}');
      const auto grown = f.text.substr(0, close) + "  if (x) { x = 0; }\n}";
      EXPECT_GE(compute_metrics(grown, f.loc + 1).cyclomatic, f.cyclomatic + 1);
    }
  }
}

TEST(ExtractProperties, CallGraphEndpointsKnownOrExternal) {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto fns = extract_source_functions(test::random_source(rng), "r.c");
    std::set<FunctionId> ids;
    for (const auto& f : fns) ids.insert(f.id);
    for (const auto& e : build_call_graph(fns).edges) {
      EXPECT_TRUE(ids.count(e.caller));
      EXPECT_TRUE(e.external || ids.count(e.callee));
      EXPECT_EQ(e.external, ids.count(e.callee) == 0);
    }
  }
}

}  // namespace
}  // namespace ppsca
