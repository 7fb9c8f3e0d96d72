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

// Synthetic OSS corpus with planted reuse.
//
// Layout written by write_corpus():
//
//   <root>/manifest.json
//   <root>/oss/<project>/commits/<index>_<timestamp>/src/*.c
//   <root>/oss/<project>/commits/<index>_<timestamp>/binary.asm
//   <root>/targets/<target>/src/*.c
//   <root>/targets/<target>/binary.asm
//
// The manifest is the ground truth for every accuracy measurement.

#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppsca/common.hpp"
#include "ppsca/ingest.hpp"

namespace ppsca {

enum class MutationProfile { verbatim, rename_identifiers, edit_statements };

inline std::string to_string(MutationProfile p) {
  switch (p) {
    case MutationProfile::verbatim: return "verbatim";
    case MutationProfile::rename_identifiers: return "rename-identifiers";
    case MutationProfile::edit_statements: return "edit-k-statements";
  }
  return "?";
}

inline MutationProfile parse_mutation_profile(std::string_view s) {
  if (s == "verbatim") return MutationProfile::verbatim;
  if (s == "rename-identifiers") return MutationProfile::rename_identifiers;
  if (s == "edit-k-statements") return MutationProfile::edit_statements;
  throw ConfigError("unknown mutation profile '" + std::string(s) + "'");
}

struct CorpusConfig {
  std::uint64_t seed = 1;
  std::size_t n_projects = 20;
  std::size_t fns_per_project = 60;
  std::size_t n_targets = 3;
  std::size_t target_own_functions = 120;
  std::size_t functions_per_file = 30;
  // Planted reuse edges per target; the share of renamed edges is at
  // least `renamed_share` (rounded up).
  std::size_t reuse_edges_per_target = 3;
  double renamed_share = 0.30;
  // Fraction of a producer's functions copied by a full reuse edge.
  double reuse_fraction_min = 0.25;
  double reuse_fraction_max = 0.45;
  // Some edges copy only a few long functions (< 10% of the producer).
  bool plant_partial_reuse = true;
  // 0 disables planted reuse entirely.
  double reuse_scale = 1.0;
  // Projects that vendor a verbatim copy of the oldest project's helpers.
  std::size_t vendoring_projects = 3;
};

struct ReuseEdge {
  std::string consumer;
  std::string producer;
  double fraction = 0.0;
  MutationProfile profile = MutationProfile::verbatim;
  std::vector<std::string> producer_functions;  // rendered FunctionIds copied
};

struct CorpusManifest {
  std::uint64_t seed = 0;
  struct Project {
    std::string name;
    std::int64_t timestamp = 0;
    std::size_t functions = 0;
    std::size_t commits = 0;
  };
  std::vector<Project> projects;
  std::vector<std::string> targets;
  std::vector<ReuseEdge> reuse;
  std::map<std::string, std::set<std::string>> truth;  // target -> producers

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["projects"] = nlohmann::ordered_json::array();
    for (const auto& p : projects) {
      j["projects"].push_back({{"name", p.name},
                               {"timestamp", p.timestamp},
                               {"functions", p.functions},
                               {"commits", p.commits}});
    }
    j["targets"] = targets;
    j["reuse"] = nlohmann::ordered_json::array();
    for (const auto& e : reuse) {
      j["reuse"].push_back({{"consumer", e.consumer},
                            {"producer", e.producer},
                            {"fraction", e.fraction},
                            {"profile", to_string(e.profile)},
                            {"functions", e.producer_functions}});
    }
    j["truth"] = nlohmann::ordered_json::object();
    for (const auto& t : targets) {
      auto it = truth.find(t);
      j["truth"][t] = it == truth.end() ? std::vector<std::string>{}
                                        : std::vector<std::string>(it->second.begin(), it->second.end());
    }
    return j;
  }

  static CorpusManifest from_json(const nlohmann::json& j) {
    CorpusManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& p : j.at("projects")) {
      m.projects.push_back({p.at("name").get<std::string>(), p.at("timestamp").get<std::int64_t>(),
                            p.at("functions").get<std::size_t>(), p.at("commits").get<std::size_t>()});
    }
    m.targets = j.at("targets").get<std::vector<std::string>>();
    for (const auto& e : j.at("reuse")) {
      ReuseEdge r;
      r.consumer = e.at("consumer").get<std::string>();
      r.producer = e.at("producer").get<std::string>();
      r.fraction = e.at("fraction").get<double>();
      r.profile = parse_mutation_profile(e.at("profile").get<std::string>());
      r.producer_functions = e.at("functions").get<std::vector<std::string>>();
      m.reuse.push_back(std::move(r));
    }
    for (const auto& [t, ps] : j.at("truth").items()) {
      auto v = ps.get<std::vector<std::string>>();
      m.truth[t] = {v.begin(), v.end()};
    }
    return m;
  }
};

// One generated function before it is placed in a file.
struct GenFunction {
  FunctionId id;
  std::string text;
  bool big = false;
};

struct GenFile {
  std::string path;  // relative, e.g. src/core_0.c
  std::vector<GenFunction> functions;

  std::string render() const {
    std::string out = "#include <stddef.h>\n#include \"" + path.substr(path.rfind('/') + 1) + ".h\"\n\n";
    for (const auto& f : functions) {
      out += f.text;
      out += "\n\n";
    }
    return out;
  }
};

struct GenCommit {
  std::int64_t timestamp = 0;
  std::vector<GenFile> files;
};

struct GenProject {
  std::string name;
  std::int64_t timestamp = 0;
  std::vector<GenCommit> commits;  // last one is the current tree

  const GenCommit& head() const { return commits.back(); }
};

struct GenTarget {
  std::string name;
  std::vector<GenFile> files;
};

struct Corpus {
  CorpusManifest manifest;
  std::vector<GenProject> projects;
  std::vector<GenTarget> targets;
};

namespace corpus_detail {

inline const std::vector<std::string>& syllables() {
  static const std::vector<std::string> s = {
      "ba", "ko", "ri", "tu", "ven", "sol", "mar", "li", "dex", "pra", "zu", "quo",
      "fen", "gal", "hu", "jin", "ly", "mo", "nex", "or", "pel", "ras", "sti", "tor",
      "ul", "vak", "wen", "xy", "yor", "zed", "cal", "dro", "es", "fi", "gro", "hal"};
  return s;
}

inline const std::vector<std::string>& common_vars() {
  static const std::vector<std::string> v = {"i", "n", "len", "buf", "tmp", "ret", "idx", "count"};
  return v;
}

inline const std::vector<std::string>& common_helpers() {
  static const std::vector<std::string> v = {"init", "cleanup", "reset", "get_size", "clear"};
  return v;
}

inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v = {
      "parse", "encode", "decode", "compute", "update", "validate", "flush", "resolve",
      "scan", "merge", "split", "emit", "load", "store", "transform", "compress",
      "expand", "render", "index", "lookup", "normalize", "serialize", "dispatch", "filter"};
  return v;
}

inline const std::vector<std::string>& nouns() {
  static const std::vector<std::string> v = {
      "header", "block", "stream", "table", "record", "segment", "buffer", "token",
      "frame", "packet", "entry", "window", "cursor", "chunk", "node", "symbol",
      "matrix", "digest", "config", "payload", "region", "index", "state", "queue"};
  return v;
}

inline std::string word(Rng& rng, int syl_min, int syl_max) {
  std::string w;
  const auto n = rng.range(syl_min, syl_max);
  for (int i = 0; i < n; ++i) w += rng.pick(syllables());
  return w;
}

// Project-specific vocabulary so unrelated projects read differently.
struct Vocab {
  std::string prefix;
  std::vector<std::string> vars;
  std::vector<std::string> fields;
  std::vector<std::string> consts;
};

inline Vocab make_vocab(Rng& rng, const std::string& prefix) {
  Vocab v;
  v.prefix = prefix;
  std::set<std::string> seen;
  while (v.vars.size() < 28) {
    auto w = word(rng, 2, 3);
    if (seen.insert(w).second) v.vars.push_back(w);
  }
  while (v.fields.size() < 10) {
    auto w = word(rng, 2, 3) + "_" + rng.pick(nouns());
    if (seen.insert(w).second) v.fields.push_back(w);
  }
  for (int i = 0; i < 6; ++i) {
    v.consts.push_back(std::to_string(rng.range(3, 4000)));
  }
  return v;
}

class BodyWriter {
 public:
  BodyWriter(Rng& rng, const Vocab& vocab, std::vector<std::string> callees,
             std::vector<std::string> params)
      : rng_(rng), vocab_(vocab), callees_(std::move(callees)), params_(std::move(params)) {}

  std::string write(std::size_t statements) {
    out_.clear();
    declared_ = params_;
    // Locals prefer project vocabulary, with a few common names mixed in.
    locals_.clear();
    std::set<std::string> used(params_.begin(), params_.end());
    const std::size_t n_locals = std::min<std::size_t>(3 + statements / 4, 9);
    while (locals_.size() < n_locals) {
      const auto& w = rng_.chance(0.25) ? rng_.pick(common_vars()) : rng_.pick(vocab_.vars);
      if (used.insert(w).second) locals_.push_back(w);
    }
    for (const auto& l : locals_) {
      line(1, "int " + l + " = " + atom() + ";");
    }
    budget_ = statements;
    while (budget_ > 0) statement(1, 0);
    line(1, "return " + rng_.pick(locals_) + ";");
    return out_;
  }

 private:
  void line(int depth, const std::string& s) {
    out_.append(static_cast<std::size_t>(depth) * 4, ' ');
    out_ += s;
    out_.push_back('\n');
  }

  std::string var() {
    if (!params_.empty() && rng_.chance(0.2)) return rng_.pick(params_);
    return rng_.pick(locals_);
  }

  std::string atom() {
    const auto r = rng_.below(10);
    if (r < 4) return var();
    if (r < 6) return rng_.pick(vocab_.consts);
    if (r < 8) return "ctx->" + rng_.pick(vocab_.fields);
    return std::to_string(rng_.range(1, 64));
  }

  std::string expr() {
    static const std::vector<std::string> ops = {"+", "-", "*", "^", "&", "|", ">>", "<<", "%"};
    std::string e = atom();
    const auto terms = rng_.range(0, 2);
    for (int i = 0; i < terms; ++i) {
      e += " " + rng_.pick(ops) + " " + atom();
    }
    return e;
  }

  std::string cond() {
    static const std::vector<std::string> rel = {"<", ">", "==", "!=", "<=", ">="};
    std::string c = var() + " " + rng_.pick(rel) + " " + atom();
    if (rng_.chance(0.3)) {
      c += (rng_.chance(0.5) ? " && " : " || ") + var() + " " + rng_.pick(rel) + " " + atom();
    }
    return c;
  }

  std::string call() {
    std::string args;
    const auto n = rng_.range(1, 3);
    for (int i = 0; i < n; ++i) {
      if (i) args += ", ";
      args += i == 0 ? std::string("ctx") : var();
    }
    return callees_[next_callee_++ % callees_.size()] + "(" + args + ")";
  }

  void statement(int depth, int nest) {
    if (budget_ == 0) return;
    --budget_;
    const auto r = rng_.below(100);
    if (!callees_.empty() && next_callee_ < callees_.size() && r < 25) {
      if (rng_.chance(0.5)) {
        line(depth, call() + ";");
      } else {
        line(depth, var() + " = " + call() + ";");
      }
    } else if (r < 45 || nest >= 2) {
      static const std::vector<std::string> assign = {"=", "+=", "-=", "^=", "|="};
      line(depth, var() + " " + rng_.pick(assign) + " " + expr() + ";");
    } else if (r < 60) {
      line(depth, "ctx->" + rng_.pick(vocab_.fields) + " = " + expr() + ";");
    } else if (r < 75) {
      line(depth, "if (" + cond() + ") {");
      block(depth + 1, nest + 1);
      if (rng_.chance(0.35)) {
        line(depth, "} else {");
        block(depth + 1, nest + 1);
      }
      line(depth, "}");
    } else if (r < 87) {
      const auto& iv = rng_.pick(locals_);
      line(depth, "for (" + iv + " = 0; " + iv + " < " + atom() + "; " + iv + "++) {");
      block(depth + 1, nest + 1);
      line(depth, "}");
    } else if (r < 94) {
      const auto& wv = rng_.pick(locals_);
      line(depth, "while (" + wv + " > " + std::to_string(rng_.range(0, 9)) + ") {");
      block(depth + 1, nest + 1);
      line(depth + 1, wv + "--;");
      line(depth, "}");
    } else {
      line(depth, "switch (" + var() + ") {");
      const auto cases = rng_.range(2, 3);
      for (int c = 0; c < cases; ++c) {
        line(depth, "case " + std::to_string(c + rng_.range(0, 3) * 4) + ":");
        line(depth + 1, var() + " = " + expr() + ";");
        line(depth + 1, "break;");
      }
      line(depth, "default:");
      line(depth + 1, "break;");
      line(depth, "}");
    }
  }

  void block(int depth, int nest) {
    const auto n = rng_.range(1, 3);
    for (int i = 0; i < n && budget_ > 0; ++i) statement(depth, nest);
    if (budget_ == 0 && n > 0) {
      // keep blocks non-empty
    }
    if (out_.size() >= 2 && out_[out_.size() - 2] == '{') {
      line(depth, var() + " += 1;");
    }
  }

  Rng& rng_;
  const Vocab& vocab_;
  std::vector<std::string> callees_;
  std::size_t next_callee_ = 0;
  std::vector<std::string> params_;
  std::vector<std::string> declared_;
  std::vector<std::string> locals_;
  std::string out_;
  std::size_t budget_ = 0;
};

inline GenFunction make_function(Rng& rng, const Vocab& vocab, const FunctionId& id,
                                 const std::vector<std::string>& callees, bool big) {
  std::vector<std::string> params;
  std::set<std::string> used;
  const auto n_params = rng.range(1, 3);
  while (params.size() < static_cast<std::size_t>(n_params)) {
    auto w = rng.pick(vocab.vars);
    if (used.insert(w).second) params.push_back(w);
  }
  std::string sig = (rng.chance(0.3) ? "static int " : "int ") + id.name + "(struct " +
                    vocab.prefix + "_ctx *ctx";
  for (const auto& p : params) sig += ", int " + p;
  sig += ")";
  const std::size_t statements = big ? static_cast<std::size_t>(rng.range(22, 40))
                                     : static_cast<std::size_t>(rng.range(2, 9));
  BodyWriter bw(rng, vocab, callees, params);
  std::string body = bw.write(statements);
  GenFunction f;
  f.id = id;
  f.big = big;
  f.text = sig + " {\n" + body + "}";
  return f;
}

inline bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

inline std::string replace_word(const std::string& text, const std::string& from,
                                const std::string& to) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, from.size(), from) == 0 && (i == 0 || !is_word_char(text[i - 1])) &&
        (i + from.size() >= text.size() || !is_word_char(text[i + from.size()]))) {
      out += to;
      i += from.size();
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

// Declared local names, in order, from `int x = ...;` lines.
inline std::vector<std::string> declared_locals(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find("\n    int ", pos)) != std::string::npos) {
    pos += 9;
    const auto end = text.find(' ', pos);
    if (end == std::string::npos) break;
    out.push_back(text.substr(pos, end - pos));
  }
  return out;
}

// Edits k statement lines in place: constants change or a line is added.
inline std::string edit_statements(Rng& rng, const std::string& text, std::size_t k,
                                   const Vocab& vocab) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
    if (!lines[i].empty() && lines[i].back() == ';' && lines[i].find("return") == std::string::npos) {
      candidates.push_back(i);
    }
  }
  if (candidates.empty()) return text;
  for (std::size_t e = 0; e < k; ++e) {
    const auto idx = candidates[rng.below(candidates.size())];
    auto& l = lines[idx];
    const auto indent = l.find_first_not_of(' ');
    const auto locals = declared_locals(text);
    const std::string v = locals.empty() ? std::string("ctx->") + vocab.fields[0] : locals[rng.below(locals.size())];
    if (rng.chance(0.5)) {
      l = std::string(indent, ' ') + v + " ^= " + std::to_string(rng.range(65, 999)) + ";";
    } else {
      lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(idx),
                   std::string(indent, ' ') + v + " += " + std::to_string(rng.range(65, 999)) + ";");
    }
  }
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

inline std::vector<GenFile> pack_files(const std::string& dir, const std::string& stem,
                                       const std::vector<GenFunction>& fns, std::size_t per_file) {
  std::vector<GenFile> files;
  for (std::size_t i = 0; i < fns.size(); i += per_file) {
    GenFile f;
    f.path = dir + "/" + stem + "_" + std::to_string(files.size()) + ".c";
    for (std::size_t k = i; k < std::min(fns.size(), i + per_file); ++k) f.functions.push_back(fns[k]);
    files.push_back(std::move(f));
  }
  return files;
}

}  // namespace corpus_detail

// Compiles a source function into the pseudo-assembly form. Locals map to
// stack slots by first appearance, so renaming locals leaves the listing
// unchanged while calls keep their callee names.
inline AssemblyFunction compile_to_assembly(const std::string& name, std::string_view text) {
  const auto toks = lex_c(text);
  AssemblyFunction fn;
  fn.name = name;
  std::map<std::string, std::size_t> slots;
  auto slot = [&](const std::string& id) {
    auto [it, inserted] = slots.emplace(id, slots.size());
    return "[rbp-" + std::to_string(8 * (it->second + 1)) + "]";
  };
  auto new_block = [&] { fn.blocks.push_back({"bb" + std::to_string(fn.blocks.size()), {}}); };
  new_block();
  std::size_t body = 0;
  while (body < toks.size() && toks[body].text != "{") ++body;
  int reg = 0;
  auto r = [&] { return "r" + std::to_string(reg++ % 6); };
  for (std::size_t i = body + 1; i + 1 < toks.size(); ++i) {
    const auto& t = toks[i];
    auto& cur = fn.blocks.back().instructions;
    if (t.text == "if" || t.text == "for" || t.text == "while" || t.text == "case" ||
        t.text == "else" || t.text == "default") {
      cur.push_back({"cmp", r(), r()});
      cur.push_back({t.text == "else" || t.text == "default" ? "jmp" : "jne",
                     "bb" + std::to_string(fn.blocks.size() + 1)});
      new_block();
    } else if (t.text == "return") {
      new_block();
      fn.blocks.back().instructions.push_back({"mov", "rax", r()});
      fn.blocks.back().instructions.push_back({"ret"});
    } else if (t.kind == TokenKind::identifier && toks[i + 1].text == "(") {
      cur.push_back({"call", t.text});
      ++i;
    } else if (t.kind == TokenKind::identifier) {
      if (i > 0 && toks[i - 1].text == "->") {
        cur.push_back({"mov", r(), "[" + std::string("ctx+") + t.text + "]"});
      } else {
        cur.push_back({"mov", r(), slot(t.text)});
      }
    } else if (t.kind == TokenKind::number) {
      cur.push_back({"mov", r(), "0x" + t.text});
    } else if (t.kind == TokenKind::punct) {
      static const std::map<std::string, std::string> ops = {
          {"+", "add"}, {"-", "sub"}, {"*", "imul"}, {"^", "xor"}, {"&", "and"},
          {"|", "or"},  {">>", "sar"}, {"<<", "shl"}, {"%", "idiv"}, {"=", "store"},
          {"+=", "add"}, {"-=", "sub"}, {"^=", "xor"}, {"|=", "or"}, {"++", "inc"},
          {"--", "dec"}, {"<", "setl"}, {">", "setg"}, {"==", "sete"}, {"!=", "setne"},
          {"<=", "setle"}, {">=", "setge"}, {"&&", "and"}, {"||", "or"}};
      if (auto it = ops.find(t.text); it != ops.end()) {
        cur.push_back({it->second, r(), r()});
      }
    }
  }
  // A trailing block may be empty; give every block an instruction.
  for (auto& b : fn.blocks) {
    if (b.instructions.empty()) b.instructions.push_back({"nop"});
  }
  return fn;
}

inline std::string assembly_for_files(const std::vector<GenFile>& files) {
  std::vector<AssemblyFunction> fns;
  for (const auto& f : files) {
    for (const auto& g : f.functions) fns.push_back(compile_to_assembly(g.id.name, g.text));
  }
  return render_assembly_listing(fns);
}

inline Corpus generate_corpus(const CorpusConfig& cfg) {
  using namespace corpus_detail;
  if (cfg.n_projects == 0) throw ConfigError("corpus needs at least one project");
  Rng rng(mix64(cfg.seed));
  Corpus corpus;
  corpus.manifest.seed = cfg.seed;

  // Project names and vocabularies.
  std::vector<Vocab> vocabs;
  std::set<std::string> names;
  for (std::size_t p = 0; p < cfg.n_projects; ++p) {
    std::string name;
    do {
      name = "lib" + word(rng, 2, 2);
    } while (!names.insert(name).second);
    vocabs.push_back(make_vocab(rng, name));
    GenProject gp;
    gp.name = name;
    // Project 0 is the oldest; it is the vendored helper library.
    gp.timestamp = 1'000'000'000 + static_cast<std::int64_t>(p == 0 ? 0 : rng.range(1, 400)) * 86400;
    corpus.projects.push_back(std::move(gp));
  }

  // Current function set of every project.
  std::vector<std::vector<GenFunction>> heads(cfg.n_projects);
  for (std::size_t p = 0; p < cfg.n_projects; ++p) {
    const auto& v = vocabs[p];
    std::vector<std::string> fn_names;
    std::set<std::string> used;
    for (std::size_t k = 0; k < cfg.fns_per_project; ++k) {
      std::string n;
      if (k % 12 == 5 && used.size() < cfg.fns_per_project) {
        n = common_helpers()[(k / 12 + p) % common_helpers().size()];
      } else {
        n = v.prefix + "_" + rng.pick(verbs()) + "_" + rng.pick(nouns());
        if (rng.chance(0.5)) n += "_" + rng.pick(nouns());
      }
      if (!used.insert(n).second) {
        n += "_" + std::to_string(k);
        used.insert(n);
      }
      fn_names.push_back(n);
    }
    for (std::size_t k = 0; k < fn_names.size(); ++k) {
      std::vector<std::string> callees;
      const bool helper = std::find(common_helpers().begin(), common_helpers().end(),
                                    fn_names[k]) != common_helpers().end();
      const auto n_calls = k == 0 ? 0 : rng.range(0, 3);
      for (int c = 0; c < n_calls; ++c) {
        const auto& cand = fn_names[rng.below(k)];
        const bool cand_helper = std::find(common_helpers().begin(), common_helpers().end(),
                                           cand) != common_helpers().end();
        if (cand_helper || (helper && c > 0)) continue;
        if (std::find(callees.begin(), callees.end(), cand) == callees.end()) callees.push_back(cand);
      }
      const bool big = rng.chance(0.18);
      heads[p].push_back(make_function(rng, v, FunctionId{{}, fn_names[k]}, callees, big));
    }
  }

  // Vendored helper copies: the later projects carry verbatim copies of a
  // few of project 0's non-helper functions.
  std::vector<std::vector<GenFunction>> vendored(cfg.n_projects);
  for (std::size_t v = 0; v < std::min(cfg.vendoring_projects, cfg.n_projects - 1); ++v) {
    const std::size_t p = 1 + v;
    for (std::size_t k = 0; k < heads[0].size() && vendored[p].size() < 4; ++k) {
      if (heads[0][k].id.name.rfind(vocabs[0].prefix, 0) == 0 && !heads[0][k].big) {
        vendored[p].push_back(heads[0][k]);
      }
    }
  }

  // Commit history: commit 0 misses a few functions and has older bodies
  // for some; the last commit is the head tree.
  for (std::size_t p = 0; p < cfg.n_projects; ++p) {
    auto& gp = corpus.projects[p];
    const auto n_commits = static_cast<std::size_t>(rng.range(2, 3));
    auto head_files = pack_files("src", "core", heads[p], cfg.functions_per_file);
    if (!vendored[p].empty()) {
      GenFile vf;
      vf.path = "src/vendor_" + vocabs[0].prefix + ".c";
      vf.functions = vendored[p];
      head_files.push_back(std::move(vf));
    }
    for (std::size_t c = 0; c + 1 < n_commits; ++c) {
      GenCommit commit;
      commit.timestamp = gp.timestamp + static_cast<std::int64_t>(c) * 86400;
      commit.files = head_files;
      // Only the first file changes between commits.
      auto& f0 = commit.files[0].functions;
      const std::size_t drop = n_commits - 1 - c;
      for (std::size_t d = 0; d < drop && f0.size() > 1; ++d) f0.pop_back();
      if (!f0.empty()) {
        f0[0].text = edit_statements(rng, f0[0].text, 1, vocabs[p]);
      }
      if (c == 0 && f0.size() > 2) {
        // a function that later disappears
        f0.push_back(make_function(rng, vocabs[p],
                                   FunctionId{{}, vocabs[p].prefix + "_legacy_shim"}, {}, false));
      }
      gp.commits.push_back(std::move(commit));
    }
    GenCommit last;
    last.timestamp = gp.timestamp + static_cast<std::int64_t>(n_commits - 1) * 86400;
    last.files = head_files;
    gp.commits.push_back(std::move(last));
    corpus.manifest.projects.push_back(
        {gp.name, gp.timestamp, heads[p].size() + vendored[p].size(), n_commits});
  }

  // Targets with planted reuse.
  for (std::size_t t = 0; t < cfg.n_targets; ++t) {
    GenTarget target;
    target.name = "target" + std::to_string(t);
    const std::string tprefix = "app" + word(rng, 2, 2);
    Vocab tv = make_vocab(rng, tprefix);
    corpus.manifest.targets.push_back(target.name);
    corpus.manifest.truth[target.name];

    std::vector<GenFunction> own;
    std::vector<std::string> own_names;
    for (std::size_t k = 0; k < cfg.target_own_functions; ++k) {
      std::string n = k % 15 == 7 ? common_helpers()[k % common_helpers().size()]
                                  : tprefix + "_" + rng.pick(verbs()) + "_" + rng.pick(nouns()) +
                                        "_" + std::to_string(k);
      std::vector<std::string> callees;
      for (int c = 0; c < rng.range(0, 2) && !own_names.empty(); ++c) {
        const auto& cand = own_names[rng.below(own_names.size())];
        if (cand.rfind(tprefix, 0) == 0) callees.push_back(cand);
      }
      own_names.push_back(n);
      own.push_back(make_function(rng, tv, FunctionId{{}, n}, callees, rng.chance(0.18)));
    }
    target.files = pack_files("src", "main", own, cfg.functions_per_file);

    // Producers: distinct, never the helper library.
    std::vector<std::size_t> pool;
    for (std::size_t p = 1; p < cfg.n_projects; ++p) pool.push_back(p);
    rng.shuffle(pool);
    const std::size_t edges = cfg.reuse_scale > 0.0 ? std::min(cfg.reuse_edges_per_target, pool.size()) : 0;
    const auto n_renamed = static_cast<std::size_t>(std::ceil(cfg.renamed_share * static_cast<double>(edges) - 1e-9));
    for (std::size_t e = 0; e < edges; ++e) {
      const std::size_t p = pool[e];
      ReuseEdge edge;
      edge.consumer = target.name;
      edge.producer = corpus.projects[p].name;
      const bool partial = cfg.plant_partial_reuse && e == edges - 1 && edges >= 3;
      if (e < n_renamed) {
        edge.profile = MutationProfile::rename_identifiers;
      } else if (partial || e % 2 == 0) {
        edge.profile = MutationProfile::edit_statements;
      } else {
        edge.profile = MutationProfile::verbatim;
      }
      // Choose the copied functions.
      std::vector<std::size_t> order(heads[p].size());
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
      rng.shuffle(order);
      std::vector<std::size_t> chosen;
      if (partial) {
        // A few long functions: under 10% of the project by count.
        for (auto k : order) {
          if (heads[p][k].big && chosen.size() < std::max<std::size_t>(1, heads[p].size() / 15)) {
            chosen.push_back(k);
          }
        }
      } else {
        const double frac = std::min(1.0, cfg.reuse_scale * (cfg.reuse_fraction_min +
                                                             rng.uniform() * (cfg.reuse_fraction_max - cfg.reuse_fraction_min)));
        const auto n = static_cast<std::size_t>(std::round(frac * static_cast<double>(heads[p].size())));
        for (std::size_t k = 0; k < n && k < order.size(); ++k) {
          const auto& nm = heads[p][order[k]].id.name;
          if (std::find(common_helpers().begin(), common_helpers().end(), nm) != common_helpers().end()) {
            continue;
          }
          chosen.push_back(order[k]);
        }
      }
      if (chosen.empty()) continue;
      std::sort(chosen.begin(), chosen.end());
      edge.fraction = static_cast<double>(chosen.size()) / static_cast<double>(heads[p].size());

      std::map<std::string, std::string> renames;
      if (edge.profile == MutationProfile::rename_identifiers) {
        for (auto k : chosen) {
          const auto& nm = heads[p][k].id.name;
          renames[nm] = tprefix + nm.substr(vocabs[p].prefix.size());
        }
      }
      std::vector<GenFunction> copied;
      for (auto k : chosen) {
        GenFunction f = heads[p][k];
        edge.producer_functions.push_back(f.id.str());
        if (edge.profile == MutationProfile::rename_identifiers) {
          for (const auto& [from, to] : renames) f.text = replace_word(f.text, from, to);
          f.id.name = renames[f.id.name];
          // one local renamed as well
          const auto locals = declared_locals(f.text);
          if (!locals.empty()) {
            const auto& victim = locals[rng.below(locals.size())];
            f.text = replace_word(f.text, victim, victim + "_v");
          }
        } else if (edge.profile == MutationProfile::edit_statements) {
          f.text = edit_statements(rng, f.text, static_cast<std::size_t>(rng.range(1, 2)), vocabs[p]);
        }
        copied.push_back(std::move(f));
      }
      // Reused code sits in its own third-party files of at most 10 functions.
      auto files = pack_files("third_party/" + edge.producer, "copy", copied, 10);
      std::move(files.begin(), files.end(), std::back_inserter(target.files));
      corpus.manifest.truth[target.name].insert(edge.producer);
      corpus.manifest.reuse.push_back(std::move(edge));
    }
    corpus.targets.push_back(std::move(target));
  }
  return corpus;
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  for (const auto& p : corpus.projects) {
    for (std::size_t c = 0; c < p.commits.size(); ++c) {
      const auto& commit = p.commits[c];
      const fs::path dir = root / "oss" / p.name / "commits" /
                           (std::to_string(c) + "_" + std::to_string(commit.timestamp));
      for (const auto& f : commit.files) {
        fs::create_directories((dir / f.path).parent_path());
        write_file_text((dir / f.path).string(), f.render());
      }
      write_file_text((dir / "binary.asm").string(), assembly_for_files(commit.files));
    }
  }
  for (const auto& t : corpus.targets) {
    const fs::path dir = root / "targets" / t.name;
    for (const auto& f : t.files) {
      fs::create_directories((dir / f.path).parent_path());
      write_file_text((dir / f.path).string(), f.render());
    }
    write_file_text((dir / "binary.asm").string(), assembly_for_files(t.files));
  }
  write_file_text((root / "manifest.json").string(), corpus.manifest.to_json().dump(2) + "\n");
}

inline CorpusManifest read_manifest(const std::filesystem::path& root) {
  return CorpusManifest::from_json(nlohmann::json::parse(read_file_text((root / "manifest.json").string())));
}

}  // namespace ppsca
