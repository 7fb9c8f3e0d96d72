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

// Dissection of C-like source files into function records, plus call
// graphs, complexity metrics and the textual pseudo-assembly format.
//
// Function extraction is a brace-matching heuristic, not a C++ parser. It
// recognizes `ret-type name(args) { ... }` definitions at namespace or class
// level, tracks `namespace` / `class` / `struct` scopes, and lexes every
// preprocessor branch as plain text (directive lines themselves are skipped).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ppsca/common.hpp"

namespace ppsca {

enum class TokenKind { identifier, keyword, number, string, punct };

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t begin;  // byte offset into the lexed text
  std::size_t end;
};

namespace ingest_detail {

inline const std::unordered_set<std::string>& keywords() {
  static const std::unordered_set<std::string> kw = {
      "alignas",  "alignof",   "asm",       "auto",      "bool",     "break",
      "case",     "catch",     "char",      "class",     "const",    "constexpr",
      "continue", "decltype",  "default",   "delete",    "do",       "double",
      "else",     "enum",      "explicit",  "extern",    "false",    "float",
      "for",      "friend",    "goto",      "if",        "inline",   "int",
      "long",     "mutable",   "namespace", "new",       "noexcept", "nullptr",
      "operator", "private",   "protected", "public",    "register", "return",
      "short",    "signed",    "sizeof",    "static",    "struct",   "switch",
      "template", "this",      "throw",     "true",      "try",      "typedef",
      "typename", "union",     "unsigned",  "using",     "virtual",  "void",
      "volatile", "while",     "override",  "final",     "static_assert",
  };
  return kw;
}

// Keywords that can precede '(' without being a call.
inline bool is_non_call_keyword(std::string_view s) {
  static const std::unordered_set<std::string_view> k = {
      "if",    "for",      "while",  "switch",   "return",  "sizeof",
      "catch", "alignof",  "decltype", "static_assert", "noexcept",
      "alignas", "throw",  "new",    "delete",   "operator", "typeid"};
  return k.count(s) > 0;
}

inline bool ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

inline bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

}  // namespace ingest_detail

// Lexes C/C++-ish text. Comments and preprocessor directive lines are
// dropped; string and character literals become single tokens.
inline std::vector<Token> lex_c(std::string_view text) {
  using namespace ingest_detail;
  static const std::vector<std::string_view> kMultiPunct = {
      "<<=", ">>=", "...", "->*", "::", "->", "++", "--", "<<", ">>", "<=", ">=",
      "==",  "!=",  "&&",  "||",  "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^="};
  std::vector<Token> out;
  const std::size_t n = text.size();
  std::size_t i = 0;
  bool line_start = true;
  while (i < n) {
    const char c = text[i];
    if (c == '\n') {
      line_start = true;
      ++i;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
      ++i;
      continue;
    }
    if (line_start && c == '#') {
      // Directive runs to end of line, honoring backslash continuations.
      while (i < n && text[i] != '\n') {
        if (text[i] == '\\' && i + 1 < n && text[i + 1] == '\n') ++i;
        ++i;
      }
      continue;
    }
    line_start = false;
    if (c == '/' && i + 1 < n && text[i + 1] == '/') {
      while (i < n && text[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && text[i + 1] == '*') {
      const auto close = text.find("*/", i + 2);
      i = close == std::string_view::npos ? n : close + 2;
      continue;
    }
    const std::size_t begin = i;
    if (c == '"' || c == '\'') {
      ++i;
      while (i < n && text[i] != c && text[i] != '\n') {
        if (text[i] == '\\' && i + 1 < n) ++i;
        ++i;
      }
      if (i < n && text[i] == c) ++i;
      out.push_back({TokenKind::string, std::string(text.substr(begin, i - begin)), begin, i});
      continue;
    }
    if (ident_start(c)) {
      while (i < n && ident_char(text[i])) ++i;
      std::string word(text.substr(begin, i - begin));
      const auto kind = keywords().count(word) ? TokenKind::keyword : TokenKind::identifier;
      out.push_back({kind, std::move(word), begin, i});
      continue;
    }
    if (c >= '0' && c <= '9') {
      while (i < n && (ident_char(text[i]) || text[i] == '.')) ++i;
      out.push_back({TokenKind::number, std::string(text.substr(begin, i - begin)), begin, i});
      continue;
    }
    std::size_t len = 1;
    for (auto p : kMultiPunct) {
      if (text.substr(i, p.size()) == p) {
        len = p.size();
        break;
      }
    }
    i += len;
    out.push_back({TokenKind::punct, std::string(text.substr(begin, len)), begin, i});
  }
  return out;
}

// Comment-stripped text with every whitespace run collapsed to one space.
// This is the canonical byte string fed to TLSH.
inline std::string normalize_source(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  const std::size_t n = text.size();
  bool pending_space = false;
  auto emit = [&](char ch) {
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  };
  for (std::size_t i = 0; i < n;) {
    const char c = text[i];
    if (c == '/' && i + 1 < n && text[i + 1] == '/') {
      while (i < n && text[i] != '\n') ++i;
      pending_space = true;
      continue;
    }
    if (c == '/' && i + 1 < n && text[i + 1] == '*') {
      const auto close = text.find("*/", i + 2);
      i = close == std::string_view::npos ? n : close + 2;
      pending_space = true;
      continue;
    }
    if (c == '"' || c == '\'') {
      emit(c);
      ++i;
      while (i < n && text[i] != c && text[i] != '\n') {
        if (text[i] == '\\' && i + 1 < n) out.push_back(text[i++]);
        out.push_back(text[i++]);
      }
      if (i < n && text[i] == c) out.push_back(text[i++]);
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending_space = true;
      ++i;
      continue;
    }
    emit(c);
    ++i;
  }
  return out;
}

struct SourceFunction {
  FunctionId id;
  std::string file;
  std::string text;  // full definition: signature through closing brace
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the closing brace
  std::size_t loc = 1;
  std::size_t cyclomatic = 1;
  double halstead_volume = 0.0;
  std::vector<FunctionId> callees;  // sorted, unique

  std::string normalized() const { return normalize_source(text); }
};

struct Diagnostic {
  std::string file;
  std::string message;
};

// Non-blank line count of a text span.
inline std::size_t count_nonblank_lines(std::string_view text) {
  std::size_t lines = 0;
  bool has_content = false;
  for (char c : text) {
    if (c == '\n') {
      if (has_content) ++lines;
      has_content = false;
    } else if (c != ' ' && c != '\t' && c != '\r') {
      has_content = true;
    }
  }
  if (has_content) ++lines;
  return std::max<std::size_t>(lines, 1);
}

struct Metrics {
  std::size_t cyclomatic = 1;
  double halstead_volume = 0.0;
  double maintainability = 0.0;
};

inline double maintainability_index(double volume, double cyclomatic, double loc) {
  const double raw = 171.0 - 5.2 * std::log(std::max(volume, 1.0)) - 0.23 * cyclomatic -
                     16.2 * std::log(std::max(loc, 1.0));
  return std::max(0.0, raw * 100.0 / 171.0);
}

// Cyclomatic complexity, Halstead volume and maintainability index.
// Operators are keywords and punctuation (closing brackets excluded, they
// pair with their openers); operands are identifiers and literals.
inline Metrics compute_metrics(std::string_view text, std::size_t loc) {
  const auto tokens = lex_c(text);
  std::size_t cc = 1;
  std::set<std::string> ops;
  std::set<std::string> operands;
  std::size_t total_ops = 0;
  std::size_t total_operands = 0;
  for (const auto& t : tokens) {
    if (t.text == "if" || t.text == "for" || t.text == "while" || t.text == "case" ||
        t.text == "&&" || t.text == "||" || t.text == "?") {
      ++cc;
    }
    switch (t.kind) {
      case TokenKind::identifier:
      case TokenKind::number:
      case TokenKind::string:
        operands.insert(t.text);
        ++total_operands;
        break;
      case TokenKind::keyword:
        ops.insert(t.text);
        ++total_ops;
        break;
      case TokenKind::punct:
        if (t.text == ")" || t.text == "]" || t.text == "}") break;
        ops.insert(t.text);
        ++total_ops;
        break;
    }
  }
  Metrics m;
  m.cyclomatic = cc;
  const std::size_t vocab = ops.size() + operands.size();
  m.halstead_volume =
      vocab > 0 ? static_cast<double>(total_ops + total_operands) * std::log2(static_cast<double>(vocab))
                : 0.0;
  m.maintainability = maintainability_index(m.halstead_volume, static_cast<double>(cc),
                                            static_cast<double>(loc));
  return m;
}

inline Metrics compute_metrics(const SourceFunction& fn) {
  return compute_metrics(fn.text, fn.loc);
}

namespace ingest_detail {

// Reads a possibly qualified name ending at token index `last`
// (inclusive). Returns the id and the index of its first token.
inline std::pair<FunctionId, std::size_t> qualified_name_ending_at(
    const std::vector<Token>& toks, std::size_t last) {
  std::vector<std::string> parts{toks[last].text};
  std::size_t first = last;
  while (first >= 2 && toks[first - 1].text == "::" &&
         toks[first - 2].kind == TokenKind::identifier) {
    parts.insert(parts.begin(), toks[first - 2].text);
    first -= 2;
  }
  FunctionId id;
  id.name = parts.back();
  parts.pop_back();
  id.scope = std::move(parts);
  return {id, first};
}

inline std::vector<FunctionId> collect_callees(const std::vector<Token>& toks,
                                               std::size_t body_begin,
                                               std::size_t body_end) {
  std::set<FunctionId> found;
  for (std::size_t i = body_begin; i + 1 < body_end; ++i) {
    if (toks[i].kind != TokenKind::identifier || toks[i + 1].text != "(") continue;
    // Member access (a.f(), p->f()) still counts as a call of f.
    auto [id, first] = qualified_name_ending_at(toks, i);
    if (first > 0 && toks[first - 1].kind == TokenKind::identifier) {
      // `Type name(args);` declares an object; not a call.
      continue;
    }
    found.insert(std::move(id));
  }
  return {found.begin(), found.end()};
}

inline std::size_t find_match(const std::vector<Token>& toks, std::size_t open,
                              std::string_view open_s, std::string_view close_s) {
  int depth = 0;
  for (std::size_t i = open; i < toks.size(); ++i) {
    if (toks[i].text == open_s) {
      ++depth;
    } else if (toks[i].text == close_s) {
      if (--depth == 0) return i;
    }
  }
  return toks.size();
}

enum class BlockKind { scope, transparent, opaque };

}  // namespace ingest_detail

// Dissects one file into function definitions. On unbalanced braces the
// whole file is skipped and a diagnostic is appended.
inline std::vector<SourceFunction> extract_source_functions(
    std::string_view file_text, const std::string& file_path,
    std::vector<Diagnostic>* diagnostics = nullptr) {
  using namespace ingest_detail;
  const auto toks = lex_c(file_text);

  {
    long depth = 0;
    for (const auto& t : toks) {
      if (t.text == "{") ++depth;
      if (t.text == "}" && --depth < 0) break;
    }
    if (depth != 0) {
      if (diagnostics) {
        diagnostics->push_back({file_path, "unbalanced braces; file skipped"});
      }
      return {};
    }
  }

  std::vector<SourceFunction> out;
  std::vector<std::string> scope;
  std::vector<BlockKind> blocks;
  std::size_t stmt_start = 0;

  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t.text == ";") {
      stmt_start = i + 1;
      continue;
    }
    if (t.text == "}") {
      if (!blocks.empty()) {
        if (blocks.back() == BlockKind::scope) scope.pop_back();
        blocks.pop_back();
      }
      stmt_start = i + 1;
      continue;
    }
    if (t.text != "{") continue;

    // Classify the statement head [stmt_start, i).
    const std::size_t head = stmt_start;
    const std::string first = head < i ? toks[head].text : std::string();

    if (first == "namespace") {
      if (head + 1 < i && toks[head + 1].kind == TokenKind::identifier) {
        // `namespace a::b {` pushes both components as one scope entry.
        std::string name;
        for (std::size_t k = head + 1; k < i; ++k) name += toks[k].text;
        scope.push_back(name);
        blocks.push_back(BlockKind::scope);
      } else {
        blocks.push_back(BlockKind::transparent);
      }
      stmt_start = i + 1;
      continue;
    }
    if (first == "extern" && head + 1 < i && toks[head + 1].kind == TokenKind::string) {
      blocks.push_back(BlockKind::transparent);
      stmt_start = i + 1;
      continue;
    }

    // First '(' of the head; an '=' before it marks an initializer.
    std::size_t open_paren = i;
    for (std::size_t k = head; k < i; ++k) {
      if (toks[k].text == "=") break;
      if (toks[k].text == "(") {
        open_paren = k;
        break;
      }
    }
    const bool record_like = (first == "class" || first == "struct" || first == "union" ||
                              (first == "typedef" && head + 1 < i &&
                               (toks[head + 1].text == "struct" ||
                                toks[head + 1].text == "union")));
    if (record_like && open_paren == i) {
      // class/struct scope: the name is the last identifier before ':' or '{'.
      std::string name;
      for (std::size_t k = head + 1; k < i; ++k) {
        if (toks[k].text == ":") break;
        if (toks[k].kind == TokenKind::identifier) name = toks[k].text;
      }
      if (!name.empty() && first != "typedef") {
        scope.push_back(name);
        blocks.push_back(BlockKind::scope);
      } else {
        blocks.push_back(BlockKind::transparent);
      }
      stmt_start = i + 1;
      continue;
    }

    const bool is_function = open_paren > head && open_paren < i &&
                             toks[open_paren - 1].kind == TokenKind::identifier &&
                             first != "enum";
    const std::size_t close = find_match(toks, i, "{", "}");
    if (is_function) {
      auto [qid, name_first] = qualified_name_ending_at(toks, open_paren - 1);
      (void)name_first;
      SourceFunction fn;
      fn.id.scope = scope;
      fn.id.scope.insert(fn.id.scope.end(), qid.scope.begin(), qid.scope.end());
      fn.id.name = qid.name;
      fn.file = file_path;
      fn.begin = toks[head].begin;
      fn.end = toks[close].end;
      fn.text = std::string(file_text.substr(fn.begin, fn.end - fn.begin));
      fn.loc = count_nonblank_lines(fn.text);
      fn.callees = collect_callees(toks, i + 1, close);
      const auto m = compute_metrics(fn.text, fn.loc);
      fn.cyclomatic = m.cyclomatic;
      fn.halstead_volume = m.halstead_volume;
      out.push_back(std::move(fn));
    }
    // Function bodies and any other brace block at this level (enum,
    // aggregate initializer) are consumed whole.
    i = close;
    stmt_start = close + 1;
  }
  return out;
}

struct CallEdge {
  FunctionId caller;
  FunctionId callee;
  bool external = false;

  friend bool operator==(const CallEdge&, const CallEdge&) = default;
  friend auto operator<=>(const CallEdge&, const CallEdge&) = default;
};

struct CallGraph {
  std::vector<CallEdge> edges;  // sorted, unique

  bool has_edge(const FunctionId& caller, const FunctionId& callee) const {
    return std::any_of(edges.begin(), edges.end(), [&](const CallEdge& e) {
      return e.caller == caller && e.callee == callee;
    });
  }
};

// Resolves each call expression by name within the given function set.
// Unqualified names prefer the candidate sharing the longest scope prefix
// with the caller; names that resolve nowhere become external edges.
inline CallGraph build_call_graph(const std::vector<SourceFunction>& functions) {
  std::map<std::string, std::vector<FunctionId>> by_name;
  std::set<FunctionId> all;
  for (const auto& f : functions) {
    by_name[f.id.name].push_back(f.id);
    all.insert(f.id);
  }
  for (auto& [name, ids] : by_name) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  std::set<CallEdge> edges;
  for (const auto& f : functions) {
    for (const auto& callee : f.callees) {
      std::optional<FunctionId> target;
      if (!callee.scope.empty()) {
        if (all.count(callee)) {
          target = callee;
        } else {
          // Qualified relative to the caller's scope.
          for (std::size_t keep = f.id.scope.size() + 1; keep-- > 0 && !target;) {
            FunctionId cand;
            cand.scope.assign(f.id.scope.begin(), f.id.scope.begin() + keep);
            cand.scope.insert(cand.scope.end(), callee.scope.begin(), callee.scope.end());
            cand.name = callee.name;
            if (all.count(cand)) target = cand;
          }
        }
      } else if (auto it = by_name.find(callee.name); it != by_name.end()) {
        std::size_t best_prefix = 0;
        for (const auto& cand : it->second) {
          std::size_t p = 0;
          while (p < cand.scope.size() && p < f.id.scope.size() &&
                 cand.scope[p] == f.id.scope[p]) {
            ++p;
          }
          if (!target || p > best_prefix) {
            target = cand;
            best_prefix = p;
          }
        }
      }
      if (target) {
        edges.insert({f.id, *target, false});
      } else {
        edges.insert({f.id, callee, true});
      }
    }
  }
  return {{edges.begin(), edges.end()}};
}

inline bool is_source_file(const std::filesystem::path& p) {
  static const std::set<std::string> exts = {".c", ".cc", ".cpp", ".cxx", ".h", ".hpp", ".hh"};
  return exts.count(p.extension().string()) > 0;
}

// Recursively dissects every source file below `root`, paths relative to
// root, files visited in sorted order.
inline std::vector<SourceFunction> extract_source_tree(const std::filesystem::path& root,
                                                       std::vector<Diagnostic>* diagnostics = nullptr) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && is_source_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SourceFunction> out;
  for (const auto& p : files) {
    const auto text = read_file_text(p.string());
    auto fns = extract_source_functions(text, fs::relative(p, root).generic_string(), diagnostics);
    std::move(fns.begin(), fns.end(), std::back_inserter(out));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pseudo-assembly listings
//
//   func <name>
//   block <label>:
//       <opcode> <operand> ...
//   endfunc
//
// Blank lines and lines starting with ';' are ignored.

struct BasicBlock {
  std::string label;
  std::vector<std::vector<std::string>> instructions;

  friend bool operator==(const BasicBlock&, const BasicBlock&) = default;
};

struct AssemblyFunction {
  std::string name;
  std::vector<BasicBlock> blocks;

  std::size_t block_num() const { return blocks.size(); }

  // Instruction tokens joined as text, the input to the embedding tokenizer.
  std::string instruction_text() const {
    std::string out;
    for (const auto& b : blocks) {
      for (const auto& ins : b.instructions) {
        for (const auto& tok : ins) {
          out += tok;
          out.push_back(' ');
        }
        out.push_back('\n');
      }
    }
    return out;
  }

  friend bool operator==(const AssemblyFunction&, const AssemblyFunction&) = default;
};

inline std::vector<AssemblyFunction> parse_assembly_listing(std::string_view text) {
  std::vector<AssemblyFunction> out;
  std::optional<AssemblyFunction> current;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError("assembly listing line " + std::to_string(line_no) + ": " + msg);
  };
  auto split_ws = [](std::string_view s) {
    std::vector<std::string> toks;
    std::size_t k = 0;
    while (k < s.size()) {
      while (k < s.size() && (s[k] == ' ' || s[k] == '\t')) ++k;
      const std::size_t b = k;
      while (k < s.size() && s[k] != ' ' && s[k] != '\t') ++k;
      if (k > b) toks.emplace_back(s.substr(b, k - b));
    }
    return toks;
  };
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const bool indented = !line.empty() && (line[0] == ' ' || line[0] == '\t');
    auto toks = split_ws(line);
    if (toks.empty() || toks[0][0] == ';') {
      if (nl == text.size()) break;
      continue;
    }
    if (indented) {
      if (!current || current->blocks.empty()) throw fail("instruction outside a block");
      current->blocks.back().instructions.push_back(std::move(toks));
    } else if (toks[0] == "func") {
      if (current) throw fail("nested func (missing endfunc)");
      if (toks.size() != 2) throw fail("malformed func header");
      current = AssemblyFunction{toks[1], {}};
    } else if (toks[0] == "block") {
      if (!current) throw fail("block outside func");
      if (toks.size() != 2 || toks[1].size() < 2 || toks[1].back() != ':') {
        throw fail("malformed block header");
      }
      current->blocks.push_back({toks[1].substr(0, toks[1].size() - 1), {}});
    } else if (toks[0] == "endfunc") {
      if (!current) throw fail("endfunc without func");
      if (toks.size() != 1) throw fail("malformed endfunc");
      if (current->blocks.empty()) throw fail("function '" + current->name + "' has no blocks");
      out.push_back(std::move(*current));
      current.reset();
    } else {
      throw fail("unexpected line '" + std::string(line) + "'");
    }
    if (nl == text.size()) break;
  }
  if (current) {
    ++line_no;
    throw fail("unterminated func '" + current->name + "'");
  }
  return out;
}

inline std::string render_assembly_listing(const std::vector<AssemblyFunction>& fns) {
  std::string out;
  for (const auto& f : fns) {
    out += "func " + f.name + "\n";
    for (const auto& b : f.blocks) {
      out += "block " + b.label + ":\n";
      for (const auto& ins : b.instructions) {
        out += "   ";
        for (const auto& tok : ins) {
          out.push_back(' ');
          out += tok;
        }
        out.push_back('\n');
      }
    }
    out += "endfunc\n";
  }
  return out;
}

}  // namespace ppsca
