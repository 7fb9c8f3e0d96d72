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

// Run configuration: a `key = value` file, then command-line overrides.
// Both go through RunConfig::set, so they accept the same keys.

#pragma once

#include <charconv>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "ppsca/common.hpp"
#include "ppsca/embedding.hpp"
#include "ppsca/pipeline.hpp"

namespace ppsca {

struct RunConfig {
  AnalysisOptions analysis;
  int delta_prime = 100;
  std::uint64_t seed = 1;
  std::uint64_t model_seed = 7;
  std::uint32_t model_dim = 128;
  std::uint32_t model_vocab = 4096;
  Activation activation = Activation::identity;
  std::uint64_t dealer_seed = 1;
  std::size_t batch_size = 16;
  int frac_bits = 16;
  bool approximate_index = false;
  std::string db;
  std::string input;
  std::string listing;
  std::string report;
  std::string server;
  std::string triples;

  ModelRef model() const { return {model_seed, model_dim, model_vocab, activation}; }

  // Sets one key from its text value; throws ConfigError for unknown keys
  // or unparsable values.
  void set(const std::string& key, const std::string& value) {
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->second(*this, value);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }

  void validate() const {
    analysis.match.validate();
    analysis.filter.validate();
    analysis.sbb.validate();
    if (delta_prime <= 0) throw ConfigError("delta_prime must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    mpc::check_frac_bits(frac_bits);
    if (model_dim == 0 || model_vocab == 0) throw ConfigError("model shape must be positive");
  }

  nlohmann::ordered_json to_json() const {
    auto j = config_echo(analysis);
    j["mode"] = to_string(analysis.mode);
    j["delta_prime"] = delta_prime;
    j["seed"] = seed;
    j["model"] = {{"seed", model_seed}, {"dim", model_dim}, {"vocab", model_vocab},
                  {"activation", to_string(activation)}};
    if (analysis.mode == Mode::mpc) {
      j["dealer_seed"] = dealer_seed;
      j["batch_size"] = batch_size;
      j["frac_bits"] = frac_bits;
    }
    return j;
  }

  static RunConfig parse(std::string_view text) {
    RunConfig c;
    c.apply(text);
    return c;
  }

  void apply(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
      }
      try {
        set(std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))));
      } catch (const ConfigError& e) {
        throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  static std::vector<std::string> keys() {
    std::vector<std::string> out;
    for (const auto& [k, v] : setters()) out.push_back(k);
    return out;
  }

 private:
  static std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }

  template <class T>
  static T number(const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("bad number '" + v + "'");
    return out;
  }

  static bool boolean(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("bad boolean '" + v + "'");
  }

  using Setter = std::function<void(RunConfig&, const std::string&)>;

  static const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> s = {
        {"mode", [](RunConfig& c, const std::string& v) { c.analysis.mode = parse_mode(v); }},
        {"filters", [](RunConfig& c, const std::string& v) { c.analysis.filters = boolean(v); }},
        {"filter.symbol", [](RunConfig& c, const std::string& v) { c.analysis.filter.symbol = boolean(v); }},
        {"filter.source", [](RunConfig& c, const std::string& v) { c.analysis.filter.source = boolean(v); }},
        {"filter.assembly", [](RunConfig& c, const std::string& v) { c.analysis.filter.assembly = boolean(v); }},
        {"complex_name_len",
         [](RunConfig& c, const std::string& v) { c.analysis.filter.complex_name_len = number<std::size_t>(v); }},
        {"theta1", [](RunConfig& c, const std::string& v) { c.analysis.filter.theta1 = number<double>(v); }},
        {"theta2", [](RunConfig& c, const std::string& v) { c.analysis.filter.theta2 = number<double>(v); }},
        {"delta", [](RunConfig& c, const std::string& v) { c.analysis.match.tlsh_threshold = number<int>(v); }},
        {"epsilon", [](RunConfig& c, const std::string& v) { c.analysis.match.reuse_ratio = number<double>(v); }},
        {"rho", [](RunConfig& c, const std::string& v) { c.analysis.match.embedding_radius = number<double>(v); }},
        {"beta", [](RunConfig& c, const std::string& v) { c.analysis.match.score_threshold = number<double>(v); }},
        {"gamma", [](RunConfig& c, const std::string& v) { c.analysis.sbb.gamma = number<int>(v); }},
        {"theta", [](RunConfig& c, const std::string& v) { c.analysis.sbb.theta = number<std::size_t>(v); }},
        {"delta_prime", [](RunConfig& c, const std::string& v) { c.delta_prime = number<int>(v); }},
        {"frac_bits", [](RunConfig& c, const std::string& v) { c.frac_bits = number<int>(v); }},
        {"seed",
         [](RunConfig& c, const std::string& v) {
           c.seed = number<std::uint64_t>(v);
           c.analysis.sbb.seed = c.seed;
         }},
        {"model_seed", [](RunConfig& c, const std::string& v) { c.model_seed = number<std::uint64_t>(v); }},
        {"model_dim", [](RunConfig& c, const std::string& v) { c.model_dim = number<std::uint32_t>(v); }},
        {"model_vocab", [](RunConfig& c, const std::string& v) { c.model_vocab = number<std::uint32_t>(v); }},
        {"activation", [](RunConfig& c, const std::string& v) { c.activation = parse_activation(v); }},
        {"dealer_seed", [](RunConfig& c, const std::string& v) { c.dealer_seed = number<std::uint64_t>(v); }},
        {"batch_size", [](RunConfig& c, const std::string& v) { c.batch_size = number<std::size_t>(v); }},
        {"index",
         [](RunConfig& c, const std::string& v) {
           if (v != "exact" && v != "approximate") throw ConfigError("index must be exact or approximate");
           c.approximate_index = v == "approximate";
         }},
        {"db", [](RunConfig& c, const std::string& v) { c.db = v; }},
        {"input", [](RunConfig& c, const std::string& v) { c.input = v; }},
        {"listing", [](RunConfig& c, const std::string& v) { c.listing = v; }},
        {"report", [](RunConfig& c, const std::string& v) { c.report = v; }},
        {"server", [](RunConfig& c, const std::string& v) { c.server = v; }},
        {"triples", [](RunConfig& c, const std::string& v) { c.triples = v; }},
    };
    return s;
  }
};

}  // namespace ppsca
