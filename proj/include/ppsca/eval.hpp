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

#include <map>
#include <set>
#include <string>

namespace ppsca {

// Micro-averaged precision/recall/F1 over (target, project) pairs.
struct Accuracy {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double precision() const { return tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
  double recall() const { return tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
  // Defined as 1 when there is nothing to find and nothing was predicted.
  double f1() const {
    const auto d = 2 * tp + fp + fn;
    return d == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(d);
  }

  void add(const std::set<std::string>& predicted, const std::set<std::string>& truth) {
    for (const auto& p : predicted) (truth.count(p) ? tp : fp)++;
    for (const auto& t : truth) {
      if (!predicted.count(t)) ++fn;
    }
  }
};

inline Accuracy score_predictions(const std::map<std::string, std::set<std::string>>& predicted,
                                  const std::map<std::string, std::set<std::string>>& truth) {
  Accuracy a;
  static const std::set<std::string> kEmpty;
  for (const auto& [target, t] : truth) {
    auto it = predicted.find(target);
    a.add(it == predicted.end() ? kEmpty : it->second, t);
  }
  return a;
}

}  // namespace ppsca
