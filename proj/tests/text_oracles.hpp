/* Copyright 2026 The minnmt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

// Text oracles shared by the unit tests and the acceptance suite.

#include <map>
#include <string>
#include <vector>

#include "minnmt/random.hpp"
#include "minnmt/textpipe.hpp"

namespace minnmt::testing {

// Lines drawn from several scripts with random punctuation and spacing.
inline std::string random_line(Rng& rng) {
  static const std::vector<std::string> words = {
      "the", "Cat", "2024", "naïve", "Straße", "мир", "Привет", "γειά", "שלום", "مرحبا", "नमस्ते", "日本語",
      "中文", "한국어", "ไทย", "e\xCC\x81t\xC3\xA9", "x1y2"};
  static const std::vector<std::string> puncts = {
      ",", ".", "!", "?", "(", ")", "'", "\"", "-", "/", ":", "«", "»", "—", "…", "。", "、", "؟", "،", "।", "€", "$",
      "%", "😀", "@", "#", "&", "*", "_", "[", "]"};
  std::string line;
  const int pieces = 1 + static_cast<int>(rng.below(15));
  for (int i = 0; i < pieces; ++i) {
    switch (rng.below(6)) {
      case 0: line += std::string(1 + rng.below(3), ' '); break;
      case 1: line += puncts[rng.below(puncts.size())]; break;
      case 2: line += rng.below(2) ? "\t" : " "; [[fallthrough]];
      default: line += words[rng.below(words.size())];
    }
  }
  return line;
}

// Brute force: recount every pair from scratch after each merge.
inline BpeModel brute_force_bpe(const std::map<std::string, std::int64_t>& counts, std::size_t merges) {
  std::vector<std::pair<std::vector<std::string>, std::int64_t>> words;
  for (const auto& [w, c] : counts) {
    std::vector<std::string> s;
    for (auto ch : utf8_chars(w)) s.emplace_back(ch);
    s.emplace_back("</w>");
    words.emplace_back(s, c);
  }
  BpeModel model;
  for (std::size_t m = 0; m < merges; ++m) {
    std::map<std::pair<std::string, std::string>, std::int64_t> pairs;
    for (const auto& [s, c] : words)
      for (std::size_t k = 0; k + 1 < s.size(); ++k) pairs[{s[k], s[k + 1]}] += c;
    if (pairs.empty()) break;
    std::pair<std::string, std::string> best;
    std::int64_t best_count = 0;
    for (const auto& [p, c] : pairs)
      if (c > best_count) best = p, best_count = c;
    model.merges.push_back(best);
    for (auto& [s, c] : words) {
      std::vector<std::string> out;
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (k + 1 < s.size() && s[k] == best.first && s[k + 1] == best.second) {
          out.push_back(s[k] + s[k + 1]);
          ++k;
        } else {
          out.push_back(s[k]);
        }
      }
      s = out;
    }
  }
  return model;
}

}  // namespace minnmt::testing
