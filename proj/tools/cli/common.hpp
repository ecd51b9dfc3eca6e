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

// Shared plumbing for the command-line tools: error reporting, line I/O and
// the mapping between text lines and token ids.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "minnmt/textpipe.hpp"

namespace minnmt::cli {

/// Parses argv and runs the selected callbacks. Returns the process exit
/// code; failures print one JSON object on stderr:
///   {"error": "<kind>", "message": "..."}
int run_app(CLI::App& app, int argc, char** argv);

/// "-" reads stdin.
std::vector<std::string> read_text_lines(const std::string& path);
/// "-" writes stdout; anything else is written atomically.
void write_text_lines(const std::string& path, const std::vector<std::string>& lines);
void print_json_line(std::ostream& out, const nlohmann::json& j);

/// Whitespace-separated tokens.
std::vector<std::string> split_whitespace(std::string_view line);
std::string join_tokens(const std::vector<std::string>& tokens);

Vocab load_vocab_file(const std::filesystem::path& path);
void save_vocab_file(const std::filesystem::path& path, const Vocab& vocab);
BpeModel load_bpe_file(const std::filesystem::path& path);

struct TextOptions {
  bool pretokenized = false;  // split on whitespace only
  std::string joiner{kJoiner};
  std::string bpe_path;       // empty: no subword splitting
};

void add_text_options(CLI::App& app, TextOptions& opts);

/// One line as words plus per-factor feature strings.
struct TokenizedLine {
  std::vector<std::string> words;
  std::vector<std::vector<std::string>> features;
};

/// Turns raw lines into tokens the way preprocess and translate agree on.
/// With factors, lines must be pretokenized "word￨f1￨f2" tokens.
class LineSplitter {
 public:
  LineSplitter(const TextOptions& opts, std::size_t factors);
  TokenizedLine split(std::string_view line, std::size_t line_number) const;
  /// Inverse for output: attach features, undo BPE, detokenize unless
  /// `tokenized` is set or features are present.
  std::string join(const TokenizedLine& line, bool tokenized) const;

 private:
  TextOptions opts_;
  std::size_t factors_;
  std::optional<BpeEncoder> bpe_;
};

}  // namespace minnmt::cli
