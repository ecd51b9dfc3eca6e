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

#include "common.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "minnmt/error.hpp"
#include "minnmt/io.hpp"

namespace minnmt::cli {

namespace {

void report(const char* kind, const std::string& message) {
  print_json_line(std::cerr, {{"error", kind}, {"message", message}});
}

}  // namespace

int run_app(CLI::App& app, int argc, char** argv) {
  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report("usage", e.what());
    return 2;
  } catch (const Error& e) {
    report(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    report("internal", e.what());
    return 1;
  }
}

std::vector<std::string> read_text_lines(const std::string& path) {
  if (path != "-") return read_lines(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (std::cin.bad()) throw IoError("failed reading standard input");
  return lines;
}

void write_text_lines(const std::string& path, const std::vector<std::string>& lines) {
  if (path != "-") {
    write_file_atomic(path, join_lines(lines));
    return;
  }
  for (const auto& l : lines) std::cout << l << '\n';
  std::cout.flush();
  if (!std::cout) throw IoError("failed writing standard output");
}

void print_json_line(std::ostream& out, const nlohmann::json& j) {
  out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  out.flush();
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Vocab load_vocab_file(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  try {
    return read_vocab(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_vocab_file(const std::filesystem::path& path, const Vocab& vocab) {
  std::ostringstream out;
  write_vocab(out, vocab);
  write_file_atomic(path, out.str());
}

BpeModel load_bpe_file(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  try {
    return read_bpe(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void add_text_options(CLI::App& app, TextOptions& opts) {
  app.add_flag("--pretokenized", opts.pretokenized, "Input is already tokenized; split on whitespace only");
  app.add_option("--joiner", opts.joiner, "Joiner marker used by the tokenizer")->capture_default_str();
  app.add_option("--bpe", opts.bpe_path, "BPE codes to apply after tokenization")->check(CLI::ExistingFile);
}

LineSplitter::LineSplitter(const TextOptions& opts, std::size_t factors) : opts_(opts), factors_(factors) {
  if (factors_ > 0 && !opts_.bpe_path.empty())
    throw ConfigError("BPE cannot be combined with word features");
  if (!opts_.bpe_path.empty()) bpe_.emplace(load_bpe_file(opts_.bpe_path));
}

TokenizedLine LineSplitter::split(std::string_view line, std::size_t line_number) const {
  TokenizedLine out;
  out.features.resize(factors_);
  if (factors_ > 0) {
    for (const std::string& tok : split_whitespace(line)) {
      auto [word, feats] = split_features(tok);
      if (feats.size() != factors_)
        throw FormatError("line " + std::to_string(line_number) + ": token '" + tok + "' has " +
                          std::to_string(feats.size()) + " features, expected " + std::to_string(factors_));
      out.words.push_back(std::move(word));
      for (std::size_t f = 0; f < factors_; ++f) out.features[f].push_back(std::move(feats[f]));
    }
    return out;
  }
  TokenizerOptions topts{opts_.joiner};
  const std::vector<std::string> tokens = opts_.pretokenized ? split_whitespace(line) : tokenize(line, topts);
  if (!bpe_) {
    out.words = tokens;
    return out;
  }
  for (const std::string& tok : tokens)
    for (std::string& piece : bpe_->encode(tok)) out.words.push_back(std::move(piece));
  return out;
}

std::string LineSplitter::join(const TokenizedLine& line, bool tokenized) const {
  if (!line.features.empty()) {
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < line.words.size(); ++i) {
      std::string t = line.words[i];
      for (const auto& f : line.features) t += std::string(kFeatureSeparator) + f.at(i);
      tokens.push_back(std::move(t));
    }
    return join_tokens(tokens);
  }
  std::vector<std::string> words = bpe_ ? undo_bpe(line.words) : line.words;
  if (tokenized || opts_.pretokenized) return join_tokens(words);
  return detokenize(words, TokenizerOptions{opts_.joiner});
}

}  // namespace minnmt::cli
