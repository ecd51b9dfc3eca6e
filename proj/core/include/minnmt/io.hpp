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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace minnmt {

/// Whole file as bytes. Throws IoError.
std::string read_file(const std::filesystem::path& path);

/// Write to a temporary sibling, flush, then rename over `path`, so readers
/// see either the old or the new file, never a partial one.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

/// Lines without their terminators. A final line without a newline counts.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Lines joined with '\n', each terminated.
std::string join_lines(const std::vector<std::string>& lines);

}  // namespace minnmt
