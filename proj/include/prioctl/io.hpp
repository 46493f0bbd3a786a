// Copyright 2026 The prioctl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small helpers shared by the CSV and JSON readers/writers.

#ifndef PRIOCTL_IO_HPP
#define PRIOCTL_IO_HPP

#include "prioctl/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace prioctl::io {

/// Shortest representation that parses back to the same double.
std::string format_double(double value);

std::vector<std::string> split(std::string_view line, char sep = ',');
double parse_double(const std::string& field);

/// Reads the next non-empty line (LF or CRLF); false at end of stream.
bool next_line(std::istream& in, std::string& line);

nlohmann::json to_json(const VectorXd& v);
nlohmann::json to_json(const MatrixXd& m);  // {"rows","cols","data" (row-major)}
VectorXd vector_from_json(const nlohmann::json& j);
MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace prioctl::io

#endif  // PRIOCTL_IO_HPP
