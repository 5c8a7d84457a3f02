// Copyright 2026 The Groupwise Authors
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

#ifndef GROUPWISE__CORE__KV_HPP_
#define GROUPWISE__CORE__KV_HPP_

#include "groupwise/core/csv.hpp"
#include "groupwise/core/error.hpp"

#include <istream>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace groupwise::kv
{

/// Flat `key = value` text. `#` starts a comment. Keys may repeat; the
/// entries keep file order so repeated blocks can be read back in sequence.
struct Document
{
  std::vector<std::pair<std::string, std::string>> entries;

  const std::string * find(const std::string & key) const
  {
    const std::string * hit = nullptr;
    for (const auto & [k, v] : entries) {
      if (k == key) {
        hit = &v;
      }
    }
    return hit;
  }

  std::string get(const std::string & key, const std::string & fallback) const
  {
    const auto * v = find(key);
    return v ? *v : fallback;
  }
};

inline Document parse(std::istream & in, const std::string & module)
{
  Document doc;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    const auto body = csv::trim(line);
    if (body.empty()) {
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw DataError(module, "expected key=value, line " + std::to_string(line_no));
    }
    doc.entries.emplace_back(
      std::string(csv::trim(body.substr(0, eq))), std::string(csv::trim(body.substr(eq + 1))));
  }
  return doc;
}

inline double to_double(const std::string & s, const std::string & key, const std::string & module)
{
  const auto v = csv::parse_double(s);
  if (!v) {
    throw DataError(module, "key '" + key + "': not a number: '" + s + "'");
  }
  return *v;
}

/// Semicolon-separated list of numbers; empty string gives an empty list.
inline std::vector<double> to_list(
  const std::string & s, const std::string & key, const std::string & module)
{
  std::vector<double> out;
  if (csv::trim(s).empty()) {
    return out;
  }
  for (auto item : csv::split(s, ';')) {
    if (item.empty()) {
      continue;
    }
    out.push_back(to_double(std::string(item), key, module));
  }
  return out;
}

}  // namespace groupwise::kv

#endif  // GROUPWISE__CORE__KV_HPP_
