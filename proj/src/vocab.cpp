/* Copyright 2026 The ContextNet Authors. All Rights Reserved.

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

#include <fstream>
#include <unordered_set>

#include "contextnet/transducer.hpp"

namespace contextnet {

void Vocab::validate() const {
  if (tokens.empty() || tokens[0] != kBlankSymbol) {
    throw FormatError(std::string("vocabulary line 0 must be the blank symbol \"") +
                      kBlankSymbol + "\"");
  }
  std::unordered_set<std::string> seen;
  for (const std::string& t : tokens) {
    if (t.empty()) throw FormatError("vocabulary contains an empty token");
    if (!seen.insert(t).second) throw FormatError("duplicate vocabulary token: " + t);
  }
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open vocabulary: " + path);
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    v.tokens.push_back(line);
  }
  // A trailing newline produces one empty last line; drop it.
  if (!v.tokens.empty() && v.tokens.back().empty()) v.tokens.pop_back();
  v.validate();
  return v;
}

void Vocab::save(const std::string& path) const {
  validate();
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write vocabulary: " + path);
  for (const std::string& t : tokens) out << t << "\n";
}

}  // namespace contextnet
