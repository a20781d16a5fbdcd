// Copyright 2026 The smpkws Authors.
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

#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <type_traits>

#include "json.hpp"
#include "smpkws/errors.h"

namespace smpkws {

// Throws ConfigError naming the first key of `obj` not in `allowed`.
inline void RejectUnknownKeys(const nlohmann::json& obj, std::string_view section,
                              std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(section) + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (std::string_view k : allowed) known = known || it.key() == k;
    if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + std::string(section));
  }
}

// Reads obj[key] into `out` when present, converting type errors to ConfigError.
template <typename T>
void ReadKey(const nlohmann::json& obj, std::string_view section, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (it->is_number_integer() && it->template get<long long>() < 0) {
      throw ConfigError(std::string(section) + "." + key + " must not be negative");
    }
  }
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(section) + "." + key + ": " + e.what());
  }
}

}  // namespace smpkws
