// iflf/common.cpp

// Copyright 2026  IFLF Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "iflf/common.hpp"

#include <iostream>

#include "json.hpp"

namespace iflf {

namespace {
bool g_log_json = false;

void emit(const char *level, const std::string &msg) {
  if (g_log_json) {
    nlohmann::json j{{"level", level}, {"msg", msg}};
    std::cerr << j.dump() << "\n";
  } else {
    std::cerr << "[" << level << "] " << msg << "\n";
  }
}
}  // namespace

void log_set_json(bool enabled) { g_log_json = enabled; }
void log_info(const std::string &msg) { emit("info", msg); }
void log_warn(const std::string &msg) { emit("warn", msg); }
void log_error(const std::string &msg) { emit("error", msg); }

}  // namespace iflf
