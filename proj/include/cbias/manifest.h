// Copyright (c) 2026 The cbias Authors
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

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cbias/error.h"
#include "json.hpp"

namespace cbias {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string Sha256Hex(std::istream& in) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIoFailure, "sha256 init failed");
  }
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof(byte), "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

inline std::string Sha256File(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path + " for digest");
  return Sha256Hex(in);
}

// Everything needed to repeat a run: the command, its options, the
// effective configuration and digests of every input file.
struct RunManifest {
  std::string command;
  std::map<std::string, nlohmann::json> options;
  std::vector<std::pair<std::string, std::string>> config;
  std::map<std::string, std::string> input_digests;  // path -> sha256
  std::string tool_version = kToolVersion;
  std::string timestamp;

  void AddInput(const std::string& path) { input_digests[path] = Sha256File(path); }

  nlohmann::json ToJson() const {
    nlohmann::json j;
    j["tool_version"] = tool_version;
    j["command"] = command;
    j["options"] = options;
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [k, v] : config) cfg[k] = v;
    j["config"] = cfg;
    j["inputs"] = input_digests;
    j["timestamp"] = timestamp;
    return j;
  }

  static RunManifest FromJson(const nlohmann::json& j) {
    RunManifest m;
    try {
      m.tool_version = j.at("tool_version").get<std::string>();
      m.command = j.at("command").get<std::string>();
      for (const auto& [k, v] : j.at("options").items()) m.options[k] = v;
      for (const auto& [k, v] : j.at("config").items()) {
        m.config.emplace_back(k, v.get<std::string>());
      }
      m.input_digests = j.at("inputs").get<std::map<std::string, std::string>>();
      m.timestamp = j.value("timestamp", "");
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, std::string("bad manifest: ") + e.what());
    }
    return m;
  }

  // Throws IoFailure naming the first input whose content changed.
  void VerifyInputs() const {
    for (const auto& [path, digest] : input_digests) {
      if (Sha256File(path) != digest) {
        throw Error(ErrorCode::kIoFailure, "input changed since manifest: " + path);
      }
    }
  }

  void Write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write manifest " + path);
    out << ToJson().dump(2) << '\n';
  }

  static RunManifest Read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoFailure, "cannot open manifest " + path);
    try {
      return FromJson(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParseError, std::string("bad manifest: ") + e.what());
    }
  }
};

inline std::string UtcTimestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace cbias
