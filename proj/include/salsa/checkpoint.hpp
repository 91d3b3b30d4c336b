// Copyright 2026 The salsa Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Checkpoint = "<prefix>.manifest" + "<prefix>.bin".
//
// The manifest is key=value text:
//
//   format=salsa-checkpoint
//   version=1
//   blob=<file name of the blob, relative to the manifest>
//   <meta key>=<value>                 (config fields, adapter settings, ...)
//   tensor.<name>.shape=<d0>,<d1>,...
//   tensor.<name>.offset=<byte offset into the blob>
//
// Tensor lines appear in blob order. The blob is the concatenation of all
// tensor values as little-endian IEEE-754 binary64.

#ifndef SALSA_CHECKPOINT_HPP_
#define SALSA_CHECKPOINT_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "salsa/error.hpp"
#include "salsa/tensor.hpp"

namespace salsa {

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const std::string* find_meta(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return &v;
    return nullptr;
  }

  const std::string& meta_value(const std::string& key) const {
    const std::string* v = find_meta(key);
    if (!v) raise(ErrorKind::kFormat, "checkpoint is missing key '", key, "'");
    return *v;
  }

  const Tensor& tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return t;
    raise(ErrorKind::kFormat, "checkpoint has no tensor '", name, "'");
  }
};

namespace detail {

inline void append_le(std::string& out, double value) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline double read_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

inline std::vector<std::size_t> parse_dims(const std::string& text) {
  std::vector<std::size_t> dims;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      dims.push_back(std::stoull(part));
    } catch (const std::exception&) {
      raise(ErrorKind::kFormat, "bad shape '", text, "'");
    }
  }
  return dims;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& checkpoint, const std::string& prefix) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = prefix + ".manifest";
  const fs::path blob_path = prefix + ".bin";
  if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());

  std::string blob;
  std::ostringstream manifest;
  manifest << "format=salsa-checkpoint\nversion=1\n";
  manifest << "blob=" << blob_path.filename().string() << "\n";
  for (const auto& [key, value] : checkpoint.meta) {
    if (key.find('=') != std::string::npos || value.find('\n') != std::string::npos) {
      raise(ErrorKind::kFormat, "meta entry '", key, "' cannot be written");
    }
    manifest << key << "=" << value << "\n";
  }
  for (const auto& [name, tensor] : checkpoint.tensors) {
    manifest << "tensor." << name << ".shape=";
    for (std::size_t i = 0; i < tensor.shape().size(); ++i)
      manifest << (i ? "," : "") << tensor.shape()[i];
    manifest << "\ntensor." << name << ".offset=" << blob.size() << "\n";
    for (double v : tensor.values()) detail::append_le(blob, v);
  }

  std::ofstream m(manifest_path, std::ios::binary);
  std::ofstream b(blob_path, std::ios::binary);
  if (!m || !b) raise(ErrorKind::kIo, "cannot write checkpoint ", prefix);
  m << manifest.str();
  b.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!m || !b) raise(ErrorKind::kIo, "short write for checkpoint ", prefix);
}

inline bool checkpoint_exists(const std::string& prefix) {
  return std::filesystem::exists(prefix + ".manifest");
}

inline Checkpoint load_checkpoint(const std::string& prefix) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = prefix + ".manifest";
  std::ifstream m(manifest_path, std::ios::binary);
  if (!m) raise(ErrorKind::kIo, "cannot read checkpoint manifest ", manifest_path.string());

  Checkpoint checkpoint;
  std::string blob_name;
  // Tensor order is the order of first appearance in the manifest.
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::string, std::string>> tensor_fields;
  std::string line;
  std::size_t line_no = 0;
  bool saw_format = false;
  while (std::getline(m, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      raise(ErrorKind::kFormat, manifest_path.string(), ":", line_no, ": expected key=value");
    }
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "format") {
      if (value != "salsa-checkpoint") raise(ErrorKind::kFormat, "unknown format '", value, "'");
      saw_format = true;
    } else if (key == "version") {
      if (value != "1") raise(ErrorKind::kFormat, "unsupported checkpoint version ", value);
    } else if (key == "blob") {
      blob_name = value;
    } else if (key.rfind("tensor.", 0) == 0) {
      const auto dot = key.rfind('.');
      const std::string name = key.substr(7, dot - 7);
      const std::string field = key.substr(dot + 1);
      if (!tensor_fields.count(name)) order.push_back(name);
      if (field == "shape") tensor_fields[name].first = value;
      else if (field == "offset") tensor_fields[name].second = value;
      else raise(ErrorKind::kFormat, manifest_path.string(), ":", line_no, ": unknown tensor field '", field, "'");
    } else {
      checkpoint.meta.emplace_back(key, value);
    }
  }
  if (!saw_format || blob_name.empty()) {
    raise(ErrorKind::kFormat, manifest_path.string(), " is not a checkpoint manifest");
  }

  const fs::path blob_path = manifest_path.parent_path() / blob_name;
  std::ifstream b(blob_path, std::ios::binary);
  if (!b) raise(ErrorKind::kIo, "cannot read checkpoint blob ", blob_path.string());
  std::string blob((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());

  for (const std::string& name : order) {
    const auto& [shape_text, offset_text] = tensor_fields[name];
    Shape shape = detail::parse_dims(shape_text);
    const std::size_t offset = std::stoull(offset_text);
    const std::size_t count = shape_size(shape);
    if (offset + count * 8 > blob.size()) {
      raise(ErrorKind::kFormat, "tensor '", name, "' runs past the end of ", blob_path.string());
    }
    std::vector<double> values(count);
    const auto* base = reinterpret_cast<const unsigned char*>(blob.data()) + offset;
    for (std::size_t i = 0; i < count; ++i) values[i] = detail::read_le(base + 8 * i);
    checkpoint.tensors.emplace_back(name, Tensor(std::move(shape), std::move(values)));
  }
  return checkpoint;
}

}  // namespace salsa

#endif  // SALSA_CHECKPOINT_HPP_
