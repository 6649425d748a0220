// Copyright 2026 The LAWM Authors
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

#include "lawm/archive.hpp"

#include "lawm/error.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace lawm {
namespace {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

}  // namespace

const Eigen::MatrixXd& Archive::get(std::string_view name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return m;
  }
  throw FormatError("checkpoint is missing tensor '" + std::string(name) + "'", 0);
}

bool Archive::contains(std::string_view name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return true;
  }
  return false;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  nlohmann::ordered_json header;
  header["meta"] = nlohmann::ordered_json::parse(archive.meta);
  header["tensors"] = nlohmann::ordered_json::array();
  for (const auto& [name, m] : archive.tensors) {
    header["tensors"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  }
  const std::string text = header.dump();

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
    out.put('\n');
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, m] : archive.tensors) {
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = m;
      out.write(reinterpret_cast<const char*>(row_major.data()),
                static_cast<std::streamsize>(row_major.size() * sizeof(double)));
    }
    if (!out) throw DataError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::string magic(kCheckpointMagic.size() + 1, '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic.substr(0, kCheckpointMagic.size()) != kCheckpointMagic || magic.back() != '\n') {
    throw FormatError("bad checkpoint magic in '" + path.string() + "'", 0);
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw FormatError("truncated checkpoint header length", magic.size());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("truncated checkpoint header", magic.size() + sizeof(len));

  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("checkpoint header is not JSON: ") + e.what(), magic.size() + sizeof(len));
  }
  Archive archive;
  archive.meta = header.at("meta").dump();
  std::size_t offset = magic.size() + sizeof(len) + len;
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw FormatError("truncated tensor '" + t.at("name").get<std::string>() + "'", offset);
    offset += static_cast<std::size_t>(m.size()) * sizeof(double);
    archive.add(t.at("name").get<std::string>(), m);
  }
  return archive;
}

}  // namespace lawm
