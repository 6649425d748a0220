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

#ifndef LAWM_ARCHIVE_HPP_
#define LAWM_ARCHIVE_HPP_

// Versioned single-file tensor archive used for every checkpoint.
//
// Layout: the 11-byte magic "LAWM-CKPT-1", a newline, a little-endian u64
// header length, a JSON header {"meta": ..., "tensors": [{name, rows, cols}]},
// then each tensor's float64 values in row-major order.

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lawm {

inline constexpr std::string_view kCheckpointMagic = "LAWM-CKPT-1";

struct Archive {
  // JSON text; stored verbatim under "meta".
  std::string meta = "{}";
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;

  void add(std::string name, Eigen::MatrixXd value) { tensors.emplace_back(std::move(name), std::move(value)); }
  // Throws FormatError when `name` is absent.
  const Eigen::MatrixXd& get(std::string_view name) const;
  bool contains(std::string_view name) const;
};

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

}  // namespace lawm

#endif  // LAWM_ARCHIVE_HPP_
