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

#ifndef LAWM_CLI_HPP_
#define LAWM_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace lawm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitInternal = 2;

// Parses `args` (without the program name) and runs the subcommand.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv, std::ostream& out, std::ostream& err);

std::vector<std::string> subcommands();

// 64-bit FNV-1a over the config bytes followed by each override.
std::uint64_t config_hash(std::string_view config_bytes, const std::vector<std::string>& overrides);

// `<YYYYMMDDTHHMMSS.micro>-<hash>` below $LAWM_RUN_ROOT (default "runs").
std::filesystem::path make_run_dir(std::uint64_t hash);

}  // namespace lawm::cli

#endif  // LAWM_CLI_HPP_
