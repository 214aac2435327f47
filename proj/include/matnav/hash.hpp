// Copyright 2026 The matnav Developers
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied. See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

/// @file
/// Content hashing and small file helpers.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace matnav {

/// Lower-case hex SHA-256 digest (OpenSSL backed).
std::string sha256_hex(std::string_view data);

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view data) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Whole-file read; throws Error(IoError).
std::string read_file(const std::filesystem::path& path);

/// Write via a temporary sibling and rename, so readers never observe a
/// partial file. Parent directories are created. Throws Error(IoError).
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

} // namespace matnav
