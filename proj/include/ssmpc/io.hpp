#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ssmpc {

// FNV-1a over arbitrary bytes; used for vocab hashes and config digests.
uint64_t fnv1a64(std::string_view bytes);
std::string to_hex(uint64_t v);

std::string read_file(const std::string& path);
std::vector<std::string> read_lines(const std::string& path);

// Writes to a temp file in the same directory, then renames over the target,
// so a crash mid-write never leaves a truncated artifact.
void atomic_write(const std::string& path, std::string_view content);

}  // namespace ssmpc
