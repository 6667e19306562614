#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace astrolm::io {

std::string read_text_file(const std::string& path);

// Writes via a temp file in the same directory followed by rename, so
// readers never observe a half-written artifact.
void write_file_atomic(const std::string& path, std::string_view content);

// FNV-1a, 64-bit. Used for input digests in run manifests (change
// detection, not cryptography).
uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);
std::string file_digest_hex(const std::string& path);

}  // namespace astrolm::io
