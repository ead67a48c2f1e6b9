#pragma once

#include <cstdint>
#include <string>

namespace panoscene {

/// Streaming SHA-256. Used for the content hashes in stage manifests.
class Sha256 {
public:
  Sha256();
  void update(const void* data, size_t len);
  /// Finalizes and returns the lowercase hex digest. The object must not be
  /// updated afterwards.
  std::string hex_digest();

private:
  void process_block(const uint8_t* block);

  uint32_t state_[8];
  uint64_t bit_count_ = 0;
  uint8_t buffer_[64];
  size_t buffer_len_ = 0;
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file_hex(const std::string& path);

}  // namespace panoscene
