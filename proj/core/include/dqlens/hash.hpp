#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace dqlens {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::string_view bytes);
std::string sha256_hex(std::string_view bytes);
std::string to_hex(const Sha256& digest);

// Incremental hashing for inputs that are streamed in pieces.
class Sha256Builder {
 public:
  Sha256Builder();
  ~Sha256Builder();
  Sha256Builder(const Sha256Builder&) = delete;
  Sha256Builder& operator=(const Sha256Builder&) = delete;

  void update(std::string_view bytes);
  Sha256 finish();

 private:
  void* ctx_;
};

}  // namespace dqlens
