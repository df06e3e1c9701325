#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bikeflow {

/// Incremental SHA-256 producing lowercase hex.
class Sha256 {
  public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(std::span<const std::uint8_t> data);
    Sha256& update(std::string_view text);
    Sha256& update_u64(std::uint64_t value);
    [[nodiscard]] std::string hex();

  private:
    struct State;
    State* state_;
};

[[nodiscard]] std::string sha256_hex(std::string_view text);
[[nodiscard]] std::string sha256_hex(std::span<const std::uint8_t> data);
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

[[nodiscard]] std::string base64_encode(std::span<const std::uint8_t> data);
[[nodiscard]] std::vector<std::uint8_t> base64_decode(std::string_view text);

/// First 8 bytes of a SHA-256 digest as an integer; used to derive seeds.
[[nodiscard]] std::uint64_t digest_u64(std::string_view text);

[[nodiscard]] std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
[[nodiscard]] std::string read_file_text(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace bikeflow
