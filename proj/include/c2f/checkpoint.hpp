#pragma once

// Binary checkpoint container.
//
// Layout: "C2F1", u32 LE version, u64 LE header length, UTF-8 header, payload.
// The header holds key=value metadata lines followed by one line per tensor:
//   tensor=<name>|<d0>x<d1>...|<payload byte offset>|<crc32 hex>
// The payload is every tensor's data as little-endian f32, in header order.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "c2f/tensor.hpp"

namespace c2f {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::pair<std::string, Tensor>> tensors;

    void set(std::string key, std::string value);
    bool has(std::string_view key) const;
    const std::string& get(std::string_view key) const;  // throws CheckpointError
    const Tensor& tensor(std::string_view name) const;   // throws CheckpointError
};

std::string encode_checkpoint(const Checkpoint& ck);
// Throws CheckpointError on bad magic/version, truncation, malformed header or checksum mismatch.
Checkpoint decode_checkpoint(std::string_view bytes);

// Writes through a temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace c2f
