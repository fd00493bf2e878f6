#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace c2bn {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

// Child seed for a named stage. splitmix64(master ^ fnv1a64(stage)), so every
// stage of a run is reproducible on its own from the master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage);

std::uint64_t splitmix64(std::uint64_t x);

// Hex of the IEEE-754 bit pattern; used when a digest must see exact doubles.
std::string double_bits_hex(double v);

inline constexpr const char* kArtifactVersion = "0.3.0";

}  // namespace c2bn
