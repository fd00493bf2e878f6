#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "c2bn/dataset.hpp"
#include "c2bn/model.hpp"

namespace c2bn::vae {

// Layout (all integers/doubles little-endian):
//   "C2BNVAEC" | u32 version | str manifest | str schema_fingerprint
//   | config block | u64 block_count | { str name | u64 rows | u64 cols | f64... }
// Strings are u64-length-prefixed. Blocks are the named parameters followed
// by the named running-statistics buffers.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ModelCheckpoint& checkpoint, std::ostream& out,
                     const std::string& manifest = {});
void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path,
                     const std::string& manifest = {});

// FormatError on bad magic, unsupported version, truncation or a block whose
// name/shape disagrees with the stored config.
ModelCheckpoint load_checkpoint(std::istream& in);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

// Throws FingerprintMismatch when the checkpoint was trained against a
// different encoding than `dataset` uses.
void require_matching_schema(const ModelCheckpoint& checkpoint, const EncodedDataset& dataset);

}  // namespace c2bn::vae
