#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "recown/model.hpp"

namespace recown {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout: 8-byte magic, u32 version, u64 manifest length, JSON
// manifest, then per tensor: u32 name length, name, u64 count, count
// little-endian f64 values; finally a u64 FNV-1a checksum of all prior bytes.
void save_checkpoint(const Recown& model, std::ostream& out);
void save_checkpoint(const Recown& model, const std::filesystem::path& path);

// Throws VersionError on a format mismatch and CorruptionError on damage.
Recown load_checkpoint(std::istream& in);
Recown load_checkpoint(const std::filesystem::path& path);

// Manifest of a checkpoint (configuration, tensor shapes) as JSON text.
std::string checkpoint_manifest(const std::filesystem::path& path);

}  // namespace recown
