#pragma once

#include <filesystem>

#include "tender/nn/model.hpp"

namespace tender::nn {

// Binary layout: "TNDR", version byte 0x01, then one record per tensor
// (u16 LE name length, UTF-8 name, u8 rank, u32 LE dims, f32 LE values),
// then a CRC32 of everything after the version byte. The first record,
// "@model", carries {arch, input_size, preset} so a file is self-describing.
inline constexpr unsigned char kWeightsVersion = 0x01;

void save_weights(const Model& model, const std::filesystem::path& path);

// Throws CorruptFile (bad magic, truncation, CRC, unknown or misshaped
// tensor) or VersionMismatch.
Model load_weights(const std::filesystem::path& path);

// Loads into an existing model whose architecture must match the file.
void load_weights_into(Model& model, const std::filesystem::path& path);

}  // namespace tender::nn
