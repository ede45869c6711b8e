#pragma once

#include <filesystem>

#include "dga/key_values.hpp"
#include "dga/model.hpp"

namespace dga {

// Binary checkpoint layout, all integers unsigned 32-bit little-endian:
//
//   "DGA1"
//   u32 length, config text (`key = value` lines: model.*, init.*, extras)
//   u32 record count
//   per record: u32 name length, name, u32 rank, rank x u32 extents,
//               product(extents) x IEEE-754 binary32 little-endian
//
// Parameters are stored as 32-bit floats; a Model<float> round-trips exactly.
template <typename T>
void write_checkpoint(const std::filesystem::path& path, const Model<T>& model,
                      const KeyValues& extra = {});

// Config text of a checkpoint without loading its parameters.
KeyValues read_checkpoint_config(const std::filesystem::path& path);

template <typename T>
Model<T> read_checkpoint(const std::filesystem::path& path);

}  // namespace dga
