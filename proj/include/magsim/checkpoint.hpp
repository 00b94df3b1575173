#pragma once

#include <filesystem>
#include <span>

#include "magsim/tensor.hpp"

namespace magsim {

/// Single-file checkpoint:
///   "MAGSIMCK" | u64 LE manifest length | JSON manifest | f64 LE values
/// The manifest lists {"name","rows","cols"} per parameter in blob order.
void save_checkpoint(std::span<Parameter* const> params, const std::filesystem::path& file);

/// Loads values into `params`; names and shapes must match the manifest.
void load_checkpoint(std::span<Parameter* const> params, const std::filesystem::path& file);

}  // namespace magsim
