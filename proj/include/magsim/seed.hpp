#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace magsim {

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Stable sub-seed for a named component, independent of platform and
/// call order.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> coords);

}  // namespace magsim
