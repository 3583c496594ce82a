#pragma once

namespace modrwkv {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace modrwkv
