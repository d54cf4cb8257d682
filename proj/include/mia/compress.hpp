#pragma once

#include <cstddef>
#include <string>

namespace mia {

// Compression parameters are fixed constants so the zlib feature is
// reproducible; both appear in every report's metadata block.
inline constexpr int kDeflateLevel = 6;
inline constexpr const char* kDeflateWrapper = "zlib";  // RFC 1950

// Byte length of the zlib-wrapped DEFLATE stream of the UTF-8 text at
// level 6. Rejects empty input.
size_t deflate_size(const std::string& text);

}  // namespace mia
