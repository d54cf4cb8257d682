#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mia {

// UTF-8 <-> unicode scalar values. Inputs come out of a JSON parser that
// already rejected malformed UTF-8, but decode_utf8 still validates so the
// functions are safe on their own.

std::vector<uint32_t> decode_utf8(const std::string& text);
std::string encode_utf8(const std::vector<uint32_t>& codepoints);

}  // namespace mia
