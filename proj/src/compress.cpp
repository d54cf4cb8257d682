#include "mia/compress.hpp"

#include <vector>

#include <zlib.h>

#include "mia/error.hpp"

namespace mia {

size_t deflate_size(const std::string& text) {
  if (text.empty()) {
    throw Error("deflate_size: empty input");
  }
  uLongf bound = compressBound(static_cast<uLong>(text.size()));
  std::vector<Bytef> out(bound);
  const int rc = compress2(out.data(), &bound,
                           reinterpret_cast<const Bytef*>(text.data()),
                           static_cast<uLong>(text.size()), kDeflateLevel);
  if (rc != Z_OK) {
    throw Error("zlib compress2 failed with code " + std::to_string(rc));
  }
  return static_cast<size_t>(bound);
}

}  // namespace mia
