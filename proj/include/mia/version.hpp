#pragma once

namespace mia {

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace mia
