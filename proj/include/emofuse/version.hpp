#pragma once

namespace emofuse {

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace emofuse
