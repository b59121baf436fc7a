#pragma once

namespace mdlsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mdlsim
