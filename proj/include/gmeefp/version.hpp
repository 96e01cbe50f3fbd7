#ifndef GMEEFP_VERSION_HPP
#define GMEEFP_VERSION_HPP

namespace gmeefp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gmeefp

#endif  // GMEEFP_VERSION_HPP
