#ifndef SCALEDET_CSVFMT_HPP
#define SCALEDET_CSVFMT_HPP

#include <charconv>
#include <cstdint>
#include <string>

namespace scaledet {

// Shortest decimal form that round-trips the exact double, so CSV output is
// byte-stable across runs and machines.
inline std::string fmt_double(double v) {
  char buf[64];
  std::to_chars_result res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string fmt_u64(std::uint64_t v) {
  char buf[32];
  std::to_chars_result res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace scaledet

#endif  // SCALEDET_CSVFMT_HPP
