#include "nof1/textio.hpp"

#include <charconv>
#include <cmath>

namespace nof1 {

std::string format_number(double v, int significant) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, significant);
  return std::string(buf, res.ptr);
}

}  // namespace nof1
