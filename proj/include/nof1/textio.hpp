#pragma once

#include <string>

namespace nof1 {

// Shortest-ish decimal rendering with a '.' separator regardless of locale.
// NaN renders as "NA".
std::string format_number(double v, int significant = 10);

}  // namespace nof1
