#include "minimalist/scalar.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

#include "minimalist/errors.hpp"

namespace minimalist {

std::string to_string(Precision p) {
  switch (p) {
    case Precision::binary32: return "binary32";
    case Precision::binary64: return "binary64";
    case Precision::extended: return "extended";
  }
  return "unknown";
}

Precision parse_precision(std::string_view text) {
  if (text == "binary32" || text == "float32" || text == "single") return Precision::binary32;
  if (text == "binary64" || text == "float64" || text == "double") return Precision::binary64;
  if (text == "extended" || text == "double-double" || text == "dd") return Precision::extended;
  throw InvalidInput("unknown precision '" + std::string(text) + "' (expected binary32, binary64 or extended)");
}

std::ostream& operator<<(std::ostream& os, DoubleDouble a) {
  std::ostringstream ss;
  ss << std::setprecision(17) << a.hi();
  if (a.lo() != 0.0) ss << (a.lo() < 0 ? " - " : " + ") << std::setprecision(17) << std::abs(a.lo());
  return os << ss.str();
}

}  // namespace minimalist
