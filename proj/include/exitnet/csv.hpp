#pragma once

#include <cstdio>
#include <string>

namespace exitnet {

/// Shortest round-trippable decimal rendering used by every CSV writer, so
/// identical runs produce byte-identical files.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace exitnet
